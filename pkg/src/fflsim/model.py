"""Datasets, strongly convex per-sample losses and their certified constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

LOSS_KINDS = ("ridge_regression", "l2_logistic", "l2_softmax")


class DimensionError(ValueError):
    pass


class EmptyDatasetError(ValueError):
    pass


class UnboundedFeaturesError(ValueError):
    pass


def augment(X: np.ndarray) -> np.ndarray:
    """Append the constant-1 intercept column."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([X, np.ones((X.shape[0], 1))])


@dataclass(frozen=True)
class DataPoint:
    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if not np.all(np.isfinite(x)):
            raise ValueError("feature components must be finite")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True, eq=False)
class LocalDataset:
    """Agent ``owner``'s samples: features ``X`` (n, d_x) and labels ``y`` (n,)."""

    owner: int
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.y, dtype=float, copy=True).reshape(-1)
        if X.shape[0] == 0 or y.shape[0] == 0:
            raise EmptyDatasetError(f"agent {self.owner} has an empty dataset")
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_points(cls, owner: int, points: Sequence[DataPoint]) -> "LocalDataset":
        if not points:
            raise EmptyDatasetError(f"agent {owner} has an empty dataset")
        return cls(owner, np.vstack([p.x for p in points]), np.array([p.y for p in points]))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim_x(self) -> int:
        return self.X.shape[1]

    def point(self, i: int) -> DataPoint:
        return DataPoint(self.X[i], float(self.y[i]))

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class LossModel:
    """Per-sample loss family; every member is ``reg``-strongly convex.

    ``ridge_regression``: 0.5 (w.x~ - y)^2 + reg/2 |w|^2
    ``l2_logistic``: binary cross-entropy with y in {0, 1} + reg/2 |w|^2
    ``l2_softmax``: multinomial cross-entropy, w is a (num_classes, d_x+1)
    matrix flattened row-major, + reg/2 |w|^2
    """

    kind: str
    reg: float
    dim_x: int
    num_classes: int = 1

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not self.reg > 0:
            raise ValueError("regularization must be positive")
        if self.kind == "l2_softmax" and self.num_classes < 2:
            raise ValueError("softmax needs at least two classes")

    @property
    def dim(self) -> int:
        if self.kind == "l2_softmax":
            return (self.dim_x + 1) * self.num_classes
        return self.dim_x + 1

    @property
    def is_classifier(self) -> bool:
        return self.kind != "ridge_regression"

    def _check(self, w, X):
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape[0] != self.dim:
            raise DimensionError(f"model has dimension {w.shape[0]}, expected {self.dim}")
        if X.shape[1] != self.dim_x:
            raise DimensionError(f"features have dimension {X.shape[1]}, expected {self.dim_x}")
        return w

    # per-sample API
    def loss(self, w, pt: DataPoint) -> float:
        return float(self.risk(w, pt.x[None, :], np.array([pt.y])))

    def grad(self, w, pt: DataPoint) -> np.ndarray:
        return self.risk_grad(w, pt.x[None, :], np.array([pt.y]))

    # dataset-mean API
    def risk(self, w, X, y) -> float:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = self._check(w, X)
        Xa = augment(X)
        reg = 0.5 * self.reg * float(w @ w)
        if self.kind == "ridge_regression":
            r = Xa @ w - y
            return 0.5 * float(np.mean(r * r)) + reg
        if self.kind == "l2_logistic":
            z = Xa @ w
            return float(np.mean(np.logaddexp(0.0, z) - y * z)) + reg
        Z = Xa @ w.reshape(self.num_classes, -1).T
        lse = _logsumexp(Z)
        picked = Z[np.arange(len(y)), np.asarray(y, dtype=int)]
        return float(np.mean(lse - picked)) + reg

    def risk_grad(self, w, X, y) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = self._check(w, X)
        Xa = augment(X)
        n = Xa.shape[0]
        if self.kind == "ridge_regression":
            return Xa.T @ (Xa @ w - y) / n + self.reg * w
        if self.kind == "l2_logistic":
            s = _sigmoid(Xa @ w)
            return Xa.T @ (s - y) / n + self.reg * w
        P = _softmax(Xa @ w.reshape(self.num_classes, -1).T)
        P[np.arange(n), np.asarray(y, dtype=int)] -= 1.0
        return (P.T @ Xa).reshape(-1) / n + self.reg * w

    def risk_hessian(self, w, X, y) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = self._check(w, X)
        Xa = augment(X)
        n = Xa.shape[0]
        eye = self.reg * np.eye(self.dim)
        if self.kind == "ridge_regression":
            return Xa.T @ Xa / n + eye
        if self.kind == "l2_logistic":
            s = _sigmoid(Xa @ w)
            return (Xa.T * (s * (1 - s))) @ Xa / n + eye
        C, dd = self.num_classes, Xa.shape[1]
        P = _softmax(Xa @ w.reshape(C, -1).T)
        # sum_i (diag p_i - p_i p_i^T) kron x_i x_i^T
        S = -np.einsum("ic,ie->ice", P, P)
        S[:, np.arange(C), np.arange(C)] += P
        H = np.einsum("ice,id,if->cdef", S, Xa, Xa, optimize=True)
        return H.reshape(C * dd, C * dd) / n + eye

    def predict(self, w, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = self._check(w, X)
        Xa = augment(X)
        if self.kind == "ridge_regression":
            return Xa @ w
        if self.kind == "l2_logistic":
            return (Xa @ w > 0).astype(int)
        return np.argmax(Xa @ w.reshape(self.num_classes, -1).T, axis=1)

    def smoothness(self, max_sq_norm: float) -> float:
        """Upper bound on the per-sample Hessian's top eigenvalue."""
        if self.kind == "ridge_regression":
            return self.reg + max_sq_norm
        return self.reg + 0.5 * max_sq_norm

    def validate_labels(self, y):
        if not self.is_classifier:
            return
        y = np.asarray(y)
        classes = 2 if self.kind == "l2_logistic" else self.num_classes
        if np.any(y != np.round(y)) or np.any(y < 0) or np.any(y >= classes):
            raise ValueError(f"class labels must be integers in [0, {classes})")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _logsumexp(Z):
    m = Z.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(Z - m).sum(axis=1, keepdims=True)))[:, 0]


def _softmax(Z):
    E = np.exp(Z - Z.max(axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


class LocalObjective:
    """F_k(w) for one agent, with ridge reduced to sufficient statistics."""

    def __init__(self, loss: LossModel, ds: LocalDataset):
        self.loss = loss
        self.ds = ds
        if loss.kind == "ridge_regression":
            Xa = augment(ds.X)
            self._A = Xa.T @ Xa / ds.n + loss.reg * np.eye(loss.dim)
            self._b = Xa.T @ ds.y / ds.n
            self._c = float(ds.y @ ds.y) / ds.n

    def value(self, w) -> float:
        if self.loss.kind == "ridge_regression":
            w = np.asarray(w, dtype=float)
            return 0.5 * float(w @ self._A @ w) - float(self._b @ w) + 0.5 * self._c
        return self.loss.risk(w, self.ds.X, self.ds.y)

    def grad(self, w) -> np.ndarray:
        if self.loss.kind == "ridge_regression":
            return self._A @ np.asarray(w, dtype=float) - self._b
        return self.loss.risk_grad(w, self.ds.X, self.ds.y)

    def hessian(self, w) -> np.ndarray:
        if self.loss.kind == "ridge_regression":
            return self._A
        return self.loss.risk_hessian(w, self.ds.X, self.ds.y)


def per_sample_loss(model: LossModel, w, pt: DataPoint) -> float:
    return model.loss(w, pt)


def per_sample_grad(model: LossModel, w, pt: DataPoint) -> np.ndarray:
    return model.grad(w, pt)


def local_empirical_risk(model: LossModel, ds: LocalDataset, w) -> tuple[float, np.ndarray]:
    """Mean per-sample loss over ``ds`` and its gradient."""
    if ds.n < 1:
        raise EmptyDatasetError("empty dataset")
    return model.risk(w, ds.X, ds.y), model.risk_grad(w, ds.X, ds.y)


@dataclass(frozen=True, eq=False)
class Scenario:
    """K agents' datasets, their weights p_k and the shared loss."""

    datasets: tuple
    weights: np.ndarray
    loss: LossModel
    known_distributions: Optional[tuple] = None
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        datasets = tuple(self.datasets)
        if not datasets:
            raise ValueError("scenario needs at least one agent")
        p = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if p.shape[0] != len(datasets):
            raise DimensionError(f"{p.shape[0]} weights for {len(datasets)} agents")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        for ds in datasets:
            if ds.dim_x != self.loss.dim_x:
                raise DimensionError(f"agent {ds.owner} features have dimension {ds.dim_x}")
            self.loss.validate_labels(ds.y)
        if self.known_distributions is not None and len(self.known_distributions) != len(datasets):
            raise DimensionError("one known distribution per agent required")
        p.setflags(write=False)
        object.__setattr__(self, "datasets", datasets)
        object.__setattr__(self, "weights", p)
        if self.known_distributions is not None:
            object.__setattr__(self, "known_distributions", tuple(self.known_distributions))

    @property
    def K(self) -> int:
        return len(self.datasets)

    @property
    def d(self) -> int:
        return self.loss.dim

    @property
    def sample_counts(self) -> np.ndarray:
        return np.array([ds.n for ds in self.datasets])

    @property
    def n_total(self) -> int:
        return int(self.sample_counts.sum())

    @property
    def n_min(self) -> int:
        return int(self.sample_counts.min())

    @cached_property
    def objectives(self) -> tuple:
        return tuple(LocalObjective(self.loss, ds) for ds in self.datasets)

    def local_value(self, k: int, w) -> float:
        return self.objectives[k].value(w)

    def local_grad(self, k: int, w) -> np.ndarray:
        return self.objectives[k].grad(w)

    def global_loss(self, w, weights=None) -> float:
        p = self.weights if weights is None else weights
        return float(sum(pk * obj.value(w) for pk, obj in zip(p, self.objectives) if pk != 0))

    def global_grad(self, w, weights=None) -> np.ndarray:
        p = self.weights if weights is None else weights
        g = np.zeros(self.d)
        for pk, obj in zip(p, self.objectives):
            if pk != 0:
                g += pk * obj.grad(w)
        return g

    def subset(self, keep: Sequence[int]) -> "Scenario":
        """Scenario restricted to agents ``keep`` with renormalized weights."""
        keep = list(keep)
        p = self.weights[keep]
        if p.sum() <= 0:
            raise ValueError("remaining agents carry zero weight")
        kd = None
        if self.known_distributions is not None:
            kd = tuple(self.known_distributions[k] for k in keep)
        return Scenario(tuple(self.datasets[k] for k in keep), p / p.sum(), self.loss, kd, dict(self.spec))


@dataclass(frozen=True)
class ConstantsCertificate:
    mu: float
    l_g: float
    l_ell: float
    l_f: float

    def __post_init__(self):
        for name in ("mu", "l_g", "l_ell", "l_f"):
            v = getattr(self, name)
            if not (v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.mu > self.l_g:
            raise ValueError("mu cannot exceed l_g")


def max_feature_sq_norm(scenario: Scenario) -> float:
    m = 0.0
    for ds in scenario.datasets:
        Xa = augment(ds.X)
        m = max(m, float(np.max(np.sum(Xa * Xa, axis=1))))
    return m


def estimate_l_ell(scenario: Scenario, w) -> float:
    """In-sample stand-in for L_ell: max per-sample gradient norm at ``w``.

    Approximation: the true constant maximizes over the whole compact
    support, not over the observed samples.
    """
    loss = scenario.loss
    best = 0.0
    for ds in scenario.datasets:
        Xa = augment(ds.X)
        w_ = np.asarray(w, dtype=float)
        if loss.kind == "ridge_regression":
            G = (Xa @ w_ - ds.y)[:, None] * Xa + loss.reg * w_
        elif loss.kind == "l2_logistic":
            G = (_sigmoid(Xa @ w_) - ds.y)[:, None] * Xa + loss.reg * w_
        else:
            C = loss.num_classes
            P = _softmax(Xa @ w_.reshape(C, -1).T)
            P[np.arange(ds.n), ds.y.astype(int)] -= 1.0
            G = (P[:, :, None] * Xa[:, None, :]).reshape(ds.n, -1) + loss.reg * w_
        best = max(best, float(np.max(np.linalg.norm(G, axis=1))))
    return best


def certify_constants(model: LossModel, scenario: Scenario, l_f: float,
                      w_opt=None, feature_limit: float = 1e12) -> ConstantsCertificate:
    """mu, L_g from the loss family and data; L_ell at the optimum; L_f as configured."""
    sq = max_feature_sq_norm(scenario)
    if not math.isfinite(sq) or sq > feature_limit:
        raise UnboundedFeaturesError(f"max squared feature norm {sq} exceeds {feature_limit}")
    if w_opt is None:
        from .oracle import solve_exact
        w_opt = solve_exact(scenario)
    l_ell = estimate_l_ell(scenario, w_opt)
    return ConstantsCertificate(mu=model.reg, l_g=model.smoothness(sq), l_ell=l_ell, l_f=float(l_f))
