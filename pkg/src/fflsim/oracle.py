"""High-precision ground truth (exact minimizers, exact VCG payments) and metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import Scenario

DEFAULT_TOL = 1e-12


class SolverError(RuntimeError):
    pass


def solve_exact(scenario: Scenario, weights=None, tol: float = DEFAULT_TOL,
                w_start=None, max_iter: int = 200) -> np.ndarray:
    """Minimize sum_k weights[k] F_k(w) to gradient norm ``tol``.

    Ridge assembles the normal equations and uses a Cholesky solve; the
    classification losses run damped Newton with the exact Hessian.
    """
    p = scenario.weights if weights is None else np.asarray(weights, dtype=float)
    active = [k for k in range(scenario.K) if p[k] != 0]
    if not active:
        raise SolverError("objective has no agents with positive weight")
    objs = scenario.objectives
    d = scenario.d
    if scenario.loss.kind == "ridge_regression":
        A = sum(p[k] * objs[k]._A for k in active)
        b = sum(p[k] * objs[k]._b for k in active)
        try:
            w = cho_solve(cho_factor(A), b)
        except np.linalg.LinAlgError as exc:
            raise SolverError("normal equations are singular") from exc
        # one refinement step against rounding in the factorization
        w = w - cho_solve(cho_factor(A), A @ w - b)
        return w

    def value(w):
        return sum(p[k] * objs[k].value(w) for k in active)

    def grad(w):
        return sum(p[k] * objs[k].grad(w) for k in active)

    w = np.zeros(d) if w_start is None else np.array(w_start, dtype=float)
    g = grad(w)
    f = value(w)
    for _ in range(max_iter):
        gn = np.linalg.norm(g)
        if gn <= tol:
            return w
        H = sum(p[k] * objs[k].hessian(w) for k in active)
        step = np.linalg.solve(H, g)
        t = 1.0
        while True:
            w_new = w - t * step
            f_new = value(w_new)
            if f_new <= f - 1e-4 * t * float(g @ step) or t < 1e-10:
                break
            t *= 0.5
        g_new = grad(w_new)
        if np.linalg.norm(g_new) >= gn and t < 1e-10:
            break
        w, f, g = w_new, f_new, g_new
    gn = np.linalg.norm(g)
    if gn > max(tol, 1e-9):
        raise SolverError(f"Newton stalled at gradient norm {gn:.3e}")
    return w


def _others(weights: np.ndarray, excluded: Sequence[int]) -> np.ndarray:
    q = np.array(weights, dtype=float)
    q[list(excluded)] = 0.0
    return q


@dataclass
class VcgOracle:
    w_global: np.ndarray
    w_minus: list
    payments: np.ndarray
    tol: float
    grad_norm_global: float
    grad_norm_minus: list

    def to_dict(self) -> dict:
        return {
            "w_global": self.w_global.tolist(),
            "w_minus": [None if w is None else w.tolist() for w in self.w_minus],
            "payments": self.payments.tolist(),
            "tol": self.tol,
            "grad_norm_global": self.grad_norm_global,
            "grad_norm_minus": self.grad_norm_minus,
        }


def leave_out_value(scenario: Scenario, excluded: Sequence[int], w) -> float:
    """sum over j not in ``excluded`` of p_j F_j(w)."""
    q = _others(scenario.weights, excluded)
    return scenario.global_loss(w, q)


def vcg_payments_exact(scenario: Scenario, tol: float = DEFAULT_TOL) -> VcgOracle:
    """Weighted VCG payments from K+1 high-precision solves."""
    p = scenario.weights
    w0 = solve_exact(scenario, tol=tol)
    w_minus, pays, gnorms = [], np.zeros(scenario.K), []
    for k in range(scenario.K):
        if scenario.K == 1:
            w_minus.append(None)
            gnorms.append(0.0)
            continue
        if p[k] <= 0:
            raise ValueError(f"agent {k} has zero weight; its payment is undefined")
        q = _others(p, [k])
        wk = solve_exact(scenario, q, tol=tol, w_start=w0)
        w_minus.append(wk)
        gnorms.append(float(np.linalg.norm(scenario.global_grad(wk, q))))
        pays[k] = (scenario.global_loss(w0, q) - scenario.global_loss(wk, q)) / p[k]
    return VcgOracle(w0, w_minus, pays, tol, float(np.linalg.norm(scenario.global_grad(w0))), gnorms)


def scalable_vcg_exact(scenario: Scenario, partition, tol: float = DEFAULT_TOL,
                       w_global=None) -> tuple[np.ndarray, list]:
    """Cluster-based payments P^S and the per-cluster leave-cluster-out optima."""
    p = scenario.weights
    w0 = solve_exact(scenario, tol=tol) if w_global is None else w_global
    clusters = partition.clusters if hasattr(partition, "clusters") else partition
    pays = np.zeros(scenario.K)
    w_cl = []
    for members in clusters:
        members = sorted(members)
        if len(members) >= scenario.K:
            raise ValueError("cluster complement empty: leave-cluster-out objective has no agents")
        q = _others(p, members)
        wl = solve_exact(scenario, q, tol=tol, w_start=w0)
        w_cl.append(wl)
        for k in members:
            others = _others(p, [k])
            pays[k] = (scenario.global_loss(w0, others) - scenario.global_loss(wl, others)) / p[k]
    return pays, w_cl


def payment_accuracy_loss(run, oracle) -> dict:
    """|P_k* - P_k^VCG| per agent, plus the max."""
    got = np.asarray(run.payments if hasattr(run, "payments") else run, dtype=float)
    ref = np.asarray(oracle.payments if hasattr(oracle, "payments") else oracle, dtype=float)
    if got.shape != ref.shape:
        raise ValueError(f"agent sets differ: {got.shape[0]} vs {ref.shape[0]} payments")
    err = np.abs(got - ref)
    return {"per_agent": err, "max": float(err.max()) if err.size else 0.0}


def evaluate_outcome(scenario: Scenario, w, test_datasets: Optional[Sequence] = None,
                     payments=None) -> dict:
    """Global/per-agent training loss, test metrics and overall losses J_k.

    ``w`` is either one shared model or a list of per-agent models (local
    learning). Overall losses use per-agent test loss when test sets exist.
    """
    K = scenario.K
    models = list(w) if isinstance(w, (list, tuple)) else [w] * K
    per_agent = np.array([scenario.local_value(k, models[k]) for k in range(K)])
    out = {"global_loss": float(scenario.weights @ per_agent), "per_agent_loss": per_agent}
    pay = np.zeros(K) if payments is None else np.asarray(payments, dtype=float)
    out["overall_train"] = pay + per_agent
    loss = scenario.loss
    if test_datasets is not None:
        test_loss = np.array([loss.risk(models[k], t.X, t.y) for k, t in enumerate(test_datasets)])
        out["per_agent_test_loss"] = test_loss
        out["overall_test"] = pay + test_loss
        if loss.is_classifier:
            acc = np.array([float(np.mean(loss.predict(models[k], t.X) == t.y))
                            for k, t in enumerate(test_datasets)])
            out["per_agent_accuracy"] = acc
            out["weighted_accuracy"] = float(scenario.weights @ acc)
    elif loss.is_classifier:
        acc = np.array([float(np.mean(loss.predict(models[k], ds.X) == ds.y))
                        for k, ds in enumerate(scenario.datasets)])
        out["per_agent_accuracy"] = acc
        out["weighted_accuracy"] = float(scenario.weights @ acc)
    return out
