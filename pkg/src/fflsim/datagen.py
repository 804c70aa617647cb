"""Synthetic scenario generators, label-skew allocation and IDX ingestion."""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import norm

from .dists import KnownDistribution, TruncNormal
from .model import LocalDataset, LossModel, Scenario
from .rng import derive_seed, stream


class IdxFormatError(ValueError):
    pass


def sample_truncated_normal(mean: float, sd: float, lo: float, hi: float, rng,
                            size: Optional[int] = None):
    """Rejection sampling from N(mean, sd^2) restricted to [lo, hi]."""
    if not lo < hi:
        raise ValueError(f"invalid truncation interval [{lo}, {hi}]")
    accept = norm.cdf((hi - mean) / sd) - norm.cdf((lo - mean) / sd)
    if accept < 1e-6:
        raise ValueError(f"acceptance probability {accept:.2e} below 1e-6")
    m = 1 if size is None else int(size)
    out = np.empty(m)
    filled = 0
    while filled < m:
        batch = int((m - filled) / accept * 1.1) + 16
        draw = rng.normal(mean, sd, size=batch)
        draw = draw[(draw >= lo) & (draw <= hi)][: m - filled]
        out[filled:filled + draw.size] = draw
        filled += draw.size
    return float(out[0]) if size is None else out


@dataclass(frozen=True)
class TwoAgentRegressionSpec:
    n1: int = 50
    n2: int = 400
    mean: float = 0.1
    noise_sd: float = 2.0
    trunc: tuple = (-3.0, 3.0)
    seed: int = 0
    reg: float = 0.1
    slope: float = -2.0
    intercept: float = 1.0

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("both agents need at least one sample")
        lo, hi = self.trunc
        if not lo < hi:
            raise ValueError(f"invalid truncation interval {self.trunc}")
        if not (lo <= self.mean <= hi and lo <= 0.0 <= hi):
            raise ValueError("truncation interval must contain both noise means")

    def distributions(self) -> tuple:
        lo, hi = self.trunc
        return tuple(KnownDistribution(TruncNormal(m, self.noise_sd, lo, hi), 0.0, 1.0,
                                       self.slope, self.intercept)
                     for m in (self.mean, 0.0))


def sample_known(dist: KnownDistribution, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    x = rng.uniform(dist.x_lo, dist.x_hi, size=n)
    kappa = sample_truncated_normal(dist.noise.mean, dist.noise.sd, dist.noise.lo,
                                    dist.noise.hi, rng, size=n)
    return x[:, None], dist.slope * x + dist.intercept + kappa


def gen_two_agent_regression(spec: TwoAgentRegressionSpec) -> Scenario:
    dists = spec.distributions()
    counts = (spec.n1, spec.n2)
    datasets = []
    for k, (dist, n) in enumerate(zip(dists, counts)):
        X, y = sample_known(dist, n, stream(spec.seed, "two_agent", k))
        datasets.append(LocalDataset(k, X, y))
    p = np.array(counts, dtype=float) / sum(counts)
    loss = LossModel("ridge_regression", spec.reg, 1)
    meta = {"kind": "two_agent_regression", **asdict(spec)}
    meta["trunc"] = list(spec.trunc)
    return Scenario(tuple(datasets), p, loss, dists, meta)


def gen_ridge_scenario(K: int, sizes, seed: int, reg: float = 0.1, dim_x: int = 2,
                       heterogeneity: float = 1.0, noise: float = 0.1,
                       weights=None, label_scale: float = 1.0) -> Scenario:
    """Random linear-regression agents with features scaled into the unit ball.

    Each agent draws its own true model around a shared one; ``heterogeneity``
    scales the spread.
    """
    sizes = np.broadcast_to(np.asarray(sizes, dtype=int), (K,))
    base = stream(seed, "ridge", "base").normal(size=dim_x + 1)
    datasets = []
    for k in range(K):
        rng = stream(seed, "ridge", k)
        w_k = base + heterogeneity * rng.normal(size=dim_x + 1)
        X = rng.normal(size=(int(sizes[k]), dim_x))
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
        y = label_scale * (X @ w_k[:-1] + w_k[-1] + noise * rng.normal(size=X.shape[0]))
        datasets.append(LocalDataset(k, X, y))
    n = sizes.astype(float)
    p = n / n.sum() if weights is None else np.asarray(weights, dtype=float)
    meta = {"kind": "ridge", "K": K, "sizes": sizes.tolist(), "seed": seed, "reg": reg,
            "dim_x": dim_x, "heterogeneity": heterogeneity, "noise": noise,
            "label_scale": label_scale}
    return Scenario(tuple(datasets), p, LossModel("ridge_regression", reg, dim_x), None, meta)


@dataclass
class ClassificationData:
    X: np.ndarray
    y: np.ndarray
    num_classes: int


def gaussian_mixture_source(seed: int, n: int = 5000, dim_x: int = 20, num_classes: int = 10,
                            separation: float = 1.5, split: str = "train") -> ClassificationData:
    """Seeded balanced Gaussian-mixture classification data, features in the unit ball.

    Class means are shared between splits; only the samples depend on ``split``.
    """
    means = stream(seed, "mixture", "means").normal(scale=separation, size=(num_classes, dim_x))
    rng = stream(seed, "mixture", split)
    y = np.arange(n) % num_classes
    rng.shuffle(y)
    X = means[y] + rng.normal(size=(n, dim_x))
    # fixed global scale keeps train and test on the same footing
    scale = np.linalg.norm(means, axis=1).max() + 3.0 * np.sqrt(dim_x)
    X = X / scale
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
    return ClassificationData(X, y.astype(int), num_classes)


@dataclass(frozen=True)
class LabelSkewSpec:
    num_agents: int = 10
    delta: float = 0.05
    seed: int = 0
    reg: float = 0.01
    source: str = "gaussian_mixture"
    n_train: int = 5000
    n_test: int = 1000
    dim_x: int = 20
    num_classes: int = 10
    separation: float = 1.5
    idx_images: Optional[str] = None
    idx_labels: Optional[str] = None
    idx_test_images: Optional[str] = None
    idx_test_labels: Optional[str] = None
    max_retries: int = 20

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("num_agents must be at least 1")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


def allocate_label_skew(labels, K: int, delta: float, rng) -> np.ndarray:
    """Owner of every sample: a random agent whose index matches the label
    (k % C == y, or labels mod K when no agent matches), then with
    probability 1 - delta a uniformly random agent (the owner included)."""
    labels = np.asarray(labels, dtype=int)
    C = int(labels.max()) + 1 if labels.size else 1
    cands = {}
    for yl in range(C):
        c = [k for k in range(K) if k % C == yl]
        cands[yl] = np.array(c if c else [yl % K])
    owner = np.empty(labels.size, dtype=int)
    u = rng.random(labels.size)
    for yl, c in cands.items():
        idx = labels == yl
        owner[idx] = c[(u[idx] * len(c)).astype(int)]
    move = rng.random(labels.size) >= delta
    owner[move] = rng.integers(0, K, size=int(move.sum()))
    return owner


def _load_source(spec: LabelSkewSpec):
    if spec.source == "gaussian_mixture":
        kw = dict(dim_x=spec.dim_x, num_classes=spec.num_classes, separation=spec.separation)
        return (gaussian_mixture_source(spec.seed, spec.n_train, split="train", **kw),
                gaussian_mixture_source(spec.seed, spec.n_test, split="test", **kw))
    if spec.source == "idx":
        train = load_idx_dataset(spec.idx_images, spec.idx_labels)
        test = None
        if spec.idx_test_images:
            test = load_idx_dataset(spec.idx_test_images, spec.idx_test_labels)
        return train, test
    raise ValueError(f"unknown classification source {spec.source!r}")


def _split_by_owner(X, y, owner, K):
    return [(X[owner == k], y[owner == k]) for k in range(K)]


def gen_label_skew(spec: LabelSkewSpec) -> tuple[Scenario, list]:
    """Label-skewed softmax scenario and matching per-agent test sets."""
    train, test = _load_source(spec)
    K = spec.num_agents
    for attempt in range(spec.max_retries):
        seed = spec.seed if attempt == 0 else derive_seed(spec.seed, "label_skew_retry", attempt)
        owner = allocate_label_skew(train.y, K, spec.delta, stream(seed, "label_skew", "train"))
        counts = np.bincount(owner, minlength=K)
        if counts.min() > 0:
            break
    else:
        raise ValueError(f"an agent was left with no data after {spec.max_retries} attempts")
    parts = _split_by_owner(train.X, train.y, owner, K)
    datasets = tuple(LocalDataset(k, Xk, yk) for k, (Xk, yk) in enumerate(parts))
    tests = []
    if test is not None:
        t_owner = allocate_label_skew(test.y, K, spec.delta, stream(seed, "label_skew", "test"))
        for k, (Xk, yk) in enumerate(_split_by_owner(test.X, test.y, t_owner, K)):
            if not len(yk):
                raise ValueError(f"agent {k} received no test samples; enlarge n_test")
            tests.append(LocalDataset(k, Xk, yk))
    loss = LossModel("l2_softmax", spec.reg, train.X.shape[1], train.num_classes)
    meta = {"kind": "label_skew", **asdict(spec), "allocation_seed": int(seed)}
    return Scenario(datasets, counts / counts.sum(), loss, None, meta), tests


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{path}: file shorter than its header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise IdxFormatError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise IdxFormatError(f"{path}: truncated, {len(raw) - header} of {size} bytes present")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx_dataset(images_path, labels_path) -> ClassificationData:
    """IDX images (magic 0x803) and labels (0x801); pixels scaled to [0, 1]."""
    images = _read_idx(images_path, 0x00000803, 3)
    labels = _read_idx(labels_path, 0x00000801, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(float) / 255.0
    y = labels.astype(int)
    return ClassificationData(X, y, max(10, int(y.max()) + 1))


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 arrays in IDX format (used for fixtures)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(struct.pack(">IIII", 0x803, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", 0x801, labels.shape[0]) + labels.tobytes())


def scenario_digest(scenario: Scenario) -> str:
    h = hashlib.sha256()
    for ds in scenario.datasets:
        h.update(np.ascontiguousarray(ds.X).tobytes())
        h.update(np.ascontiguousarray(ds.y).tobytes())
    h.update(np.asarray(scenario.weights).tobytes())
    return h.hexdigest()


def export_scenario(scenario: Scenario, path) -> None:
    """JSON document holding the generating spec (seed included) and a data digest."""
    doc = {"spec": scenario.spec, "seed": scenario.spec.get("seed"),
           "digest": scenario_digest(scenario)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def build_scenario(spec: dict):
    """Scenario (and test sets, possibly empty) from a spec dictionary."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "two_agent_regression":
        spec["trunc"] = tuple(spec.get("trunc", (-3.0, 3.0)))
        return gen_two_agent_regression(TwoAgentRegressionSpec(**spec)), []
    if kind == "label_skew":
        spec.pop("allocation_seed", None)
        return gen_label_skew(LabelSkewSpec(**spec))
    if kind == "ridge":
        return gen_ridge_scenario(**spec), []
    raise ValueError(f"unknown scenario kind {kind!r}")


def import_scenario(path):
    doc = json.loads(Path(path).read_text())
    scen, tests = build_scenario(doc["spec"])
    if doc.get("digest") and scenario_digest(scen) != doc["digest"]:
        raise ValueError("regenerated scenario does not match the exported digest")
    return scen, tests
