"""Closed-form risk, faithfulness and privacy bounds, evaluated as reports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dists import l1_distance, min_expected_ridge_risk, mixture

APPROX_NOTE = "approximate per paper"
CONSTANT_NOTE = "up to unspecified constant"


@dataclass
class BoundReport:
    name: str
    inputs: dict
    value: float
    note: str = ""
    parts: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"bound": self.name, "inputs": json.dumps(self.inputs, sort_keys=True),
                "value": repr(float(self.value)), "note": self.note}


BOUND_FIELDS = ["bound", "inputs", "value", "note"]


def write_bound_reports(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=BOUND_FIELDS)
        wr.writeheader()
        for r in reports:
            wr.writerow(r.row())


@dataclass
class DistScenario:
    """What the distribution-aware bounds need from a scenario."""

    dists: list
    weights: np.ndarray
    sample_counts: np.ndarray
    d: int
    reg: float = 0.0

    @property
    def K(self) -> int:
        return len(self.dists)


def as_dist_scenario(s) -> DistScenario:
    if isinstance(s, DistScenario):
        return s
    if getattr(s, "known_distributions", None) is None:
        raise ValueError("bound needs known generating distributions")
    return DistScenario(list(s.known_distributions), np.asarray(s.weights),
                        np.asarray(s.sample_counts), s.d, s.loss.reg)


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")


def estimation_factor(constants, d: int, delta: float, K: int = 1) -> float:
    """L_ell^2 d log(2Kd/delta) / (4 mu)."""
    _check_delta(delta)
    return constants.l_ell ** 2 * d * math.log(2 * K * d / delta) / (4 * constants.mu)


def bound_prop1(constants, weights, sample_counts, d: int, delta: float) -> BoundReport:
    p = np.asarray(weights, dtype=float)
    n = np.asarray(sample_counts, dtype=float)
    val = float(np.sum(p ** 2 / n)) * estimation_factor(constants, d, delta)
    return BoundReport("prop1", {"weights": p.tolist(), "n": n.tolist(), "d": d, "delta": delta}, val)


def bound_corollary1(constants, n_k: int, d: int, delta: float) -> BoundReport:
    val = estimation_factor(constants, d, delta) / n_k
    return BoundReport("corollary1", {"n_k": n_k, "d": d, "delta": delta}, val)


def bound_prop2(constants, scenario, k: int, delta: float) -> BoundReport:
    s = as_dist_scenario(scenario)
    est = bound_prop1(constants, s.weights, s.sample_counts, s.d, delta).value
    dist = l1_distance(s.dists[k], mixture(s.weights, s.dists))
    return BoundReport("prop2", {"k": k, "delta": delta}, est + 2 * dist,
                       parts={"estimation": est, "distance": dist})


def prop3_weights(weights, k: int, gamma: float) -> np.ndarray:
    q = np.array(weights, dtype=float)
    q[k] *= gamma
    return q / (1 + (gamma - 1) * weights[k])


def bound_prop3(constants, scenario, k: int, gamma: float, delta: float) -> BoundReport:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    s = as_dist_scenario(scenario)
    p, n = s.weights, s.sample_counts
    scale = 1.0 / (1 + (gamma - 1) * p[k]) ** 2
    others = sum(p[j] ** 2 / n[j] for j in range(s.K) if j != k)
    est = scale * (others + gamma ** 2 * p[k] ** 2 / n[k]) * estimation_factor(constants, s.d, delta)
    dist = l1_distance(s.dists[k], mixture(prop3_weights(p, k, gamma), s.dists))
    return BoundReport("prop3", {"k": k, "gamma": gamma, "delta": delta}, est + 2 * dist,
                       parts={"estimation": est, "distance": dist})


def bound_cluster_rb(constants, scenario, partition, delta: float) -> BoundReport:
    """Social risk bound of intra-cluster learning for a given clustering."""
    s = as_dist_scenario(scenario)
    p, n = s.weights, s.sample_counts
    clusters = partition.clusters if hasattr(partition, "clusters") else partition
    fac = estimation_factor(constants, s.d, delta, K=s.K)
    est, dist = 0.0, 0.0
    for members in clusters:
        members = list(members)
        pc = p[members].sum()
        centre = mixture(p[members], [s.dists[j] for j in members])
        for k in members:
            est += p[k] * (p[k] / pc) / n[k] * fac
            dist += 2 * p[k] * l1_distance(s.dists[k], centre)
    return BoundReport("rb_cluster", {"partition": [list(map(int, c)) for c in clusters],
                                      "delta": delta}, est + dist,
                       parts={"estimation": est, "distance": dist})


def bound_local_social(constants, scenario, delta: float) -> BoundReport:
    s = as_dist_scenario(scenario)
    val = float(np.sum(s.weights / s.sample_counts)) * estimation_factor(constants, s.d, delta, K=s.K)
    return BoundReport("local_social", {"delta": delta}, val)


def bound_federated_social(constants, scenario, delta: float) -> BoundReport:
    s = as_dist_scenario(scenario)
    est = float(np.sum(s.weights ** 2 / s.sample_counts)) * estimation_factor(constants, s.d, delta, K=s.K)
    centre = mixture(s.weights, s.dists)
    dist = sum(2 * s.weights[k] * l1_distance(s.dists[k], centre) for k in range(s.K))
    return BoundReport("federated_social", {"delta": delta}, est + dist,
                       parts={"estimation": est, "distance": dist})


def _min_terms(s: DistScenario, k: int) -> float:
    """sum_{j!=k} (p_j/p_k) min E_j - min sum_{j!=k} (p_j/p_k) E_j."""
    p = s.weights
    coeffs = np.array([0.0 if j == k else p[j] / p[k] for j in range(s.K)])
    if not coeffs.any():
        return 0.0
    sep = sum(c * min_expected_ridge_risk([s.dists[j]], [1.0], s.reg)[1]
              for j, c in enumerate(coeffs) if c)
    joint = min_expected_ridge_risk(s.dists, coeffs, s.reg)[1]
    return float(sep - joint)


def bound_participation(constants, scenario, k: int, delta: float) -> tuple[BoundReport, BoundReport]:
    """(RB^L_k, RB^FFL_k); the minimum-risk terms use closed-form ridge moments."""
    s = as_dist_scenario(scenario)
    p, n, K = s.weights, s.sample_counts, s.K
    fac = estimation_factor(constants, s.d, delta, K=K)
    gap = _min_terms(s, k)
    others = [j for j in range(K) if j != k]
    if others:
        est_l = (sum(p[j] ** 2 / (n[j] * (1 - p[k]) ** 2) for j in others) + p[k] / n[k]) * fac
        rest = mixture(p[others], [s.dists[j] for j in others])
        dist_l = sum(2 * p[j] * l1_distance(s.dists[j], rest) for j in others)
    else:
        est_l, dist_l = p[k] / n[k] * fac, 0.0
    est_f = float(np.sum(p ** 2 / n)) / p[k] * fac
    centre = mixture(p, s.dists)
    dist_f = sum(2 * p[j] * l1_distance(s.dists[j], centre) for j in range(K))
    inputs = {"k": k, "delta": delta}
    rb_l = BoundReport("rb_local", inputs, est_l + gap + dist_l,
                       parts={"estimation": est_l, "min_gap": gap, "distance": dist_l})
    rb_f = BoundReport("rb_ffl", inputs, est_f + gap + dist_f, note=APPROX_NOTE,
                       parts={"estimation": est_f, "min_gap": gap, "distance": dist_f})
    return rb_l, rb_f


def participation_slack(constants, epsilon: float, K: int, t1: int, initial_gap: float) -> float:
    """epsilon + (2 K L_g/mu)(1 - mu/L_g)^T1 (F(w[0]) - F(w^o))."""
    mu, l_g = constants.mu, constants.l_g
    return epsilon + 2 * K * l_g / mu * (1 - mu / l_g) ** t1 * initial_gap


def bound_phi(constants, weights, sample_counts, d: int, delta: float, t1: int,
              initial_gap: float, epsilon: Optional[float] = None) -> BoundReport:
    _check_delta(delta)
    if initial_gap < 0:
        raise ValueError("initial gap F(w[0]) - F(w^o) must be nonnegative")
    p = np.asarray(weights, dtype=float)
    n = np.asarray(sample_counts, dtype=float)
    mu, l_g = constants.mu, constants.l_g
    est = float(np.sum(p ** 2 / n)) * constants.l_ell ** 2 * d * math.log(2 * d / delta) / (2 * mu)
    geo = 2 * l_g / mu * (1 - mu / l_g) ** t1 * initial_gap
    phi = est + geo
    parts = {"estimation": est, "optimization": geo}
    if epsilon is not None:
        parts["epsilon_tilde"] = 2 * epsilon + len(p) * phi
    return BoundReport("phi", {"d": d, "delta": delta, "t1": t1, "initial_gap": initial_gap,
                               "epsilon": epsilon}, phi, parts=parts)


def bound_dp_risk(constants, K: int, n_min: int, alpha: float, beta: float, d: int,
                  delta: float, sample_counts: Sequence[int], c1: float = 1.0) -> BoundReport:
    _check_delta(delta)
    n = np.asarray(sample_counts, dtype=float)
    privacy = c1 * constants.l_f ** 2 * d * math.log(K * n_min) * math.log(1 / beta) / (
        K * n_min ** 2 * alpha ** 2)
    est = float(np.sum(1.0 / n)) * constants.l_ell ** 2 * d * math.log(2 * d / delta) / (2 * constants.mu * K ** 2)
    return BoundReport("dp_risk", {"K": K, "n_min": n_min, "alpha": alpha, "beta": beta,
                                   "d": d, "delta": delta, "c1": c1},
                       privacy + est, note=CONSTANT_NOTE,
                       parts={"privacy": privacy, "estimation": est})
