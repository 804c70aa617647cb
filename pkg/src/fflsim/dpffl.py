"""Differentially private FFL: cluster-based scalable VCG with one-shot noisy aggregation."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .agents import remove_opt_outs, resolve_strategies
from .model import ConstantsCertificate, Scenario
from .rng import derive_seed, stream
from .run import DivergenceError, GradientGuard, MechanismRun, Trace


@dataclass
class DpConfig:
    alpha: float
    beta: float
    num_clusters: int
    eta1: float
    eta2: float
    t1: int
    t2: int
    epsilon: float
    seed: int
    l_f: float
    noise_multiplier: float = 1.0   # 0 disables both noise sources
    clip: bool = False
    w0: Optional[list] = None
    threads: int = 1

    def __post_init__(self):
        if not (self.alpha > 0 and self.epsilon > 0):
            raise ValueError("alpha and epsilon must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.num_clusters < 1:
            raise ValueError("num_clusters must be at least 1")
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("step sizes must be positive")
        if self.t1 < 0 or self.t2 < 0:
            raise ValueError("iteration counts must be nonnegative")
        if not self.l_f > 0:
            raise ValueError("l_f must be positive")
        if self.noise_multiplier < 0:
            raise ValueError("noise_multiplier must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NoiseCalibration:
    sigma_sq: float
    sigma_p_sq: float
    rho_step: float
    rho_payment: float
    rho_total: float
    alpha_from_rho: float    # rho_total + 2 sqrt(rho_total log(1/beta))
    alpha_approx: float      # 2 sqrt(rho_total log(1/beta)), linear term dropped

    def to_dict(self) -> dict:
        return asdict(self)


def calibrate_noise(constants, K: int, n_min: int, t1: int, t2: int,
                    alpha: float, beta: float) -> NoiseCalibration:
    """Gaussian noise variances for gradients and payments, with zCDP bookkeeping."""
    l_f = constants.l_f if hasattr(constants, "l_f") else float(constants)
    if min(l_f, K, n_min, alpha) <= 0 or not 0 < beta < 1:
        raise ValueError("calibration inputs must be positive with beta in (0, 1)")
    rounds = t1 + K * t2
    lb = math.log(1.0 / beta)
    sigma_sq = 16 * l_f ** 2 * rounds * lb / (K ** 2 * n_min ** 2 * alpha ** 2)
    sigma_p_sq = 16 * K * lb / (n_min ** 2 * alpha ** 2)
    if rounds > 0:
        alt = sigma_sq * K ** 3 / (rounds * l_f ** 2)
        if abs(alt - sigma_p_sq) > 1e-9 * max(1.0, sigma_p_sq):
            raise AssertionError(f"payment-noise relation mismatch: {alt} vs {sigma_p_sq}")
        rho_step = 2 * l_f ** 2 / (K ** 2 * n_min ** 2 * sigma_sq)
    else:
        rho_step = 0.0
    rho_pay = 2.0 / (n_min ** 2 * sigma_p_sq)
    rho_total = rounds * rho_step + K * rho_pay
    return NoiseCalibration(
        sigma_sq, sigma_p_sq, rho_step, rho_pay, rho_total,
        rho_total + 2 * math.sqrt(rho_total * lb), 2 * math.sqrt(rho_total * lb))


@dataclass(frozen=True)
class ClusterPartition:
    clusters: tuple

    def __post_init__(self):
        members = [k for c in self.clusters for k in c]
        if len(members) != len(set(members)):
            raise ValueError("clusters overlap")
        if sorted(members) != list(range(len(members))):
            raise ValueError("clusters must cover agents 0..K-1")
        sizes = {len(c) for c in self.clusters}
        if max(sizes) - min(sizes) > 1:
            raise ValueError(f"unbalanced cluster sizes {sorted(sizes)}")

    @property
    def K(self) -> int:
        return sum(len(c) for c in self.clusters)

    def cluster_of(self, k: int) -> int:
        for i, c in enumerate(self.clusters):
            if k in c:
                return i
        raise KeyError(k)

    def to_list(self) -> list:
        return [list(c) for c in self.clusters]


def partition_clusters(K: int, L: int, seed: int) -> ClusterPartition:
    """Seeded shuffle, then deal agents round-robin into L clusters."""
    if not 1 <= L <= K:
        raise ValueError(f"need 1 <= L <= K, got L={L}, K={K}")
    perm = stream(seed, "partition", K, L).permutation(K)
    return ClusterPartition(tuple(tuple(sorted(int(a) for a in perm[i::L])) for i in range(L)))


def plan_L_theorem3(constants: ConstantsCertificate, K: int, epsilon: float) -> int:
    """Smallest L meeting the scalable-VCG approximation bound, capped at K."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    raw = math.sqrt(constants.l_g * (K - 1) / (2 * epsilon)) * constants.l_f / constants.mu
    # tolerate float noise when raw is an exact integer
    return int(min(K, max(1, math.ceil(raw - 1e-9))))


def secure_aggregate(reports, weights, noise_sd: float, rng) -> np.ndarray:
    """sum_k p_k report_k plus a single N(0, sd^2 I) draw."""
    reports = [np.asarray(r, dtype=float) for r in reports]
    if len({r.shape for r in reports}) > 1:
        raise ValueError("reports have inconsistent dimensions")
    agg = sum(float(p) * r for p, r in zip(weights, reports))
    if noise_sd > 0:
        agg = agg + rng.normal(0.0, noise_sd, size=agg.shape)
    return agg


class SecureAggregator:
    """Simulated trust boundary: agents hand in gradients through callbacks and
    only the noisy weighted sum leaves :meth:`aggregate`."""

    def __init__(self, noise_sd: float, rng):
        self._sd = noise_sd
        self._rng = rng
        self.draws = 0

    def aggregate(self, report_fns, weights) -> np.ndarray:
        out = secure_aggregate([f() for f in report_fns], weights, self._sd, self._rng)
        if self._sd > 0:
            self.draws += 1
        return out


def _report_fn(scenario, strategies, guard, j, w, rnd, where):
    def f():
        g = guard(scenario.local_grad(j, w), j, where, rnd)
        return strategies[j].report(rnd, w, g)
    return f


def run_dpffl(scenario: Scenario, strategies, cfg: DpConfig) -> MechanismRun:
    """Noisy Phase I, then one noisy leave-cluster-out descent per cluster."""
    scen, strat, participants = remove_opt_outs(scenario, strategies)
    strat = resolve_strategies(scen, strat)
    K, p = scen.K, scen.weights
    if cfg.num_clusters > K:
        raise ValueError(f"num_clusters={cfg.num_clusters} exceeds K={K}")
    if cfg.num_clusters == 1 and K > 1:
        raise ValueError("cluster complement empty: L=1 leaves no agents outside the cluster")
    cal = calibrate_noise(cfg.l_f, K, scen.n_min, cfg.t1, cfg.t2, cfg.alpha, cfg.beta)
    sd = cfg.noise_multiplier * math.sqrt(cal.sigma_sq)
    sd_p = cfg.noise_multiplier * math.sqrt(cal.sigma_p_sq)
    part = partition_clusters(K, cfg.num_clusters, cfg.seed)
    seeds = {"run": cfg.seed, "phase1": derive_seed(cfg.seed, "phase1")}

    guard = GradientGuard(cfg.l_f, cfg.clip)
    agg1 = SecureAggregator(sd, stream(cfg.seed, "phase1"))
    w = np.zeros(scen.d) if cfg.w0 is None else np.array(cfg.w0, dtype=float)
    tr1 = Trace("phase1")
    tr1.iterates.append(w.copy())
    tr1.losses.append(scen.global_loss(w))
    for t in range(cfg.t1):
        fns = [_report_fn(scen, strat, guard, k, w, t, "phase1") for k in range(K)]
        a = agg1.aggregate(fns, p)
        w = w - cfg.eta1 * a
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"phase I diverged at round {t}")
        tr1.grad_norms.append(float(np.linalg.norm(a)))
        tr1.iterates.append(w.copy())
        tr1.losses.append(scen.global_loss(w))
    tr1.max_true_grad_norm = guard.max_seen
    tr1.reason = "t1_reached"
    w_star = w

    def cluster_run(l):
        members = set(part.clusters[l])
        others = [j for j in range(K) if j not in members]
        g = GradientGuard(cfg.l_f, cfg.clip)
        agg = SecureAggregator(sd, stream(cfg.seed, "phase2", l))
        tr = Trace(f"phase2_cluster{l}")
        wl = w_star.copy()
        tr.iterates.append(wl.copy())
        for t in range(cfg.t2):
            fns = [_report_fn(scen, strat, g, j, wl, t, f"phase2[{l}]") for j in others]
            a = agg.aggregate(fns, [p[j] for j in others])
            wl = wl - cfg.eta2 * a
            if not np.all(np.isfinite(wl)):
                raise DivergenceError(f"phase II for cluster {l} diverged at round {t}")
            tr.grad_norms.append(float(np.linalg.norm(a)))
            tr.iterates.append(wl.copy())
        tr.max_true_grad_norm = g.max_seen
        tr.reason = "t2_reached"
        return wl, tr, g.clipped

    L = cfg.num_clusters
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            results = list(ex.map(cluster_run, range(L)))
    else:
        results = [cluster_run(l) for l in range(L)]

    # honest value reports F_j(w*) - F_j(w_l[T2])
    f_star = np.array([scen.local_value(j, w_star) for j in range(K)])
    payments = np.zeros(K)
    for l, (wl, tr, _) in enumerate(results):
        diff = f_star - np.array([scen.local_value(j, wl) for j in range(K)])
        for k in part.clusters[l]:
            rng = stream(cfg.seed, "payment", k)
            seeds[f"payment{k}"] = derive_seed(cfg.seed, "payment", k)
            noise = rng.normal(0.0, sd_p) if sd_p > 0 else 0.0
            payments[k] = (float(p @ diff) - p[k] * diff[k]) / p[k] + noise
        tr.losses = [scen.global_loss(x, np.where(np.isin(np.arange(K), part.clusters[l]), 0.0, p))
                     for x in tr.iterates]
        seeds[f"phase2_cluster{l}"] = derive_seed(cfg.seed, "phase2", l)
    traces = [r[1] for r in results]
    noise = cal.to_dict()
    noise.update(sigma=sd, sigma_p=sd_p, noise_multiplier=cfg.noise_multiplier)
    return MechanismRun(
        mechanism="dpffl",
        w_star=w_star,
        payments=payments,
        phase1=tr1,
        phase2=traces,
        config=cfg.to_dict(),
        participants=participants,
        seeds=seeds,
        termination_reasons=[tr.reason for tr in traces],
        clipped=guard.clipped or any(r[2] for r in results),
        noise=noise,
        partition=part.to_list(),
    )


def cluster_models(run: MechanismRun) -> list:
    """Final leave-cluster-out model w_l[T2] for each cluster."""
    return [tr.iterates[-1] for tr in run.phase2]


@dataclass(frozen=True)
class Prop9Plan:
    t1: int
    t2: int
    bound: float
    A: float
    B: float
    C: float
    t_raw: float
    clamped: bool

    def to_dict(self) -> dict:
        return asdict(self)


def plan_tradeoff_prop9(constants: ConstantsCertificate, K: int, n_min: int, alpha: float,
                        beta: float, eta2: float, epsilon: float, d: int) -> Prop9Plan:
    """Iteration count T1 = T2 and expected payment-loss bound for DP-FFL.

    ``eta2`` is the step on the unweighted sum of leave-cluster-out gradients.
    When the optimal real T is negative the count clamps to 0 and the bound
    saturates at B + epsilon, its value at T = 0.
    """
    mu, l_g, l_f = constants.mu, constants.l_g, constants.l_f
    if K < 2:
        raise ValueError("the tradeoff needs K >= 2")
    if eta2 > 1.0 / ((K - 1) * l_g) * (1 + 1e-12):
        raise ValueError(f"eta2={eta2} exceeds 1/((K-1) L_g)={1 / ((K - 1) * l_g)}")
    C = 1 - (K - 1) * mu * eta2
    if not 0 < C < 1:
        raise ValueError(f"C={C} must lie in (0, 1)")
    lb = math.log(1.0 / beta)
    A = 8 * eta2 * d * l_f ** 2 * (K + 1) * lb / (mu * K ** 2 * (K - 1) * n_min ** 2 * alpha ** 2)
    B = (K - 1) * l_f ** 2 / (2 * mu)
    q = math.log(1.0 / C)
    ratio = B * q / A
    t_raw = math.log(ratio) / q
    if t_raw < 0:
        return Prop9Plan(0, 0, B + epsilon, A, B, C, t_raw, True)
    t = math.ceil(t_raw)
    bound = A * (1 + math.log(ratio)) / q + epsilon
    return Prop9Plan(t, t, bound, A, B, C, t_raw, False)
