"""Faithful federated learning: federated descent, then incremental VCG payments."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .agents import remove_opt_outs, resolve_strategies
from .model import ConstantsCertificate, Scenario
from .run import DivergenceError, GradientGuard, MechanismRun, Trace


class InfeasiblePlanError(ValueError):
    pass


@dataclass
class FflConfig:
    eta1: float
    eta2: float
    t1: int
    t2: int
    epsilon: float
    phase2_cap: Optional[int] = None
    w0: Optional[list] = None
    grad_bound: Optional[float] = None
    clip: bool = False
    threads: int = 1

    def __post_init__(self):
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("step sizes must be positive")
        if self.t1 < 0 or self.t2 < 0:
            raise ValueError("iteration counts must be nonnegative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.phase2_cap is None:
            self.phase2_cap = 100 * self.t2 + 1000
        if self.phase2_cap < self.t2:
            raise ValueError("phase2_cap must be at least t2")

    def initial_model(self, d: int) -> np.ndarray:
        if self.w0 is None:
            return np.zeros(d)
        w = np.array(self.w0, dtype=float)
        if w.shape != (d,):
            raise ValueError(f"w0 has shape {w.shape}, expected ({d},)")
        return w

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.w0 is not None:
            out["w0"] = [float(x) for x in self.w0]
        return out


def _collect_reports(scenario, strategies, agents, w, rnd, guard, where):
    reports = {}
    for j in agents:
        g = guard(scenario.local_grad(j, w), j, where, rnd)
        reports[j] = strategies[j].report(rnd, w, g)
    return reports


def phase1_fedavg(scenario: Scenario, strategies, cfg: FflConfig,
                  guard: Optional[GradientGuard] = None) -> tuple[np.ndarray, Trace]:
    """T1 synchronous rounds of w <- w - eta1 * sum_k p_k report_k(w)."""
    strategies = resolve_strategies(scenario, strategies)
    guard = guard or GradientGuard(cfg.grad_bound, cfg.clip)
    p = scenario.weights
    agents = range(scenario.K)
    w = cfg.initial_model(scenario.d)
    tr = Trace("phase1")
    tr.iterates.append(w.copy())
    tr.losses.append(scenario.global_loss(w))
    for t in range(cfg.t1):
        reports = _collect_reports(scenario, strategies, agents, w, t, guard, "phase1")
        agg = sum(p[k] * reports[k] for k in agents)
        w = w - cfg.eta1 * agg
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"phase I diverged at round {t}")
        tr.grad_norms.append(float(np.linalg.norm(agg)))
        tr.iterates.append(w.copy())
        tr.losses.append(scenario.global_loss(w))
    tr.max_true_grad_norm = guard.max_seen
    tr.reason = "t1_reached"
    return w, tr


def phase2_payment(scenario: Scenario, strategies, w_star, cfg: FflConfig, k: int,
                   guard: Optional[GradientGuard] = None) -> tuple[float, Trace]:
    """Leave-k-out descent from w* accumulating agent k's payment.

    Runs at least ``t2`` iterations and continues while
    |sum_{j!=k} p_j g_j|^2 / (2 mu) > p_k * epsilon, up to ``phase2_cap``.
    Each step adds -(w[t+1]-w[t]) . sum_{j!=k} (p_j/p_k) g_j, a nonnegative
    increment (eta2/p_k)|sum_{j!=k} p_j g_j|^2.
    """
    strategies = resolve_strategies(scenario, strategies)
    guard = guard or GradientGuard(cfg.grad_bound, cfg.clip)
    p = scenario.weights
    mu = scenario.loss.reg
    others = [j for j in range(scenario.K) if j != k]
    tr = Trace(f"phase2_agent{k}")
    w = np.array(w_star, dtype=float)
    tr.iterates.append(w.copy())
    if not others:
        tr.losses.append(0.0)
        tr.payments.append(0.0)
        tr.reason = "no_other_agents"
        return 0.0, tr
    threshold = p[k] * cfg.epsilon
    payment = 0.0
    t = 0
    tr.losses.append(sum(p[j] * scenario.local_value(j, w) for j in others))
    tr.payments.append(0.0)
    while True:
        reports = _collect_reports(scenario, strategies, others, w, t, guard, f"phase2[{k}]")
        agg = sum(p[j] * reports[j] for j in others)
        gn2 = float(agg @ agg)
        tr.grad_norms.append(math.sqrt(gn2))
        criterion_met = gn2 / (2.0 * mu) <= threshold
        if t >= cfg.t2 and criterion_met:
            tr.reason = "criterion_met"
            break
        if t >= cfg.phase2_cap:
            tr.reason = "criterion_unmet"
            break
        w_next = w - cfg.eta2 * agg
        if not np.all(np.isfinite(w_next)):
            raise DivergenceError(f"phase II for agent {k} diverged at round {t}")
        payment -= float((w_next - w) @ (agg / p[k]))
        w = w_next
        t += 1
        tr.iterates.append(w.copy())
        tr.losses.append(sum(p[j] * scenario.local_value(j, w) for j in others))
        tr.payments.append(payment)
    tr.max_true_grad_norm = guard.max_seen
    return payment, tr


def run_ffl(scenario: Scenario, strategies, cfg: FflConfig) -> MechanismRun:
    """Phase I then one payment computation per participating agent."""
    scen, strat, participants = remove_opt_outs(scenario, strategies)
    guard = GradientGuard(cfg.grad_bound, cfg.clip)
    w_star, tr1 = phase1_fedavg(scen, strat, cfg, guard)

    def one(k):
        # separate guard per agent so threads never share mutable state
        g = GradientGuard(cfg.grad_bound, cfg.clip)
        pay, tr = phase2_payment(scen, strat, w_star, cfg, k, g)
        return pay, tr, g.clipped

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            results = list(ex.map(one, range(scen.K)))
    else:
        results = [one(k) for k in range(scen.K)]
    payments = np.array([r[0] for r in results])
    traces = [r[1] for r in results]
    return MechanismRun(
        mechanism="ffl",
        w_star=w_star,
        payments=payments,
        phase1=tr1,
        phase2=traces,
        config=cfg.to_dict(),
        participants=participants,
        termination_reasons=[tr.reason for tr in traces],
        clipped=guard.clipped or any(r[2] for r in results),
    )


def run_fedavg(scenario: Scenario, strategies, cfg: FflConfig) -> MechanismRun:
    """Phase I only, no payments: the (possibly manipulated) FedAvg benchmark."""
    scen, strat, participants = remove_opt_outs(scenario, strategies)
    guard = GradientGuard(cfg.grad_bound, cfg.clip)
    w_star, tr1 = phase1_fedavg(scen, strat, cfg, guard)
    return MechanismRun("fedavg", w_star, np.zeros(scen.K), tr1, [], cfg.to_dict(),
                        participants, clipped=guard.clipped)


def theorem1_t1(G: float, K: int, delta: float, mu: float, l_g: float) -> int:
    """Smallest T1 with G * sqrt((1 - mu/L_g)^T1) <= delta / K."""
    if not delta > 0:
        raise ValueError("phase-I suboptimality target must be positive")
    if G <= 0 or mu >= l_g:
        return 0
    raw = 2.0 * math.log(K * G / delta) / math.log(1.0 / (1.0 - mu / l_g))
    return max(0, math.ceil(raw))


def theorem1_t2_raw(l_f: float, delta: float, l_g: float, mu: float, K: int, epsilon: float) -> float:
    """Unrounded T2 expression; may be negative when K is large."""
    arg = (l_f + delta * mu) ** 2 * l_g / (mu ** 2 * K * epsilon)
    if mu >= l_g:
        return -math.inf if arg <= 1 else 0.0
    return math.log(arg) / math.log(l_g / (l_g - mu))


def theorem1_t2(l_f: float, delta: float, l_g: float, mu: float, K: int, epsilon: float) -> int:
    return max(0, math.ceil(theorem1_t2_raw(l_f, delta, l_g, mu, K, epsilon)))


@dataclass
class Theorem1Plan:
    config: FflConfig
    t2_lower: float
    t2_upper: float
    kt2_bound: float
    G_estimate: float
    delta: float

    def t1_sufficient(self, G_true: float, mu: float, l_g: float, K: int) -> bool:
        """Post-hoc check of the Phase-I requirement with the oracle's G."""
        return G_true * math.sqrt((1 - mu / l_g) ** self.config.t1) <= self.delta / K


def plan_hyperparams_theorem1(constants: ConstantsCertificate, K: int, epsilon: float,
                              delta: float = 0.05, G_estimate: float = 1.0,
                              check_feasible: bool = True) -> Theorem1Plan:
    mu, l_g, l_f = constants.mu, constants.l_g, constants.l_f
    lower = theorem1_t2_raw(l_f, delta, l_g, mu, K, epsilon)
    upper = l_g * epsilon * K / (2 * l_f ** 2)
    if check_feasible and lower > upper:
        raise InfeasiblePlanError(
            f"T2 interval [{lower:.4g}, {upper:.4g}] is empty; increase K or epsilon")
    t2 = max(0, math.ceil(lower))
    t1 = theorem1_t1(G_estimate, K, delta, mu, l_g)
    cfg = FflConfig(eta1=1.0 / l_g, eta2=1.0 / (K * l_g), t1=t1, t2=t2, epsilon=epsilon,
                    grad_bound=l_f)
    q = math.log(l_g / (l_g - mu)) if mu < l_g else math.inf
    kt2 = (1 + (l_f + delta * mu) ** 2 * l_g / (2 * mu ** 2 * math.e * epsilon)) / q
    return Theorem1Plan(cfg, lower, upper, kt2, G_estimate, delta)


def prop4_bound(p_k: float, l_g: float, l_f: float, t2: int, eta2: float) -> float:
    """Payment accuracy bound ((1-p_k)/p_k) L_g L_f^2 (T2+1) eta2^2."""
    return (1 - p_k) / p_k * l_g * l_f ** 2 * (t2 + 1) * eta2 ** 2
