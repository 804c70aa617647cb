"""Strategic agents: report transforms, the local-learning baseline, overall loss."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .model import LocalDataset, LocalObjective, LossModel, Scenario, augment

STRATEGY_KINDS = ("faithful", "amplify", "opt_out", "custom")


class IterationCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentStrategy:
    kind: str = "faithful"
    gamma: float = 1.0
    hook: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be finite and positive")
        if self.kind == "custom" and self.hook is None:
            raise ValueError("custom strategy needs a report hook")

    def report(self, rnd: int, w, true_grad) -> np.ndarray:
        if self.kind == "faithful":
            return true_grad
        if self.kind == "amplify":
            return self.gamma * true_grad
        if self.kind == "custom":
            return np.asarray(self.hook(rnd, w, true_grad), dtype=float)
        raise RuntimeError("an opted-out agent does not report")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "amplify":
            d["gamma"] = self.gamma
        return d


FAITHFUL = AgentStrategy()


def amplify(gamma: float) -> AgentStrategy:
    return AgentStrategy("amplify", gamma=float(gamma))


def opt_out() -> AgentStrategy:
    return AgentStrategy("opt_out")


def custom(hook: Callable) -> AgentStrategy:
    return AgentStrategy("custom", hook=hook)


def report_gradient(strategy: AgentStrategy, true_grad, rnd: int = 0, w=None) -> np.ndarray:
    return strategy.report(rnd, w, np.asarray(true_grad, dtype=float))


def resolve_strategies(scenario: Scenario, strategies) -> list:
    if strategies is None:
        return [FAITHFUL] * scenario.K
    strategies = list(strategies)
    if len(strategies) != scenario.K:
        raise ValueError(f"{len(strategies)} strategies for {scenario.K} agents")
    return strategies


def remove_opt_outs(scenario: Scenario, strategies) -> tuple[Scenario, list, list]:
    """Drop opted-out agents before the mechanism starts; weights renormalized."""
    strategies = resolve_strategies(scenario, strategies)
    keep = [k for k, s in enumerate(strategies) if s.kind != "opt_out"]
    if len(keep) == scenario.K:
        return scenario, strategies, keep
    if not keep:
        raise ValueError("every agent opted out")
    return scenario.subset(keep), [strategies[k] for k in keep], keep


def local_learning(ds: LocalDataset, model: LossModel, tol: float = 1e-8,
                   max_iter: int = 1_000_000, w0=None) -> np.ndarray:
    """Gradient descent with step 1/L_g on F_k alone until |grad| <= tol."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    obj = LocalObjective(model, ds)
    Xa = augment(ds.X)
    l_g = model.smoothness(float(np.max(np.sum(Xa * Xa, axis=1))))
    w = np.zeros(model.dim) if w0 is None else np.array(w0, dtype=float)
    for _ in range(max_iter):
        g = obj.grad(w)
        if np.linalg.norm(g) <= tol:
            return w
        w = w - g / l_g
    raise IterationCapError(f"local learning for agent {ds.owner} hit {max_iter} iterations")


@dataclass(frozen=True)
class OverallLoss:
    payment: float
    empirical_risk_at_outcome: float
    total: float


def overall_loss(payment: float, model: LossModel, ds: LocalDataset, w_out) -> OverallLoss:
    risk = model.risk(w_out, ds.X, ds.y)
    return OverallLoss(float(payment), risk, float(payment) + risk)


def manipulated_weights(weights: Sequence[float], k: int, gamma: float) -> np.ndarray:
    """Objective weights equivalent to agent k amplifying by gamma (unnormalized)."""
    q = np.array(weights, dtype=float)
    q[k] *= gamma
    return q
