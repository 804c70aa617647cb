"""Mechanism run records, gradient-bound enforcement and run serialization."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class GradientBoundError(RuntimeError):
    """A true local gradient exceeded the configured bound L_f."""


class DivergenceError(RuntimeError):
    pass


@dataclass
class Trace:
    """One descent trajectory: iterates, objective values, gradient norms."""

    label: str
    iterates: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    payments: list = field(default_factory=list)
    max_true_grad_norm: float = 0.0
    reason: str = ""

    @property
    def iterations(self) -> int:
        return max(len(self.iterates) - 1, 0)

    def rows(self):
        for t in range(len(self.losses)):
            yield {
                "round": t,
                "loss": self.losses[t],
                "grad_norm": self.grad_norms[t] if t < len(self.grad_norms) else "",
                "payment": self.payments[t] if t < len(self.payments) else "",
            }


@dataclass
class MechanismRun:
    mechanism: str
    w_star: np.ndarray
    payments: np.ndarray
    phase1: Trace
    phase2: list
    config: dict
    participants: list
    seeds: dict = field(default_factory=dict)
    termination_reasons: list = field(default_factory=list)
    clipped: bool = False
    noise: Optional[dict] = None
    partition: Optional[list] = None
    oracle: Optional[dict] = None

    @property
    def K(self) -> int:
        return len(self.participants)

    def manifest(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "config": self.config,
            "participants": self.participants,
            "seeds": self.seeds,
            "payments": [float(x) for x in self.payments],
            "w_star": [float(x) for x in self.w_star],
            "termination_reasons": self.termination_reasons,
            "phase2_iterations": [tr.iterations for tr in self.phase2],
            "clipped": self.clipped,
            "noise": self.noise,
            "partition": self.partition,
            "oracle": self.oracle,
        }


TRACE_FIELDS = ["round", "loss", "grad_norm", "payment"]


def write_run(run: MechanismRun, out_dir) -> Path:
    """Write ``manifest.json`` plus one CSV per trace into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "manifest.json", "w") as fh:
        json.dump(run.manifest(), fh, indent=2, sort_keys=True)
    for tr in [run.phase1, *run.phase2]:
        with open(out / f"trace_{tr.label}.csv", "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
            wr.writeheader()
            for row in tr.rows():
                wr.writerow(row)
    return out


class GradientGuard:
    """Checks true local gradients against L_f, or clips them in clip mode."""

    def __init__(self, bound: Optional[float], clip: bool = False):
        if clip and bound is None:
            raise ValueError("clip mode needs a gradient bound")
        self.bound = bound
        self.clip = clip
        self.clipped = False
        self.max_seen = 0.0

    def __call__(self, g: np.ndarray, agent: int, where: str, rnd: int) -> np.ndarray:
        norm = float(np.linalg.norm(g))
        if not np.isfinite(norm):
            raise DivergenceError(f"non-finite gradient from agent {agent} at {where} round {rnd}")
        self.max_seen = max(self.max_seen, norm)
        if self.bound is None or norm <= self.bound:
            return g
        if self.clip:
            self.clipped = True
            return g * (self.bound / norm)
        raise GradientBoundError(
            f"|grad F_{agent}| = {norm:.6g} exceeds L_f = {self.bound:.6g} "
            f"at {where} round {rnd}")
