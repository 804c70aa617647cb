"""Config-driven experiment runner: sweeps, repetitions, CSV rows and a manifest."""
from __future__ import annotations

import copy
import csv
import json
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .agents import FAITHFUL, AgentStrategy, local_learning
from .bounds import bound_prop3
from .datagen import build_scenario
from .dpffl import DpConfig, run_dpffl
from .ffl import FflConfig, run_fedavg, run_ffl
from .model import certify_constants, max_feature_sq_norm
from .oracle import evaluate_outcome, solve_exact, vcg_payments_exact
from .rng import derive_seed

MECHANISMS = ("ffl", "dpffl", "local", "fedavg_manipulated")
SWEEP_VARS = ("gamma", "n", "delta", "alpha", "L", "eta2")

RESULT_FIELDS = [
    "grid_index", "sweep_variable", "sweep_value", "repetition", "scenario_seed",
    "mechanism", "agent", "payment", "train_loss", "test_loss", "overall_cost",
    "accuracy", "global_loss", "oracle_global_loss", "vcg_payment", "payment_error",
    "bound_name", "bound_value", "status",
]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: dict
    mechanism: str = "ffl"
    strategies: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=lambda: {"variable": "gamma", "grid": [1.0], "agent": 0})
    repetitions: int = 1
    seed: int = 0
    ffl: dict = field(default_factory=dict)
    dp: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    oracle: Optional[bool] = None
    output: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.scenario, dict) or "kind" not in self.scenario:
            raise ConfigError("scenario must be an object with a 'kind' field")
        if self.mechanism not in MECHANISMS:
            raise ConfigError(f"mechanism must be one of {MECHANISMS}")
        var = self.sweep.get("variable")
        if var not in SWEEP_VARS:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARS}")
        if not self.sweep.get("grid"):
            raise ConfigError("sweep grid must be nonempty")
        if int(self.repetitions) < 1:
            raise ConfigError("repetitions must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}


def _strategy(d: dict) -> AgentStrategy:
    kind = d.get("kind", "faithful")
    if kind == "amplify":
        return AgentStrategy("amplify", gamma=float(d["gamma"]))
    if kind in ("faithful", "opt_out"):
        return AgentStrategy(kind)
    raise ConfigError(f"strategy kind {kind!r} cannot be configured from JSON")


def _point_setup(cfg: ExperimentConfig, value, rep: int):
    """Scenario spec, strategies and engine settings for one grid point."""
    var = cfg.sweep["variable"]
    scen = dict(cfg.scenario)
    scen["seed"] = derive_seed(cfg.seed, "rep", rep)
    ffl, dp = dict(cfg.ffl), dict(cfg.dp)
    strat = {int(k): _strategy(v) for k, v in cfg.strategies.items()}
    if var == "gamma":
        strat[int(cfg.sweep.get("agent", 0))] = AgentStrategy("amplify", gamma=float(value))
    elif var == "n":
        kind = scen["kind"]
        key = {"two_agent_regression": "n1", "label_skew": "n_train", "ridge": "sizes"}[kind]
        scen[key] = int(value)
    elif var == "delta":
        if scen["kind"] != "label_skew":
            raise ConfigError("delta sweeps need a label_skew scenario")
        scen["delta"] = float(value)
    elif var == "alpha":
        dp["alpha"] = float(value)
    elif var == "L":
        dp["num_clusters"] = int(value)
    elif var == "eta2":
        ffl["eta2"] = dp["eta2"] = float(value)
    return scen, strat, ffl, dp


def _run_point(cfg: ExperimentConfig, i: int, value, rep: int) -> list:
    scen_spec, strat_map, ffl, dp = _point_setup(cfg, value, rep)
    scen, tests = build_scenario(scen_spec)
    tests = tests or None
    K = scen.K
    strategies = [strat_map.get(k, FAITHFUL) for k in range(K)]
    l_g = scen.loss.smoothness(max_feature_sq_norm(scen))
    use_oracle = cfg.oracle if cfg.oracle is not None else scen_spec["kind"] != "label_skew"
    oracle = vcg_payments_exact(scen) if use_oracle else None
    w_opt = oracle.w_global if oracle else None
    mech = cfg.mechanism
    payments = np.zeros(K)
    if mech == "local":
        w_out = [local_learning(ds, scen.loss, tol=float(ffl.get("local_tol", 1e-8)))
                 for ds in scen.datasets]
    else:
        fcfg = FflConfig(eta1=ffl.get("eta1") or 1.0 / l_g,
                         eta2=ffl.get("eta2") or 1.0 / (K * l_g),
                         t1=int(ffl.get("t1", 500)), t2=int(ffl.get("t2", 20)),
                         epsilon=float(ffl.get("epsilon", 0.1)),
                         phase2_cap=ffl.get("phase2_cap"), grad_bound=ffl.get("l_f"))
        if mech == "ffl":
            run = run_ffl(scen, strategies, fcfg)
        elif mech == "fedavg_manipulated":
            run = run_fedavg(scen, strategies, fcfg)
        else:
            dcfg = DpConfig(alpha=float(dp.get("alpha", 1.0)), beta=float(dp.get("beta", 0.01)),
                            num_clusters=int(dp.get("num_clusters") or K),
                            eta1=dp.get("eta1") or 1.0 / l_g, eta2=dp.get("eta2") or 1.0 / l_g,
                            t1=int(dp.get("t1", 80)), t2=int(dp.get("t2", 20)),
                            epsilon=float(dp.get("epsilon", 0.1)),
                            seed=derive_seed(cfg.seed, "grid", i, "rep", rep),
                            l_f=float(dp.get("l_f", 10.0)),
                            noise_multiplier=float(dp.get("noise_multiplier", 1.0)),
                            clip=bool(dp.get("clip", False)))
            run = run_dpffl(scen, strategies, dcfg)
        if run.K != K:
            raise ConfigError("opt-out strategies are not supported in experiment sweeps")
        w_out, payments = run.w_star, run.payments
    ev = evaluate_outcome(scen, w_out, tests, payments)
    oracle_loss = scen.global_loss(w_opt) if w_opt is not None else None
    test_loss = ev.get("per_agent_test_loss")
    acc = ev.get("per_agent_accuracy")
    bound_name, bound_val = "", None
    if cfg.sweep["variable"] == "gamma" and scen.known_distributions is not None:
        b = cfg.bounds
        k = int(cfg.sweep.get("agent", 0))
        consts = certify_constants(scen.loss, scen, float(b.get("l_f", 10.0)), w_opt=w_opt)
        bound_name = "prop3"
        bound_val = bound_prop3(consts, scen, k, float(value), float(b.get("delta", 0.01))).value
    rows = []
    glob = ev["global_loss"]
    for k in range(K):
        vcg = oracle.payments[k] if oracle else None
        rows.append({
            "agent": k, "payment": payments[k], "train_loss": ev["per_agent_loss"][k],
            "test_loss": None if test_loss is None else test_loss[k],
            "overall_cost": (ev["overall_test"] if tests else ev["overall_train"])[k],
            "accuracy": None if acc is None else acc[k],
            "vcg_payment": vcg,
            "payment_error": None if vcg is None or mech in ("local", "fedavg_manipulated")
            else abs(payments[k] - vcg),
            "bound_name": bound_name if k == int(cfg.sweep.get("agent", 0)) else "",
            "bound_value": bound_val if k == int(cfg.sweep.get("agent", 0)) else None,
        })
    rows.append({"agent": "all", "payment": float(np.sum(payments)),
                 "train_loss": glob, "accuracy": ev.get("weighted_accuracy"),
                 "overall_cost": float(np.mean([r["overall_cost"] for r in rows]))})
    for r in rows:
        r.update(global_loss=glob, oracle_global_loss=oracle_loss,
                 scenario_seed=scen_spec["seed"], status="ok")
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> dict:
    """Run every (grid point, repetition); write results.csv and manifest.json."""
    out = Path(out_dir or cfg.output or "results")
    out.mkdir(parents=True, exist_ok=True)
    grid = list(cfg.sweep["grid"])
    jobs = [(i, v, r) for i, v in enumerate(grid) for r in range(int(cfg.repetitions))]
    started = time.time()

    def job(args):
        i, v, r = args
        base = {"grid_index": i, "sweep_variable": cfg.sweep["variable"], "sweep_value": v,
                "repetition": r, "mechanism": cfg.mechanism}
        try:
            rows = _run_point(cfg, i, v, r)
            return [{**base, **row} for row in rows], None
        except Exception as exc:  # one failing point must not stop the sweep
            err = {"grid_index": i, "sweep_value": v, "repetition": r,
                   "error": f"{type(exc).__name__}: {exc}",
                   "traceback": traceback.format_exc(limit=3)}
            return [{**base, "agent": "all", "status": "error"}], err

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(job, jobs))
    else:
        results = [job(j) for j in jobs]
    with open(out / "results.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        wr.writeheader()
        for rows, _ in results:
            for row in rows:
                wr.writerow({k: _fmt(row.get(k)) for k in RESULT_FIELDS})
    errors = [e for _, e in results if e]
    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "seeds": {"master": cfg.seed,
                  "scenario": {r: derive_seed(cfg.seed, "rep", r) for r in range(int(cfg.repetitions))}},
        "points": len(jobs),
        "errors": errors,
        "timing": {"wall_seconds": time.time() - started, "finished": time.strftime("%Y-%m-%dT%H:%M:%S")},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return manifest
