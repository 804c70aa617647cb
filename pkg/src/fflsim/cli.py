"""Command line entry point: ``fflsim run | verify | plan``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .model import ConstantsCertificate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("fflsim")


def _constants(args) -> ConstantsCertificate:
    return ConstantsCertificate(mu=args.mu, l_g=args.l_g, l_ell=args.l_ell, l_f=args.l_f)


def cmd_run(args) -> int:
    from .experiment import ConfigError, ExperimentConfig, run_experiment
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = run_experiment(cfg, args.out, threads=args.threads)
    out = args.out or cfg.output or "results"
    print(f"{manifest['points']} points written to {out}; {len(manifest['errors'])} errors")
    return EXIT_FAIL if manifest["errors"] else EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import verify_suite
    results = verify_suite(args.criteria or None)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_plan(args) -> int:
    from .dpffl import plan_L_theorem3, plan_tradeoff_prop9
    from .ffl import InfeasiblePlanError, plan_hyperparams_theorem1
    cc = _constants(args)
    try:
        if args.theorem == "1":
            plan = plan_hyperparams_theorem1(cc, args.K, args.epsilon, delta=args.delta,
                                             G_estimate=args.G)
            out = {"t1": plan.config.t1, "t2": plan.config.t2, "eta1": plan.config.eta1,
                   "eta2": plan.config.eta2, "t2_interval": [plan.t2_lower, plan.t2_upper],
                   "kt2_bound": plan.kt2_bound}
        elif args.theorem == "3":
            out = {"L": plan_L_theorem3(cc, args.K, args.epsilon)}
        else:
            eta2 = args.eta2 if args.eta2 is not None else 1.0 / ((args.K - 1) * cc.l_g)
            out = plan_tradeoff_prop9(cc, args.K, args.n_min, args.alpha, args.beta, eta2,
                                      args.epsilon, args.d).to_dict()
            out["eta2"] = eta2
    except (ValueError, InfeasiblePlanError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fflsim", description="Faithful federated learning simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a JSON-configured experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory (overrides config)")
    run.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    run.add_argument("--threads", type=int, default=1)
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("criteria", nargs="*", type=int, help="subset of criterion numbers")
    ver.set_defaults(func=cmd_verify)

    plan = sub.add_parser("plan", help="print planner output")
    plan.add_argument("--theorem", choices=["1", "3", "prop9"], required=True)
    plan.add_argument("--mu", type=float, required=True)
    plan.add_argument("--l-g", type=float, required=True)
    plan.add_argument("--l-ell", type=float, default=1.0)
    plan.add_argument("--l-f", type=float, required=True)
    plan.add_argument("--K", type=int, required=True)
    plan.add_argument("--epsilon", type=float, required=True)
    plan.add_argument("--delta", type=float, default=0.05)
    plan.add_argument("--G", type=float, default=1.0, help="estimate of |w0 - w_opt|")
    plan.add_argument("--n-min", type=int, default=100)
    plan.add_argument("--alpha", type=float, default=1.0)
    plan.add_argument("--beta", type=float, default=0.01)
    plan.add_argument("--eta2", type=float, default=None)
    plan.add_argument("--d", type=int, default=2)
    plan.set_defaults(func=cmd_plan)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
