"""Command-line experiment runner.

Subcommands: generate, train, evaluate, sweep, behavior, knee-vs-patient.
Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .cohort import CohortError
from .experiments import (cmd_behavior, cmd_evaluate, cmd_generate,
                          cmd_knee_vs_patient, cmd_sweep, cmd_train,
                          parse_config_file, resolve_config)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argument problems are validation errors
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", help="comma-separated seed list")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--feature-mode",
                        choices=["full", "no_imaging", "klg_onehot", "klg_probs"])
    parser.add_argument("--level", choices=["patient", "knee"])
    parser.add_argument("--epsilon-convention", choices=["intent", "literal"])
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--cohort-csv", help="load this cohort instead of generating")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--synthetic-n", type=int)
    parser.add_argument("--allow-boundary", action="store_true", default=None,
                        help="admit alpha=1.0 in reward grids")
    parser.add_argument("--tkr-cost-dollars", type=float,
                        help="derive c from a TKR cost in dollars")
    parser.add_argument("--mean-healthy-jsw-mm", type=float,
                        help="healthy JSW used with --tkr-cost-dollars (default 5)")
    parser.add_argument("--visit-cost-dollars", type=float,
                        help="derive lambda from a visit cost in dollars")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oasense",
                     description="Cost-aware follow-up scheduling experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic cohort CSV")
    _add_common(p)
    p.add_argument("--force", action="store_true", help="overwrite existing output")

    p = sub.add_parser("train", help="train Q-network policies, one per seed")
    _add_common(p)
    p.add_argument("--force", action="store_true")
    p.add_argument("--resume", action="store_true",
                   help="unsupported; present to fail loudly")

    p = sub.add_parser("evaluate", help="metric table for baselines and checkpoints")
    _add_common(p)
    p.add_argument("--checkpoint", action="append",
                   help="checkpoint file (repeatable); default: out/checkpoint_seed*.json")
    p.add_argument("--per-year", action="store_true")

    p = sub.add_parser("sweep", help="cost/reward parameter sweeps")
    _add_common(p)
    p.add_argument("kind", choices=["alpha-beta", "lambda", "c", "lambda-c"])

    p = sub.add_parser("behavior", help="follow-up counts by patient group")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--policy", choices=["nos", "ans", "bans"],
                   help="substitute a routine policy for the checkpoint")

    p = sub.add_parser("knee-vs-patient", help="knee-level vs patient-level agents")
    _add_common(p)
    return parser


def _overrides_from(args: argparse.Namespace) -> dict:
    level = args.level
    if level == "knee":
        level = "knee_left"  # knee-vs-patient trains both sides; single-knee runs default left
    overrides = {
        "seeds": tuple(int(s) for s in args.seed.split(",")) if args.seed else None,
        "out": args.out,
        "feature_mode": args.feature_mode,
        "level": level,
        "epsilon_convention": args.epsilon_convention,
        "jobs": args.jobs,
        "cohort_csv": args.cohort_csv,
        "epochs": args.epochs,
        "synthetic_n": args.synthetic_n,
        "allow_boundary": args.allow_boundary,
        "tkr_cost_dollars": args.tkr_cost_dollars,
        "mean_healthy_jsw_mm": args.mean_healthy_jsw_mm,
        "visit_cost_dollars": args.visit_cost_dollars,
    }
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        cfg = resolve_config(file_values, _overrides_from(args))
        if args.command == "generate":
            path = cmd_generate(cfg, force=args.force)
            print(path)
        elif args.command == "train":
            for path in cmd_train(cfg, force=args.force, resume=args.resume):
                print(path)
        elif args.command == "evaluate":
            for path in cmd_evaluate(cfg, checkpoints=args.checkpoint,
                                     per_year=args.per_year):
                print(path)
        elif args.command == "sweep":
            print(cmd_sweep(cfg, args.kind))
        elif args.command == "behavior":
            print(cmd_behavior(cfg, checkpoint=args.checkpoint,
                               policy_substitute=args.policy))
        elif args.command == "knee-vs-patient":
            for path in cmd_knee_vs_patient(cfg):
                print(path)
    except (ValueError, FileExistsError, CohortError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
