"""CLI entry-point: train, evaluate and run diagnostics.

Usage:
    htrpo train --env bitflip:8 --variant htrpo --seed 0
    htrpo eval runs/bitflip-8_htrpo_s0/ckpt_60.bin --env bitflip:8
    htrpo diag prop2 --out runs/diag

Exit codes: 0 on success, 1 on numeric failure or a failing diagnostic
suite, 2 on configuration or usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from src.errors import CheckpointIncompatibleError, ConfigurationError, HTRPOError, NumericError
from src.evaluation.suites import SUITES, run_diagnostics
from src.experiment import run_eval, run_train
from src.logging_config import setup_logging
from src.models.config import Variant, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

OVERRIDE_KEYS = (
    "env", "variant", "seed", "total_steps", "use_wis", "use_hgf", "n_goals", "max_kl", "gamma",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="htrpo", description="Hindsight trust-region policy optimisation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a policy")
    train.add_argument("--config", type=Path, help="key = value config file")
    train.add_argument("--env", help="bitflip:<k> | gridnav:<size>[:far] | pointreach:<tol>")
    train.add_argument("--variant", choices=[v.value for v in Variant])
    train.add_argument("--seed", type=int)
    train.add_argument("--steps", type=int, dest="total_steps", help="total environment steps")
    train.add_argument("--out", type=Path, help="run directory")
    train.add_argument("--no-wis", action="store_false", dest="use_wis", default=None)
    train.add_argument("--no-hgf", action="store_false", dest="use_hgf", default=None)
    train.add_argument("--goals", type=int, dest="n_goals", help="hindsight goals per iteration")
    train.add_argument("--max-kl", type=float, dest="max_kl")
    train.add_argument("--gamma", type=float)

    ev = sub.add_parser("eval", help="evaluate a saved policy")
    ev.add_argument("checkpoint", type=Path)
    ev.add_argument("--env", required=True)
    ev.add_argument("--episodes", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)

    diag = sub.add_parser("diag", help="run a diagnostic suite")
    diag.add_argument("suite", choices=[*SUITES, "all"])
    diag.add_argument("--out", type=Path, default=Path("diagnostics"))
    diag.add_argument("--seed", type=int, default=0)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {k: getattr(args, k) for k in OVERRIDE_KEYS}


def _train(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    run_log = run_train(config, args.out)
    print(run_log.summary())
    return EXIT_OK


def _eval(args: argparse.Namespace) -> int:
    if not args.checkpoint.is_file():
        raise ConfigurationError(f"checkpoint {args.checkpoint} not found")
    run_eval(args.checkpoint, args.env, args.episodes, args.seed)
    return EXIT_OK


def _diag(args: argparse.Namespace) -> int:
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    failed = []
    for suite in suites:
        report = run_diagnostics(suite, args.out, seed=args.seed)
        print(report.render(), end="")
        if not report.passed:
            failed.append(suite)
            for case in report.failures:
                print(f"  failing: {case}", file=sys.stderr)
    return EXIT_FAILURE if failed else EXIT_OK


COMMANDS = {"train": _train, "eval": _eval, "diag": _diag}


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, CheckpointIncompatibleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except HTRPOError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
