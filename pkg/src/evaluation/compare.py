"""Cross-run comparison: median final success per group and a rank test.

Each argument is a run directory written by ``htrpo train`` (it holds
``metrics.csv``).  Runs are grouped by the ``--a`` / ``--b`` flags,
typically the same seeds under two variants or ablation settings.

Usage:
    htrpo-compare --a runs/bitflip-8_htrpo_s* --b runs/bitflip-8_trpo_s*
    htrpo-compare --a ... --b ... --budget 200000
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from dotenv import load_dotenv
from scipy import stats

from src.errors import ConfigurationError
from src.logging_config import setup_logging
from src.paths import METRICS_FILENAME
from src.session.logger import read_metrics

logger = logging.getLogger(__name__)


def success_at(rows: Sequence[dict[str, float]], budget: float | None = None) -> float:
    """Success rate of the last row within *budget* env steps (the last row if None)."""
    eligible = [r for r in rows if budget is None or r["env_steps"] <= budget]
    if not eligible:
        return math.nan
    return float(eligible[-1]["success_rate"])


def load_group(run_dirs: Sequence[Path], budget: float | None = None) -> list[float]:
    scores = []
    for run_dir in run_dirs:
        path = run_dir / METRICS_FILENAME
        if not path.is_file():
            raise ConfigurationError(f"{run_dir} has no {METRICS_FILENAME}")
        scores.append(success_at(read_metrics(path), budget))
    return scores


@dataclass(frozen=True)
class ComparisonReport:
    n_a: int
    n_b: int
    median_a: float
    median_b: float
    u_statistic: float
    p_value: float

    @property
    def margin(self) -> float:
        return self.median_a - self.median_b


def compare_groups(a: Sequence[float], b: Sequence[float]) -> ComparisonReport:
    """Medians and a two-sided Mann–Whitney U test of group *a* against *b*."""
    a_arr = np.asarray([x for x in a if not math.isnan(x)], dtype=np.float64)
    b_arr = np.asarray([x for x in b if not math.isnan(x)], dtype=np.float64)
    if a_arr.size == 0 or b_arr.size == 0:
        raise ConfigurationError("each group needs at least one run with metrics in budget")
    result = stats.mannwhitneyu(a_arr, b_arr, alternative="two-sided")
    return ComparisonReport(
        n_a=int(a_arr.size),
        n_b=int(b_arr.size),
        median_a=float(np.median(a_arr)),
        median_b=float(np.median(b_arr)),
        u_statistic=float(result.statistic),
        p_value=float(result.pvalue),
    )


def run_compare(
    group_a: Sequence[Path], group_b: Sequence[Path], budget: float | None = None
) -> ComparisonReport:
    return compare_groups(load_group(group_a, budget), load_group(group_b, budget))


def format_report(report: ComparisonReport, budget: float | None = None) -> str:
    at = "final" if budget is None else f"at {budget:g} env steps"
    lines = [
        "═" * 60,
        f"  SUCCESS RATE COMPARISON ({at})",
        "═" * 60,
        f"  group A  runs {report.n_a:3d}  median {report.median_a:.3f}",
        f"  group B  runs {report.n_b:3d}  median {report.median_b:.3f}",
        f"  margin A − B            : {report.margin:+.3f}",
        f"  Mann–Whitney U          : {report.u_statistic:.1f}   (p = {report.p_value:.4f})",
        "═" * 60,
    ]
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    setup_logging()
    parser = argparse.ArgumentParser(prog="htrpo-compare", description=__doc__.splitlines()[0])
    parser.add_argument("--a", nargs="+", type=Path, required=True, help="run directories, group A")
    parser.add_argument("--b", nargs="+", type=Path, required=True, help="run directories, group B")
    parser.add_argument("--budget", type=float, default=None, help="compare at this env-step count")
    args = parser.parse_args(argv)
    logger.info("comparing %d run(s) against %d run(s)", len(args.a), len(args.b))
    try:
        report = run_compare(args.a, args.b, args.budget)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(format_report(report, args.budget))
    return 0


if __name__ == "__main__":
    sys.exit(main())
