"""Centralized path constants and output-directory helpers.

Every file the tool writes (metrics, checkpoints, diagnostics) is
resolved through here so that nothing lands outside the run directory.
"""

from __future__ import annotations

from pathlib import Path

from src.errors import ConfigurationError

PROJECT_ROOT: Path = Path(__file__).resolve().parents[1]

METRICS_FILENAME = "metrics.csv"
CONFIG_FILENAME = "config.txt"
RUN_SUMMARY_FILENAME = "run.json"


def default_output_dir(run_name: str) -> Path:
    """Return ``$HTRPO_OUTPUT_DIR/<run_name>`` (relative to the CWD)."""
    from src import settings

    return Path(settings.OUTPUT_DIR) / run_name


def inside(out_dir: Path, filename: str) -> Path:
    """Resolve *filename* inside *out_dir*, refusing anything that escapes it."""
    root = out_dir.resolve()
    target = (root / filename).resolve()
    if target.parent != root:
        raise ConfigurationError(f"refusing to write {filename!r} outside {root}")
    return target


def checkpoint_path(out_dir: Path, iteration: int) -> Path:
    return inside(out_dir, f"ckpt_{iteration}.bin")


def diagnostics_path(out_dir: Path, suite: str) -> Path:
    return inside(out_dir, f"diag_{suite}.txt")
