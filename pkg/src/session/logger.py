"""Run logger: metrics CSV, config copy and a JSON run summary.

Captures everything needed to compare runs after the fact:
  - Per-iteration: one metrics row, appended and flushed as soon as it
    is recorded so a crashed run keeps its history
  - Run-level: start/finish timestamps, iterations, rejected steps,
    final success rate

Files (all inside the run directory):
  metrics.csv   columns in ``METRICS_COLUMNS`` order
  config.txt    the effective configuration, ``key = value``
  run.json      the summary written by ``finish()``
"""

from __future__ import annotations

import csv
import json
import math
from datetime import UTC, datetime
from pathlib import Path
from typing import IO, Any

from src.models.config import ExperimentConfig, save_config
from src.models.state import METRICS_COLUMNS
from src.paths import CONFIG_FILENAME, METRICS_FILENAME, RUN_SUMMARY_FILENAME, inside


class RunLogger:
    """Accumulates per-iteration metrics for one run.

    Usage:
        with RunLogger(out_dir, config) as run_log:
            for row in ...:
                run_log.log_iteration(row)
            run_log.finish()
    """

    def __init__(self, out_dir: Path, config: ExperimentConfig) -> None:
        self.out_dir = out_dir
        self.config = config
        self.started_at = datetime.now(UTC).isoformat()
        self.completed_at: str | None = None
        self.rows: list[dict[str, Any]] = []

        out_dir.mkdir(parents=True, exist_ok=True)
        save_config(config, inside(out_dir, CONFIG_FILENAME))
        self.metrics_path = inside(out_dir, METRICS_FILENAME)
        self._file: IO[str] | None = open(  # noqa: SIM115
            self.metrics_path, "w", encoding="utf-8", newline=""
        )
        self._writer = csv.DictWriter(self._file, fieldnames=list(METRICS_COLUMNS))
        self._writer.writeheader()
        self._file.flush()

    def __enter__(self) -> RunLogger:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def log_iteration(self, row: dict[str, Any]) -> None:
        """Append one metrics row; extra keys are rejected, missing ones are an error."""
        if self._file is None:
            raise ValueError("run logger is closed")
        missing = [c for c in METRICS_COLUMNS if c not in row]
        if missing:
            raise KeyError(f"metrics row is missing {missing}")
        self._writer.writerow({c: row[c] for c in METRICS_COLUMNS})
        self._file.flush()
        self.rows.append(dict(row))

    @property
    def rejected_steps(self) -> int:
        return sum(int(r["rejected"]) for r in self.rows)

    @property
    def final_success_rate(self) -> float:
        return float(self.rows[-1]["success_rate"]) if self.rows else math.nan

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_name": self.config.run_name,
            "env": self.config.env,
            "variant": self.config.variant.value,
            "seed": self.config.seed,
            "started_at": self.started_at,
            "completed_at": self.completed_at,
            "iterations": len(self.rows),
            "env_steps": int(self.rows[-1]["env_steps"]) if self.rows else 0,
            "rejected_steps": self.rejected_steps,
            "final_success_rate": self.final_success_rate,
        }

    def finish(self) -> Path:
        """Close the CSV and write ``run.json``."""
        self.close()
        self.completed_at = datetime.now(UTC).isoformat()
        path = inside(self.out_dir, RUN_SUMMARY_FILENAME)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    def summary(self) -> str:
        return (
            f"Run {self.config.run_name}: {len(self.rows)} iterations, "
            f"success={self.final_success_rate:.3f}, rejected={self.rejected_steps}"
        )


def read_metrics(path: str | Path) -> list[dict[str, float]]:
    """Load a metrics CSV back as a list of float-valued rows."""
    with open(path, encoding="utf-8", newline="") as f:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(f)]


def load_run_summary(path: str | Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        return json.load(f)
