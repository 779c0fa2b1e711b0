"""Effective sample size of importance-weighted (goal, t) groups."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.errors import EmptyBatchError
from src.hindsight.relabel import HindsightBatch


@dataclass(frozen=True)
class ESSReport:
    mean_ess: float
    mean_group_size: float
    n_groups: int

    @property
    def ratio(self) -> float:
        return self.mean_ess / self.mean_group_size


def group_ess(weights: np.ndarray) -> float:
    """ESS = (Σw)² / Σw², i.e. 1/Σw̄² for the normalised weights."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        raise EmptyBatchError("ESS of an empty group")
    w = weights / weights.max()
    return float(w.sum() ** 2 / np.square(w).sum())


def ess_report(batch: HindsightBatch) -> ESSReport:
    group, n_groups = batch.group_index()
    # raw log-weights so the result is independent of whether WIS was applied
    peak = np.full(n_groups, -np.inf)
    np.maximum.at(peak, group, batch.log_w)
    scaled = np.exp(batch.log_w - peak[group])
    total = np.zeros(n_groups)
    squares = np.zeros(n_groups)
    np.add.at(total, group, scaled)
    np.add.at(squares, group, np.square(scaled))
    sizes = np.bincount(group, minlength=n_groups)
    return ESSReport(
        mean_ess=float(np.mean(np.square(total) / squares)),
        mean_group_size=float(np.mean(sizes)),
        n_groups=n_groups,
    )


def effective_sample_size(batch: HindsightBatch) -> float:
    """Per-group ESS averaged over all (goal, t) groups."""
    return ess_report(batch).mean_ess
