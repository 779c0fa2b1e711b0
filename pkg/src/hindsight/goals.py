"""Hindsight goal sets and Hindsight Goal Filtering.

HGF picks hindsight goals that (a) look like goals the task actually
asks for and (b) are spread out.  Candidates are the achieved goals of
the buffer; the valid ones are those that also lie in the original goal
region.  With at least one valid candidate, selection is a greedy
max-min walk over the valid set starting from a random seed goal.
Without any, the achieved goals closest to the original goals win.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from src.envs.base import GoalEnv
from src.errors import ConfigurationError, InputShapeError, NoGoalsError
from src.rollout.trajectory import BatchBuffer

logger = logging.getLogger(__name__)

DEFAULT_METRIC = "euclidean"


@dataclass(frozen=True, eq=False)
class GoalSets:
    achieved: np.ndarray
    original: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self) -> None:
        if self.valid_mask.shape != (self.achieved.shape[0],):
            raise InputShapeError("valid_mask must flag every achieved goal")

    @property
    def valid(self) -> np.ndarray:
        return self.achieved[self.valid_mask]


def deduplicate(goals: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
    """Drop goals equal (within *tolerance*) to an earlier goal; keeps first-seen order."""
    goals = np.atleast_2d(np.asarray(goals, dtype=np.float64))
    if goals.shape[0] == 0:
        return goals
    tree = cKDTree(goals)
    removed = np.zeros(goals.shape[0], dtype=bool)
    keep: list[int] = []
    for i in range(goals.shape[0]):
        if removed[i]:
            continue
        keep.append(i)
        removed[tree.query_ball_point(goals[i], r=tolerance)] = True
    return goals[keep]


def membership(candidates: np.ndarray, reference: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
    """Boolean mask: which *candidates* lie within *tolerance* of some *reference* goal."""
    if reference.shape[0] == 0:
        return np.zeros(candidates.shape[0], dtype=bool)
    dist, _ = cKDTree(reference).query(candidates, k=1)
    return np.asarray(dist <= tolerance, dtype=bool)


def build_goal_sets(buffer: BatchBuffer, env: GoalEnv) -> GoalSets:
    """Achieved, original and valid goal sets of one buffer."""
    if not buffer.trajectories:
        raise NoGoalsError("empty buffer has no achieved goals")
    tol = 0.0 if env.discrete_goals else env.tolerance
    achieved = deduplicate(np.concatenate([t.achieved_goals() for t in buffer.trajectories]), tol)
    original = deduplicate(np.stack([t.original_goal for t in buffer.trajectories]), tol)

    verdicts = [env.goal_region_contains(g) for g in achieved]
    if all(v is not None for v in verdicts):
        valid = np.array(verdicts, dtype=bool)
    else:
        valid = membership(achieved, original, tol)
    return GoalSets(achieved=achieved, original=original, valid_mask=valid)


def hindsight_goal_filter(
    achieved: np.ndarray,
    original: np.ndarray,
    n: int,
    rng: np.random.Generator,
    *,
    valid_mask: np.ndarray | None = None,
    metric: str = DEFAULT_METRIC,
    first: int | None = None,
) -> np.ndarray:
    """Select up to *n* hindsight goals by max-min distance.

    *valid_mask* flags achieved goals inside the original goal region;
    by default a goal is valid when it equals some original goal.
    *first* fixes the seed goal (an index into the valid goals).
    """
    achieved = np.atleast_2d(np.asarray(achieved, dtype=np.float64))
    original = np.atleast_2d(np.asarray(original, dtype=np.float64))
    if achieved.shape[0] == 0:
        raise NoGoalsError("achieved goal set is empty")
    if n < 1:
        raise ConfigurationError("number of hindsight goals must be >= 1")
    if valid_mask is None:
        valid_mask = membership(achieved, original)

    valid = achieved[valid_mask]
    if valid.shape[0] == 0:
        if original.shape[0] == 0:
            raise NoGoalsError("no original goals to measure achieved goals against")
        to_region = cdist(achieved, original, metric=metric).min(axis=1)
        order = np.argsort(to_region, kind="stable")[: min(n, achieved.shape[0])]
        logger.debug("no valid hindsight goals; taking %d nearest to the goal region", len(order))
        return achieved[order]

    count = min(n, valid.shape[0])
    seed_idx = int(rng.integers(valid.shape[0])) if first is None else first
    if not 0 <= seed_idx < valid.shape[0]:
        raise ConfigurationError(f"seed goal index {seed_idx} outside the valid set")

    selected = [seed_idx]
    nearest = cdist(valid, valid[[seed_idx]], metric=metric).ravel()
    nearest[seed_idx] = -np.inf
    while len(selected) < count:
        j = int(np.argmax(nearest))
        selected.append(j)
        nearest = np.minimum(nearest, cdist(valid, valid[[j]], metric=metric).ravel())
        nearest[selected] = -np.inf
    return valid[selected]


def sample_hindsight_goals(
    goal_sets: GoalSets,
    n: int,
    rng: np.random.Generator,
    *,
    use_hgf: bool = True,
    metric: str = DEFAULT_METRIC,
) -> np.ndarray:
    """HGF selection, or *n* distinct achieved goals drawn uniformly at random."""
    if use_hgf:
        return hindsight_goal_filter(
            goal_sets.achieved,
            goal_sets.original,
            n,
            rng,
            valid_mask=goal_sets.valid_mask,
            metric=metric,
        )
    pool = goal_sets.achieved.shape[0]
    if pool == 0:
        raise NoGoalsError("achieved goal set is empty")
    picks = rng.choice(pool, size=min(n, pool), replace=False)
    return goal_sets.achieved[np.sort(picks)]
