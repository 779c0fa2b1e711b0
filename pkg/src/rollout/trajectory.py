"""Trajectory and batch-buffer containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src.envs.base import Step, policy_input
from src.errors import EmptyBatchError, InputShapeError, NumericError


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One whole episode plus the log-probs of its actions under the original goal."""

    steps: tuple[Step, ...]
    original_goal: np.ndarray
    logp_old_g: np.ndarray

    def __post_init__(self) -> None:
        if not self.steps:
            raise EmptyBatchError("trajectory has no steps")
        if self.logp_old_g.shape != (len(self.steps),):
            raise InputShapeError(
                f"{len(self.steps)} steps but {self.logp_old_g.shape} log-probs"
            )
        if not np.all(np.isfinite(self.logp_old_g)):
            raise NumericError("non-finite log-prob stored in trajectory")
        if any(s.done for s in self.steps[:-1]) or not self.steps[-1].done:
            raise InputShapeError("done must be set on the final step only")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def initial_obs(self) -> np.ndarray:
        return self.steps[0].obs

    @property
    def success(self) -> bool:
        return self.steps[-1].success

    @property
    def total_reward(self) -> float:
        return float(sum(s.reward for s in self.steps))

    # ── Column views ──────────────────────────────────────────────────

    def observations(self) -> np.ndarray:
        return np.stack([s.obs for s in self.steps])

    def next_observations(self) -> np.ndarray:
        return np.stack([s.next_obs for s in self.steps])

    def achieved_goals(self) -> np.ndarray:
        return np.stack([s.achieved_goal for s in self.steps])

    def actions(self) -> np.ndarray:
        return np.stack([np.asarray(s.action) for s in self.steps])

    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps], dtype=np.float64)

    def states(self, goal: np.ndarray | None = None) -> np.ndarray:
        """Policy inputs for every step, conditioned on *goal* (default: original)."""
        goal = self.original_goal if goal is None else goal
        return policy_input(self.observations(), goal)

    def next_states(self, goal: np.ndarray | None = None) -> np.ndarray:
        goal = self.original_goal if goal is None else goal
        return policy_input(self.next_observations(), goal)


@dataclass(frozen=True)
class BatchBuffer:
    """Whole trajectories collected in one iteration (cleared every iteration)."""

    trajectories: tuple[Trajectory, ...]
    capacity: int
    max_steps: int = field(default=1)
    discarded_steps: int = 0

    def __post_init__(self) -> None:
        if self.discarded_steps < 0:
            raise InputShapeError("discarded_steps must be >= 0")
        if self.total_steps > self.capacity + self.max_steps - 1:
            raise InputShapeError(
                f"buffer holds {self.total_steps} steps, more than capacity "
                f"{self.capacity} plus one partial episode"
            )

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def total_steps(self) -> int:
        """Steps held in the buffer (relabeled data is never counted)."""
        return sum(len(t) for t in self.trajectories)

    @property
    def env_steps(self) -> int:
        """Environment steps actually taken, including episodes past the batch cut."""
        return self.total_steps + self.discarded_steps

    @property
    def success_rate(self) -> float:
        if not self.trajectories:
            return 0.0
        return float(np.mean([t.success for t in self.trajectories]))

    @property
    def mean_return(self) -> float:
        if not self.trajectories:
            return 0.0
        return float(np.mean([t.total_reward for t in self.trajectories]))
