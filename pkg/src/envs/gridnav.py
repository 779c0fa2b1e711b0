"""Discrete grid navigation.

The agent starts in cell (0, 0) of a ``size × size`` grid and must reach
a random goal cell.  Coordinates are normalised by ``size − 1`` so both
the observation and the goal live in [0, 1]².  With ``far_half`` the
goal is drawn from the columns ``x >= size // 2`` only.
"""

from __future__ import annotations

import numpy as np

from src.envs.base import DiscreteSpace, GoalEnv, GoalEnvSpec
from src.errors import ConfigurationError

DEFAULT_HORIZON = 26

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
_MOVES = {UP: (0, 1), DOWN: (0, -1), LEFT: (-1, 0), RIGHT: (1, 0)}


class GridNavEnv(GoalEnv):
    def __init__(
        self,
        size: int,
        seed: int = 0,
        *,
        far_half: bool = False,
        max_steps: int = DEFAULT_HORIZON,
    ) -> None:
        if size < 4:
            raise ConfigurationError(f"gridnav needs size >= 4, got {size}")
        self.size = size
        self.far_half = far_half
        self.env_id = f"gridnav:{size}" + (":far" if far_half else "")
        self.spec = GoalEnvSpec(
            obs_dim=2, goal_dim=2, action_space=DiscreteSpace(4), max_steps=max_steps
        )
        super().__init__(seed)

    def cell(self, x: int, y: int) -> np.ndarray:
        """Normalised coordinates of grid cell (x, y)."""
        return np.array([x, y], dtype=np.float64) / (self.size - 1)

    def position(self, obs: np.ndarray) -> tuple[int, int]:
        x, y = np.rint(np.asarray(obs) * (self.size - 1)).astype(int)
        return int(x), int(y)

    def _initial_obs(self) -> np.ndarray:
        return self.cell(0, 0)

    def _sample_goal(self, obs: np.ndarray) -> np.ndarray:
        low_x = self.size // 2 if self.far_half else 0
        start = self.position(obs)
        while True:
            gx = int(self._rng.integers(low_x, self.size))
            gy = int(self._rng.integers(0, self.size))
            if (gx, gy) != start:
                return self.cell(gx, gy)

    def _transition(self, obs: np.ndarray, action: int | np.ndarray) -> np.ndarray:
        x, y = self.position(obs)
        dx, dy = _MOVES[int(action)]
        x = min(max(x + dx, 0), self.size - 1)
        y = min(max(y + dy, 0), self.size - 1)
        return self.cell(x, y)

    def achieved_goal(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs, dtype=np.float64).copy()

    def goal_region_contains(self, goal: np.ndarray) -> bool | None:
        if not self.far_half:
            return None
        x, y = self.position(goal)
        on_grid = np.array_equal(self.cell(x, y), np.asarray(goal, dtype=np.float64))
        return on_grid and x >= self.size // 2 and 0 <= y < self.size

    def clone(self, seed: int) -> GridNavEnv:
        return GridNavEnv(
            self.size, seed, far_half=self.far_half, max_steps=self.spec.max_steps
        )
