"""Continuous point reach.

A point mass starts at the origin of [−1, 1]² and moves by a clamped
velocity each step; success is being within ``tolerance`` of the goal.
"""

from __future__ import annotations

import numpy as np

from src.envs.base import BoxSpace, GoalEnv, GoalEnvSpec
from src.errors import ConfigurationError

MAX_SPEED = 0.2
HORIZON = 50


class PointReachEnv(GoalEnv):
    discrete_goals = False

    def __init__(self, tolerance: float, seed: int = 0) -> None:
        if not 0.0 < tolerance < 0.5:
            raise ConfigurationError(f"pointreach needs 0 < tolerance < 0.5, got {tolerance}")
        self.tolerance = float(tolerance)
        self.env_id = f"pointreach:{tolerance:g}"
        self.spec = GoalEnvSpec(
            obs_dim=2,
            goal_dim=2,
            action_space=BoxSpace(dim=2, low=-MAX_SPEED, high=MAX_SPEED),
            max_steps=HORIZON,
        )
        super().__init__(seed)

    def _initial_obs(self) -> np.ndarray:
        return np.zeros(2, dtype=np.float64)

    def _sample_goal(self, obs: np.ndarray) -> np.ndarray:
        while True:
            goal = self._rng.uniform(-1.0, 1.0, size=2)
            if np.linalg.norm(goal - obs) > self.tolerance:
                return goal

    def _transition(self, obs: np.ndarray, action: int | np.ndarray) -> np.ndarray:
        return np.clip(obs + np.asarray(action, dtype=np.float64), -1.0, 1.0)

    def achieved_goal(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs, dtype=np.float64).copy()

    def goal_region_contains(self, goal: np.ndarray) -> bool | None:
        goal = np.asarray(goal, dtype=np.float64)
        inside = bool(np.all(np.abs(goal) <= 1.0))
        return inside and float(np.linalg.norm(goal)) > self.tolerance

    def clone(self, seed: int) -> PointReachEnv:
        return PointReachEnv(self.tolerance, seed)
