"""k-bit flipping.

The agent holds a k-bit array starting at all zeros and must turn it
into a random target array; action ``i`` flips bit ``i``.  The horizon
is k steps, enough to reach any target.
"""

from __future__ import annotations

import numpy as np

from src.envs.base import DiscreteSpace, GoalEnv, GoalEnvSpec
from src.errors import ConfigurationError

MIN_BITS = 4
MAX_BITS = 100


class BitFlipEnv(GoalEnv):
    def __init__(self, k: int, seed: int = 0) -> None:
        if not MIN_BITS <= k <= MAX_BITS:
            raise ConfigurationError(f"bitflip needs {MIN_BITS} <= k <= {MAX_BITS}, got {k}")
        self.k = k
        self.env_id = f"bitflip:{k}"
        self.spec = GoalEnvSpec(
            obs_dim=k, goal_dim=k, action_space=DiscreteSpace(k), max_steps=k
        )
        super().__init__(seed)

    def _initial_obs(self) -> np.ndarray:
        return np.zeros(self.k, dtype=np.float64)

    def _sample_goal(self, obs: np.ndarray) -> np.ndarray:
        # all-zeros target would be solved before the first step
        while True:
            target = self._rng.integers(0, 2, size=self.k).astype(np.float64)
            if target.any():
                return target

    def _transition(self, obs: np.ndarray, action: int | np.ndarray) -> np.ndarray:
        nxt = obs.copy()
        i = int(action)
        nxt[i] = 1.0 - nxt[i]
        return nxt

    def achieved_goal(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs, dtype=np.float64).copy()

    def clone(self, seed: int) -> BitFlipEnv:
        return BitFlipEnv(self.k, seed)
