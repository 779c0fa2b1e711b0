"""Goal-conditioned sparse-reward environment interface.

Every environment separates a goal-free observation from the desired
goal; the policy input is always ``concat(observation, goal)`` so that
hindsight relabeling only has to swap the goal half.

Rewards are purely sparse: ``success_reward`` on the step where the
achieved goal matches the desired goal, 0 otherwise.  Episodes end at
the first success or after ``max_steps`` steps.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from src.errors import ActionRangeError, ConfigurationError, InputShapeError, NumericError
from src.settings import SUCCESS_REWARD


@dataclass(frozen=True)
class DiscreteSpace:
    n: int


@dataclass(frozen=True)
class BoxSpace:
    dim: int
    low: float
    high: float


ActionSpace = DiscreteSpace | BoxSpace


@dataclass(frozen=True)
class GoalEnvSpec:
    obs_dim: int
    goal_dim: int
    action_space: ActionSpace
    max_steps: int
    success_reward: float = SUCCESS_REWARD

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")
        if isinstance(self.action_space, DiscreteSpace) and self.action_space.n < 2:
            raise ConfigurationError("discrete action spaces need n >= 2")

    @property
    def state_dim(self) -> int:
        """Width of the policy input (observation ∥ goal)."""
        return self.obs_dim + self.goal_dim

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.action_space, DiscreteSpace)


def policy_input(obs: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Concatenate observation(s) and goal(s) along the last axis."""
    obs = np.asarray(obs, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    if obs.ndim == 2 and goal.ndim == 1:
        goal = np.broadcast_to(goal, (obs.shape[0], goal.shape[0]))
    return np.concatenate([obs, goal], axis=-1)


@dataclass(frozen=True)
class Step:
    obs: np.ndarray
    action: int | np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool
    achieved_goal: np.ndarray
    desired_goal: np.ndarray
    success: bool = field(default=False)

    @property
    def state(self) -> np.ndarray:
        return policy_input(self.obs, self.desired_goal)

    @property
    def next_state(self) -> np.ndarray:
        return policy_input(self.next_obs, self.desired_goal)


class GoalEnv(ABC):
    """Single-context environment: owns its RNG and episode state."""

    spec: GoalEnvSpec
    env_id: str
    # Discrete goals match exactly; continuous goals within ``tolerance``.
    discrete_goals: bool = True
    tolerance: float = 0.0

    def __init__(self, seed: int = 0) -> None:
        self._seed = seed
        self._rng = np.random.default_rng(seed)
        self._obs: np.ndarray | None = None
        self._goal: np.ndarray | None = None
        self._t = 0

    # ── Task definition (subclass hooks) ──────────────────────────────

    @abstractmethod
    def _initial_obs(self) -> np.ndarray: ...

    @abstractmethod
    def _sample_goal(self, obs: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _transition(self, obs: np.ndarray, action: int | np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def achieved_goal(self, obs: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def clone(self, seed: int) -> GoalEnv:
        """A fresh instance of the same task with its own RNG stream."""

    def goal_region_contains(self, goal: np.ndarray) -> bool | None:
        """Whether *goal* lies in the support of the desired-goal sampler.

        ``None`` means the task offers no such predicate and callers fall
        back to membership among collected original goals.
        """
        return None

    # ── Goal tests ────────────────────────────────────────────────────

    def success_mask(self, achieved: np.ndarray, desired: np.ndarray) -> np.ndarray:
        """Vectorised goal test over rows of *achieved* (and *desired*)."""
        achieved = np.atleast_2d(np.asarray(achieved, dtype=np.float64))
        desired = np.asarray(desired, dtype=np.float64)
        if achieved.shape[-1] != self.spec.goal_dim or desired.shape[-1] != self.spec.goal_dim:
            raise InputShapeError(
                f"goals must have dimension {self.spec.goal_dim}, "
                f"got {achieved.shape[-1]} and {desired.shape[-1]}"
            )
        if self.discrete_goals:
            return np.all(achieved == desired, axis=-1)
        return np.linalg.norm(achieved - desired, axis=-1) <= self.tolerance

    def goal_matches(self, achieved: np.ndarray, desired: np.ndarray) -> bool:
        return bool(self.success_mask(achieved, desired)[0])

    def compute_reward(
        self, achieved: np.ndarray, desired: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Return (rewards, success) arrays for rows of *achieved*."""
        success = self.success_mask(achieved, desired)
        return np.where(success, self.spec.success_reward, 0.0), success

    # ── Episode control ───────────────────────────────────────────────

    def seed(self, seed: int) -> None:
        self._seed = seed
        self._rng = np.random.default_rng(seed)

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        """Start an episode; returns (observation, desired goal)."""
        obs = self._initial_obs()
        return self.reset_to(obs, self._sample_goal(obs))

    def reset_to(self, obs: np.ndarray, goal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Start an episode from an explicit observation and goal (used by replay)."""
        obs = np.asarray(obs, dtype=np.float64).copy()
        goal = np.asarray(goal, dtype=np.float64).copy()
        if obs.shape != (self.spec.obs_dim,) or goal.shape != (self.spec.goal_dim,):
            raise InputShapeError("observation or goal has the wrong shape for this task")
        self._obs, self._goal, self._t = obs, goal, 0
        return obs.copy(), goal.copy()

    def step(self, action: int | np.ndarray) -> Step:
        if self._obs is None or self._goal is None:
            raise ConfigurationError("call reset() before step()")
        action = self._validate_action(action)
        next_obs = self._transition(self._obs, action)
        achieved = self.achieved_goal(next_obs)
        rewards, success = self.compute_reward(achieved, self._goal)
        self._t += 1
        done = bool(success[0]) or self._t >= self.spec.max_steps
        step = Step(
            obs=self._obs.copy(),
            action=action,
            reward=float(rewards[0]),
            next_obs=next_obs.copy(),
            done=done,
            achieved_goal=achieved.copy(),
            desired_goal=self._goal.copy(),
            success=bool(success[0]),
        )
        self._obs = next_obs
        return step

    def _validate_action(self, action: int | np.ndarray) -> int | np.ndarray:
        space = self.spec.action_space
        if isinstance(space, DiscreteSpace):
            a = int(np.asarray(action).reshape(()))
            if not 0 <= a < space.n:
                raise ActionRangeError(f"action {a} outside [0, {space.n})")
            return a
        vec = np.asarray(action, dtype=np.float64).reshape(-1)
        if vec.shape != (space.dim,):
            raise InputShapeError(f"action must have dimension {space.dim}")
        if not np.all(np.isfinite(vec)):
            raise NumericError("non-finite action")
        return np.clip(vec, space.low, space.high)


def recompute_reward(
    achieved_goal: np.ndarray,
    hindsight_goal: np.ndarray,
    env: GoalEnv,
    step_index: int | None = None,
) -> tuple[float, bool]:
    """Reward and termination the env would have emitted under *hindsight_goal*.

    With *step_index* the time-limit termination is reproduced as well.
    """
    rewards, success = env.compute_reward(achieved_goal, hindsight_goal)
    done = bool(success[0])
    if step_index is not None and step_index + 1 >= env.spec.max_steps:
        done = True
    return float(rewards[0]), done
