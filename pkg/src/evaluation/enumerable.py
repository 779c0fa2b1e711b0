"""Tabular MDPs small enough to evaluate exactly.

Two oracles live here:

``GoalMDP``
    A finite-horizon goal-conditioned MDP whose trajectories can be
    enumerated.  The hindsight importance-sampling identity is checked
    by summing over every trajectory: the prefix-weighted return of
    goal g′ under data drawn for goal g must equal the direct return
    under g′.

``DiscountedMDP``
    An infinite-horizon discounted MDP solved by linear algebra.  Used
    to check the QKL policy-improvement bound on true returns.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
import torch
from scipy import linalg
from torch.distributions import Categorical

from src.divergence.checks import BoundReport, prop3_bound_check
from src.errors import InputShapeError
from src.hindsight.relabel import log_prefix_weights


def softmax_policy(logits: np.ndarray) -> np.ndarray:
    """Row-normalised probabilities over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ── Finite-horizon goal-conditioned MDP ──────────────────────────────────


@dataclass(frozen=True)
class EnumeratedPath:
    states: tuple[int, ...]  # s_0 .. s_H
    actions: tuple[int, ...]  # a_0 .. a_{H−1}
    env_prob: float  # ρ₀(s_0) Π P(s_{t+1} | s_t, a_t)


@dataclass(frozen=True)
class GoalMDP:
    """Goals are states; the reward on reaching goal g is 1, otherwise 0."""

    transitions: np.ndarray  # [S, A, S]
    initial: np.ndarray  # [S]
    horizon: int
    gamma: float

    def __post_init__(self) -> None:
        s, a, s2 = self.transitions.shape
        if s != s2 or self.initial.shape != (s,):
            raise InputShapeError("transition and initial-state shapes disagree")
        rows_ok = np.allclose(self.transitions.sum(-1), 1.0)
        if not rows_ok or not np.isclose(self.initial.sum(), 1.0):
            raise InputShapeError("transition rows and initial distribution must sum to 1")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    def paths(self) -> Iterator[EnumeratedPath]:
        """Every (state, action) sequence with non-zero environment probability."""
        s_range = range(self.n_states)
        a_range = range(self.n_actions)
        for actions in itertools.product(a_range, repeat=self.horizon):
            for states in itertools.product(s_range, repeat=self.horizon + 1):
                prob = self.initial[states[0]]
                for t, a in enumerate(actions):
                    prob *= self.transitions[states[t], a, states[t + 1]]
                if prob > 0.0:
                    yield EnumeratedPath(states, actions, float(prob))

    def rewards(self, path: EnumeratedPath, goal: int) -> np.ndarray:
        return np.array([float(s == goal) for s in path.states[1:]])

    def log_policy(self, policy: np.ndarray, path: EnumeratedPath, goal: int) -> np.ndarray:
        """log π(a_t | s_t, goal) along *path*; *policy* is [S, G, A]."""
        return np.log([policy[s, goal, a] for s, a in zip(path.states, path.actions, strict=False)])


def two_state_mdp(gamma: float = 0.98) -> GoalMDP:
    """2 states, 2 actions, horizon 3; each state is also a goal."""
    transitions = np.array(
        [
            [[0.8, 0.2], [0.3, 0.7]],
            [[0.6, 0.4], [0.1, 0.9]],
        ]
    )
    return GoalMDP(transitions, np.array([0.7, 0.3]), horizon=3, gamma=gamma)


def random_goal_policy(mdp: GoalMDP, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random strictly positive tabular policy π(a | s, g) of shape [S, G, A]."""
    shape = (mdp.n_states, mdp.n_states, mdp.n_actions)
    return softmax_policy(scale * rng.standard_normal(shape))


def goal_return(mdp: GoalMDP, policy: np.ndarray, goal: int) -> float:
    """Expected discounted return of pursuing *goal*, by exhaustive summation."""
    discount = mdp.gamma ** np.arange(mdp.horizon)
    total = 0.0
    for path in mdp.paths():
        prob = path.env_prob * float(np.exp(mdp.log_policy(policy, path, goal).sum()))
        total += prob * float(discount @ mdp.rewards(path, goal))
    return total


def hindsight_return(mdp: GoalMDP, policy: np.ndarray, goal: int, hindsight_goal: int) -> float:
    """Expected prefix-weighted return of *hindsight_goal* over data drawn for *goal*."""
    discount = mdp.gamma ** np.arange(mdp.horizon)
    total = 0.0
    for path in mdp.paths():
        logp_g = mdp.log_policy(policy, path, goal)
        logp_h = mdp.log_policy(policy, path, hindsight_goal)
        prob = path.env_prob * float(np.exp(logp_g.sum()))
        weights = np.exp(log_prefix_weights(logp_h, logp_g))
        total += prob * float(np.sum(discount * weights * mdp.rewards(path, hindsight_goal)))
    return total


def unbiasedness_deviations(mdp: GoalMDP, policy: np.ndarray) -> dict[tuple[int, int], float]:
    """|hindsight − direct| for every ordered (goal, hindsight goal) pair."""
    out: dict[tuple[int, int], float] = {}
    for g, h in itertools.product(range(mdp.n_states), repeat=2):
        out[(g, h)] = abs(hindsight_return(mdp, policy, g, h) - goal_return(mdp, policy, h))
    return out


# ── Discounted MDP, solved exactly ───────────────────────────────────────


@dataclass(frozen=True)
class DiscountedMDP:
    transitions: np.ndarray  # [S, A, S]
    rewards: np.ndarray  # [S, A]
    initial: np.ndarray  # [S]
    gamma: float

    def _state_transitions(self, policy: np.ndarray) -> np.ndarray:
        return np.einsum("sa,sat->st", policy, self.transitions)

    def values(self, policy: np.ndarray) -> np.ndarray:
        """V^π from (I − γP_π)V = r_π."""
        p_pi = self._state_transitions(policy)
        r_pi = np.sum(policy * self.rewards, axis=-1)
        return linalg.solve(np.eye(len(r_pi)) - self.gamma * p_pi, r_pi)

    def advantages(self, policy: np.ndarray) -> np.ndarray:
        v = self.values(policy)
        q = self.rewards + self.gamma * self.transitions @ v
        return q - v[:, None]

    def expected_return(self, policy: np.ndarray) -> float:
        return float(self.initial @ self.values(policy))

    def visitation(self, policy: np.ndarray) -> np.ndarray:
        """Unnormalised discounted state visitation Σ_t γ^t P(s_t = s)."""
        p_pi = self._state_transitions(policy)
        return linalg.solve((np.eye(len(self.initial)) - self.gamma * p_pi).T, self.initial)

    def local_approximation(self, old: np.ndarray, new: np.ndarray) -> float:
        """η(old) + Σ_s ρ_old(s) Σ_a new(a|s) A_old(s, a)."""
        rho = self.visitation(old)
        adv = self.advantages(old)
        return self.expected_return(old) + float(rho @ np.sum(new * adv, axis=-1))


def random_discounted_mdp(
    n_states: int, n_actions: int, gamma: float, rng: np.random.Generator
) -> DiscountedMDP:
    transitions = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    rewards = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    initial = rng.dirichlet(np.ones(n_states))
    return DiscountedMDP(transitions, rewards, initial, gamma)


@dataclass(frozen=True)
class ImprovementCase:
    report: BoundReport
    new_return: float
    old_return: float

    @property
    def holds(self) -> bool:
        """The bound is only claimed when the ratio condition is met."""
        return not self.report.ratio_ok or self.new_return >= self.report.bound - 1e-12


def improvement_case(mdp: DiscountedMDP, old: np.ndarray, new: np.ndarray) -> ImprovementCase:
    report = prop3_bound_check(
        Categorical(probs=torch.as_tensor(old)),
        Categorical(probs=torch.as_tensor(new)),
        mdp.advantages(old),
        mdp.gamma,
        surrogate=mdp.local_approximation(old, new),
    )
    return ImprovementCase(
        report=report,
        new_return=mdp.expected_return(new),
        old_return=mdp.expected_return(old),
    )
