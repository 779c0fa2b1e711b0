"""Goal relabeling, prefix importance weights and WIS normalisation.

Every (hindsight goal, trajectory) pair becomes a run of flat sample
records.  A record at step t carries the prefix weight

    w_t = Π_{k≤t} π_old(a_k | s_k, g′) / π_old(a_k | s_k, g)

that corrects the trajectory probability for the goal swap, and its
WIS-normalised version w̄_t = w_t / Σ_τ w_t taken over the records that
share (g′, t).  Records are ordered goal-major, then trajectory, then t.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import torch

from src.diffnet.networks import PolicyNet
from src.envs.base import GoalEnv, policy_input
from src.errors import EmptyBatchError, InputShapeError, NumericError
from src.rollout.trajectory import BatchBuffer, Trajectory
from src.settings import LOG_WEIGHT_FLOOR

logger = logging.getLogger(__name__)


def log_prefix_weights(logp_goal: np.ndarray, logp_original: np.ndarray) -> np.ndarray:
    """Cumulative log importance weights, floored at ``LOG_WEIGHT_FLOOR``."""
    logp_goal = np.asarray(logp_goal, dtype=np.float64)
    logp_original = np.asarray(logp_original, dtype=np.float64)
    if logp_goal.shape != logp_original.shape:
        raise InputShapeError("log-prob sequences differ in length")
    if not (np.all(np.isfinite(logp_goal)) and np.all(np.isfinite(logp_original))):
        raise NumericError("non-finite log-prob in prefix weight")
    return np.maximum(np.cumsum(logp_goal - logp_original), LOG_WEIGHT_FLOOR)


def _logp_under(policy: PolicyNet, traj: Trajectory, goal: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        return policy.log_prob(traj.states(goal), traj.actions()).numpy().astype(np.float64)


def prefix_weights(traj: Trajectory, goal: np.ndarray, policy_old: PolicyNet) -> np.ndarray:
    """w_0..w_{T−1} of *traj* relabeled with *goal* (untruncated)."""
    return np.exp(log_prefix_weights(_logp_under(policy_old, traj, goal), traj.logp_old_g))


@dataclass(frozen=True, eq=False)
class HindsightBatch:
    goal_id: np.ndarray
    traj_id: np.ndarray
    t: np.ndarray
    states: np.ndarray
    next_states: np.ndarray
    actions: np.ndarray
    goals: np.ndarray
    logp_old_g: np.ndarray
    logp_old: np.ndarray
    discount: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    log_w: np.ndarray
    w: np.ndarray
    w_bar: np.ndarray
    advantages: np.ndarray
    n_trajectories: int
    n_goals: int

    def __post_init__(self) -> None:
        n = self.t.shape[0]
        if n == 0:
            raise EmptyBatchError("hindsight batch has no samples")
        for name in ("goal_id", "traj_id", "logp_old_g", "logp_old", "discount", "rewards",
                     "dones", "log_w", "w", "w_bar", "advantages"):
            if getattr(self, name).shape != (n,):
                raise InputShapeError(f"column {name} has shape {getattr(self, name).shape}")

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @property
    def lam(self) -> float:
        """Estimator normaliser λ = N_τ · N_g."""
        return float(self.n_trajectories * self.n_goals)

    def group_index(self) -> tuple[np.ndarray, int]:
        """Dense index of each record's (goal, t) group, and the group count."""
        keys = np.stack([self.goal_id, self.t], axis=1)
        _, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        return inverse, int(inverse.max()) + 1

    def with_advantages(self, advantages: np.ndarray) -> HindsightBatch:
        advantages = np.asarray(advantages, dtype=np.float64)
        if advantages.shape != self.t.shape:
            raise InputShapeError("one advantage per sample expected")
        return replace(self, advantages=advantages)


def wis_normalize(batch: HindsightBatch) -> HindsightBatch:
    """Normalise prefix weights so each (goal, t) group sums to one."""
    group, n_groups = batch.group_index()
    peak = np.full(n_groups, -np.inf)
    np.maximum.at(peak, group, batch.log_w)
    mass = np.zeros(n_groups)
    np.add.at(mass, group, np.exp(batch.log_w - peak[group]))
    with np.errstate(divide="ignore"):
        log_totals = peak + np.log(mass)
    if not np.all(np.isfinite(log_totals)):
        raise NumericError("importance-weight group sums to zero")
    return replace(batch, w_bar=np.exp(batch.log_w - log_totals[group]))


def relabel(
    buffer: BatchBuffer,
    goals: np.ndarray | None,
    env: GoalEnv,
    policy_old: PolicyNet,
    gamma: float,
    *,
    use_wis: bool = True,
) -> HindsightBatch:
    """Relabel every trajectory with every goal in *goals*.

    ``goals=None`` keeps each trajectory's own original goal (one goal
    slot, unit weights): the on-policy data of the non-hindsight variants.
    Relabeled trajectories stop at their first success under the new goal.
    Terminal flags follow the env's rule for that goal (success or time
    limit), so an episode that ended on its original goal is not terminal
    under a goal it never reached.
    """
    if not buffer.trajectories:
        raise EmptyBatchError("cannot relabel an empty buffer")
    if goals is not None:
        goals = np.atleast_2d(np.asarray(goals, dtype=np.float64))
        if goals.shape[1] != env.spec.goal_dim:
            raise InputShapeError(f"goals must have dimension {env.spec.goal_dim}")
    slots: list[np.ndarray | None] = [None] if goals is None else list(goals)

    cols: dict[str, list[np.ndarray]] = {k: [] for k in (
        "goal_id", "traj_id", "t", "states", "next_states", "actions", "goals",
        "logp_old_g", "logp_old", "rewards", "dones", "log_w",
    )}
    obs_all = np.concatenate([t.observations() for t in buffer.trajectories])
    actions_all = np.concatenate([t.actions() for t in buffer.trajectories])
    bounds = np.cumsum([0] + [len(t) for t in buffer.trajectories])

    logp_slot_np = np.empty(0)
    for gi, slot in enumerate(slots):
        if slot is not None:
            with torch.no_grad():
                logp_slot = policy_old.log_prob(policy_input(obs_all, slot), actions_all)
            logp_slot_np = logp_slot.numpy().astype(np.float64)
        for ti, traj in enumerate(buffer.trajectories):
            goal = traj.original_goal if slot is None else slot
            rewards, success = env.compute_reward(traj.achieved_goals(), goal)
            hits = np.flatnonzero(success)
            length = int(hits[0]) + 1 if hits.size else len(traj)

            if slot is None:
                logp_goal = traj.logp_old_g
                log_w = np.zeros(len(traj))
            else:
                logp_goal = logp_slot_np[bounds[ti] : bounds[ti + 1]]
                log_w = log_prefix_weights(logp_goal, traj.logp_old_g)

            dones = success | (np.arange(len(traj)) + 1 >= env.spec.max_steps)
            cut = slice(0, length)
            cols["goal_id"].append(np.full(length, gi))
            cols["traj_id"].append(np.full(length, ti))
            cols["t"].append(np.arange(length))
            cols["states"].append(traj.states(goal)[cut])
            cols["next_states"].append(traj.next_states(goal)[cut])
            cols["actions"].append(traj.actions()[cut])
            cols["goals"].append(np.broadcast_to(goal, (length, goal.shape[0])))
            cols["logp_old_g"].append(traj.logp_old_g[cut])
            cols["logp_old"].append(logp_goal[cut])
            cols["rewards"].append(rewards[cut])
            cols["dones"].append(dones[cut])
            cols["log_w"].append(log_w[cut])

    flat = {k: np.concatenate(v) for k, v in cols.items()}
    t = flat["t"].astype(np.int64)
    log_w = flat["log_w"].astype(np.float64)
    w = np.exp(log_w)
    batch = HindsightBatch(
        goal_id=flat["goal_id"].astype(np.int64),
        traj_id=flat["traj_id"].astype(np.int64),
        t=t,
        states=flat["states"].astype(np.float64),
        next_states=flat["next_states"].astype(np.float64),
        actions=flat["actions"],
        goals=flat["goals"].astype(np.float64),
        logp_old_g=flat["logp_old_g"].astype(np.float64),
        logp_old=flat["logp_old"].astype(np.float64),
        discount=np.power(gamma, t).astype(np.float64),
        rewards=flat["rewards"].astype(np.float64),
        dones=flat["dones"].astype(bool),
        log_w=log_w,
        w=w,
        w_bar=w.copy(),
        advantages=np.zeros(t.shape[0]),
        n_trajectories=len(buffer.trajectories),
        n_goals=len(slots),
    )
    if use_wis:
        batch = wis_normalize(batch)
    logger.debug(
        "relabeled %d trajectories x %d goals into %d samples",
        batch.n_trajectories, batch.n_goals, len(batch),
    )
    return batch
