"""Trajectory collection and greedy evaluation.

Collection fans out over ``n_workers`` cloned environments.  Worker
``i`` uses seed ``seed + i`` for both its environment and its action
sampler and collects at least ``ceil(batchsize / n_workers)`` steps.
Episodes are then merged round-robin in worker order and the merge
stops as soon as the batch holds ``batchsize`` steps, so the buffer is
a deterministic function of (seed, n_workers).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import zip_longest

import numpy as np
import torch

from src.diffnet.networks import CategoricalHead, PolicyNet
from src.envs.base import DiscreteSpace, GoalEnv, Step, policy_input
from src.errors import ConfigurationError
from src.rollout.trajectory import BatchBuffer, Trajectory
from src.seeding import torch_generator

logger = logging.getLogger(__name__)


def check_compatible(policy: PolicyNet, env: GoalEnv) -> None:
    """Raise ConfigurationError unless *policy* can act in *env*."""
    spec = env.spec
    if policy.input_dim != spec.state_dim:
        raise ConfigurationError(
            f"policy expects inputs of width {policy.input_dim}, "
            f"{env.env_id} produces {spec.state_dim}"
        )
    if spec.is_discrete != policy.is_categorical:
        raise ConfigurationError(f"policy head {policy.head} cannot act in {env.env_id}")
    head, space = policy.head, spec.action_space
    width = head.n_actions if isinstance(head, CategoricalHead) else head.action_dim
    expected = space.n if isinstance(space, DiscreteSpace) else space.dim
    if width != expected:
        raise ConfigurationError(f"policy emits {width} actions, {env.env_id} takes {expected}")


def _to_env_action(action: torch.Tensor, categorical: bool) -> int | np.ndarray:
    if categorical:
        return int(action.item())
    return action.detach().cpu().numpy().astype(np.float64)


def run_episode(
    policy: PolicyNet,
    env: GoalEnv,
    generator: torch.Generator | None = None,
) -> Trajectory:
    """Play one episode; sample with *generator*, or act greedily when it is None."""
    obs, goal = env.reset()
    steps: list[Step] = []
    while True:
        state = policy_input(obs, goal)[None, :]
        action = policy.mode(state) if generator is None else policy.sample(state, generator)
        step = env.step(_to_env_action(action[0], policy.is_categorical))
        steps.append(step)
        obs = step.next_obs
        if step.done:
            break
    states = policy_input(np.stack([s.obs for s in steps]), goal)
    actions = np.stack([np.asarray(s.action) for s in steps])
    with torch.no_grad():
        logp = policy.log_prob(states, actions).numpy().astype(np.float64)
    return Trajectory(steps=tuple(steps), original_goal=goal, logp_old_g=logp)


def _worker(policy: PolicyNet, env: GoalEnv, quota: int, seed: int) -> list[Trajectory]:
    local = env.clone(seed)
    gen = torch_generator(seed)
    out: list[Trajectory] = []
    taken = 0
    while taken < quota:
        traj = run_episode(policy, local, gen)
        out.append(traj)
        taken += len(traj)
    return out


def collect(
    policy: PolicyNet,
    env: GoalEnv,
    batchsize: int,
    seed: int,
    n_workers: int = 1,
) -> BatchBuffer:
    """Fill a buffer with whole on-policy trajectories totalling >= *batchsize* steps."""
    check_compatible(policy, env)
    if batchsize < env.spec.max_steps:
        raise ConfigurationError(
            f"batchsize {batchsize} is smaller than the {env.env_id} horizon {env.spec.max_steps}"
        )
    if n_workers < 1:
        raise ConfigurationError("n_workers must be >= 1")

    quota = math.ceil(batchsize / n_workers)
    seeds = [seed + worker_id for worker_id in range(n_workers)]
    if n_workers == 1:
        per_worker = [_worker(policy, env, quota, seeds[0])]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            per_worker = list(pool.map(lambda s: _worker(policy.copy(), env, quota, s), seeds))

    merged: list[Trajectory] = []
    total = 0
    for round_ in zip_longest(*per_worker):
        for traj in round_:
            if traj is None or total >= batchsize:
                continue
            merged.append(traj)
            total += len(traj)
        if total >= batchsize:
            break

    played = sum(len(traj) for trajs in per_worker for traj in trajs)
    buffer = BatchBuffer(
        tuple(merged),
        capacity=batchsize,
        max_steps=env.spec.max_steps,
        discarded_steps=played - total,
    )
    logger.debug(
        "collected %d trajectories / %d steps, %d env steps (success %.3f)",
        len(buffer), buffer.total_steps, buffer.env_steps, buffer.success_rate,
    )
    return buffer


@dataclass(frozen=True)
class EvalSummary:
    success_rate: float
    mean_return: float
    episodes: int


def evaluate_summary(policy: PolicyNet, env: GoalEnv, n_episodes: int, seed: int) -> EvalSummary:
    """Greedy-policy success rate and mean undiscounted return over *n_episodes*."""
    if n_episodes < 1:
        raise ConfigurationError("n_episodes must be >= 1")
    check_compatible(policy, env)
    local = env.clone(seed)
    episodes = [run_episode(policy, local) for _ in range(n_episodes)]
    return EvalSummary(
        success_rate=float(np.mean([t.success for t in episodes])),
        mean_return=float(np.mean([t.total_reward for t in episodes])),
        episodes=n_episodes,
    )


def evaluate(policy: PolicyNet, env: GoalEnv, n_episodes: int, seed: int) -> float:
    return evaluate_summary(policy, env, n_episodes, seed).success_rate


def replay(trajectory: Trajectory, env: GoalEnv) -> tuple[Step, ...]:
    """Re-run the stored actions from the stored reset state and goal."""
    local = env.clone(0)
    local.reset_to(trajectory.initial_obs, trajectory.original_goal)
    return tuple(local.step(s.action) for s in trajectory.steps)
