"""Factory helpers for creating training state payloads."""

from __future__ import annotations

import time
from typing import Any

from src.diffnet.networks import CategoricalHead, GaussianHead, Head, PolicyNet, ValueNet
from src.envs.base import BoxSpace, DiscreteSpace, GoalEnv
from src.envs.registry import make_env
from src.errors import ConfigurationError
from src.models.config import ExperimentConfig
from src.seeding import Stream, derive_seed


def policy_head(env: GoalEnv) -> Head:
    space = env.spec.action_space
    if isinstance(space, DiscreteSpace):
        return CategoricalHead(space.n)
    if isinstance(space, BoxSpace):
        return GaussianHead(space.dim)
    raise ConfigurationError(f"unsupported action space {space!r}")


def build_policy(config: ExperimentConfig, env: GoalEnv) -> PolicyNet:
    return PolicyNet.build(
        env.spec.state_dim,
        policy_head(env),
        config.hidden_sizes,
        seed=derive_seed(config.seed, Stream.POLICY_INIT),
    )


def build_critic(config: ExperimentConfig, env: GoalEnv) -> ValueNet:
    return ValueNet.build(
        env.spec.state_dim,
        config.hidden_sizes,
        seed=derive_seed(config.seed, Stream.CRITIC_INIT),
    )


def new_training_state(config: ExperimentConfig) -> dict[str, Any]:
    """Return a fresh training state for *config* (iteration 0, untrained networks)."""
    env = make_env(config.env, seed=config.seed)
    return {
        "config": config,
        "env": env,
        "iteration": 0,
        "env_steps": 0,
        "policy": build_policy(config, env),
        "critic": build_critic(config, env),
        "success_rate": 0.0,
        "mean_return": 0.0,
        "started_at": time.perf_counter(),
        "buffer": None,
        "goals": None,
        "batch": None,
        "ess": 0.0,
        "step": None,
        "evaluated": False,
        "metrics": {},
    }
