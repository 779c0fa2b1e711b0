from src.envs.base import (
    BoxSpace,
    DiscreteSpace,
    GoalEnv,
    GoalEnvSpec,
    Step,
    policy_input,
    recompute_reward,
)
from src.envs.bitflip import BitFlipEnv
from src.envs.gridnav import GridNavEnv
from src.envs.pointreach import PointReachEnv
from src.envs.registry import make_env

__all__ = [
    "BitFlipEnv",
    "BoxSpace",
    "DiscreteSpace",
    "GoalEnv",
    "GoalEnvSpec",
    "GridNavEnv",
    "PointReachEnv",
    "Step",
    "make_env",
    "policy_input",
    "recompute_reward",
]
