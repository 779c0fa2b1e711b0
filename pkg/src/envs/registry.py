"""Environment ids: ``bitflip:<k>``, ``gridnav:<size>[:far]``, ``pointreach:<tol>``."""

from __future__ import annotations

from src.envs.base import GoalEnv
from src.envs.bitflip import BitFlipEnv
from src.envs.gridnav import GridNavEnv
from src.envs.pointreach import PointReachEnv
from src.errors import ConfigurationError

ENV_FAMILIES = ("bitflip", "gridnav", "pointreach")


def make_env(env_id: str, seed: int = 0) -> GoalEnv:
    """Build the environment named by *env_id* with its own RNG seed."""
    family, _, rest = env_id.strip().partition(":")
    parts = rest.split(":") if rest else []
    try:
        if family == "bitflip" and len(parts) == 1:
            return BitFlipEnv(int(parts[0]), seed)
        if family == "gridnav" and len(parts) in (1, 2):
            if len(parts) == 2 and parts[1] != "far":
                raise ConfigurationError(f"unknown gridnav option {parts[1]!r} (expected 'far')")
            return GridNavEnv(int(parts[0]), seed, far_half=len(parts) == 2)
        if family == "pointreach" and len(parts) == 1:
            return PointReachEnv(float(parts[0]), seed)
    except ValueError as e:
        raise ConfigurationError(f"malformed env id {env_id!r}: {e}") from e
    raise ConfigurationError(
        f"unknown env id {env_id!r}; expected one of "
        "'bitflip:<k>', 'gridnav:<size>[:far]', 'pointreach:<tol>'"
    )


def is_continuous(env_id: str) -> bool:
    return env_id.strip().startswith("pointreach")
