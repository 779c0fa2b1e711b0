"""Experiment configuration.

Stored on disk as flat ``key = value`` text with ``#`` comments, one
field per line.  CLI flags override file values.  The trust radius is
derived from ``max_kl`` and ``gamma`` and never stored.
"""

from __future__ import annotations

from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.spatial.distance import cdist

from src.errors import ConfigurationError, HTRPOError
from src.settings import DEFAULT_HIDDEN_SIZES
from src.trustregion.solver import trust_radius

DISCRETE_BATCHSIZE = 1600
CONTINUOUS_BATCHSIZE = 3200


class Variant(StrEnum):
    HTRPO = "htrpo"
    QKL_TRPO = "qkltrpo"
    TRPO = "trpo"

    @property
    def uses_hindsight(self) -> bool:
        return self is Variant.HTRPO


class KLEstimator(StrEnum):
    QKL = "qkl"
    NAIVE = "naive"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    env: str = "bitflip:8"
    variant: Variant = Variant.HTRPO
    batchsize: int = Field(default=DISCRETE_BATCHSIZE, ge=1)
    gamma: float = Field(default=0.98, gt=0.0, lt=1.0)
    max_kl: float = Field(default=2e-5, gt=0.0)
    n_goals: int = Field(default=32, ge=1)
    cg_damping: float = Field(default=1e-3, ge=0.0)
    cg_iters: int = Field(default=10, ge=1)
    max_backtracks: int = Field(default=10, ge=1)
    critic_lr: float = Field(default=5e-4, gt=0.0)
    critic_updates: int = Field(default=20, ge=0)
    total_steps: int = Field(default=100_000, ge=1)
    eval_episodes: int = Field(default=100, ge=1)
    eval_interval: int = Field(default=5, ge=1)
    seed: int = Field(default=0, ge=0)
    hidden_sizes: tuple[int, ...] = DEFAULT_HIDDEN_SIZES
    use_wis: bool = True
    use_hgf: bool = True
    advantage_norm: bool = True
    keep_gamma_t: bool = True
    kl_estimator: KLEstimator = KLEstimator.QKL
    goal_metric: str = "euclidean"
    force_original_goals: bool = False
    # Off by default: wall time breaks byte-identical metrics for equal seeds.
    record_wall_time: bool = False

    @model_validator(mode="before")
    @classmethod
    def _default_batchsize(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("batchsize") is None:
            env = str(data.get("env", cls.model_fields["env"].default))
            continuous = env.strip().startswith("pointreach")
            default = CONTINUOUS_BATCHSIZE if continuous else DISCRETE_BATCHSIZE
            data = {**data, "batchsize": default}
        return data

    @field_validator("hidden_sizes", mode="before")
    @classmethod
    def _parse_hidden(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = tuple(int(part) for part in value.replace(" ", "").split(",") if part)
        if not value or any(int(h) < 1 for h in value):
            raise ValueError("hidden sizes must be positive integers")
        return value

    @field_validator("goal_metric")
    @classmethod
    def _known_metric(cls, value: str) -> str:
        pair = np.zeros((1, 2))
        try:
            cdist(pair, pair, metric=value)
        except (ValueError, TypeError) as e:
            raise ValueError(f"unknown distance metric {value!r}") from e
        return value

    @field_validator("env")
    @classmethod
    def _known_env(cls, value: str) -> str:
        from src.envs.registry import make_env

        try:
            make_env(value)
        except HTRPOError as e:
            raise ValueError(str(e)) from e
        return value.strip()

    @model_validator(mode="after")
    def _batch_covers_horizon(self) -> ExperimentConfig:
        from src.envs.registry import make_env

        horizon = make_env(self.env).spec.max_steps
        if self.batchsize < horizon:
            raise ValueError(
                f"batchsize {self.batchsize} is below the {self.env} horizon {horizon}"
            )
        return self

    @property
    def radius(self) -> float:
        return trust_radius(self.max_kl, self.gamma)

    @property
    def run_name(self) -> str:
        return f"{self.env.replace(':', '-')}_{self.variant.value}_s{self.seed}"


# ── key = value persistence ──────────────────────────────────────────────


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, StrEnum):
        return value.value
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: ExperimentConfig) -> str:
    lines = ["# htrpo experiment configuration"]
    for name in ExperimentConfig.model_fields:
        lines.append(f"{name} = {_format(getattr(config, name))}")
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict[str, str]:
    """Read ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def build_config(values: dict[str, Any]) -> ExperimentConfig:
    """Validate raw values, mapping pydantic errors onto ConfigurationError."""
    try:
        return ExperimentConfig.model_validate(values)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "config"
        raise ConfigurationError(f"invalid {field}: {first['msg']}") from e


def parse_config(text: str) -> ExperimentConfig:
    return build_config(parse_config_text(text))


def load_config(path: Path | None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Load *path* (if given) and apply non-None *overrides* on top."""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            values.update(parse_config_text(path.read_text(encoding="utf-8")))
        except OSError as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)


def save_config(config: ExperimentConfig, path: Path) -> Path:
    path.write_text(dump_config(config), encoding="utf-8")
    return path
