"""State carried through one training iteration of the LangGraph pipeline.

The graph runs once per iteration: the long-lived fields (networks,
counters, carried-forward evaluation results) enter with the state and
the per-iteration fields (buffer, goals, batch, step) are cleared by the
record node, so nothing collected in one iteration leaks into the next.
"""

from __future__ import annotations

from typing import Any, TypedDict

import numpy as np

from src.agents.htrpo import PolicyStepResult
from src.diffnet.networks import PolicyNet, ValueNet
from src.envs.base import GoalEnv
from src.hindsight.relabel import HindsightBatch
from src.models.config import ExperimentConfig
from src.rollout.trajectory import BatchBuffer

METRICS_COLUMNS: tuple[str, ...] = (
    "iteration",
    "env_steps",
    "success_rate",
    "mean_return",
    "surrogate",
    "constraint_realized",
    "kl_analytic",
    "ess",
    "cg_residual",
    "line_search_alpha",
    "rejected",
    "wall_time_s",
)


class MetricsRow(TypedDict):
    iteration: int
    env_steps: int
    success_rate: float
    mean_return: float
    surrogate: float
    constraint_realized: float
    kl_analytic: float
    ess: float
    cg_residual: float
    line_search_alpha: float
    rejected: int
    wall_time_s: float


class TrainingState(TypedDict, total=False):
    # --- Fixed for the run ---
    config: ExperimentConfig
    env: GoalEnv

    # --- Carried across iterations ---
    iteration: int
    env_steps: int
    policy: PolicyNet
    critic: ValueNet
    success_rate: float  # last evaluation, carried forward
    mean_return: float
    started_at: float  # perf_counter at run start

    # --- Per iteration (cleared by the record node) ---
    buffer: BatchBuffer | None
    goals: np.ndarray | None
    batch: HindsightBatch | None
    ess: float
    step: PolicyStepResult | None
    evaluated: bool
    metrics: MetricsRow | dict[str, Any]
