"""Graph nodes for one training iteration.

Each node reads what it needs from ``TrainingState`` and returns a
partial update.  Randomness comes from per-iteration seeds derived from
the run's root seed, so a node's output depends only on its inputs.
"""

from __future__ import annotations

import logging
import time
from typing import Any

from src import settings
from src.agents.htrpo import (
    critic_update,
    normalize_advantages,
    td_advantage,
    trust_region_update,
)
from src.errors import HTRPOError
from src.hindsight.ess import ess_report
from src.hindsight.goals import build_goal_sets, sample_hindsight_goals
from src.hindsight.relabel import relabel
from src.models.state import TrainingState
from src.rollout.collector import collect, evaluate_summary
from src.seeding import Stream, derive_seed, numpy_rng

logger = logging.getLogger(__name__)


def _need(state: TrainingState, key: str) -> Any:
    value = state.get(key)
    if value is None:
        raise HTRPOError(f"training state has no {key!r}; nodes ran out of order")
    return value


def collect_node(state: TrainingState) -> dict[str, Any]:
    """Fill a fresh buffer with on-policy trajectories."""
    config = state["config"]
    it = state["iteration"]
    buffer = collect(
        state["policy"],
        state["env"],
        config.batchsize,
        seed=derive_seed(config.seed, Stream.COLLECT, it),
        n_workers=settings.NUM_WORKERS,
    )
    return {
        "buffer": buffer,
        "env_steps": state["env_steps"] + buffer.env_steps,
        "evaluated": False,
    }


def select_goals_node(state: TrainingState) -> dict[str, Any]:
    """Pick hindsight goals from the buffer's achieved goals (HGF or uniform)."""
    config = state["config"]
    buffer = _need(state, "buffer")
    goal_sets = build_goal_sets(buffer, state["env"])
    rng = numpy_rng(derive_seed(config.seed, Stream.GOALS, state["iteration"]))
    goals = sample_hindsight_goals(
        goal_sets, config.n_goals, rng, use_hgf=config.use_hgf, metric=config.goal_metric
    )
    logger.debug(
        "%d achieved goals (%d valid) -> %d hindsight goals",
        goal_sets.achieved.shape[0], int(goal_sets.valid_mask.sum()), goals.shape[0],
    )
    return {"goals": goals}


def relabel_node(state: TrainingState) -> dict[str, Any]:
    config = state["config"]
    buffer = _need(state, "buffer")
    batch = relabel(
        buffer,
        state.get("goals"),
        state["env"],
        state["policy"],
        config.gamma,
        use_wis=config.use_wis,
    )
    return {"batch": batch, "ess": ess_report(batch).mean_ess}


def fit_critic_node(state: TrainingState) -> dict[str, Any]:
    """Train the baseline on the relabeled batch, then attach TD advantages."""
    config = state["config"]
    batch = _need(state, "batch")
    critic = critic_update(
        state["critic"],
        batch,
        config.critic_lr,
        config.critic_updates,
        config.gamma,
        keep_gamma_t=config.keep_gamma_t,
    )
    advantages = td_advantage(critic, batch, config.gamma)
    if config.advantage_norm:
        advantages = normalize_advantages(advantages)
    return {"critic": critic, "batch": batch.with_advantages(advantages)}


def policy_step_node(state: TrainingState) -> dict[str, Any]:
    config = state["config"]
    batch = _need(state, "batch")
    result = trust_region_update(
        state["policy"],
        batch,
        variant=config.variant,
        radius=config.radius,
        cg_damping=config.cg_damping,
        cg_iters=config.cg_iters,
        max_backtracks=config.max_backtracks,
        keep_gamma_t=config.keep_gamma_t,
        estimator=config.kl_estimator,
        iteration=state["iteration"],
    )
    return {"policy": result.policy, "step": result}


def evaluate_node(state: TrainingState) -> dict[str, Any]:
    """Greedy evaluation of the updated policy."""
    config = state["config"]
    summary = evaluate_summary(
        state["policy"],
        state["env"],
        config.eval_episodes,
        seed=derive_seed(config.seed, Stream.EVALUATE, state["iteration"]),
    )
    return {
        "success_rate": summary.success_rate,
        "mean_return": summary.mean_return,
        "evaluated": True,
    }


def record_node(state: TrainingState) -> dict[str, Any]:
    """Emit the metrics row and clear the per-iteration data."""
    config = state["config"]
    step = _need(state, "step")
    wall = time.perf_counter() - state["started_at"] if config.record_wall_time else 0.0
    row = {
        "iteration": state["iteration"],
        "env_steps": state["env_steps"],
        "success_rate": state["success_rate"],
        "mean_return": state["mean_return"],
        "surrogate": step.surrogate,
        "constraint_realized": step.constraint,
        "kl_analytic": step.kl_analytic,
        "ess": state["ess"],
        "cg_residual": step.cg_residual,
        "line_search_alpha": step.alpha,
        "rejected": int(step.rejected),
        "wall_time_s": wall,
    }
    logger.info(
        "iter %d  steps %d  success %.3f  constraint %.2e  alpha %.3g%s",
        row["iteration"], row["env_steps"], row["success_rate"],
        row["constraint_realized"], row["line_search_alpha"],
        "  (rejected)" if step.rejected else "",
    )
    return {
        "metrics": row,
        "buffer": None,
        "goals": None,
        "batch": None,
        "step": None,
    }
