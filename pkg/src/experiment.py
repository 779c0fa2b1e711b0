"""Training and evaluation runs.

``run_train`` loops the per-iteration graph until the environment-step
budget is spent, streaming metrics to disk and checkpointing the policy
after every evaluated iteration.  ``run_eval`` reloads a checkpoint and
measures greedy success.
"""

from __future__ import annotations

import logging
from pathlib import Path

import torch

from src import settings
from src.diffnet.checkpoint import load_checkpoint, save_checkpoint
from src.envs.registry import make_env
from src.errors import NumericError
from src.models.config import ExperimentConfig, build_config, load_config
from src.models.initial_state import build_policy, new_training_state
from src.paths import CONFIG_FILENAME, checkpoint_path, default_output_dir
from src.rollout.collector import EvalSummary, evaluate_summary
from src.session.logger import RunLogger
from src.workflow import build_graph, train_iteration

logger = logging.getLogger(__name__)


def run_train(config: ExperimentConfig, out_dir: Path | None = None) -> RunLogger:
    """Train until ``config.total_steps`` environment steps have been collected."""
    out_dir = out_dir or default_output_dir(config.run_name)
    torch.set_num_threads(settings.TORCH_THREADS)
    logger.info("training %s -> %s (radius %.3g)", config.run_name, out_dir, config.radius)

    graph = build_graph()
    state = new_training_state(config)
    with RunLogger(out_dir, config) as run_log:
        while state["env_steps"] < config.total_steps:
            iteration = state["iteration"]
            try:
                state = train_iteration(state, graph)
            except NumericError as e:
                if e.iteration is None:
                    raise NumericError(str(e), iteration=iteration) from e
                raise
            run_log.log_iteration(state["metrics"])
            if state.get("evaluated"):
                save_checkpoint(state["policy"].params, checkpoint_path(out_dir, iteration))

        if not state.get("evaluated") and run_log.rows:
            # budget ran out on an iteration without evaluation
            last = int(run_log.rows[-1]["iteration"])
            save_checkpoint(state["policy"].params, checkpoint_path(out_dir, last))
        summary_path = run_log.finish()
    logger.info("%s (summary %s)", run_log.summary(), summary_path)
    return run_log


def _config_for(checkpoint: Path, env_id: str) -> ExperimentConfig:
    """Network shape comes from the run's saved config when one sits next to the checkpoint."""
    saved = checkpoint.parent / CONFIG_FILENAME
    if saved.is_file():
        return load_config(saved, {"env": env_id})
    return build_config({"env": env_id})


def run_eval(checkpoint: Path, env_id: str, n_episodes: int, seed: int) -> EvalSummary:
    """Greedy success rate and mean return of a saved policy on *env_id*."""
    config = _config_for(checkpoint, env_id)
    env = make_env(env_id, seed=seed)
    policy = build_policy(config, env)
    params = load_checkpoint(checkpoint, expected=policy.params.layout)
    summary = evaluate_summary(policy.with_params(params), env, n_episodes, seed=seed)
    print(
        f"{checkpoint.name} on {env_id}: success rate {summary.success_rate:.3f}, "
        f"mean return {summary.mean_return:.3f} over {summary.episodes} episodes"
    )
    return summary
