from src.rollout.collector import (
    EvalSummary,
    check_compatible,
    collect,
    evaluate,
    evaluate_summary,
    replay,
    run_episode,
)
from src.rollout.trajectory import BatchBuffer, Trajectory

__all__ = [
    "BatchBuffer",
    "EvalSummary",
    "Trajectory",
    "check_compatible",
    "collect",
    "evaluate",
    "evaluate_summary",
    "replay",
    "run_episode",
]
