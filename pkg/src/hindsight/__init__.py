from src.hindsight.ess import ESSReport, effective_sample_size, ess_report, group_ess
from src.hindsight.goals import (
    GoalSets,
    build_goal_sets,
    hindsight_goal_filter,
    sample_hindsight_goals,
)
from src.hindsight.relabel import (
    HindsightBatch,
    log_prefix_weights,
    prefix_weights,
    relabel,
    wis_normalize,
)

__all__ = [
    "ESSReport",
    "GoalSets",
    "HindsightBatch",
    "build_goal_sets",
    "effective_sample_size",
    "ess_report",
    "group_ess",
    "hindsight_goal_filter",
    "log_prefix_weights",
    "prefix_weights",
    "relabel",
    "sample_hindsight_goals",
    "wis_normalize",
]
