"""LangGraph workflow for one training iteration.

Flow:
    START → collect → route_goals → select_goals → relabel → …
                               ↘ relabel   (no hindsight: original goals only)
    … → fit_critic → policy_step → route_eval → evaluate → record → END
                                            ↘ record

One graph invocation is one iteration; ``src.experiment`` loops it
until the step budget is spent.
"""

from __future__ import annotations

from typing import Any

from langgraph.graph import END, START, StateGraph
from langgraph.types import Command

from src.agents.nodes import (
    collect_node,
    evaluate_node,
    fit_critic_node,
    policy_step_node,
    record_node,
    relabel_node,
    select_goals_node,
)
from src.models.state import TrainingState


def route_goals(state: TrainingState) -> Command:
    """Hindsight variants choose goals; the others keep the original goal."""
    config = state["config"]
    if config.variant.uses_hindsight and not config.force_original_goals:
        return Command(goto="select_goals")
    return Command(update={"goals": None}, goto="relabel")


def is_eval_iteration(state: TrainingState) -> bool:
    config = state["config"]
    it = state["iteration"]
    last = state["env_steps"] >= config.total_steps
    return it == 0 or it % config.eval_interval == 0 or last


def route_eval(state: TrainingState) -> Command:
    if is_eval_iteration(state):
        return Command(goto="evaluate")
    return Command(goto="record")


def build_graph(checkpointer: Any = None) -> Any:
    """Construct and compile the per-iteration StateGraph.

    *checkpointer* is passed through to ``compile``; training state holds
    torch modules, so the default is to run without one.
    """
    graph = StateGraph(TrainingState)

    graph.add_node("collect", collect_node)
    graph.add_node("route_goals", route_goals)
    graph.add_node("select_goals", select_goals_node)
    graph.add_node("relabel", relabel_node)
    graph.add_node("fit_critic", fit_critic_node)
    graph.add_node("policy_step", policy_step_node)
    graph.add_node("route_eval", route_eval)
    graph.add_node("evaluate", evaluate_node)
    graph.add_node("record", record_node)

    graph.add_edge(START, "collect")
    graph.add_edge("collect", "route_goals")
    # route_goals uses Command to go to "select_goals" or "relabel"
    graph.add_edge("select_goals", "relabel")
    graph.add_edge("relabel", "fit_critic")
    graph.add_edge("fit_critic", "policy_step")
    graph.add_edge("policy_step", "route_eval")
    # route_eval uses Command to go to "evaluate" or "record"
    graph.add_edge("evaluate", "record")
    graph.add_edge("record", END)

    return graph.compile(checkpointer=checkpointer)


def train_iteration(state: TrainingState, graph: Any = None) -> TrainingState:
    """Run one collect → relabel → update → record pass and return the new state."""
    graph = graph or build_graph()
    result: TrainingState = graph.invoke(state)
    result["iteration"] = state["iteration"] + 1
    return result
