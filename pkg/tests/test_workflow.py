"""Tests for the per-iteration LangGraph workflow (routers and one full pass)."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from src.models.config import ExperimentConfig, Variant
from src.models.initial_state import new_training_state
from src.models.state import METRICS_COLUMNS
from src.workflow import build_graph, is_eval_iteration, route_eval, route_goals, train_iteration


def _config(**overrides) -> ExperimentConfig:
    values = {
        "env": "bitflip:4",
        "batchsize": 16,
        "total_steps": 64,
        "n_goals": 4,
        "hidden_sizes": (8,),
        "eval_episodes": 3,
        "eval_interval": 2,
        "critic_updates": 2,
        "record_wall_time": False,
    }
    values.update(overrides)
    return ExperimentConfig(**values)


@pytest.fixture(scope="module")
def graph():
    return build_graph()


class TestRouteGoals:
    def test_hindsight_variant_selects_goals(self):
        cmd = route_goals(new_training_state(_config()))
        assert cmd.goto == "select_goals"

    @pytest.mark.parametrize("variant", [Variant.QKL_TRPO, Variant.TRPO])
    def test_plain_variants_keep_original_goals(self, variant):
        cmd = route_goals(new_training_state(_config(variant=variant)))
        assert cmd.goto == "relabel"
        assert cmd.update == {"goals": None}

    def test_forced_original_goals(self):
        cmd = route_goals(new_training_state(_config(force_original_goals=True)))
        assert cmd.goto == "relabel"


class TestRouteEval:
    def test_first_iteration_is_evaluated(self):
        state = new_training_state(_config())
        assert is_eval_iteration(state)
        assert route_eval(state).goto == "evaluate"

    def test_off_interval_iteration_is_not(self):
        state = new_training_state(_config())
        state["iteration"] = 3
        state["env_steps"] = 20
        assert not is_eval_iteration(state)
        assert route_eval(state).goto == "record"

    def test_interval_iteration(self):
        state = new_training_state(_config())
        state["iteration"] = 4
        assert is_eval_iteration(state)

    def test_final_iteration_is_evaluated(self):
        state = new_training_state(_config())
        state["iteration"] = 3
        state["env_steps"] = 64
        assert is_eval_iteration(state)


class TestTrainIteration:
    def test_one_pass_records_metrics_and_clears_buffers(self, graph):
        state = train_iteration(new_training_state(_config()), graph)
        assert state["iteration"] == 1
        assert state["env_steps"] >= 16
        assert state["evaluated"]
        assert tuple(state["metrics"]) == METRICS_COLUMNS
        assert state["metrics"]["iteration"] == 0
        assert state["metrics"]["wall_time_s"] == 0.0
        for key in ("buffer", "goals", "batch", "step"):
            assert state[key] is None

    def test_success_rate_carries_over_unevaluated_iterations(self, graph):
        state = train_iteration(new_training_state(_config()), graph)
        evaluated_rate = state["success_rate"]
        state = train_iteration(state, graph)
        assert not state["evaluated"]
        assert state["metrics"]["success_rate"] == evaluated_rate

    def test_forced_original_goals_reduce_to_quadratic_trpo(self, graph):
        hindsight = train_iteration(
            new_training_state(_config(force_original_goals=True)), graph
        )
        plain = train_iteration(new_training_state(_config(variant=Variant.QKL_TRPO)), graph)
        assert torch.equal(hindsight["policy"].params.values, plain["policy"].params.values)
        assert hindsight["metrics"] == plain["metrics"]

    def test_same_seed_same_iteration(self, graph):
        a = train_iteration(new_training_state(_config(seed=3)), graph)
        b = train_iteration(new_training_state(_config(seed=3)), graph)
        assert torch.equal(a["policy"].params.values, b["policy"].params.values)
        assert np.isclose(a["metrics"]["surrogate"], b["metrics"]["surrogate"], equal_nan=True)
