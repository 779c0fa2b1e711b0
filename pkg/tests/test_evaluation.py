"""Tests for the exact tabular oracles, the diagnostic suites and run comparison."""

from __future__ import annotations

import numpy as np
import pytest

from src.errors import ConfigurationError, InputShapeError
from src.evaluation import compare
from src.evaluation.compare import compare_groups, format_report, main, run_compare, success_at
from src.evaluation.enumerable import (
    GoalMDP,
    goal_return,
    hindsight_return,
    improvement_case,
    random_discounted_mdp,
    random_goal_policy,
    softmax_policy,
    two_state_mdp,
    unbiasedness_deviations,
)
from src.evaluation.suites import SUITES, run_diagnostics
from src.models.config import build_config
from src.paths import METRICS_FILENAME
from src.session.logger import RunLogger


class TestGoalMDP:
    def test_paths_cover_all_probability(self):
        mdp = two_state_mdp()
        total = sum(p.env_prob for p in mdp.paths()) / mdp.n_actions**mdp.horizon
        assert total == pytest.approx(1.0)

    def test_returns_are_bounded(self):
        mdp = two_state_mdp(gamma=0.9)
        policy = random_goal_policy(mdp, np.random.default_rng(0))
        ceiling = sum(0.9**t for t in range(mdp.horizon))
        for goal in range(mdp.n_states):
            assert 0.0 <= goal_return(mdp, policy, goal) <= ceiling

    def test_own_goal_needs_no_correction(self):
        mdp = two_state_mdp()
        policy = random_goal_policy(mdp, np.random.default_rng(1))
        assert hindsight_return(mdp, policy, 0, 0) == pytest.approx(goal_return(mdp, policy, 0))

    def test_hindsight_return_is_unbiased(self):
        mdp = two_state_mdp()
        policy = random_goal_policy(mdp, np.random.default_rng(2), scale=2.0)
        deviations = unbiasedness_deviations(mdp, policy)
        assert len(deviations) == 4
        assert max(deviations.values()) < 1e-9

    def test_malformed_transitions(self):
        with pytest.raises(InputShapeError):
            GoalMDP(np.full((2, 2, 2), 0.3), np.array([0.5, 0.5]), horizon=2, gamma=0.9)


class TestDiscountedMDP:
    def test_values_solve_bellman_equation(self):
        mdp = random_discounted_mdp(4, 3, 0.9, np.random.default_rng(0))
        policy = softmax_policy(np.zeros((4, 3)))
        v = mdp.values(policy)
        backup = np.sum(policy * (mdp.rewards + 0.9 * mdp.transitions @ v), axis=-1)
        np.testing.assert_allclose(v, backup)

    def test_advantages_average_to_zero_under_the_policy(self):
        mdp = random_discounted_mdp(4, 3, 0.9, np.random.default_rng(1))
        policy = softmax_policy(np.random.default_rng(2).standard_normal((4, 3)))
        expected = np.sum(policy * mdp.advantages(policy), axis=-1)
        np.testing.assert_allclose(expected, 0.0, atol=1e-12)

    def test_local_approximation_is_exact_at_the_old_policy(self):
        mdp = random_discounted_mdp(3, 2, 0.8, np.random.default_rng(3))
        policy = softmax_policy(np.random.default_rng(4).standard_normal((3, 2)))
        assert mdp.local_approximation(policy, policy) == pytest.approx(mdp.expected_return(policy))

    def test_improvement_bound_holds_for_nearby_policies(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            mdp = random_discounted_mdp(4, 3, 0.9, rng)
            logits = rng.standard_normal((4, 3))
            new_logits = logits + 0.05 * rng.standard_normal((4, 3))
            case = improvement_case(mdp, softmax_policy(logits), softmax_policy(new_logits))
            assert case.report.ratio_ok
            assert case.holds


class TestSuites:
    @pytest.mark.parametrize("suite", ["prop1", "prop2", "prop3", "unbiasedness"])
    def test_suite_passes_and_writes_report(self, tmp_path, suite):
        report = run_diagnostics(suite, tmp_path, seed=0)
        assert report.passed, report.failures
        text = (tmp_path / f"diag_{suite}.txt").read_text(encoding="utf-8")
        assert text.startswith(f"suite: {suite}")
        assert text.rstrip().endswith("result: PASS")

    def test_prop2_reports_pair_count(self, tmp_path):
        report = run_diagnostics("prop2", tmp_path)
        assert "100/100 pairs satisfy variance inequality" in report.lines

    def test_unknown_suite(self, tmp_path):
        with pytest.raises(ConfigurationError):
            run_diagnostics("prop9", tmp_path)

    def test_registry(self):
        assert set(SUITES) == {"prop1", "prop2", "prop3", "unbiasedness", "ess"}


def _write_run(out_dir, success_rates, step=100):
    config = build_config({"env": "bitflip:4", "batchsize": 16})
    with RunLogger(out_dir, config) as run_log:
        for i, rate in enumerate(success_rates):
            run_log.log_iteration({
                "iteration": i, "env_steps": (i + 1) * step, "success_rate": rate,
                "mean_return": rate, "surrogate": 0.0, "constraint_realized": 0.0,
                "kl_analytic": 0.0, "ess": 1.0, "cg_residual": 0.0, "line_search_alpha": 1.0,
                "rejected": 0, "wall_time_s": 0.0,
            })
        run_log.finish()
    return out_dir


class TestCompare:
    def test_success_at_budget(self):
        rows = [
            {"env_steps": 100.0, "success_rate": 0.1},
            {"env_steps": 200.0, "success_rate": 0.4},
        ]
        assert success_at(rows) == 0.4
        assert success_at(rows, budget=150) == 0.1
        assert np.isnan(success_at(rows, budget=50))

    def test_groups_are_compared_by_median(self):
        report = compare_groups([0.9, 0.8, 0.95], [0.1, 0.2, 0.15])
        assert report.median_a == pytest.approx(0.9)
        assert report.median_b == pytest.approx(0.15)
        assert report.margin == pytest.approx(0.75)
        assert report.u_statistic == 9.0
        assert "Mann" in format_report(report)

    def test_empty_group(self):
        with pytest.raises(ConfigurationError):
            compare_groups([float("nan")], [0.5])

    def test_run_directories(self, tmp_path):
        a = [_write_run(tmp_path / f"a{i}", [0.2, 0.8 + 0.05 * i]) for i in range(3)]
        b = [_write_run(tmp_path / f"b{i}", [0.1, 0.2 + 0.05 * i]) for i in range(3)]
        report = run_compare(a, b)
        assert report.n_a == report.n_b == 3
        assert report.median_a == pytest.approx(0.85)
        assert run_compare(a, b, budget=100).median_a == pytest.approx(0.2)

    def test_cli_exit_codes(self, tmp_path, capsys):
        a = _write_run(tmp_path / "a", [0.5])
        b = _write_run(tmp_path / "b", [0.7])
        assert main(["--a", str(a), "--b", str(b)]) == 0
        assert "SUCCESS RATE COMPARISON" in capsys.readouterr().out
        assert main(["--a", str(a), "--b", str(tmp_path / "missing")]) == 2
        assert (a / METRICS_FILENAME).is_file()

    def test_cli_loads_env_file_and_configures_logging(self, tmp_path, monkeypatch):
        calls = []
        monkeypatch.setattr(compare, "load_dotenv", lambda: calls.append("dotenv"))
        monkeypatch.setattr(compare, "setup_logging", lambda: calls.append("logging"))
        a = _write_run(tmp_path / "a", [0.5])
        b = _write_run(tmp_path / "b", [0.7])
        assert main(["--a", str(a), "--b", str(b)]) == 0
        assert calls == ["dotenv", "logging"]
