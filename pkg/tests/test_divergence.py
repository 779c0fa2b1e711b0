"""Tests for KL estimators, closed-form divergences and the estimator checks."""

from __future__ import annotations

import math

import numpy as np
import pytest
import torch
from scipy import stats
from torch.distributions import Categorical, Independent, Normal

from src.divergence.checks import (
    asymmetric_pair,
    compare_variances,
    penalty_coefficient,
    prop1_taylor_check,
    prop2_variance_check,
    prop3_bound_check,
    symmetric_pair,
)
from src.divergence.estimators import (
    analytic_kl,
    divergence_report,
    naive_kl_sample_estimate,
    qkl_sample_estimate,
    qkl_terms,
    taylor_remainder,
    total_variation,
)
from src.errors import DistributionFamilyError, EmptyBatchError, InputShapeError


def _cat(*probs) -> Categorical:
    return Categorical(probs=torch.tensor(probs, dtype=torch.float64))


def _gauss(loc: float, scale: float = 1.0) -> Independent:
    loc_t = torch.tensor([[loc]], dtype=torch.float64)
    return Independent(Normal(loc_t, torch.full_like(loc_t, scale)), 1)


class TestSampleEstimates:
    def test_quadratic_terms(self):
        terms = qkl_terms([0.0, 0.0], [1.0, -1.0])
        assert terms.tolist() == [0.5, 0.5]
        assert float(qkl_sample_estimate([0.0, 0.0], [1.0, -1.0])) == pytest.approx(0.5)

    def test_weighted_mean(self):
        est = qkl_sample_estimate([0.0, 0.0], [1.0, 2.0], weights=[3.0, 1.0])
        assert float(est) == pytest.approx(0.75 * 0.5 + 0.25 * 2.0)

    def test_naive_estimate_can_go_negative(self):
        naive = naive_kl_sample_estimate([-1.0, -1.0], [-0.5, -0.5])
        quad = qkl_sample_estimate([-1.0, -1.0], [-0.5, -0.5])
        assert float(naive) < 0.0 < float(quad)

    def test_gradient_flows_to_new_log_probs(self):
        logp_new = torch.tensor([-0.5, -1.5], dtype=torch.float64, requires_grad=True)
        qkl_sample_estimate(torch.tensor([-1.0, -1.0]), logp_new).backward()
        assert logp_new.grad.tolist() == pytest.approx([0.25, -0.25])

    def test_empty_input(self):
        with pytest.raises(EmptyBatchError):
            qkl_terms([], [])

    def test_mismatched_lengths(self):
        with pytest.raises(InputShapeError):
            qkl_terms([0.0], [0.0, 1.0])

    def test_negative_weights(self):
        with pytest.raises(InputShapeError):
            qkl_sample_estimate([0.0, 0.0], [1.0, 1.0], weights=[1.0, -1.0])


class TestClosedForms:
    def test_kl_of_identical_policies_is_zero(self):
        assert float(analytic_kl(_cat(0.3, 0.7), _cat(0.3, 0.7))) == 0.0

    def test_categorical_kl(self):
        expected = 0.5 * math.log(0.5 / 0.55) + 0.5 * math.log(0.5 / 0.45)
        assert float(analytic_kl(_cat(0.5, 0.5), _cat(0.55, 0.45))) == pytest.approx(expected)

    def test_family_mismatch(self):
        with pytest.raises(DistributionFamilyError):
            analytic_kl(_cat(0.5, 0.5), _gauss(0.0))

    def test_outcome_count_mismatch(self):
        with pytest.raises(DistributionFamilyError):
            analytic_kl(_cat(0.5, 0.5), _cat(0.2, 0.3, 0.5))

    def test_categorical_total_variation(self):
        assert float(total_variation(_cat(0.5, 0.5), _cat(0.7, 0.3))) == pytest.approx(0.2)

    def test_gaussian_total_variation_monte_carlo(self):
        tv = float(total_variation(_gauss(0.0), _gauss(0.5), n_samples=200_000, seed=1)[0])
        assert tv == pytest.approx(2.0 * stats.norm.cdf(0.25) - 1.0, abs=0.01)


class TestDivergenceReport:
    def test_nearby_categoricals_agree_to_second_order(self):
        report = divergence_report(_cat(0.5, 0.5), _cat(0.55, 0.45))
        assert report.d_qkl == pytest.approx(report.d_kl, rel=0.05)
        assert report.ratio_kl_qkl == pytest.approx(1.0, abs=0.05)
        assert report.d_tv == pytest.approx(0.05)

    def test_gaussian_report_uses_closed_form_kl(self):
        def single(loc: float) -> Independent:
            one = torch.ones(1, dtype=torch.float64)
            return Independent(Normal(loc * one, one), 1)

        report = divergence_report(single(0.0), single(0.1), n_samples=50_000)
        assert report.d_kl == pytest.approx(0.005)
        assert report.d_qkl == pytest.approx(0.005, rel=0.1)


class TestTaylorCheck:
    def test_remainder_of_identical_pair(self):
        assert taylor_remainder([0.7, 0.3], [0.7, 0.3]) == 0.0

    def test_asymmetric_pair_decays_cubically(self):
        report = prop1_taylor_check(asymmetric_pair)
        assert report.passed
        for row in report.rows:
            assert 6.0 <= row.halving_ratio <= 10.0

    def test_symmetric_pair_decays_faster(self):
        report = prop1_taylor_check(symmetric_pair)
        assert not report.passed
        assert all(row.halving_ratio > 12.0 for row in report.rows)


class TestVarianceCheck:
    def test_nearby_pair_has_lower_quadratic_variance(self):
        assert prop2_variance_check(_cat(0.5, 0.5), _cat(0.55, 0.45)) is True

    def test_far_pair_is_inconclusive(self):
        assert prop2_variance_check(_cat(0.5, 0.5), _cat(0.9, 0.1)) is None

    def test_comparison_values(self):
        cmp = compare_variances(_cat(0.5, 0.5), _cat(0.55, 0.45))
        assert cmp.max_abs_logratio == pytest.approx(math.log(0.5 / 0.45))
        assert cmp.holds


class TestBoundCheck:
    def test_penalty_coefficient(self):
        assert penalty_coefficient(1.0, 0.5) == pytest.approx(8.0)

    def test_identical_policies_give_the_surrogate(self):
        probs = torch.tensor([[0.2, 0.8], [0.6, 0.4]], dtype=torch.float64)
        report = prop3_bound_check(
            Categorical(probs=probs), Categorical(probs=probs), np.array([[1.0, -1.0]] * 2), 0.9,
            surrogate=2.5,
        )
        assert report.ratio_ok and report.pinsker_ok
        assert report.d_tv == 0.0
        assert report.bound == pytest.approx(2.5)

    def test_nearby_policies(self):
        old = torch.tensor([[0.5, 0.5], [0.3, 0.7]], dtype=torch.float64)
        new = torch.tensor([[0.52, 0.48], [0.35, 0.65]], dtype=torch.float64)
        adv = np.array([[0.5, -0.5], [2.0, -1.0]])
        report = prop3_bound_check(Categorical(probs=old), Categorical(probs=new), adv, 0.9)
        assert report.state_index == 1
        assert report.d_tv == pytest.approx(0.05)
        assert report.ratio_ok
        assert report.pinsker_ok
        assert report.beta == 2.0
        assert report.bound == pytest.approx(-report.c * report.qkl_max_bits)

    def test_needs_batched_distributions(self):
        with pytest.raises(InputShapeError):
            prop3_bound_check(_cat(0.5, 0.5), _cat(0.4, 0.6), np.zeros(2), 0.9)
