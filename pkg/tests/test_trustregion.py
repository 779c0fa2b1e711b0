"""Tests for the trust-region subproblem: radius, conjugate gradient, KKT step, line search."""

from __future__ import annotations

import numpy as np
import pytest
import torch
from scipy import linalg

from src.diffnet.params import ParamVector
from src.errors import ConfigurationError, CurvatureError
from src.trustregion.solver import (
    TrustRegionProblem,
    conjugate_gradient,
    kkt_step,
    line_search,
    trust_radius,
)

THETA = (("theta", (3,)),)


def _vec(values) -> ParamVector:
    return ParamVector(torch.as_tensor(values, dtype=torch.float64), THETA)


def _matrix_operator(a: np.ndarray):
    a_t = torch.as_tensor(a, dtype=torch.float64)
    return lambda v: a_t @ v


class TestTrustRadius:
    def test_decimal_exact(self):
        assert trust_radius(2e-5, 0.98) == 1e-3

    @pytest.mark.parametrize(("max_kl", "gamma"), [(1e-3, 1.0), (1e-3, 0.0), (0.0, 0.9)])
    def test_rejects_bad_inputs(self, max_kl, gamma):
        with pytest.raises(ConfigurationError):
            trust_radius(max_kl, gamma)


class TestConjugateGradient:
    def test_diagonal_system(self):
        result = conjugate_gradient(
            _matrix_operator(np.diag([2.0, 4.0])), torch.tensor([2.0, 4.0], dtype=torch.float64)
        )
        assert result.x.tolist() == pytest.approx([1.0, 1.0])
        assert result.converged

    @pytest.mark.parametrize("dim", [2, 10, 50, 100])
    def test_matches_dense_solve(self, dim):
        rng = np.random.default_rng(dim)
        m = rng.standard_normal((dim, dim))
        a = m @ m.T / dim + np.eye(dim)
        b = rng.standard_normal(dim)
        result = conjugate_gradient(_matrix_operator(a), torch.as_tensor(b), iters=dim, tol=1e-12)
        np.testing.assert_allclose(result.x.numpy(), linalg.solve(a, b), rtol=1e-4, atol=1e-8)

    def test_damping_shifts_the_system(self):
        result = conjugate_gradient(
            _matrix_operator(np.eye(2)), torch.tensor([3.0, 3.0], dtype=torch.float64), damping=2.0
        )
        assert result.x.tolist() == pytest.approx([1.0, 1.0])

    def test_zero_rhs(self):
        zeros = torch.zeros(3, dtype=torch.float64)
        result = conjugate_gradient(_matrix_operator(np.eye(3)), zeros)
        assert result.iterations == 0
        assert result.x.tolist() == [0.0, 0.0, 0.0]

    def test_callback_sees_every_iterate(self):
        seen = []
        conjugate_gradient(
            _matrix_operator(np.diag([1.0, 2.0, 3.0])),
            torch.ones(3, dtype=torch.float64),
            iters=3,
            tol=0.0,
            callback=lambda i, x: seen.append(i),
        )
        assert seen == [0, 1, 2]

    def test_negative_curvature(self):
        with pytest.raises(CurvatureError):
            conjugate_gradient(_matrix_operator(-np.eye(2)), torch.ones(2, dtype=torch.float64))


class TestKKTStep:
    def test_step_lies_on_the_constraint_boundary(self):
        h = np.diag([1.0, 2.0, 3.0])
        problem = TrustRegionProblem(
            surrogate_grad=_vec([1.0, 1.0, 1.0]),
            constraint_hvp=_matrix_operator(h),
            radius=0.01,
            cg_damping=0.0,
        )
        step = kkt_step(problem).step
        delta = step.numpy()
        assert 0.5 * delta @ h @ delta == pytest.approx(0.01)
        direction = np.array([1.0, 0.5, 1.0 / 3.0])
        np.testing.assert_allclose(
            delta / np.linalg.norm(delta), direction / np.linalg.norm(direction)
        )

    @pytest.mark.parametrize("scale", [1e-3, 7.5, 1e4])
    def test_gradient_scale_does_not_change_the_step(self, scale):
        h = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]])
        grad = np.array([0.3, -1.2, 0.7])

        def step_for(g):
            problem = TrustRegionProblem(
                surrogate_grad=_vec(g), constraint_hvp=_matrix_operator(h), radius=0.02,
                cg_damping=1e-3,
            )
            return kkt_step(problem).step.numpy()

        np.testing.assert_allclose(step_for(scale * grad), step_for(grad), rtol=1e-6)

    def test_zero_gradient_means_no_step(self):
        problem = TrustRegionProblem(
            surrogate_grad=_vec(np.zeros(3)), constraint_hvp=_matrix_operator(np.eye(3)), radius=0.1
        )
        result = kkt_step(problem)
        assert result.converged
        assert result.expected_improvement == 0.0

    def test_persistent_negative_curvature(self):
        problem = TrustRegionProblem(
            surrogate_grad=_vec(np.ones(3)), constraint_hvp=_matrix_operator(-np.eye(3)), radius=0.1
        )
        with pytest.raises(CurvatureError):
            kkt_step(problem)

    def test_problem_validation(self):
        with pytest.raises(ConfigurationError):
            TrustRegionProblem(_vec(np.ones(3)), _matrix_operator(np.eye(3)), radius=0.0)
        with pytest.raises(ConfigurationError):
            TrustRegionProblem(_vec(np.ones(3)), _matrix_operator(np.eye(3)), 0.1, cg_iters=0)


class TestLineSearch:
    @staticmethod
    def _first(p: ParamVector) -> float:
        return float(p.values[0])

    def test_backtracks_until_surrogate_improves(self):
        result = line_search(
            _vec(np.zeros(3)),
            _vec([1.0, 0.0, 0.0]),
            lambda p: self._first(p) - self._first(p) ** 2,
            lambda p: 0.5 * self._first(p) ** 2,
            radius=1.0,
        )
        assert result.accepted
        assert result.alpha == 0.5
        assert result.backtracks == 1

    def test_backtracks_until_constraint_is_met(self):
        result = line_search(
            _vec(np.zeros(3)),
            _vec([1.0, 0.0, 0.0]),
            self._first,
            lambda p: self._first(p) ** 2,
            radius=0.1,
        )
        assert result.accepted
        assert result.alpha == 0.25
        assert result.constraint <= 1.5 * 0.1

    def test_rejects_and_keeps_parameters(self):
        theta = _vec([0.3, 0.0, 0.0])
        result = line_search(
            theta, _vec([1.0, 0.0, 0.0]), lambda p: -self._first(p), lambda p: 0.0, radius=1.0,
            max_backtracks=4,
        )
        assert not result.accepted
        assert result.alpha == 0.0
        assert torch.equal(result.params.values, theta.values)
        assert result.backtracks == 4
