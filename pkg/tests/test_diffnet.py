"""Tests for flat parameter vectors, networks, autodiff helpers and checkpoints."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from src.diffnet.autodiff import grad_scalar, hvp, hvp_finite_difference
from src.diffnet.checkpoint import decode, encode, load_checkpoint, save_checkpoint
from src.diffnet.networks import CategoricalHead, GaussianHead, PolicyNet, ValueNet
from src.diffnet.params import ParamVector
from src.errors import (
    ActionRangeError,
    CheckpointIncompatibleError,
    DegenerateDirectionError,
    InputShapeError,
    NumericError,
)

LAYOUT = (("w", (2, 2)), ("b", (2,)))


def _vector(values) -> ParamVector:
    return ParamVector(torch.as_tensor(values, dtype=torch.float64), LAYOUT)


def _quadratic(p: ParamVector) -> torch.Tensor:
    """g(θ) = ½θᵀ diag(2, 4) θ over a 2-entry vector."""
    return 0.5 * (2.0 * p.values[0] ** 2 + 4.0 * p.values[1] ** 2)


class TestParamVector:
    def test_unflatten_follows_layout_order(self):
        p = _vector([1, 2, 3, 4, 5, 6])
        named = p.unflatten()
        assert named["w"].tolist() == [[1, 2], [3, 4]]
        assert named["b"].tolist() == [5, 6]

    def test_flatten_inverts_unflatten(self):
        p = _vector(np.arange(6.0))
        again = ParamVector.flatten(p.unflatten(), LAYOUT)
        assert torch.equal(again.values, p.values)

    def test_wrong_length_rejected(self):
        with pytest.raises(InputShapeError):
            _vector([1.0, 2.0])

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            _vector([1, 2, 3, 4, 5, float("nan")])

    def test_arithmetic_returns_new_vectors(self):
        a = _vector(np.ones(6))
        b = _vector(np.arange(6.0))
        assert (a + b).values.tolist() == [1, 2, 3, 4, 5, 6]
        assert (b - a).values.tolist() == [-1, 0, 1, 2, 3, 4]
        assert a.scaled(3.0).values.tolist() == [3.0] * 6
        assert a.dot(b) == pytest.approx(15.0)
        assert a.values.tolist() == [1.0] * 6

    def test_load_into_module_round_trip(self):
        policy = PolicyNet.build(4, CategoricalHead(3), (8,), seed=1)
        other = PolicyNet.build(4, CategoricalHead(3), (8,), seed=2)
        policy.params.load_into(other._module)
        assert torch.equal(ParamVector.from_module(other._module).values, policy.params.values)

    def test_load_into_rejects_other_layout(self):
        policy = PolicyNet.build(4, CategoricalHead(3), (8,), seed=1)
        with pytest.raises(InputShapeError):
            _vector(np.arange(6.0)).load_into(policy._module)


class TestPolicyNet:
    def test_build_is_seed_deterministic(self):
        a = PolicyNet.build(6, CategoricalHead(3), (16, 16), seed=5)
        b = PolicyNet.build(6, CategoricalHead(3), (16, 16), seed=5)
        c = PolicyNet.build(6, CategoricalHead(3), (16, 16), seed=6)
        assert torch.equal(a.params.values, b.params.values)
        assert not torch.equal(a.params.values, c.params.values)

    def test_initial_categorical_policy_is_near_uniform(self):
        policy = PolicyNet.build(4, CategoricalHead(4), (16,), seed=0)
        probs = policy.distribution(np.zeros((3, 4))).probs
        assert torch.allclose(probs, torch.full_like(probs, 0.25), atol=0.05)

    def test_log_prob_rejects_out_of_range_action(self):
        policy = PolicyNet.build(4, CategoricalHead(2), (8,), seed=0)
        with pytest.raises(ActionRangeError):
            policy.log_prob(np.zeros((1, 4)), [2])

    def test_input_width_checked(self):
        policy = PolicyNet.build(4, CategoricalHead(2), (8,), seed=0)
        with pytest.raises(InputShapeError):
            policy.distribution(np.zeros((1, 5)))

    def test_with_params_leaves_original_untouched(self):
        policy = PolicyNet.build(4, CategoricalHead(2), (8,), seed=0)
        before = policy.params.values.clone()
        moved = policy.with_params(policy.params + torch.ones(len(policy.params)))
        assert torch.equal(policy.params.values, before)
        assert not torch.equal(moved.params.values, before)

    def test_sampling_uses_the_given_generator(self):
        policy = PolicyNet.build(3, GaussianHead(2), (8,), seed=0)
        x = np.zeros((5, 3))
        a = policy.sample(x, torch.Generator().manual_seed(7))
        b = policy.sample(x, torch.Generator().manual_seed(7))
        assert torch.equal(a, b)
        assert a.shape == (5, 2)

    def test_gaussian_mode_is_the_mean(self):
        policy = PolicyNet.build(3, GaussianHead(2), (8,), seed=0)
        x = np.ones((2, 3))
        assert torch.equal(policy.mode(x), policy.distribution(x).base_dist.loc)

    def test_copy_shares_parameters(self):
        policy = PolicyNet.build(4, CategoricalHead(2), (8,), seed=0)
        twin = policy.copy()
        x = np.random.default_rng(0).standard_normal((4, 4))
        assert torch.equal(policy.log_prob(x, [0, 1, 0, 1]), twin.log_prob(x, [0, 1, 0, 1]))

    def test_categorical_probabilities_sum_to_one(self):
        policy = PolicyNet.build(5, CategoricalHead(4), (16,), seed=2)
        x = np.random.default_rng(3).standard_normal((6, 5))
        total = sum(torch.exp(policy.log_prob(x, np.full(6, a))) for a in range(4))
        assert torch.allclose(total, torch.ones(6, dtype=torch.float64), atol=1e-9)

    def test_uniform_logits_give_log_quarter(self):
        policy = PolicyNet.build(3, CategoricalHead(4), (8,), seed=0)
        zeros = torch.zeros(len(policy.params), dtype=torch.float64)
        flat = policy.with_params(policy.params.with_values(zeros))
        logp = flat.log_prob(np.ones((4, 3)), [0, 1, 2, 3])
        assert logp.tolist() == pytest.approx([np.log(0.25)] * 4)

    def test_standard_normal_at_its_mode(self):
        policy = PolicyNet.build(3, GaussianHead(1), (8,), seed=0)
        logp = policy.log_prob(np.zeros((1, 3)), [[0.0]])
        assert float(logp[0]) == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-9)
        assert float(logp[0]) == pytest.approx(-0.9189385, abs=1e-7)


class TestValueNet:
    def test_value_shape(self):
        critic = ValueNet.build(5, (8,), seed=0)
        assert critic.value(np.zeros((7, 5))).shape == (7,)


class TestAutodiff:
    def test_gradient_of_quadratic(self):
        layout = (("theta", (2,)),)
        at = ParamVector(torch.tensor([1.0, -2.0], dtype=torch.float64), layout)
        g = grad_scalar(_quadratic, at)
        assert g.values.tolist() == pytest.approx([2.0, -8.0])

    def test_hvp_of_diagonal_quadratic(self):
        layout = (("theta", (2,)),)
        at = ParamVector(torch.tensor([0.3, 0.7], dtype=torch.float64), layout)
        hv = hvp(_quadratic, at, torch.tensor([1.0, 1.0], dtype=torch.float64))
        assert hv.values.tolist() == pytest.approx([2.0, 4.0])

    def test_hvp_along_zero_vector_rejected(self):
        layout = (("theta", (2,)),)
        at = ParamVector(torch.zeros(2, dtype=torch.float64), layout)
        with pytest.raises(DegenerateDirectionError):
            hvp(_quadratic, at, torch.zeros(2, dtype=torch.float64))

    def test_policy_gradient_matches_central_difference(self):
        policy = PolicyNet.build(3, CategoricalHead(3), (6,), seed=3)
        x = np.random.default_rng(1).standard_normal((10, 3))
        actions = np.arange(10) % 3

        def f(p: ParamVector) -> torch.Tensor:
            return policy.log_prob(x, actions, p).sum()

        grad = grad_scalar(f, policy.params).values
        base = policy.params.values
        eps = 1e-6
        for i in range(0, len(base), 7):
            e = torch.zeros_like(base)
            e[i] = eps
            fd = (f(policy.params.with_values(base + e)) - f(policy.params.with_values(base - e)))
            assert float(grad[i]) == pytest.approx(float(fd) / (2 * eps), rel=1e-3, abs=1e-7)

    def test_hvp_matches_finite_difference_oracle(self):
        policy = PolicyNet.build(3, CategoricalHead(3), (6,), seed=4)
        x = np.random.default_rng(2).standard_normal((12, 3))
        actions = np.arange(12) % 3

        def g(p: ParamVector) -> torch.Tensor:
            return (policy.log_prob(x, actions, p) ** 2).mean()

        v = torch.randn(len(policy.params), generator=torch.Generator().manual_seed(0),
                        dtype=torch.float64)
        exact = hvp(g, policy.params, v).values
        oracle = hvp_finite_difference(g, policy.params, v).values
        assert torch.allclose(exact, oracle, rtol=1e-2, atol=1e-6)

    @staticmethod
    def _policy_curvature():
        policy = PolicyNet.build(3, CategoricalHead(3), (6,), seed=5)
        x = np.random.default_rng(6).standard_normal((12, 3))
        actions = np.arange(12) % 3

        def g(p: ParamVector) -> torch.Tensor:
            return (policy.log_prob(x, actions, p) ** 2).mean()

        gen = torch.Generator().manual_seed(1)
        u = torch.randn(len(policy.params), generator=gen, dtype=torch.float64)
        v = torch.randn(len(policy.params), generator=gen, dtype=torch.float64)
        return g, policy.params, u, v

    def test_hvp_is_linear(self):
        g, at, u, v = self._policy_curvature()
        combined = hvp(g, at, 2.0 * u - 0.5 * v).values
        separate = 2.0 * hvp(g, at, u).values - 0.5 * hvp(g, at, v).values
        assert torch.allclose(combined, separate, rtol=1e-6, atol=1e-12)

    def test_hvp_is_symmetric(self):
        g, at, u, v = self._policy_curvature()
        u_hv = float(u @ hvp(g, at, v).values)
        v_hu = float(v @ hvp(g, at, u).values)
        assert u_hv == pytest.approx(v_hu, rel=1e-3)


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        policy = PolicyNet.build(5, GaussianHead(2), (8, 8), seed=9)
        path = save_checkpoint(policy.params, tmp_path / "ckpt_0.bin")
        loaded = load_checkpoint(path, expected=policy.params.layout)
        assert loaded.layout == policy.params.layout
        assert torch.equal(loaded.values, policy.params.values)

    def test_header_starts_with_magic(self):
        blob = encode(_vector(np.arange(6.0)))
        assert blob[:4] == b"HTRP"

    def test_bad_magic_rejected(self):
        with pytest.raises(CheckpointIncompatibleError):
            decode(b"NOPE" + bytes(16))

    def test_truncated_payload_rejected(self):
        blob = encode(_vector(np.arange(6.0)))
        with pytest.raises(CheckpointIncompatibleError):
            decode(blob[:-8])

    def test_layout_mismatch_rejected(self, tmp_path):
        small = PolicyNet.build(5, CategoricalHead(2), (8,), seed=0)
        large = PolicyNet.build(5, CategoricalHead(2), (16,), seed=0)
        path = save_checkpoint(small.params, tmp_path / "ckpt_1.bin")
        with pytest.raises(CheckpointIncompatibleError):
            load_checkpoint(path, expected=large.params.layout)
