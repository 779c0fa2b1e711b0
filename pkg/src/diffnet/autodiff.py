"""Gradients and Hessian-vector products of scalar functions of a ParamVector.

The Hessian-vector product uses the double-backprop identity

    H v = ∇_θ [ (∇_θ g(θ))ᵀ v ]

with the first-order graph built once per operator so conjugate
gradient can call it repeatedly.  ``hvp_finite_difference`` is the
central-difference-of-gradients oracle the exact version is tested
against.
"""

from __future__ import annotations

import logging
from collections.abc import Callable

import torch

from src.diffnet.params import ParamVector
from src.errors import DegenerateDirectionError, InputShapeError, NumericError

logger = logging.getLogger(__name__)

ScalarFn = Callable[[ParamVector], torch.Tensor]


def _leaf(at: ParamVector) -> torch.Tensor:
    return at.values.detach().clone().requires_grad_(True)


def _scalar(y: torch.Tensor) -> torch.Tensor:
    if y.numel() != 1:
        raise InputShapeError(f"function must return a scalar, got shape {tuple(y.shape)}")
    return y.reshape(())


def _check_finite(t: torch.Tensor, what: str) -> torch.Tensor:
    if not bool(torch.isfinite(t).all()):
        raise NumericError(f"non-finite entries in {what}")
    return t


def _direction(v: ParamVector | torch.Tensor, size: int) -> torch.Tensor:
    raw = v.values.detach() if isinstance(v, ParamVector) else v.detach()
    if raw.shape != (size,):
        raise InputShapeError(f"direction must have shape ({size},), got {tuple(raw.shape)}")
    if float(torch.linalg.vector_norm(raw)) == 0.0:
        raise DegenerateDirectionError("Hessian-vector product along the zero vector")
    return raw


def grad_scalar(f: ScalarFn, at: ParamVector) -> ParamVector:
    """Reverse-mode gradient ∇f at *at*."""
    x = _leaf(at)
    y = _scalar(f(at.with_values(x)))
    if not y.requires_grad:
        return at.with_values(torch.zeros_like(x.detach()))
    (g,) = torch.autograd.grad(y, x, allow_unused=True)
    if g is None:
        return at.with_values(torch.zeros_like(x.detach()))
    return at.with_values(_check_finite(g, "gradient"))


def hvp_operator(g: ScalarFn, at: ParamVector) -> Callable[[torch.Tensor], torch.Tensor]:
    """Return v ↦ ∇²g(at)·v, sharing one first-order graph across calls."""
    x = _leaf(at)
    y = _scalar(g(at.with_values(x)))
    size = x.numel()

    grad: torch.Tensor | None = None
    if y.requires_grad:
        (grad,) = torch.autograd.grad(y, x, create_graph=True, allow_unused=True)
    if grad is None or not grad.requires_grad:
        logger.debug("constraint is at most linear in θ; Hessian is zero")

        def zero_operator(v: torch.Tensor) -> torch.Tensor:
            return torch.zeros_like(_direction(v, size))

        return zero_operator

    first_order = grad

    def operator(v: torch.Tensor) -> torch.Tensor:
        direction = _direction(v, size)
        (hv,) = torch.autograd.grad(
            first_order @ direction, x, retain_graph=True, allow_unused=True
        )
        if hv is None:
            return torch.zeros_like(direction)
        return _check_finite(hv, "Hessian-vector product")

    return operator


def hvp(g: ScalarFn, at: ParamVector, v: ParamVector | torch.Tensor) -> ParamVector:
    """Exact Hessian-vector product ∇²g(at)·v."""
    direction = _direction(v, len(at))
    return at.with_values(hvp_operator(g, at)(direction))


def hvp_finite_difference(
    g: ScalarFn,
    at: ParamVector,
    v: ParamVector | torch.Tensor,
    eps: float | None = None,
) -> ParamVector:
    """Central difference of exact gradients, step ε = 1e-4/‖v‖ by default."""
    direction = _direction(v, len(at))
    if eps is None:
        eps = 1e-4 / float(torch.linalg.vector_norm(direction))
    base = at.values.detach()
    plus = grad_scalar(g, at.with_values(base + eps * direction)).values
    minus = grad_scalar(g, at.with_values(base - eps * direction)).values
    return at.with_values((plus - minus) / (2.0 * eps))
