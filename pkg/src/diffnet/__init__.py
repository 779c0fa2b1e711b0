"""Differentiable MLP policies/critics over flat parameter vectors."""

from src.diffnet.autodiff import grad_scalar, hvp, hvp_finite_difference, hvp_operator
from src.diffnet.networks import CategoricalHead, GaussianHead, PolicyNet, ValueNet
from src.diffnet.params import ParamVector

__all__ = [
    "CategoricalHead",
    "GaussianHead",
    "ParamVector",
    "PolicyNet",
    "ValueNet",
    "grad_scalar",
    "hvp",
    "hvp_finite_difference",
    "hvp_operator",
]
