"""Policy and value networks over flat parameter vectors.

Both network types are immutable value objects: the ``nn.Module`` only
fixes the architecture, and every evaluation runs through
``torch.func.functional_call`` with an explicit ``ParamVector``.  An
update therefore produces a new network via ``with_params`` and never
mutates the old one.

Design choices:
  - tanh activations throughout
  - orthogonal initialisation, final policy layer scaled by 0.01 so the
    initial policy is close to uniform
  - Gaussian heads use a state-independent learnable log-std clamped
    to [LOG_STD_MIN, LOG_STD_MAX]
"""

from __future__ import annotations

import copy
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
import torch
from torch import nn
from torch.distributions import Categorical, Distribution, Independent, Normal
from torch.func import functional_call

from src.diffnet.params import ParamVector
from src.errors import ActionRangeError, InputShapeError, NumericError
from src.settings import DEFAULT_HIDDEN_SIZES, LOG_STD_MAX, LOG_STD_MIN

DTYPE = torch.float64

ArrayLike = torch.Tensor | np.ndarray | Sequence[float]


class CategoricalHead(NamedTuple):
    n_actions: int


class GaussianHead(NamedTuple):
    action_dim: int


Head = CategoricalHead | GaussianHead


def _mlp(in_dim: int, hidden_sizes: Sequence[int], out_dim: int, out_gain: float) -> nn.Sequential:
    if in_dim < 1 or out_dim < 1 or any(h < 1 for h in hidden_sizes):
        raise InputShapeError("layer sizes must be positive integers")
    layers: list[nn.Module] = []
    prev = in_dim
    for width in hidden_sizes:
        layers += [nn.Linear(prev, width, dtype=DTYPE), nn.Tanh()]
        prev = width
    layers.append(nn.Linear(prev, out_dim, dtype=DTYPE))

    linears = [m for m in layers if isinstance(m, nn.Linear)]
    for layer in linears:
        nn.init.orthogonal_(layer.weight, gain=1.0)
        nn.init.zeros_(layer.bias)
    nn.init.orthogonal_(linears[-1].weight, gain=out_gain)
    return nn.Sequential(*layers)


def _as_inputs(inputs: ArrayLike, input_dim: int) -> torch.Tensor:
    x = torch.as_tensor(inputs, dtype=DTYPE)
    if x.dim() == 0 or x.dim() > 2 or x.shape[-1] != input_dim:
        raise InputShapeError(f"expected input of width {input_dim}, got shape {tuple(x.shape)}")
    return x


class _PolicyModule(nn.Module):
    def __init__(self, input_dim: int, head: Head, hidden_sizes: Sequence[int]) -> None:
        super().__init__()
        if isinstance(head, CategoricalHead):
            if head.n_actions < 2:
                raise InputShapeError("categorical head needs at least 2 actions")
            self.body = _mlp(input_dim, hidden_sizes, head.n_actions, out_gain=0.01)
        else:
            self.body = _mlp(input_dim, hidden_sizes, head.action_dim, out_gain=0.01)
            self.log_std = nn.Parameter(torch.zeros(head.action_dim, dtype=DTYPE))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)


class PolicyNet:
    """Goal-conditioned stochastic policy π(a | s, g)."""

    def __init__(
        self,
        module: _PolicyModule,
        head: Head,
        input_dim: int,
        hidden_sizes: tuple[int, ...],
        params: ParamVector,
    ) -> None:
        self._module = module
        self.head = head
        self.input_dim = input_dim
        self.hidden_sizes = hidden_sizes
        self.params = params

    @classmethod
    def build(
        cls,
        input_dim: int,
        head: Head,
        hidden_sizes: Sequence[int] = DEFAULT_HIDDEN_SIZES,
        *,
        seed: int = 0,
    ) -> PolicyNet:
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            module = _PolicyModule(input_dim, head, hidden_sizes)
        module.requires_grad_(False)
        return cls(module, head, input_dim, tuple(hidden_sizes), ParamVector.from_module(module))

    @property
    def is_categorical(self) -> bool:
        return isinstance(self.head, CategoricalHead)

    def copy(self) -> PolicyNet:
        """Same parameters over a private module (functional calls swap module state)."""
        return PolicyNet(
            copy.deepcopy(self._module), self.head, self.input_dim, self.hidden_sizes, self.params
        )

    def with_params(self, params: ParamVector) -> PolicyNet:
        if params.layout != self.params.layout:
            raise InputShapeError("parameter layout does not match this policy")
        return PolicyNet(self._module, self.head, self.input_dim, self.hidden_sizes, params)

    def distribution(self, inputs: ArrayLike, params: ParamVector | None = None) -> Distribution:
        params = self.params if params is None else params
        x = _as_inputs(inputs, self.input_dim)
        named = params.unflatten()
        out = functional_call(self._module, named, (x,))
        if not bool(torch.isfinite(out).all()):
            raise NumericError("policy produced non-finite activations")
        if isinstance(self.head, CategoricalHead):
            return Categorical(logits=out)
        log_std = named["log_std"].clamp(LOG_STD_MIN, LOG_STD_MAX)
        return Independent(Normal(out, log_std.exp().expand_as(out)), 1)

    def log_prob(
        self,
        inputs: ArrayLike,
        actions: ArrayLike,
        params: ParamVector | None = None,
    ) -> torch.Tensor:
        """Return log π_θ(a | s, g) for each row of *inputs*."""
        dist = self.distribution(inputs, params)
        if isinstance(self.head, CategoricalHead):
            a = torch.as_tensor(actions, dtype=torch.long)
            if bool(((a < 0) | (a >= self.head.n_actions)).any()):
                raise ActionRangeError(f"actions must lie in [0, {self.head.n_actions})")
            if a.shape != dist.batch_shape:
                raise InputShapeError("one action per input row expected")
            return dist.log_prob(a)
        a = torch.as_tensor(actions, dtype=DTYPE)
        if a.shape != dist.batch_shape + dist.event_shape:
            raise InputShapeError("one action vector per input row expected")
        return dist.log_prob(a)

    def sample(self, inputs: ArrayLike, generator: torch.Generator) -> torch.Tensor:
        """Draw one action per input row using an explicit generator."""
        dist = self.distribution(inputs)
        with torch.no_grad():
            if isinstance(dist, Categorical):
                probs = dist.probs.reshape(-1, dist.probs.shape[-1])
                draws = torch.multinomial(probs, 1, generator=generator).squeeze(-1)
                return draws.reshape(dist.batch_shape)
            base = dist.base_dist
            noise = torch.randn(base.loc.shape, generator=generator, dtype=DTYPE)
            return base.loc + base.scale * noise

    def mode(self, inputs: ArrayLike) -> torch.Tensor:
        """Deterministic action: argmax for categorical, mean for Gaussian."""
        dist = self.distribution(inputs)
        with torch.no_grad():
            if isinstance(dist, Categorical):
                return dist.probs.argmax(dim=-1)
            return dist.base_dist.loc.clone()


class ValueNet:
    """State-goal value baseline V(s, g)."""

    def __init__(
        self,
        module: nn.Sequential,
        input_dim: int,
        hidden_sizes: tuple[int, ...],
        params: ParamVector,
    ) -> None:
        self._module = module
        self.input_dim = input_dim
        self.hidden_sizes = hidden_sizes
        self.params = params

    @classmethod
    def build(
        cls,
        input_dim: int,
        hidden_sizes: Sequence[int] = DEFAULT_HIDDEN_SIZES,
        *,
        seed: int = 0,
    ) -> ValueNet:
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            module = _mlp(input_dim, hidden_sizes, 1, out_gain=1.0)
        module.requires_grad_(False)
        return cls(module, input_dim, tuple(hidden_sizes), ParamVector.from_module(module))

    def with_params(self, params: ParamVector) -> ValueNet:
        if params.layout != self.params.layout:
            raise InputShapeError("parameter layout does not match this critic")
        return ValueNet(self._module, self.input_dim, self.hidden_sizes, params)

    def value(self, inputs: ArrayLike, params: ParamVector | None = None) -> torch.Tensor:
        params = self.params if params is None else params
        x = _as_inputs(inputs, self.input_dim)
        out = functional_call(self._module, params.unflatten(), (x,)).squeeze(-1)
        if not bool(torch.isfinite(out).all()):
            raise NumericError("critic produced non-finite output")
        return out
