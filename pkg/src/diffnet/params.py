"""Flat parameter vectors.

A ``ParamVector`` is the unit the trust-region solver manipulates: one
contiguous float64 tensor plus the (name, shape) layout that maps it
back onto the named tensors of a ``torch.nn.Module``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from src.errors import InputShapeError, NumericError

Layout = tuple[tuple[str, tuple[int, ...]], ...]


def layout_size(layout: Layout) -> int:
    return sum(math.prod(shape) for _, shape in layout)


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Immutable flat view of a network's parameters.

    ``values`` may require grad (it is the leaf the autodiff helpers
    differentiate through); every other operation returns new vectors.
    """

    values: torch.Tensor
    layout: Layout

    def __post_init__(self) -> None:
        if self.values.dim() != 1:
            raise InputShapeError(f"parameter vector must be 1-D, got {tuple(self.values.shape)}")
        expected = layout_size(self.layout)
        if self.values.numel() != expected:
            raise InputShapeError(
                f"parameter vector has {self.values.numel()} entries, layout needs {expected}"
            )
        if not bool(torch.isfinite(self.values.detach()).all()):
            raise NumericError("parameter vector contains non-finite entries")

    # ── Construction ──────────────────────────────────────────────────

    @classmethod
    def from_module(cls, module: nn.Module) -> ParamVector:
        named = dict(module.named_parameters())
        layout: Layout = tuple((name, tuple(p.shape)) for name, p in named.items())
        return cls.flatten(named, layout)

    @classmethod
    def flatten(cls, named: Mapping[str, torch.Tensor], layout: Layout) -> ParamVector:
        """Concatenate *named* tensors in *layout* order."""
        missing = [name for name, _ in layout if name not in named]
        if missing:
            raise InputShapeError(f"missing tensors for {missing}")
        for name, shape in layout:
            if tuple(named[name].shape) != shape:
                raise InputShapeError(
                    f"{name}: expected shape {shape}, got {tuple(named[name].shape)}"
                )
        values = torch.cat(
            [named[name].detach().reshape(-1).to(torch.float64) for name, _ in layout]
        )
        return cls(values.clone(), layout)

    def with_values(self, values: torch.Tensor) -> ParamVector:
        return ParamVector(values, self.layout)

    # ── Views ─────────────────────────────────────────────────────────

    def unflatten(self) -> dict[str, torch.Tensor]:
        """Return named views into ``values`` (gradients flow back to the flat tensor)."""
        out: dict[str, torch.Tensor] = {}
        offset = 0
        for name, shape in self.layout:
            size = math.prod(shape)
            out[name] = self.values[offset : offset + size].view(shape)
            offset += size
        return out

    def load_into(self, module: nn.Module) -> None:
        """Copy the values into *module*'s parameters in place."""
        target = dict(module.named_parameters())
        module_layout = tuple((name, tuple(p.shape)) for name, p in target.items())
        if module_layout != self.layout:
            raise InputShapeError("module layout does not match parameter vector layout")
        with torch.no_grad():
            for name, tensor in self.unflatten().items():
                target[name].copy_(tensor)

    def numpy(self) -> np.ndarray:
        return self.values.detach().cpu().numpy().copy()

    def __len__(self) -> int:
        return self.values.numel()

    # ── Arithmetic (always detached) ──────────────────────────────────

    def __add__(self, other: ParamVector | torch.Tensor) -> ParamVector:
        return self.with_values(self.values.detach() + _raw(other))

    def __sub__(self, other: ParamVector | torch.Tensor) -> ParamVector:
        return self.with_values(self.values.detach() - _raw(other))

    def scaled(self, alpha: float) -> ParamVector:
        return self.with_values(self.values.detach() * alpha)

    def dot(self, other: ParamVector | torch.Tensor) -> float:
        return float(torch.dot(self.values.detach(), _raw(other)))

    def norm(self) -> float:
        return float(torch.linalg.vector_norm(self.values.detach()))


def _raw(value: ParamVector | torch.Tensor) -> torch.Tensor:
    if isinstance(value, ParamVector):
        return value.values.detach()
    return value.detach()
