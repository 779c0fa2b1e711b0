"""Seed-splitting scheme.

Every random stream in a run is derived from one root seed:

    stream_seed = SeedSequence([root, PURPOSE, *indices]).generate_state(1)[0]

``PURPOSE`` is a fixed small integer per consumer (below) and
``indices`` are e.g. the iteration number and worker id.  Streams for
different purposes or iterations are statistically independent, and
the same (root, purpose, indices) always yields the same seed.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np
import torch


class Stream(IntEnum):
    POLICY_INIT = 1
    CRITIC_INIT = 2
    COLLECT = 3
    GOALS = 4
    EVALUATE = 5
    DIAGNOSTICS = 6


def derive_seed(root: int, purpose: Stream, *indices: int) -> int:
    """Return a 32-bit seed for one (purpose, indices) stream of *root*."""
    seq = np.random.SeedSequence([int(root), int(purpose), *(int(i) for i in indices)])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def numpy_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def torch_generator(seed: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(seed)
    return gen
