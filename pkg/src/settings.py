"""Project-wide settings and shared numeric constants.

All environment-dependent values are read **lazily** on first access
(not at import time) and cached via ``functools.lru_cache``.  Call
``reset()`` in tests to clear the cache after changing env vars;
no ``importlib.reload`` required.
"""

from __future__ import annotations

import functools
import os
from typing import TYPE_CHECKING, Final


def _int_env(name: str, default: int) -> int:
    """Parse integer environment values with a safe fallback."""
    raw = os.getenv(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        return default


# ── Constants (never change at runtime) ──────────────────────────────────

# Sparse reward emitted on success; every other step yields 0.
SUCCESS_REWARD: Final[float] = 1.0

# Gaussian policy heads clamp their state-independent log-std.
LOG_STD_MIN: Final[float] = -5.0
LOG_STD_MAX: Final[float] = 2.0

# Cumulative log importance weights below this are floored (w ≈ 0, never NaN).
LOG_WEIGHT_FLOOR: Final[float] = -60.0

# Accepted line-search candidates may exceed the trust radius by this factor.
LINE_SEARCH_SLACK: Final[float] = 1.5

# Per-outcome log-ratio band under which the QKL variance inequality applies.
PROP2_LOGRATIO_BAND: Final[float] = 0.5

DEFAULT_HIDDEN_SIZES: Final[tuple[int, ...]] = (64, 64)


# ── Lazy settings cache ──────────────────────────────────────────────────

@functools.lru_cache(maxsize=1)
def _load_settings() -> dict[str, object]:
    """Read env-dependent settings once and cache the result."""
    return {
        "OUTPUT_DIR": os.getenv("HTRPO_OUTPUT_DIR", "runs"),
        "NUM_WORKERS": max(1, _int_env("HTRPO_NUM_WORKERS", 1)),
        "TORCH_THREADS": max(1, _int_env("HTRPO_TORCH_THREADS", 1)),
    }


def reset() -> None:
    """Clear the cached settings; call from tests after monkeypatching env vars."""
    _load_settings.cache_clear()


# Type declarations for static analysis (not set at runtime so
# ``__getattr__`` is invoked on attribute access).
if TYPE_CHECKING:
    OUTPUT_DIR: str
    NUM_WORKERS: int
    TORCH_THREADS: int


def __getattr__(name: str) -> object:
    """PEP 562 module-level ``__getattr__``: lazy env reads."""
    settings = _load_settings()
    if name in settings:
        return settings[name]
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
