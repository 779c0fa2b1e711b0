"""Numeric checks of the quadratic estimator's properties.

- second-order agreement: KL and QKL differ by a cubic remainder
- variance: within the log-ratio band, ½·logdiff² varies less than logdiff
- improvement bound: the KL/QKL ratio condition at the most-changed
  state, and the lower bound L − C·QKL_max with C = 4βγ/(1−γ)²

Pinsker's inequality and the ratio condition are stated for base-2
logarithms; quantities here are computed in nats and converted.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from torch.distributions import Categorical, Distribution, Independent, Normal

from src.divergence.estimators import (
    MC_SAMPLES,
    analytic_kl,
    check_same_family,
    logdiff_samples,
    taylor_remainder,
    total_variation,
)
from src.errors import InputShapeError
from src.settings import PROP2_LOGRATIO_BAND

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
RATIO_LIMIT_BITS = 2.0 / LN2
RATIO_FLOOR_BITS = 2.0 - 2.0 / LN2

PairFamily = Callable[[float], tuple[np.ndarray, np.ndarray]]


def asymmetric_pair(eta: float) -> tuple[np.ndarray, np.ndarray]:
    """p = (0.7, 0.3) against q = p + η/4·(1, −1)."""
    p = np.array([0.7, 0.3])
    return p, p + 0.25 * eta * np.array([1.0, -1.0])


def symmetric_pair(eta: float) -> tuple[np.ndarray, np.ndarray]:
    """(0.5, 0.5) against (0.5 + η, 0.5 − η); the cubic term cancels here."""
    return np.array([0.5, 0.5]), np.array([0.5 + eta, 0.5 - eta])


# ── Second-order agreement ───────────────────────────────────────────────


@dataclass(frozen=True)
class TaylorRow:
    eta: float
    remainder: float
    scaled: float
    halving_ratio: float


@dataclass(frozen=True)
class TaylorReport:
    rows: tuple[TaylorRow, ...]
    passed: bool


def prop1_taylor_check(
    family: PairFamily = asymmetric_pair,
    scales: Sequence[float] = (1e-1, 1e-2, 1e-3),
    *,
    ratio_band: tuple[float, float] = (6.0, 10.0),
) -> TaylorReport:
    """Cubic decay of |KL − QKL| at each scale and at half of it."""
    rows = []
    for eta in scales:
        full = taylor_remainder(*family(eta))
        half = taylor_remainder(*family(eta / 2.0))
        rows.append(
            TaylorRow(
                eta=eta,
                remainder=full,
                scaled=full / eta**3,
                halving_ratio=full / half if half > 0.0 else math.inf,
            )
        )
    lo, hi = ratio_band
    scaled = [r.scaled for r in rows]
    bounded = min(scaled) > 0.0 and max(scaled) / min(scaled) <= 10.0
    passed = bounded and all(lo <= r.halving_ratio <= hi for r in rows)
    return TaylorReport(rows=tuple(rows), passed=passed)


# ── Variance ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class VarianceComparison:
    var_logratio: float
    var_sq_logratio: float
    max_abs_logratio: float

    @property
    def holds(self) -> bool:
        return self.var_sq_logratio <= self.var_logratio


def compare_variances(
    old: Distribution, new: Distribution, *, n_samples: int = MC_SAMPLES, seed: int = 0
) -> VarianceComparison:
    weights, logdiff = logdiff_samples(old, new, n_samples=n_samples, seed=seed)
    sq = 0.5 * np.square(logdiff)
    mean_lr = np.sum(weights * logdiff)
    mean_sq = np.sum(weights * sq)
    return VarianceComparison(
        var_logratio=float(np.sum(weights * np.square(logdiff - mean_lr))),
        var_sq_logratio=float(np.sum(weights * np.square(sq - mean_sq))),
        max_abs_logratio=float(np.max(np.abs(logdiff))),
    )


def prop2_variance_check(
    old: Distribution,
    new: Distribution,
    *,
    n_samples: int = MC_SAMPLES,
    seed: int = 0,
    band: float = PROP2_LOGRATIO_BAND,
) -> bool | None:
    """Var[½ logdiff²] ≤ Var[logdiff], or None when some log-ratio leaves the band."""
    cmp = compare_variances(old, new, n_samples=n_samples, seed=seed)
    if cmp.max_abs_logratio > band:
        logger.debug("log-ratio %.3f outside ±%.2f: inconclusive", cmp.max_abs_logratio, band)
        return None
    return cmp.holds


# ── Improvement bound ────────────────────────────────────────────────────


@dataclass(frozen=True)
class BoundReport:
    state_index: int
    d_tv: float
    d_kl: float
    d_qkl: float
    ratio_kl_qkl_bits: float
    ratio_ok: bool
    pinsker_ok: bool
    beta: float
    c: float
    qkl_max_bits: float
    bound: float


def penalty_coefficient(beta: float, gamma: float) -> float:
    return 4.0 * beta * gamma / (1.0 - gamma) ** 2


def _per_state_qkl(old: Distribution, new: Distribution, n_samples: int, seed: int) -> np.ndarray:
    if isinstance(old, Categorical) and isinstance(new, Categorical):
        p = old.probs.detach().numpy()
        q = new.probs.detach().numpy()
        with np.errstate(divide="ignore", invalid="ignore"):
            logdiff = np.where(p > 0, -np.log1p((q - p) / np.where(p > 0, p, 1.0)), 0.0)
        return np.sum(p * 0.5 * np.square(logdiff), axis=-1)
    base_old = old.base_dist if isinstance(old, Independent) else old
    base_new = new.base_dist if isinstance(new, Independent) else new
    if not isinstance(base_old, Normal) or not isinstance(base_new, Normal):
        raise InputShapeError("unsupported distribution family")
    out = []
    for i in range(base_old.loc.shape[0]):
        pair_old = Independent(Normal(base_old.loc[i], base_old.scale[i]), 1)
        pair_new = Independent(Normal(base_new.loc[i], base_new.scale[i]), 1)
        weights, logdiff = logdiff_samples(pair_old, pair_new, n_samples=n_samples, seed=seed)
        out.append(np.sum(weights * 0.5 * np.square(logdiff)))
    return np.asarray(out)


def prop3_bound_check(
    old: Distribution,
    new: Distribution,
    advantages: np.ndarray,
    gamma: float,
    surrogate: float = 0.0,
    *,
    n_samples: int = 100_000,
    seed: int = 0,
) -> BoundReport:
    """Ratio condition at the max-TV state and the penalised lower bound.

    *old*/*new* are batched over sampled states; *surrogate* is the
    local approximation L of the new policy's return.
    """
    check_same_family(old, new)
    if len(old.batch_shape) != 1:
        raise InputShapeError("expected distributions batched over sampled states")
    advantages = np.asarray(advantages, dtype=np.float64)
    if not np.all(np.isfinite(advantages)):
        raise InputShapeError("advantages must be finite")

    tv = total_variation(old, new, n_samples=n_samples, seed=seed).detach().numpy()
    kl = analytic_kl(old, new, reduce=False).detach().numpy()
    qkl = _per_state_qkl(old, new, n_samples, seed)
    s = int(np.argmax(tv))

    if qkl[s] > 0.0:
        ratio_bits = float(kl[s] / qkl[s]) * LN2
    else:
        ratio_bits = LN2
    beta = float(np.max(np.abs(advantages))) if advantages.size else 0.0
    c = penalty_coefficient(beta, gamma)
    qkl_max_bits = float(np.max(qkl)) / LN2**2
    return BoundReport(
        state_index=s,
        d_tv=float(tv[s]),
        d_kl=float(kl[s]),
        d_qkl=float(qkl[s]),
        ratio_kl_qkl_bits=ratio_bits,
        ratio_ok=ratio_bits <= RATIO_LIMIT_BITS,
        pinsker_ok=bool(np.all(np.square(tv) <= kl / 2.0 + 1e-15)),
        beta=beta,
        c=c,
        qkl_max_bits=qkl_max_bits,
        bound=surrogate - c * qkl_max_bits,
    )
