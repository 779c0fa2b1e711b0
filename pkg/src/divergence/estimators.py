"""KL estimators and closed-form divergences.

``logdiff`` always means log π_old(a) − log π_new(a) for actions drawn
from the old policy.  Its mean is the KL divergence; the mean of
½·logdiff² (the quadratic estimator, QKL) agrees with it to second
order, is never negative, and has lower variance for nearby policies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch.distributions import Categorical, Distribution, Independent, Normal, kl_divergence

from src.errors import DistributionFamilyError, EmptyBatchError, InputShapeError

TensorLike = torch.Tensor | np.ndarray

MC_SAMPLES = 1_000_000


def _tensor(x: TensorLike) -> torch.Tensor:
    return torch.as_tensor(x, dtype=torch.float64)


def _weights(weights: TensorLike | None, n: int) -> torch.Tensor:
    if weights is None:
        return torch.full((n,), 1.0 / n, dtype=torch.float64)
    w = _tensor(weights)
    if w.shape != (n,):
        raise InputShapeError(f"expected {n} weights, got shape {tuple(w.shape)}")
    if bool((w < 0).any()) or float(w.sum()) <= 0.0:
        raise InputShapeError("weights must be non-negative with a positive total")
    return w / w.sum()


def _pair(logp_old: TensorLike, logp_new: TensorLike) -> tuple[torch.Tensor, torch.Tensor]:
    old, new = _tensor(logp_old), _tensor(logp_new)
    if old.shape != new.shape or old.dim() != 1:
        raise InputShapeError("log-prob inputs must be 1-D and of equal length")
    if old.numel() == 0:
        raise EmptyBatchError("divergence estimate over zero samples")
    return old, new


def qkl_terms(logp_old: TensorLike, logp_new: TensorLike) -> torch.Tensor:
    """Per-sample ½(log π_old − log π_new)²."""
    old, new = _pair(logp_old, logp_new)
    return 0.5 * (old - new).square()


def qkl_sample_estimate(
    logp_old: TensorLike, logp_new: TensorLike, weights: TensorLike | None = None
) -> torch.Tensor:
    """Weighted mean of ½·logdiff²; differentiable in *logp_new*."""
    terms = qkl_terms(logp_old, logp_new)
    return (_weights(weights, terms.numel()) * terms).sum()


def naive_kl_sample_estimate(
    logp_old: TensorLike, logp_new: TensorLike, weights: TensorLike | None = None
) -> torch.Tensor:
    """Weighted mean of logdiff; unbiased for KL but can come out negative."""
    old, new = _pair(logp_old, logp_new)
    return (_weights(weights, old.numel()) * (old - new)).sum()


# ── Closed forms ─────────────────────────────────────────────────────────


def check_same_family(old: Distribution, new: Distribution) -> None:
    if type(old) is not type(new):
        raise DistributionFamilyError(
            f"cannot compare {type(old).__name__} with {type(new).__name__}"
        )
    if isinstance(old, Independent) and isinstance(new, Independent):
        if type(old.base_dist) is not type(new.base_dist):
            raise DistributionFamilyError("independent wrappers over different families")
    if old.event_shape != new.event_shape:
        raise DistributionFamilyError(
            f"event shapes differ: {tuple(old.event_shape)} vs {tuple(new.event_shape)}"
        )
    if isinstance(old, Categorical) and old.probs.shape[-1] != new.probs.shape[-1]:
        raise DistributionFamilyError("categoricals over different numbers of outcomes")


def analytic_kl(old: Distribution, new: Distribution, *, reduce: bool = True) -> torch.Tensor:
    """Closed-form KL(old ‖ new), averaged over the batch unless ``reduce=False``."""
    check_same_family(old, new)
    per_state = kl_divergence(old, new).clamp_min(0.0)
    return per_state.mean() if reduce else per_state


def total_variation(
    old: Distribution,
    new: Distribution,
    *,
    n_samples: int = 100_000,
    seed: int = 0,
) -> torch.Tensor:
    """Per-state TV distance; exact for categoricals, Monte Carlo for Gaussians."""
    check_same_family(old, new)
    if isinstance(old, Categorical):
        return 0.5 * (old.probs - new.probs).abs().sum(-1)
    samples = _draw(old, n_samples, seed)
    ratio = torch.exp(new.log_prob(samples) - old.log_prob(samples))
    return (1.0 - ratio).clamp_min(0.0).mean(0)


def _draw(dist: Distribution, n: int, seed: int) -> torch.Tensor:
    base = dist.base_dist if isinstance(dist, Independent) else dist
    if not isinstance(base, Normal):
        raise DistributionFamilyError(f"no sampler for {type(base).__name__}")
    gen = torch.Generator().manual_seed(seed)
    noise = torch.randn((n, *base.loc.shape), generator=gen, dtype=torch.float64)
    return base.loc + base.scale * noise


# ── Reports ──────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class DivergenceReport:
    d_kl: float
    d_qkl: float
    d_tv: float
    var_logratio: float
    var_sq_logratio: float
    ratio_kl_qkl: float

    def __post_init__(self) -> None:
        if self.d_qkl < 0.0:
            raise InputShapeError("QKL cannot be negative")


def _outcome_logdiff(old: Categorical, new: Categorical) -> tuple[np.ndarray, np.ndarray]:
    """Old-policy probabilities and log(p/q) per outcome, accurate for q ≈ p."""
    p = old.probs.detach().numpy().astype(np.float64)
    q = new.probs.detach().numpy().astype(np.float64)
    support = p > 0
    logdiff = np.zeros_like(p)
    logdiff[support] = -np.log1p((q[support] - p[support]) / p[support])
    return p, logdiff


def logdiff_samples(
    old: Distribution, new: Distribution, *, n_samples: int = MC_SAMPLES, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """(weights, logdiff) over outcomes (categorical) or Monte Carlo draws (Gaussian)."""
    check_same_family(old, new)
    if old.batch_shape != torch.Size([]):
        raise InputShapeError("expected a single distribution, got a batch")
    if isinstance(old, Categorical) and isinstance(new, Categorical):
        return _outcome_logdiff(old, new)
    samples = _draw(old, n_samples, seed)
    with torch.no_grad():
        logdiff = (old.log_prob(samples) - new.log_prob(samples)).numpy()
    return np.full(n_samples, 1.0 / n_samples), logdiff.astype(np.float64)


def divergence_report(
    old: Distribution, new: Distribution, *, n_samples: int = MC_SAMPLES, seed: int = 0
) -> DivergenceReport:
    """KL, QKL, TV and estimator variances for one pair of distributions."""
    weights, logdiff = logdiff_samples(old, new, n_samples=n_samples, seed=seed)
    sq = 0.5 * np.square(logdiff)
    if isinstance(old, Categorical):
        d_kl = float(np.sum(weights * logdiff))
    else:
        d_kl = float(analytic_kl(old, new))
    d_qkl = float(np.sum(weights * sq))
    var_lr = float(np.sum(weights * np.square(logdiff - np.sum(weights * logdiff))))
    var_sq = float(np.sum(weights * np.square(sq - d_qkl)))
    d_tv = float(total_variation(old, new, seed=seed).reshape(()))
    # both vanish together; their ratio tends to 1
    ratio = d_kl / d_qkl if d_qkl > 0.0 else 1.0
    return DivergenceReport(
        d_kl=max(d_kl, 0.0),
        d_qkl=d_qkl,
        d_tv=min(max(d_tv, 0.0), 1.0),
        var_logratio=var_lr,
        var_sq_logratio=var_sq,
        ratio_kl_qkl=ratio,
    )


def taylor_remainder(p: TensorLike, q: TensorLike) -> float:
    """|E_p[logdiff] − E_p[½ logdiff²]| for categorical probability vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise InputShapeError("probability vectors must be 1-D and of equal length")
    support = p > 0
    logdiff = -np.log1p((q[support] - p[support]) / p[support])
    weights = p[support]
    return float(abs(np.sum(weights * logdiff) - np.sum(weights * 0.5 * np.square(logdiff))))
