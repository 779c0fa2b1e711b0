"""Hindsight trust-region policy update.

Given a relabeled batch the update solves

    maximise   (1/λ) Σ γ^t · w̄ · π_θ(a|s,g′)/π_θ̃(a|s,g′) · A(s,a,g′)
    subject to (1/λ) Σ γ^t · w̄ · ½(log π_θ̃(a|s,g′) − log π_θ(a|s,g′))² ≤ ε′

with λ = N_τ·N_g, around the collection-time parameters θ̃.  The
baseline is a state-goal value function trained by one-step TD on the
same relabeled samples.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import torch

from src.diffnet.autodiff import grad_scalar, hvp_operator
from src.diffnet.networks import DTYPE, PolicyNet, ValueNet
from src.diffnet.params import ParamVector
from src.divergence.estimators import analytic_kl, qkl_terms
from src.errors import CurvatureError, EmptyBatchError, NumericError
from src.hindsight.relabel import HindsightBatch
from src.models.config import KLEstimator, Variant
from src.trustregion.solver import TrustRegionProblem, kkt_step, line_search

logger = logging.getLogger(__name__)

ScalarFn = Callable[[ParamVector], torch.Tensor]

STATIONARITY_ATOL = 1e-8


@dataclass(frozen=True, eq=False)
class SurrogateTerms:
    """Tensors the surrogate and constraint are built from, fixed at θ̃."""

    states: torch.Tensor
    actions: torch.Tensor
    logp_old: torch.Tensor
    advantages: torch.Tensor
    discount: torch.Tensor
    w_bar: torch.Tensor
    lam: float

    @classmethod
    def from_batch(
        cls, policy_old: PolicyNet, batch: HindsightBatch, *, keep_gamma_t: bool = True
    ) -> SurrogateTerms:
        states = torch.as_tensor(batch.states, dtype=DTYPE)
        if policy_old.is_categorical:
            actions = torch.as_tensor(batch.actions, dtype=torch.long)
        else:
            actions = torch.as_tensor(batch.actions, dtype=DTYPE)
        with torch.no_grad():
            logp_old = policy_old.log_prob(states, actions)
        discount = torch.as_tensor(batch.discount, dtype=DTYPE)
        return cls(
            states=states,
            actions=actions,
            logp_old=logp_old,
            advantages=torch.as_tensor(batch.advantages, dtype=DTYPE),
            discount=discount if keep_gamma_t else torch.ones_like(discount),
            w_bar=torch.as_tensor(batch.w_bar, dtype=DTYPE),
            lam=batch.lam,
        )

    @property
    def weights(self) -> torch.Tensor:
        """Per-sample γ^t · w̄ / λ."""
        return self.discount * self.w_bar / self.lam

    def ratio(self, policy: PolicyNet, params: ParamVector) -> torch.Tensor:
        ratio = torch.exp(policy.log_prob(self.states, self.actions, params) - self.logp_old)
        if not bool(torch.isfinite(ratio).all()):
            raise NumericError("non-finite importance ratio")
        return ratio


# ── Advantages and critic ────────────────────────────────────────────────


def td_advantage(critic: ValueNet, batch: HindsightBatch, gamma: float) -> np.ndarray:
    """A_t = r_t + γ(1 − done_t)·V(s_{t+1}, g′) − V(s_t, g′)."""
    with torch.no_grad():
        v = critic.value(batch.states).numpy()
        v_next = critic.value(batch.next_states).numpy()
    not_done = 1.0 - batch.dones.astype(np.float64)
    return batch.rewards + gamma * not_done * v_next - v


def normalize_advantages(advantages: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    advantages = np.asarray(advantages, dtype=np.float64)
    if advantages.size == 0:
        raise EmptyBatchError("no advantages to normalise")
    return (advantages - advantages.mean()) / (advantages.std() + eps)


def critic_update(
    critic: ValueNet,
    batch: HindsightBatch,
    lr: float,
    n_updates: int,
    gamma: float,
    *,
    keep_gamma_t: bool = True,
) -> ValueNet:
    """Adam on the weighted squared TD error against targets frozen at entry."""
    if len(batch) == 0:
        raise EmptyBatchError("critic update on an empty batch")
    if n_updates == 0:
        return critic

    states = torch.as_tensor(batch.states, dtype=DTYPE)
    with torch.no_grad():
        v_next = critic.value(batch.next_states)
    not_done = torch.as_tensor(1.0 - batch.dones.astype(np.float64), dtype=DTYPE)
    targets = torch.as_tensor(batch.rewards, dtype=DTYPE) + gamma * not_done * v_next

    weights = torch.as_tensor(batch.w_bar, dtype=DTYPE)
    if keep_gamma_t:
        weights = weights * torch.as_tensor(batch.discount, dtype=DTYPE)
    weights = weights / weights.sum()

    flat = critic.params.values.detach().clone().requires_grad_(True)
    optimizer = torch.optim.Adam([flat], lr=lr)
    for _ in range(n_updates):
        optimizer.zero_grad()
        values = critic.value(states, critic.params.with_values(flat))
        loss = (weights * (values - targets).square()).sum()
        if not bool(torch.isfinite(loss)):
            raise NumericError("non-finite critic loss")
        loss.backward()
        optimizer.step()
    return critic.with_params(critic.params.with_values(flat.detach().clone()))


# ── Surrogate objective and constraints ──────────────────────────────────


def surrogate_objective(
    policy: PolicyNet, params: ParamVector, terms: SurrogateTerms
) -> torch.Tensor:
    return (terms.weights * terms.ratio(policy, params) * terms.advantages).sum()


def surrogate_constraint(
    policy: PolicyNet,
    params: ParamVector,
    terms: SurrogateTerms,
    estimator: KLEstimator = KLEstimator.QKL,
) -> torch.Tensor:
    """Weighted quadratic (or naive log-ratio) KL estimate of θ against θ̃."""
    logp_new = policy.log_prob(terms.states, terms.actions, params)
    if not bool(torch.isfinite(logp_new).all()):
        raise NumericError("non-finite log-prob in constraint")
    if estimator is KLEstimator.QKL:
        per_sample = qkl_terms(terms.logp_old, logp_new)
    else:
        per_sample = terms.logp_old - logp_new
    return (terms.weights * per_sample).sum()


def analytic_kl_constraint(
    policy: PolicyNet, params: ParamVector, terms: SurrogateTerms
) -> torch.Tensor:
    """Closed-form KL(π_θ̃ ‖ π_θ) averaged over the visited states."""
    with torch.no_grad():
        old = policy.distribution(terms.states)
    return analytic_kl(old, policy.distribution(terms.states, params))


def constraint_fn(
    policy: PolicyNet,
    terms: SurrogateTerms,
    variant: Variant,
    estimator: KLEstimator = KLEstimator.QKL,
) -> ScalarFn:
    if variant is Variant.TRPO:
        return lambda p: analytic_kl_constraint(policy, p, terms)
    return lambda p: surrogate_constraint(policy, p, terms, estimator)


# ── Policy step ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PolicyStepResult:
    policy: PolicyNet
    surrogate: float
    constraint: float
    kl_analytic: float
    cg_residual: float
    alpha: float
    rejected: bool
    low_ratio_fraction: float


def trust_region_update(
    policy: PolicyNet,
    batch: HindsightBatch,
    *,
    variant: Variant,
    radius: float,
    cg_damping: float,
    cg_iters: int,
    max_backtracks: int,
    keep_gamma_t: bool = True,
    estimator: KLEstimator = KLEstimator.QKL,
    iteration: int | None = None,
) -> PolicyStepResult:
    """One KKT step plus line search on the relabeled batch."""
    terms = SurrogateTerms.from_batch(policy, batch, keep_gamma_t=keep_gamma_t)
    theta_old = policy.params

    def objective(p: ParamVector) -> torch.Tensor:
        return surrogate_objective(policy, p, terms)

    constraint = constraint_fn(policy, terms, variant, estimator)

    if variant is not Variant.TRPO and estimator is KLEstimator.QKL:
        grad_c = grad_scalar(constraint, theta_old)
        if grad_c.norm() > STATIONARITY_ATOL:
            logger.warning("constraint gradient at θ̃ is %.2e, expected 0", grad_c.norm())

    try:
        problem = TrustRegionProblem(
            surrogate_grad=grad_scalar(objective, theta_old),
            constraint_hvp=hvp_operator(constraint, theta_old),
            radius=radius,
            cg_damping=cg_damping,
            cg_iters=cg_iters,
        )
        step = kkt_step(problem)
    except CurvatureError as e:
        logger.warning("skipping policy step: %s", e)
        return _unchanged(policy, objective, constraint, math.nan)
    except NumericError as e:
        raise NumericError(str(e), iteration=iteration) from e

    if step.step is None or step.cg is None:
        return _unchanged(policy, objective, constraint, 0.0)

    def eval_f(p: ParamVector) -> float:
        with torch.no_grad():
            return float(objective(p))

    def eval_c(p: ParamVector) -> float:
        with torch.no_grad():
            return float(constraint(p))

    search = line_search(theta_old, step.step, eval_f, eval_c, radius, max_backtracks)
    new_policy = policy.with_params(search.params)
    with torch.no_grad():
        old_dist = policy.distribution(terms.states)
        kl = float(analytic_kl(old_dist, new_policy.distribution(terms.states)))
        logp_new = new_policy.log_prob(terms.states, terms.actions)
        low = float(((terms.logp_old - logp_new) <= -1.0).double().mean())
    if low > 0.0:
        logger.debug("%.2f%% of samples have π_old/π_new ≤ 1/e", 100.0 * low)
    return PolicyStepResult(
        policy=new_policy,
        surrogate=search.surrogate,
        constraint=search.constraint,
        kl_analytic=kl,
        cg_residual=step.cg.residual,
        alpha=search.alpha,
        rejected=not search.accepted,
        low_ratio_fraction=low,
    )


def _unchanged(
    policy: PolicyNet,
    objective: ScalarFn,
    constraint: ScalarFn,
    residual: float,
) -> PolicyStepResult:
    with torch.no_grad():
        f = float(objective(policy.params))
        c = float(constraint(policy.params))
    return PolicyStepResult(
        policy=policy,
        surrogate=f,
        constraint=c,
        kl_analytic=0.0,
        cg_residual=residual,
        alpha=0.0,
        rejected=True,
        low_ratio_fraction=0.0,
    )
