"""Linear-objective / quadratic-constraint trust-region subproblem.

    maximise   ∇fᵀΔ
    subject to ½ ΔᵀHΔ ≤ ε′

The KKT conditions give Δ = √(2ε′ / (∇fᵀH⁻¹∇f)) · H⁻¹∇f.  H⁻¹∇f is
approximated with conjugate gradient on H + damping·I using only
Hessian-vector products, and the step is then backtracked until the
true surrogate improves and the true constraint stays near ε′.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction

import torch

from src.diffnet.params import ParamVector
from src.errors import ConfigurationError, CurvatureError, DegenerateDirectionError, NumericError
from src.settings import LINE_SEARCH_SLACK

logger = logging.getLogger(__name__)

LinearOperator = Callable[[torch.Tensor], torch.Tensor]

CG_TOLERANCE = 1e-6
MAX_DAMPING_RETRIES = 3
DEFAULT_BACKTRACKS = 10
BACKTRACK_DECAY = 0.5


def trust_radius(max_kl: float, gamma: float) -> float:
    """ε′ = ε / (1 − γ), evaluated on the decimal values so 2e-5, 0.98 gives 1e-3."""
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError(f"gamma must lie in (0, 1), got {gamma}")
    if max_kl <= 0.0:
        raise ConfigurationError(f"max_kl must be positive, got {max_kl}")
    return float(Fraction(repr(max_kl)) / (1 - Fraction(repr(gamma))))


@dataclass(frozen=True)
class TrustRegionProblem:
    surrogate_grad: ParamVector
    constraint_hvp: LinearOperator
    radius: float
    cg_damping: float = 1e-3
    cg_iters: int = 10

    def __post_init__(self) -> None:
        if self.radius <= 0.0:
            raise ConfigurationError("trust radius must be positive")
        if self.cg_damping < 0.0:
            raise ConfigurationError("cg_damping must be >= 0")
        if self.cg_iters < 1:
            raise ConfigurationError("cg_iters must be >= 1")


@dataclass(frozen=True)
class CGResult:
    x: torch.Tensor
    iterations: int
    residual: float
    converged: bool


def conjugate_gradient(
    a_fn: LinearOperator,
    b: torch.Tensor,
    iters: int = 10,
    damping: float = 0.0,
    *,
    tol: float = CG_TOLERANCE,
    callback: Callable[[int, torch.Tensor], None] | None = None,
) -> CGResult:
    """Approximately solve (A + damping·I) x = b."""
    b = b.detach().to(torch.float64)
    x = torch.zeros_like(b)
    b_norm = float(torch.linalg.vector_norm(b))
    if b_norm == 0.0:
        return CGResult(x=x, iterations=0, residual=0.0, converged=True)

    r = b.clone()
    p = r.clone()
    rr = float(r @ r)
    done = 0
    for i in range(iters):
        ap = a_fn(p).detach() + damping * p
        p_ap = float(p @ ap)
        if not math.isfinite(p_ap) or p_ap <= 0.0:
            if not math.isfinite(p_ap):
                raise NumericError("non-finite curvature in conjugate gradient", iteration=i)
            raise CurvatureError(f"non-positive curvature {p_ap:.3e} at CG iteration {i}")
        alpha = rr / p_ap
        x = x + alpha * p
        r = r - alpha * ap
        if not bool(torch.isfinite(x).all()):
            raise NumericError("non-finite conjugate-gradient iterate", iteration=i)
        done = i + 1
        if callback is not None:
            callback(i, x)
        rr_next = float(r @ r)
        if math.sqrt(rr_next) / b_norm <= tol:
            rr = rr_next
            break
        p = r + (rr_next / rr) * p
        rr = rr_next

    residual = math.sqrt(rr) / b_norm
    return CGResult(x=x, iterations=done, residual=residual, converged=residual <= tol)


@dataclass(frozen=True)
class KKTStep:
    step: ParamVector | None
    cg: CGResult | None
    damping: float
    expected_improvement: float

    @property
    def converged(self) -> bool:
        """True when the surrogate gradient vanished and no step is needed."""
        return self.step is None


def kkt_step(problem: TrustRegionProblem) -> KKTStep:
    """Scaled natural-gradient step with ½ΔᵀAΔ = ε′, A = H + damping·I.

    Non-positive curvature doubles the damping, at most three times,
    before ``CurvatureError`` is raised.
    """
    g = problem.surrogate_grad.values.detach()
    if float(torch.linalg.vector_norm(g)) == 0.0:
        logger.info("surrogate gradient is zero; no step")
        return KKTStep(step=None, cg=None, damping=problem.cg_damping, expected_improvement=0.0)

    damping = problem.cg_damping
    for attempt in range(MAX_DAMPING_RETRIES + 1):
        try:
            result = conjugate_gradient(
                problem.constraint_hvp, g, problem.cg_iters, damping
            )
            x = result.x
            x_ax = float(x @ (problem.constraint_hvp(x).detach() + damping * x))
            g_x = float(g @ x)
            if not (x_ax > 0.0 and g_x > 0.0):
                raise CurvatureError(f"xᵀAx = {x_ax:.3e}, ∇fᵀx = {g_x:.3e}")
        except (CurvatureError, DegenerateDirectionError) as e:
            if attempt == MAX_DAMPING_RETRIES:
                raise CurvatureError(
                    f"curvature still non-positive after {attempt} damping increases"
                ) from e
            damping = max(2.0 * damping, 1e-8)
            logger.warning("curvature problem (%s); retrying with damping %.3e", e, damping)
            continue

        scale = math.sqrt(2.0 * problem.radius / x_ax)
        step = problem.surrogate_grad.with_values(scale * x)
        logger.debug(
            "CG: %d iterations, residual %.2e, damping %.1e",
            result.iterations, result.residual, damping,
        )
        return KKTStep(step=step, cg=result, damping=damping, expected_improvement=scale * g_x)
    raise AssertionError("unreachable")  # pragma: no cover


@dataclass(frozen=True)
class LineSearchResult:
    params: ParamVector
    alpha: float
    accepted: bool
    surrogate: float
    constraint: float
    backtracks: int


def line_search(
    theta_old: ParamVector,
    step: ParamVector,
    eval_surrogate: Callable[[ParamVector], float],
    eval_constraint: Callable[[ParamVector], float],
    radius: float,
    max_backtracks: int = DEFAULT_BACKTRACKS,
    *,
    slack: float = LINE_SEARCH_SLACK,
    decay: float = BACKTRACK_DECAY,
) -> LineSearchResult:
    """First α = decay^j that improves the surrogate within slack·ε′, else reject."""
    f_old = eval_surrogate(theta_old)
    for j in range(max_backtracks):
        alpha = decay**j
        try:
            candidate = theta_old + step.values.detach() * alpha
            f_new = float(eval_surrogate(candidate))
            c_new = float(eval_constraint(candidate))
        except NumericError as e:
            logger.debug("α=%.4g: %s", alpha, e)
            continue
        if not (math.isfinite(f_new) and math.isfinite(c_new)):
            continue
        if f_new > f_old and c_new <= slack * radius:
            return LineSearchResult(
                params=candidate,
                alpha=alpha,
                accepted=True,
                surrogate=f_new,
                constraint=c_new,
                backtracks=j,
            )
        logger.debug("α=%.4g rejected: Δf=%.3e, constraint=%.3e", alpha, f_new - f_old, c_new)

    logger.warning("line search rejected all %d step sizes; keeping parameters", max_backtracks)
    return LineSearchResult(
        params=theta_old,
        alpha=0.0,
        accepted=False,
        surrogate=float(f_old),
        constraint=float(eval_constraint(theta_old)),
        backtracks=max_backtracks,
    )
