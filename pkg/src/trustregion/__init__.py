from src.trustregion.solver import (
    CGResult,
    KKTStep,
    LineSearchResult,
    TrustRegionProblem,
    conjugate_gradient,
    kkt_step,
    line_search,
    trust_radius,
)

__all__ = [
    "CGResult",
    "KKTStep",
    "LineSearchResult",
    "TrustRegionProblem",
    "conjugate_gradient",
    "kkt_step",
    "line_search",
    "trust_radius",
]
