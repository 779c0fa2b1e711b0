from src.divergence.checks import (
    BoundReport,
    TaylorReport,
    asymmetric_pair,
    compare_variances,
    penalty_coefficient,
    prop1_taylor_check,
    prop2_variance_check,
    prop3_bound_check,
    symmetric_pair,
)
from src.divergence.estimators import (
    DivergenceReport,
    analytic_kl,
    divergence_report,
    naive_kl_sample_estimate,
    qkl_sample_estimate,
    qkl_terms,
    taylor_remainder,
    total_variation,
)

__all__ = [
    "BoundReport",
    "DivergenceReport",
    "TaylorReport",
    "analytic_kl",
    "asymmetric_pair",
    "compare_variances",
    "divergence_report",
    "naive_kl_sample_estimate",
    "penalty_coefficient",
    "prop1_taylor_check",
    "prop2_variance_check",
    "prop3_bound_check",
    "qkl_sample_estimate",
    "qkl_terms",
    "symmetric_pair",
    "taylor_remainder",
    "total_variation",
]
