"""B-spline projected Gaussian process surfaces for age-by-week count data."""

from splinegp._core import (
    DataError,
    NumericalError,
    ValidationError,
    bspline_basis,
    censored_block_loglik,
    difference_weekly,
    dirichlet_multinomial_logpmf,
    equispaced_basis,
    kron_mvprod,
    negbin_logpmf,
    projected_kernel,
    run_cli,
    sample_dirichlet_multinomial,
)

__all__ = [
    "DataError",
    "NumericalError",
    "ValidationError",
    "bspline_basis",
    "censored_block_loglik",
    "difference_weekly",
    "dirichlet_multinomial_logpmf",
    "equispaced_basis",
    "kron_mvprod",
    "negbin_logpmf",
    "projected_kernel",
    "run_cli",
    "sample_dirichlet_multinomial",
]
