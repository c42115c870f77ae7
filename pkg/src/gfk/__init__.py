"""Numerical toolkit for discounted expectations under volatility uncertainty.

Pieces: a volatility-band generator (`gcore`), the tabulated law of
G-normal increments (`gheat`), path simulation with quadratic variation and
two short-rate models (`paths`), bounded C^{1,2} coefficient regularization
(`cutoff`), an explicit backward solver for the fully nonlinear discounted
equation (`pdesolver`), and a config-driven experiment runner (`experiments`,
`cli`).
"""

from .gcore import GFunction, ellipticity_beta, eval_g, two_g
from .gheat import (
    HeatGridSpec,
    IncrementLaw,
    default_a_grid,
    normal_cdf,
    sample_increment,
    solve_gheat_cdf,
)
from .paths import (
    CoefficientSet,
    GPath,
    cumulative_discounts,
    discount_factor,
    dothan_coeffs,
    dothan_exact_states,
    euler_gsde,
    expvasicek_states,
    expvasicek_x_coeffs,
    first_exit,
    m_eps_process,
    simulate_gbm,
    simulate_gbm_batch,
    uniform_stream,
)
from .cutoff import (
    ABValues,
    JunctionReport,
    RegularizedCoefficientSet,
    boundedness_scan,
    build_cutoff,
    eval_ab,
    junction_report,
)
from .pdesolver import (
    PdeGrid,
    PdeSolution,
    cfl_max_dt,
    dirichlet_frozen,
    duality_check,
    solve_backward,
)

__version__ = "0.1.0"

__all__ = [
    "GFunction", "eval_g", "two_g", "ellipticity_beta",
    "HeatGridSpec", "IncrementLaw", "default_a_grid", "normal_cdf",
    "solve_gheat_cdf", "sample_increment",
    "GPath", "CoefficientSet", "uniform_stream", "simulate_gbm",
    "simulate_gbm_batch", "euler_gsde", "dothan_coeffs", "dothan_exact_states",
    "expvasicek_states", "expvasicek_x_coeffs", "first_exit",
    "discount_factor", "cumulative_discounts", "m_eps_process",
    "RegularizedCoefficientSet", "build_cutoff", "eval_ab", "ABValues",
    "junction_report", "JunctionReport", "boundedness_scan",
    "PdeGrid", "PdeSolution", "cfl_max_dt", "solve_backward",
    "duality_check", "dirichlet_frozen",
    "__version__",
]
