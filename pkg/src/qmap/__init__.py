"""Quantized-MAP estimation for Bayesian high-dimensional linear regression.

Recovers a stationary-process parameter vector from linear measurements by
projected gradient descent with an exact Viterbi projection onto quantized
low-complexity sequence sets, with brute-force oracles and Monte Carlo
validators for the underlying concentration bounds.
"""

from .quantize import QuantAlphabet, build_alphabet, quantize_scalar, quantize_vector
from .sources import (
    PiecewiseConstant,
    QuantKernel,
    SpikeSlab,
    TableMarkov,
    WeightTable,
    cond_entropy,
    info_dimension_curve,
    quantized_kernel,
    sample_path,
    weight_gap,
    weights_from_kernel,
)
from .empirics import (
    KType,
    complexity_cost,
    cond_empirical_entropy,
    count_jumps,
    k_type,
    kl_divergence,
    l1_distance,
    lz78_length,
)
from .projection import (
    InfeasibleProjection,
    ProblemTooLarge,
    project_bruteforce,
    project_constrained,
    project_l0,
    project_lagrangian,
)
from .sensing import SenseMatrix, gen_gaussian, load_matrix, measure, save_matrix, sigma_max
from .solver import (
    ConstrainedProjector,
    L0Projector,
    LagrangianProjector,
    PgdConfig,
    PgdTrace,
    default_gamma,
    pgd_solve,
    qmap_bruteforce,
    qmap_lagrangian_bruteforce,
)
from .validation import (
    TailEstimate,
    chi_square_tail,
    f_minimax,
    gaussian_projection_check,
    inner_product_tail,
    mc_empirical_deviation,
)

__version__ = "0.1.0"

__all__ = [
    "QuantAlphabet", "build_alphabet", "quantize_scalar", "quantize_vector",
    "SpikeSlab", "PiecewiseConstant", "TableMarkov", "QuantKernel", "WeightTable",
    "sample_path", "quantized_kernel", "weights_from_kernel", "cond_entropy",
    "info_dimension_curve", "weight_gap",
    "KType", "k_type", "complexity_cost", "cond_empirical_entropy", "count_jumps",
    "l1_distance", "kl_divergence", "lz78_length",
    "InfeasibleProjection", "ProblemTooLarge", "project_lagrangian",
    "project_constrained", "project_bruteforce", "project_l0",
    "SenseMatrix", "gen_gaussian", "measure", "sigma_max", "save_matrix", "load_matrix",
    "PgdConfig", "PgdTrace", "ConstrainedProjector", "LagrangianProjector",
    "L0Projector", "pgd_solve", "default_gamma", "qmap_bruteforce",
    "qmap_lagrangian_bruteforce",
    "TailEstimate", "mc_empirical_deviation", "chi_square_tail",
    "inner_product_tail", "f_minimax", "gaussian_projection_check",
    "__version__",
]
