"""Moments of the error term in multivariable Piltz divisor sums."""

from .errors import (
    AllocationError,
    BudgetExceeded,
    DivisorMomentsError,
    MissingConstants,
    OverflowDetected,
    RangeError,
    UsageError,
)
from .mainterm import (
    d_coefficients,
    d_coefficients_euler,
    delta_k_eval,
    eval_Mk,
    eval_Mrk,
    expand_main_product,
    residue_main_poly,
    zeta_laurent,
)
from .moments import (
    build_moment_report,
    count_sign_changes,
    integrate_abs_cube,
    integrate_first,
    integrate_square,
    model_from_multisum,
    model_from_tau,
    scan,
)
from .multisum import build_multisum_table, delta_rk_eval, multisum_brute, multisum_fast
from .multivar import enumerate_support, f_eval, local_coefficients, support_list
from .series import D_constant, D_matrix, L_polynomial, resonance_sum, tong_constant, truncated_T_grs
from .sieve import build_factor_sieve, build_tau_table, factorize, summatory, tau_k_of_factored
from .voronoi import delta31, remainder_mean_square

__version__ = "0.1.0"
