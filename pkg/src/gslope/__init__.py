"""Adaptive group selection in linear regression.

Fits the grouped variant of sorted-l1 penalized regression: the
penalty couples the sorted per-group fitted-contribution norms with a
nonincreasing weight sequence, which adapts the amount of shrinkage to
the number of groups entering the model and yields finite-sample
control of the fraction of falsely selected groups under orthogonal
designs.  The package covers the full pipeline: per-group
standardization, the proximal solver with duality-gap certificates,
penalty sequence generation (including corrections for random
designs), iterative noise-scale estimation, and a Monte-Carlo harness
for the selection experiments.
"""

from .groups import (GroupPartition, StandardizedDesign, backmap,
                     block_norms, build_partition, group_effects,
                     standardize)
from .lambdas import (GroupSpec, chi_cdf, chi_quantile,
                      lambda_corrected_equal, lambda_corrected_general,
                      lambda_max, lambda_mean, signal_strength)
from .sigma import (SigmaTrace, SupportTooLargeError,
                    estimate_sigma_gslope, ols_rss)
from .simulate import (CellStats, Scenario, SimReport, bundled_scenarios,
                       gen_design, gen_signal, load_scenario, run_scenario,
                       score)
from .solver import (GSlopeFit, GSlopeProblem, SolverConfig,
                     cross_group_coherence, duality_gap, infeasibility,
                     prox_grouped, solve, solve_orthogonal)
from .sorted_l1 import (in_dual_unit_ball, prox_sorted_l1, sorted_l1_norm,
                        sorted_l1_dual_norm, validate_lambda_seq)

__version__ = "0.1.0"

__all__ = [
    "GroupPartition", "StandardizedDesign", "backmap", "block_norms",
    "build_partition", "group_effects", "standardize",
    "GroupSpec", "chi_cdf", "chi_quantile", "lambda_corrected_equal",
    "lambda_corrected_general", "lambda_max", "lambda_mean",
    "signal_strength",
    "SigmaTrace", "SupportTooLargeError", "estimate_sigma_gslope",
    "ols_rss",
    "CellStats", "Scenario", "SimReport", "bundled_scenarios",
    "gen_design", "gen_signal", "load_scenario", "run_scenario", "score",
    "GSlopeFit", "GSlopeProblem", "SolverConfig", "cross_group_coherence",
    "duality_gap", "infeasibility", "prox_grouped", "solve",
    "solve_orthogonal",
    "in_dual_unit_ball", "prox_sorted_l1", "sorted_l1_norm",
    "sorted_l1_dual_norm", "validate_lambda_seq",
    "__version__",
]
