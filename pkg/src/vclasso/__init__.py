"""Variable-corrected constrained lasso for count compositional covariates.

Counts in, sparse sum-zero coefficients out: corrected log designs
log(W + z), a linearly-constrained lasso with KKT certification,
replicate-based overdispersion estimation, CV and stability selection,
and a seeded simulation/diagnostics harness.
"""

__version__ = "0.1.0"

from .constraints import (
    ConstraintSpec,
    RegressionData,
    center_design,
    projector_null_space,
)
from .correction import (
    CorrectedDesign,
    CorrectionRecipe,
    correct_dirichlet_multinomial,
    correct_general,
    correct_multinomial,
    dirichlet_multinomial_offsets,
    oracle_log_design,
    zero_replace,
)
from .counts import CountMatrix, load_counts
from .diagnostics import (
    BiasCurve,
    RipReport,
    SlopeReport,
    bias_curve,
    depth_scan,
    poisson_log_moment,
    rate_scan,
    rip_constant,
)
from .estimators import ConstrainedLasso, ConstrainedLassoCV, StabilitySelector
from .overdispersion import (
    AlphaEstimate,
    ReplicateGroup,
    estimate_alpha_all,
    estimate_alpha_mom,
    load_groups,
    pair_halves_groups,
)
from .overdispersion import theta_to_alpha
from .rng import alpha_seed_key, rng_from_key
from .selection import (
    CvCurve,
    StabilityReport,
    assign_folds,
    cv_select_lambda,
    refit_on_support,
    stability_select,
)
from .simulate import (
    CompositionLaw,
    DepthLaw,
    SimDataset,
    SimScenario,
    default_beta_star,
    evaluate_method,
    method_design,
    run_scenario_grid,
    sample_compositions,
    sample_counts,
    sample_noise,
    sample_response,
    simulate_dataset,
)
from .solver import (
    FitResult,
    SolverConfig,
    kkt_certificate,
    lambda_grid,
    lambda_max,
    lambda_path,
    solve_constrained_lasso,
    theoretical_lambda,
)

__all__ = [
    "AlphaEstimate",
    "BiasCurve",
    "CompositionLaw",
    "ConstrainedLasso",
    "ConstrainedLassoCV",
    "ConstraintSpec",
    "CorrectedDesign",
    "CorrectionRecipe",
    "CountMatrix",
    "CvCurve",
    "DepthLaw",
    "FitResult",
    "RegressionData",
    "ReplicateGroup",
    "RipReport",
    "SimDataset",
    "SimScenario",
    "SlopeReport",
    "SolverConfig",
    "StabilityReport",
    "StabilitySelector",
    "alpha_seed_key",
    "assign_folds",
    "bias_curve",
    "center_design",
    "correct_dirichlet_multinomial",
    "correct_general",
    "correct_multinomial",
    "cv_select_lambda",
    "default_beta_star",
    "depth_scan",
    "dirichlet_multinomial_offsets",
    "estimate_alpha_all",
    "estimate_alpha_mom",
    "evaluate_method",
    "kkt_certificate",
    "lambda_grid",
    "lambda_max",
    "lambda_path",
    "load_counts",
    "load_groups",
    "method_design",
    "oracle_log_design",
    "pair_halves_groups",
    "poisson_log_moment",
    "projector_null_space",
    "rate_scan",
    "refit_on_support",
    "rip_constant",
    "rng_from_key",
    "run_scenario_grid",
    "sample_compositions",
    "sample_counts",
    "sample_noise",
    "sample_response",
    "simulate_dataset",
    "solve_constrained_lasso",
    "stability_select",
    "theta_to_alpha",
    "theoretical_lambda",
    "zero_replace",
]
