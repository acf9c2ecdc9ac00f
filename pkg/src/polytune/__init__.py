"""Model-based parameter tuner driven by sparse polynomial response surfaces.

The tuner searches a box-bounded parameter space by repeatedly fitting a
penalized polynomial model of normalized performance, optimizing the model
(and perturbed copies of it) to propose new configurations, and keeping an
elite archive of the best performers. The fitted surface doubles as a
human-readable explanation of which parameters matter.
"""

from .evaluation import (
    BudgetExhausted,
    EvaluationError,
    EvaluatorBinding,
    Observation,
    PerformanceArchive,
    evaluate,
    evaluate_batch,
    normalize_instance_column,
    summarize,
    summarize_all,
)
from .regression import (
    PolynomialBasis,
    RegressionModel,
    expand_basis,
    expand_design,
    fit_model,
    lambda_max,
    loo_standard_errors,
    map_polynomial_to_raw,
    perturb_model,
    select_lambda_cv,
)
from .sampling import InstanceDescriptor, InstancePool, lhs_sample, sample_instances
from .search import SimplexSettings, maximize_surface, nudge_apart
from .space import Configuration, ParameterSpace, ParameterSpec
from .tuner import (
    IterationRecord,
    TunerAbort,
    TunerResult,
    TunerSettings,
    check_stop,
    run_random_search,
    run_tuner,
    select_k_best,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted",
    "Configuration",
    "EvaluationError",
    "EvaluatorBinding",
    "InstanceDescriptor",
    "InstancePool",
    "IterationRecord",
    "Observation",
    "ParameterSpace",
    "ParameterSpec",
    "PerformanceArchive",
    "PolynomialBasis",
    "RegressionModel",
    "SimplexSettings",
    "TunerAbort",
    "TunerResult",
    "TunerSettings",
    "check_stop",
    "evaluate",
    "evaluate_batch",
    "expand_basis",
    "expand_design",
    "fit_model",
    "lambda_max",
    "lhs_sample",
    "loo_standard_errors",
    "map_polynomial_to_raw",
    "maximize_surface",
    "normalize_instance_column",
    "nudge_apart",
    "perturb_model",
    "run_random_search",
    "run_tuner",
    "sample_instances",
    "select_k_best",
    "select_lambda_cv",
    "summarize",
    "summarize_all",
    "__version__",
]
