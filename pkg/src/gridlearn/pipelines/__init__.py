"""End-to-end flows: stability compilation, metrics, cost-aware and robust
forecaster training, implicit gradients."""

from .costs import chain_cost, forward_chain, settled_cost
from .gradients import (
    DegenerateActiveSet,
    chain_cost_gradient,
    EmptyMask,
    SingularJacobian,
    ZeroVector,
    cosine_matrix,
    gradient_cosine,
    implicit_gradient,
    mape,
    solution_sensitivity,
)
from .obf import (
    BilevelInfo,
    build_bilevel_program,
    forecast_matrix,
    train_forecaster_bilevel,
    warm_start_vector,
)
from .robust import (
    ENUM_LIMIT,
    CcgTrace,
    IterationLimit,
    SubproblemFailure,
    UncertaintySet,
    ccg_train,
    embed_linear_problem,
    worst_case_cost,
    worst_recourse,
)
from .stability import (
    STABILITY_MARGIN,
    InputDimMismatch,
    MetricsReport,
    add_stability_constraints,
    assessor_flags,
    assign_regions,
    sco_metrics,
)

__all__ = [
    "add_stability_constraints", "assessor_flags", "assign_regions",
    "sco_metrics", "MetricsReport", "InputDimMismatch", "STABILITY_MARGIN",
    "settled_cost", "forward_chain", "chain_cost",
    "train_forecaster_bilevel", "BilevelInfo", "build_bilevel_program",
    "forecast_matrix", "warm_start_vector",
    "UncertaintySet", "CcgTrace", "ccg_train", "worst_case_cost",
    "worst_recourse", "embed_linear_problem", "ENUM_LIMIT",
    "IterationLimit", "SubproblemFailure",
    "implicit_gradient", "solution_sensitivity", "chain_cost_gradient",
    "gradient_cosine",
    "cosine_matrix", "mape", "DegenerateActiveSet", "SingularJacobian",
    "ZeroVector", "EmptyMask",
]
