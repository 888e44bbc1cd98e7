"""moelab: exact MoE / latent-MoE layer numerics plus analytical serving-cost models.

The numeric core (routing, expert forward/backward, accounting) is pure
float64 with deterministic counter-based initialization; the analysis
side covers roofline and all-to-all cost modeling, combinatorial expert
diversity, and effective-parameter-multiplier scaling arithmetic.
"""

__version__ = "0.1.0"

from .accounting import FlopReport, ParamReport, count_flops, count_params
from .backward import ExpertGrads, LayerGrads, moe_layer_backward
from .config import (
    HardwareSpec,
    MoEConfig,
    load_hardware_spec,
    load_model_config,
    with_variant,
)
from .errors import (
    ConfigError,
    DomainError,
    FitError,
    MoeLabError,
    NumericError,
    ShapeError,
)
from .expressivity import (
    DiversityReport,
    diversity_gain,
    effective_nonlinear_budget,
    log_binomial,
)
from .layer import (
    ForwardTrace,
    RoutingDecision,
    expert_forward,
    moe_layer_forward,
    route,
    topk_margin,
)
from .perf import (
    CostBreakdown,
    WorkloadPoint,
    arithmetic_intensity,
    comm_compute_ratio,
    comm_volume,
    compute_bound_intensity,
    cost_table,
    roofline_attainable,
    solve_t_exp_threshold,
)
from .scaling import (
    AccuracyPoint,
    ScalingLawFit,
    epm_lambda,
    fit_log_linear,
    invert_scaling_law,
    iso_accuracy_size,
)
from .weights import ExpertWeights, LayerWeights, init_weights

__all__ = [
    "__version__",
    "AccuracyPoint", "ConfigError", "CostBreakdown", "DiversityReport",
    "DomainError", "ExpertGrads", "ExpertWeights", "FitError", "FlopReport",
    "ForwardTrace", "HardwareSpec", "LayerGrads", "LayerWeights",
    "MoEConfig", "MoeLabError", "NumericError", "ParamReport",
    "RoutingDecision", "ScalingLawFit", "ShapeError", "WorkloadPoint",
    "arithmetic_intensity", "comm_compute_ratio", "comm_volume",
    "compute_bound_intensity", "cost_table", "count_flops", "count_params",
    "diversity_gain", "effective_nonlinear_budget", "epm_lambda",
    "expert_forward", "fit_log_linear", "init_weights", "invert_scaling_law",
    "iso_accuracy_size", "load_hardware_spec", "load_model_config",
    "log_binomial", "moe_layer_backward", "moe_layer_forward",
    "roofline_attainable", "route", "solve_t_exp_threshold", "topk_margin",
    "with_variant",
]
