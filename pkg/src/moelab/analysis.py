"""Report builders shared by the HTTP service and the CLI.

Everything here returns JSON-ready dicts with deterministic key order;
presentation (tables, CSV, files) stays in the clients.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from . import rng
from .accounting import count_flops, count_params
from .config import HardwareSpec, MoEConfig
from .errors import ConfigError
from .expressivity import diversity_gain
from .goldenio import digest_vector
from .layer import moe_layer_forward
from .perf import (
    WorkloadPoint,
    arithmetic_intensity,
    classify_regime,
    comm_compute_ratio,
    comm_volume,
    compute_bound_intensity,
    cost_table,
    roofline_attainable,
    solve_t_exp_threshold,
)
from .weights import identity_projections, init_weights

# Latent compression beyond this ratio is outside the empirically safe
# range; reports flag it rather than refusing.
ALPHA_SOFT_LIMIT = 4


def resolve_workload(config: MoEConfig, t_exp: float | None,
                     t_total: float | None) -> dict[str, float]:
    """Normalize a --t-exp / --t-total request to one workload echo.

    ``t_exp`` always denotes the per-expert token count of the standard
    layer; the config's own variant runs at t_total * k_active /
    n_routed_eff tokens per expert.
    """
    if (t_exp is None) == (t_total is None):
        raise ConfigError("exactly one of t_exp and t_total is required")
    if t_exp is not None:
        point = WorkloadPoint.from_per_expert(
            float(t_exp), config.active_experts, config.routed_experts)
    else:
        point = WorkloadPoint.from_total(
            float(t_total), config.active_experts, config.routed_experts)
    variant_t_exp = point.t_total * config.k_active / config.n_routed_eff
    return {
        "t_total": point.t_total,
        "t_exp_standard": point.t_exp,
        "t_exp": variant_t_exp,
    }


def _model_echo(config: MoEConfig) -> dict[str, Any]:
    echo: dict[str, Any] = config.to_dict()
    echo["derived"] = {
        "alpha": config.alpha,
        "n_routed_eff": config.n_routed_eff,
        "k_active": config.k_active,
        "routed_in_dim": config.routed_in_dim,
    }
    return echo


def analyze(config: MoEConfig, hw: HardwareSpec, t_exp: float | None = None,
            t_total: float | None = None) -> dict[str, Any]:
    """Full serving-cost report for one model on one hardware target."""
    workload = resolve_workload(config, t_exp, t_total)
    dim, m = config.routed_in_dim, config.intermediate_dim
    t_var = workload["t_exp"]

    threshold = solve_t_exp_threshold(hw, dim, m)
    intensity = arithmetic_intensity(t_var, dim, m) if t_var > 0 else 0.0
    regime = classify_regime(hw, t_var, dim, m) if t_var > 0 else "memory_bound"

    notes = ["cost-table compute FLOPs use the one-GEMM-per-expert "
             "convention; see the flops section for the exact per-token count"]
    if threshold is None:
        notes.append("this (d, m) never becomes compute-bound on this hardware")
    if config.alpha > ALPHA_SOFT_LIMIT:
        notes.append(f"compression ratio alpha={config.alpha} exceeds the "
                     f"validated range (alpha <= {ALPHA_SOFT_LIMIT})")

    return {
        "model": _model_echo(config),
        "hardware": hw.to_dict(),
        "workload": workload,
        "memory": {
            "arithmetic_intensity": intensity,
            "compute_bound_intensity": compute_bound_intensity(hw),
            "t_exp_threshold": threshold,
            "regime": regime,
        },
        "communication": {
            "comm_compute_ratio": comm_compute_ratio(hw, m),
            "comm_bytes_per_gpu_layer": comm_volume(
                config.n_routed_eff, hw.ep, t_var, dim, hw),
        },
        "cost_table": [row.to_dict()
                       for row in cost_table(config, hw, workload["t_exp_standard"])],
        "params": count_params(config).to_dict(),
        "flops": count_flops(config).to_dict(),
        "diversity": diversity_gain(config.routed_experts, config.active_experts,
                                    config.alpha, m=m).to_dict(),
        "notes": notes,
    }


def roofline_rows(config: MoEConfig, hw: HardwareSpec,
                  t_exps: list[float]) -> list[dict[str, Any]]:
    """One roofline operating point per requested tokens-per-expert value."""
    if not t_exps:
        raise ConfigError("at least one t_exp value is required")
    dim, m = config.routed_in_dim, config.intermediate_dim
    rows = []
    for t in t_exps:
        intensity = arithmetic_intensity(float(t), dim, m)
        rows.append({
            "t_exp": float(t),
            "intensity": intensity,
            "attainable_flops": roofline_attainable(hw, intensity),
            "regime": classify_regime(hw, float(t), dim, m),
        })
    return rows


def compare_rows(config: MoEConfig, hw: HardwareSpec, t_exp: float
                 ) -> list[dict[str, Any]]:
    """Cost-table rows plus exact cost ratios relative to the standard row."""
    rows = cost_table(config, hw, t_exp)
    std = rows[0]
    out = []
    for row in rows:
        entry = row.to_dict()
        entry["comm_ratio_vs_standard"] = (
            float(row.comm_bytes / std.comm_bytes) if std.comm_bytes else 1.0)
        entry["weight_ratio_vs_standard"] = (
            float(row.weight_bytes_per_expert / std.weight_bytes_per_expert)
            if std.weight_bytes_per_expert else 1.0)
        out.append(entry)
    return out


def run_forward(config: MoEConfig, seed: int, tokens: int,
                renormalize_gates: bool = False,
                use_identity_projections: bool = False
                ) -> tuple[np.ndarray, str]:
    """Deterministic layer evaluation on synthesized tokens.

    Returns the (tokens, hidden_dim) outputs and the sha256 digest of
    their golden-file encoding.
    """
    if tokens < 1:
        raise ConfigError(f"token count must be positive, got {tokens}")
    weights = init_weights(config, seed)
    if use_identity_projections:
        weights = identity_projections(weights, config)
    x = rng.token_batch(seed, tokens, config.hidden_dim)
    y, _ = moe_layer_forward(weights, config, x,
                             renormalize_gates=renormalize_gates)
    return y, digest_vector(y)
