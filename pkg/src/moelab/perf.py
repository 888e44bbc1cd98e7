"""Analytical serving-cost model for expert-parallel MoE inference.

Two regimes are modeled per GPU and per MoE layer:

* memory-bandwidth: arithmetic intensity of expert GEMMs,
  I = 2 t d m / (d m + t (d + m)), against the compute-bound threshold
  peak_flops / bw_hbm;
* communication: all-to-all dispatch+aggregate volume
  (bytes_dispatch + bytes_aggregate) * (N / EP) * t * dim against the
  matching GEMM time, which reduces to a closed-form ratio independent
  of t and dim.

Expert compute here deliberately uses the simplified one-GEMM-per-expert
convention (2 * t * dim * m FLOPs per expert); the exact per-token
counter lives in :mod:`moelab.accounting`.  Token load is assumed
uniform across experts.  Cost volumes are carried as exact rationals so
cross-variant identities (acc == standard, eff == standard / alpha) hold
with no rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .config import HardwareSpec, MoEConfig
from .errors import DomainError

REGIME_MEMORY = "memory_bound"
REGIME_COMPUTE = "compute_bound"


@dataclass(frozen=True)
class WorkloadPoint:
    """Token counts for one decoding step across the EP group."""

    t_total: float
    t_exp: float

    @classmethod
    def from_total(cls, t_total: float, k_active: int, n_routed_eff: int
                   ) -> "WorkloadPoint":
        if t_total < 0:
            raise DomainError(f"t_total must be non-negative, got {t_total}")
        return cls(t_total=t_total, t_exp=t_total * k_active / n_routed_eff)

    @classmethod
    def from_per_expert(cls, t_exp: float, k_active: int, n_routed_eff: int
                        ) -> "WorkloadPoint":
        if t_exp < 0:
            raise DomainError(f"t_exp must be non-negative, got {t_exp}")
        return cls(t_total=t_exp * n_routed_eff / k_active, t_exp=t_exp)


def arithmetic_intensity(t_exp: float, d: int, m: int) -> float:
    """FLOPs per byte of an expert GEMM batch at t_exp tokens per expert."""
    if t_exp <= 0 or d <= 0 or m <= 0:
        raise DomainError("arithmetic_intensity needs strictly positive inputs")
    return (2.0 * t_exp * d * m) / (d * m + t_exp * (d + m))


def intensity_asymptote(d: int, m: int) -> float:
    """Supremum of arithmetic_intensity as t_exp grows: 2dm / (d + m)."""
    return 2.0 * d * m / (d + m)


def compute_bound_intensity(hw: HardwareSpec) -> float:
    """Intensity above which the GPU is compute- rather than bandwidth-bound."""
    return hw.peak_flops / hw.bw_hbm


def roofline_attainable(hw: HardwareSpec, intensity: float) -> float:
    """Attainable FLOP/s at a given arithmetic intensity: min(F, I * BW)."""
    if intensity < 0:
        raise DomainError(f"intensity must be non-negative, got {intensity}")
    return min(hw.peak_flops, intensity * hw.bw_hbm)


def solve_t_exp_threshold(hw: HardwareSpec, d: int, m: int) -> float | None:
    """Smallest tokens-per-expert count that reaches the compute-bound regime.

    Solving I(t) = theta for theta = F / bw_hbm gives
    t* = theta d m / (2 d m - theta (d + m)); returns None when theta is at
    or above the intensity asymptote (never compute-bound).
    """
    theta = compute_bound_intensity(hw)
    denom = 2.0 * d * m - theta * (d + m)
    if denom <= 0.0:
        return None
    return theta * d * m / denom


def classify_regime(hw: HardwareSpec, t_exp: float, d: int, m: int) -> str:
    i = arithmetic_intensity(t_exp, d, m)
    return REGIME_COMPUTE if i >= compute_bound_intensity(hw) else REGIME_MEMORY


def comm_volume(n_eff: int, ep: int, t_exp: float, routed_dim: int,
                hw: HardwareSpec) -> float:
    """All-to-all bytes per GPU per layer for dispatch plus aggregation."""
    if n_eff <= 0 or ep <= 0 or t_exp < 0 or routed_dim <= 0:
        raise DomainError("comm_volume needs positive sizes and t_exp >= 0")
    return (hw.bytes_dispatch + hw.bytes_aggregate) * (n_eff / ep) * t_exp * routed_dim


def comm_compute_flops(n_eff: int, ep: int, t_exp: float, routed_dim: int,
                       m: int) -> float:
    """Per-GPU expert FLOPs under the one-GEMM-per-expert convention."""
    return 2.0 * (n_eff / ep) * t_exp * routed_dim * m


def comm_compute_ratio(hw: HardwareSpec, m: int) -> float:
    """t_comm / t_comp; token count and routed width cancel.

    With the default byte widths this is 2.5 F / (2 m bw_nvl) = 5F/(4 m bw_nvl).
    """
    if m <= 0:
        raise DomainError(f"m must be positive, got {m}")
    return (hw.bytes_dispatch + hw.bytes_aggregate) * hw.peak_flops \
        / (2.0 * m * hw.bw_nvl)


@dataclass(frozen=True)
class CostBreakdown:
    """Per-GPU, per-layer serving costs of one architecture variant.

    ``comm_bytes``, ``compute_flops`` and ``weight_bytes_per_expert`` are
    exact rationals; ``weight_bytes_per_expert`` is normalized per active
    base-expert slot (the acc variant loads alpha latent experts per
    slot, so its figure matches the standard layer).
    """

    variant: str
    n_routed_eff: int
    k_active: int
    routed_dim: int
    t_exp: Fraction
    comm_bytes: Fraction
    compute_flops: Fraction
    weight_bytes_per_expert: Fraction
    t_comm: float
    t_comp: float
    ratio: float | None  # t_comm / t_comp, undefined at zero load
    intensity: float
    regime: str

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "n_routed_eff": self.n_routed_eff,
            "k_active": self.k_active,
            "routed_dim": self.routed_dim,
            "t_exp": float(self.t_exp),
            "comm_bytes": float(self.comm_bytes),
            "compute_flops": float(self.compute_flops),
            "weight_bytes_per_expert": float(self.weight_bytes_per_expert),
            "t_comm": self.t_comm,
            "t_comp": self.t_comp,
            "ratio": self.ratio,
            "intensity": self.intensity,
            "regime": self.regime,
        }


def _variant_row(variant: str, n_eff: int, k_active: int, dim: int,
                 t_exp: Fraction, m: int, k_base: int, hw: HardwareSpec
                 ) -> CostBreakdown:
    bytes_comm = Fraction(hw.bytes_dispatch) + Fraction(hw.bytes_aggregate)
    comm = bytes_comm * Fraction(n_eff, hw.ep) * t_exp * dim
    comp = 2 * Fraction(n_eff, hw.ep) * t_exp * dim * m
    weight = Fraction(hw.bytes_weight) * k_active * dim * m / k_base
    t_comm = float(comm) / hw.bw_nvl
    t_comp = float(comp) / hw.peak_flops
    intensity = arithmetic_intensity(float(t_exp), dim, m) if t_exp > 0 else 0.0
    regime = (REGIME_COMPUTE if t_exp > 0
              and intensity >= compute_bound_intensity(hw) else REGIME_MEMORY)
    return CostBreakdown(
        variant=variant, n_routed_eff=n_eff, k_active=k_active, routed_dim=dim,
        t_exp=t_exp, comm_bytes=comm, compute_flops=comp,
        weight_bytes_per_expert=weight, t_comm=t_comm, t_comp=t_comp,
        ratio=t_comm / t_comp if t_comp > 0 else None,
        intensity=intensity, regime=regime)


def cost_table(config: MoEConfig, hw: HardwareSpec, t_exp: float
               ) -> list[CostBreakdown]:
    """Standard / latent_eff / latent_acc cost rows for one base architecture.

    ``t_exp`` is the per-expert token count of the *standard* layer; the
    eff row runs at t_exp / alpha (same total tokens spread over alpha
    times more experts) and the acc row back at t_exp (top-k scaled by
    alpha too).
    """
    if t_exp < 0:
        raise DomainError(f"t_exp must be non-negative, got {t_exp}")
    d, m = config.hidden_dim, config.intermediate_dim
    n, k = config.routed_experts, config.active_experts
    ell = config.latent_dim if config.is_latent else d
    alpha = d // ell
    t_std = Fraction(t_exp)
    return [
        _variant_row("standard", n, k, d, t_std, m, k, hw),
        _variant_row("latent_eff", alpha * n, k, ell, t_std / alpha, m, k, hw),
        _variant_row("latent_acc", alpha * n, alpha * k, ell, t_std, m, k, hw),
    ]
