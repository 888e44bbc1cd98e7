"""Exact parameter and FLOP accounting for MoE layer stacks.

All counts are plain Python integers so cross-variant parity identities
hold exactly.  FLOPs use the 2-per-multiply-accumulate convention and
count the linear maps only; elementwise activation work is excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import MoEConfig


@dataclass(frozen=True)
class ParamReport:
    """Weight counts per layer (model_total and active_per_token span all layers)."""

    routed_total: int
    shared_total: int
    router_total: int
    projection_total: int
    model_total: int
    active_per_token: int
    layers: int

    def to_dict(self) -> dict[str, int]:
        return {
            "routed_total": self.routed_total,
            "shared_total": self.shared_total,
            "router_total": self.router_total,
            "projection_total": self.projection_total,
            "model_total": self.model_total,
            "active_per_token": self.active_per_token,
            "layers": self.layers,
        }


@dataclass(frozen=True)
class FlopReport:
    """Per-token forward FLOPs of one layer, split by component."""

    routed: int
    shared: int
    router: int
    projection: int
    layers: int

    @property
    def layer_total(self) -> int:
        return self.routed + self.shared + self.router + self.projection

    @property
    def model_total(self) -> int:
        return self.layer_total * self.layers

    def to_dict(self) -> dict[str, int]:
        return {
            "routed": self.routed,
            "shared": self.shared,
            "router": self.router,
            "projection": self.projection,
            "layer_total": self.layer_total,
            "layers": self.layers,
            "model_total": self.model_total,
        }


def count_params(config: MoEConfig) -> ParamReport:
    """Count MoE-side weights (embeddings/attention are out of scope)."""
    g = config.gate_matrices
    d, m = config.hidden_dim, config.intermediate_dim
    routed = config.n_routed_eff * g * config.routed_in_dim * m
    shared = config.shared_experts * g * d * m
    router = config.n_routed_eff * d
    projection = 2 * d * config.latent_dim if config.is_latent else 0
    active = (config.k_active * g * config.routed_in_dim * m
              + shared + router + projection)
    return ParamReport(
        routed_total=routed,
        shared_total=shared,
        router_total=router,
        projection_total=projection,
        model_total=(routed + shared + router + projection) * config.layers,
        active_per_token=active * config.layers,
        layers=config.layers,
    )


def count_flops(config: MoEConfig) -> FlopReport:
    """Per-token forward FLOPs of one layer (2 FLOPs per MAC)."""
    g = config.gate_matrices
    d, m = config.hidden_dim, config.intermediate_dim
    return FlopReport(
        routed=config.k_active * g * 2 * config.routed_in_dim * m,
        shared=config.shared_experts * g * 2 * d * m,
        router=2 * config.n_routed_eff * d,
        projection=2 * (2 * d * config.latent_dim) if config.is_latent else 0,
        layers=config.layers,
    )
