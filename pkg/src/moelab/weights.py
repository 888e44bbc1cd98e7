"""Weight containers and deterministic initialization.

All matrices are float64 and bias-free.  Initialization draws every
entry independently from the counter-based stream in :mod:`moelab.rng`
with uniform fan-in scaling, so weights are bit-identical across
platforms and two experts never share entropy.

Large configs are not materialized eagerly: above a size threshold the
expert lists become lazy sequences that synthesize each expert on
access, which keeps multi-GB fixtures usable on a laptop.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import rng
from .config import MoEConfig
from .errors import ConfigError, ShapeError

# Above this many routed+shared weight entries, init_weights returns
# lazy expert lists instead of dense ones.
LAZY_ENTRY_THRESHOLD = 50_000_000


@dataclass
class ExpertWeights:
    """One expert's matrices: fc1 (m, in), optional gate (m, in), fc2 (in, m)."""

    w_fc1: np.ndarray
    w_gate: np.ndarray | None
    w_fc2: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.w_fc1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_fc1.shape[0]

    def validate(self, in_dim: int, m: int, gated: bool) -> None:
        if self.w_fc1.shape != (m, in_dim):
            raise ShapeError(f"w_fc1 shape {self.w_fc1.shape} != {(m, in_dim)}")
        if self.w_fc2.shape != (in_dim, m):
            raise ShapeError(f"w_fc2 shape {self.w_fc2.shape} != {(in_dim, m)}")
        if gated:
            if self.w_gate is None or self.w_gate.shape != (m, in_dim):
                raise ShapeError("gated activation requires w_gate of shape "
                                 f"{(m, in_dim)}")
        elif self.w_gate is not None:
            raise ShapeError("w_gate present for a gateless activation")


class CounterExpertList(Sequence):
    """Lazy expert sequence; each access re-synthesizes from the counter stream."""

    def __init__(self, seed: int, base_index: int, count: int, in_dim: int,
                 m: int, gated: bool):
        self._seed = seed
        self._base = base_index
        self._count = count
        self._in_dim = in_dim
        self._m = m
        self._gated = gated

    def __len__(self) -> int:
        return self._count

    def __getitem__(self, index: int) -> ExpertWeights:
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(self._count))]
        index = int(index)
        if index < 0:
            index += self._count
        if not 0 <= index < self._count:
            raise IndexError(index)
        return _make_expert(self._seed, self._base + index, self._in_dim,
                            self._m, self._gated)


def _make_expert(seed: int, expert_index: int, in_dim: int, m: int,
                 gated: bool) -> ExpertWeights:
    fc1 = rng.fan_in_matrix(seed, rng.expert_stream(expert_index, rng.OFFSET_FC1),
                            m, in_dim)
    gate = None
    if gated:
        gate = rng.fan_in_matrix(seed, rng.expert_stream(expert_index, rng.OFFSET_GATE),
                                 m, in_dim)
    fc2 = rng.fan_in_matrix(seed, rng.expert_stream(expert_index, rng.OFFSET_FC2),
                            in_dim, m)
    return ExpertWeights(w_fc1=fc1, w_gate=gate, w_fc2=fc2)


@dataclass
class LayerWeights:
    """All parameters of one MoE layer.

    ``routed`` holds ``n_routed_eff`` experts with input width
    ``routed_in_dim``; ``shared`` holds ``shared_experts`` experts with
    input width ``hidden_dim``.  Projections are present only for latent
    variants.
    """

    router: np.ndarray
    w_down: np.ndarray | None
    w_up: np.ndarray | None
    routed: Sequence[ExpertWeights]
    shared: Sequence[ExpertWeights]

    def validate(self, config: MoEConfig) -> None:
        d, ell, m = config.hidden_dim, config.latent_dim, config.intermediate_dim
        gated = config.activation == "swiglu"
        if self.router.shape != (config.n_routed_eff, d):
            raise ShapeError(f"router shape {self.router.shape} != "
                             f"{(config.n_routed_eff, d)}")
        if config.is_latent:
            if self.w_down is None or self.w_down.shape != (ell, d):
                raise ShapeError(f"w_down must have shape {(ell, d)}")
            if self.w_up is None or self.w_up.shape != (d, ell):
                raise ShapeError(f"w_up must have shape {(d, ell)}")
        else:
            if self.w_down is not None or self.w_up is not None:
                raise ShapeError("standard variant carries no latent projections")
        if len(self.routed) != config.n_routed_eff:
            raise ShapeError(f"{len(self.routed)} routed experts != "
                             f"{config.n_routed_eff}")
        if len(self.shared) != config.shared_experts:
            raise ShapeError(f"{len(self.shared)} shared experts != "
                             f"{config.shared_experts}")
        # Lazy lists are synthesized with the right shapes by construction;
        # spot-check only what is cheap to touch.
        for experts, in_dim in ((self.routed, config.routed_in_dim),
                                (self.shared, d)):
            if len(experts) and isinstance(experts, list):
                for w in experts:
                    w.validate(in_dim, m, gated)


def weight_entry_count(config: MoEConfig) -> int:
    """Total weight entries of one layer (drives the lazy/dense choice)."""
    g = config.gate_matrices
    d, ell, m = config.hidden_dim, config.latent_dim, config.intermediate_dim
    total = config.n_routed_eff * g * config.routed_in_dim * m
    total += config.shared_experts * g * d * m
    total += config.n_routed_eff * d
    if config.is_latent:
        total += 2 * d * ell
    return total


def init_weights(config: MoEConfig, seed: int, lazy: bool | None = None) -> LayerWeights:
    """Deterministically initialize one layer.

    Entry (r, c) of every matrix depends only on (seed, stream id,
    r * cols + c); see :mod:`moelab.rng`.  ``lazy=None`` picks dense or
    lazy expert lists automatically by size.
    """
    if not isinstance(config, MoEConfig):
        raise ConfigError(f"config must be a MoEConfig, got {type(config).__name__}")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    if lazy is None:
        lazy = weight_entry_count(config) > LAZY_ENTRY_THRESHOLD

    d, ell, m = config.hidden_dim, config.latent_dim, config.intermediate_dim
    gated = config.activation == "swiglu"
    n_eff = config.n_routed_eff

    router = rng.fan_in_matrix(seed, rng.STREAM_ROUTER, n_eff, d)
    w_down = w_up = None
    if config.is_latent:
        w_down = rng.fan_in_matrix(seed, rng.STREAM_DOWN, ell, d)
        w_up = rng.fan_in_matrix(seed, rng.STREAM_UP, d, ell)

    if lazy:
        routed: Sequence[ExpertWeights] = CounterExpertList(
            seed, 0, n_eff, config.routed_in_dim, m, gated)
        shared: Sequence[ExpertWeights] = CounterExpertList(
            seed, n_eff, config.shared_experts, d, m, gated)
    else:
        routed = [_make_expert(seed, i, config.routed_in_dim, m, gated)
                  for i in range(n_eff)]
        shared = [_make_expert(seed, n_eff + j, d, m, gated)
                  for j in range(config.shared_experts)]

    return LayerWeights(router=router, w_down=w_down, w_up=w_up,
                        routed=routed, shared=shared)


def identity_projections(weights: LayerWeights, config: MoEConfig) -> LayerWeights:
    """Replace both latent projections with identity matrices.

    Only meaningful when latent_dim == hidden_dim (compression ratio 1),
    where it collapses the latent layer onto the standard formulation.
    """
    if not config.is_latent:
        raise ConfigError("identity projections only apply to latent variants")
    if config.latent_dim != config.hidden_dim:
        raise ConfigError("identity projections require latent_dim == hidden_dim")
    eye = np.eye(config.hidden_dim, dtype=np.float64)
    return LayerWeights(router=weights.router, w_down=eye, w_up=eye.copy(),
                        routed=weights.routed, shared=weights.shared)
