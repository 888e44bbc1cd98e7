"""Analytic backward pass for the MoE layer.

Differentiation treats the top-k selection set as constant, but the
gating values remain the full-softmax probabilities, so gradients flow
through every router logit (selected or not).  With renormalized gating
the selection-mass division is differentiated as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MoEConfig
from .errors import ShapeError
from .layer import ForwardTrace, silu, silu_grad
from .weights import LayerWeights


@dataclass
class ExpertGrads:
    w_fc1: np.ndarray
    w_gate: np.ndarray | None
    w_fc2: np.ndarray


@dataclass
class LayerGrads:
    """Gradients mirroring :class:`LayerWeights`.

    ``routed`` is sparse: experts never selected in the traced batch have
    identically zero gradients and are omitted.
    """

    router: np.ndarray
    w_down: np.ndarray | None
    w_up: np.ndarray | None
    routed: dict[int, ExpertGrads]
    shared: list[ExpertGrads]


def _expert_backward(w, grads: ExpertGrads, z_row: np.ndarray, h1: np.ndarray,
                     hg: np.ndarray | None, act: np.ndarray, dout: np.ndarray,
                     activation: str) -> np.ndarray:
    """Accumulate one expert's weight gradients; return d(input)."""
    grads.w_fc2 += np.outer(dout, act)
    dact = w.w_fc2.T @ dout
    if activation == "swiglu":
        dh1 = dact * silu(hg)
        dhg = dact * h1 * silu_grad(hg)
        grads.w_fc1 += np.outer(dh1, z_row)
        grads.w_gate += np.outer(dhg, z_row)
        return w.w_fc1.T @ dh1 + w.w_gate.T @ dhg
    dh1 = dact * 2.0 * np.maximum(h1, 0.0)
    grads.w_fc1 += np.outer(dh1, z_row)
    return w.w_fc1.T @ dh1


def _zero_expert_grads(w, gated: bool) -> ExpertGrads:
    return ExpertGrads(
        w_fc1=np.zeros_like(w.w_fc1),
        w_gate=np.zeros_like(w.w_gate) if gated else None,
        w_fc2=np.zeros_like(w.w_fc2))


def moe_layer_backward(trace: ForwardTrace, weights: LayerWeights,
                       config: MoEConfig, dy: np.ndarray
                       ) -> tuple[LayerGrads, np.ndarray]:
    """Exact gradients of ``sum(dy * y)`` w.r.t. weights and inputs."""
    if trace.config != config:
        raise ShapeError("trace was produced under a different config")
    weights.validate(config)
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != trace.x.shape:
        raise ShapeError(f"dy shape {dy.shape} != input shape {trace.x.shape}")

    gated = config.activation == "swiglu"
    latent = config.is_latent
    b, _ = trace.x.shape
    k = config.k_active

    grads = LayerGrads(
        router=np.zeros_like(weights.router),
        w_down=np.zeros_like(weights.w_down) if latent else None,
        w_up=np.zeros_like(weights.w_up) if latent else None,
        routed={},
        shared=[_zero_expert_grads(w, gated) for w in weights.shared])
    dx = np.zeros_like(trace.x)

    for i in range(b):
        g = dy[i]
        x_row = trace.x[i]

        for j, w in enumerate(weights.shared):
            hg_row = trace.shared_hg[j, i] if gated else None
            dx[i] += _expert_backward(w, grads.shared[j], x_row,
                                      trace.shared_h1[j, i], hg_row,
                                      trace.shared_act[j, i], g,
                                      config.activation)

        if latent:
            grads.w_up += np.outer(g, trace.mix[i])
            dmix = weights.w_up.T @ g
        else:
            dmix = g

        dz = np.zeros(config.routed_in_dim)
        dgate = np.empty(k)
        for slot in range(k):
            e = int(trace.selected[i, slot])
            dgate[slot] = float(trace.expert_out[i, slot] @ dmix)
            if e not in grads.routed:
                grads.routed[e] = _zero_expert_grads(weights.routed[e], gated)
            hg_row = trace.hg[i, slot] if gated else None
            dz += _expert_backward(weights.routed[e], grads.routed[e],
                                   trace.z[i], trace.h1[i, slot], hg_row,
                                   trace.act[i, slot],
                                   trace.gates[i, slot] * dmix,
                                   config.activation)

        if trace.renormalize:
            # gates = p_sel / P with P the selected mass: d/dp_s picks up
            # both the direct term and the shared division by P.
            mass = trace.prob_mass[i]
            dprob_sel = dgate / mass \
                - float(dgate @ trace.probs_selected[i]) / (mass * mass)
        else:
            dprob_sel = dgate
        dprob = np.zeros_like(trace.probs[i])
        dprob[trace.selected[i]] = dprob_sel
        p = trace.probs[i]
        dlogits = p * (dprob - float(dprob @ p))
        grads.router += np.outer(dlogits, x_row)
        dx[i] += weights.router.T @ dlogits

        if latent:
            grads.w_down += np.outer(dz, x_row)
            dx[i] += weights.w_down.T @ dz
        else:
            dx[i] += dz

    return grads, dx
