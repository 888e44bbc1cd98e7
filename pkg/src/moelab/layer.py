"""Forward pass of standard and latent MoE layers.

Per token x the layer computes

    standard:    sum_{i in top-k} p_i E_i(x)        + sum_j S_j(x)
    latent_*:    W_up ( sum_{i in top-k} p_i E_i(W_down x) ) + sum_j S_j(x)

where p is the full softmax of the router logits (gating weights are the
raw softmax values unless renormalization is requested), the acc variant
selects alpha*K experts instead of K, and shared experts S_j are applied
unweighted to the original token.

Determinism contract: ties in top-k break toward the lower expert index,
and each token's routed contributions accumulate in ascending selected
index, so repeated evaluation is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MoEConfig
from .errors import ConfigError, NumericError, ShapeError
from .weights import ExpertWeights, LayerWeights


@dataclass
class RoutingDecision:
    """Top-k selection for one token.

    ``indices`` are in selection order (descending probability, ties
    toward the lower index); ``weights`` are the corresponding full
    softmax probabilities, not renormalized over the selection.
    """

    indices: np.ndarray
    weights: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def silu(u: np.ndarray) -> np.ndarray:
    # exp(-logaddexp(0, -u)) is sigmoid(u) without overflow at large |u|
    return u * np.exp(-np.logaddexp(0.0, -u))


def silu_grad(u: np.ndarray) -> np.ndarray:
    s = np.exp(-np.logaddexp(0.0, -u))
    return s * (1.0 + u * (1.0 - s))


def topk_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, ties toward the lower index.

    Routing passes logits here rather than softmax values: softmax is
    strictly increasing, so the selected set is the same, but logits stay
    distinct where extreme probabilities underflow into spurious ties.
    """
    order = np.lexsort((np.arange(scores.shape[-1]), -scores))
    return order[:k]


def route(router: np.ndarray, x: np.ndarray, k_active: int) -> RoutingDecision:
    """Softmax-route one token over all experts and keep the top k."""
    router = np.asarray(router, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if router.ndim != 2 or x.ndim != 1 or router.shape[1] != x.shape[0]:
        raise ShapeError(f"router {router.shape} incompatible with token {x.shape}")
    if not 1 <= k_active <= router.shape[0]:
        raise ShapeError(f"k_active={k_active} out of range for {router.shape[0]} experts")
    logits = router @ x
    if not np.all(np.isfinite(logits)):
        raise NumericError("router logits are not finite")
    probs = softmax(logits)
    idx = topk_indices(logits, k_active)
    return RoutingDecision(indices=idx, weights=probs[idx])


def topk_margin(probs: np.ndarray, k: int) -> float:
    """Probability gap between the k-th selected and the best unselected expert."""
    if k >= probs.shape[-1]:
        return float("inf")
    ordered = np.sort(probs)[::-1]
    return float(ordered[k - 1] - ordered[k])


def _apply_expert(w: ExpertWeights, z_row: np.ndarray, activation: str):
    """Expert on one token; returns (h1, hg, act, out) vectors.

    Strictly per token: a token's bits never depend on what else is in
    the batch, so batch evaluation equals sequential evaluation exactly.
    """
    h1 = w.w_fc1 @ z_row
    if activation == "swiglu":
        hg = w.w_gate @ z_row
        act = silu(hg) * h1
    elif activation == "squared_relu":
        hg = None
        act = np.square(np.maximum(h1, 0.0))
    else:
        raise ConfigError(f"unknown activation {activation!r}")
    return h1, hg, act, w.w_fc2 @ act


def expert_forward(w: ExpertWeights, z: np.ndarray, activation: str) -> np.ndarray:
    """Single-token expert evaluation: fc2(act(fc1 z [, gate z]))."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != w.in_dim:
        raise ShapeError(f"token length {z.shape} != expert input width {w.in_dim}")
    if activation == "swiglu" and w.w_gate is None:
        raise ShapeError("swiglu requires a gate matrix")
    return _apply_expert(w, z, activation)[3]


@dataclass
class ForwardTrace:
    """Everything the backward pass needs, cached at forward time.

    Routed-expert intermediates are stored per (token, slot) where slots
    follow ascending selected expert index.
    """

    config: MoEConfig
    renormalize: bool
    x: np.ndarray              # (B, d)
    logits: np.ndarray         # (B, n_eff)
    probs: np.ndarray          # (B, n_eff)
    selected: np.ndarray       # (B, k) ascending expert ids
    gates: np.ndarray          # (B, k) combine weights actually used
    probs_selected: np.ndarray  # (B, k) raw softmax values
    prob_mass: np.ndarray      # (B,) sum of selected raw probabilities
    z: np.ndarray              # (B, routed_in_dim)
    mix: np.ndarray            # (B, routed_in_dim) gated expert sum
    h1: np.ndarray             # (B, k, m)
    hg: np.ndarray | None      # (B, k, m) for swiglu
    act: np.ndarray            # (B, k, m)
    expert_out: np.ndarray     # (B, k, routed_in_dim)
    shared_h1: np.ndarray      # (S, B, m)
    shared_hg: np.ndarray | None
    shared_act: np.ndarray     # (S, B, m)
    shared_out: np.ndarray     # (S, B, d)


def moe_layer_forward(weights: LayerWeights, config: MoEConfig, x_batch: np.ndarray,
                      renormalize_gates: bool = False) -> tuple[np.ndarray, ForwardTrace]:
    """Run one MoE layer over a (B, hidden_dim) token batch."""
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 2 or x_batch.shape[1] != config.hidden_dim:
        raise ShapeError(f"tokens must have shape (B, {config.hidden_dim}), "
                         f"got {x_batch.shape}")
    weights.validate(config)

    b, d = x_batch.shape
    k = config.k_active
    m = config.intermediate_dim
    in_dim = config.routed_in_dim
    gated = config.activation == "swiglu"

    # Every matrix-vector product below runs one token at a time so that
    # a token's output is bit-identical whether it is evaluated alone or
    # inside any batch.
    logits = np.empty((b, config.n_routed_eff))
    for i in range(b):
        logits[i] = weights.router @ x_batch[i]
    if not np.all(np.isfinite(logits)):
        raise NumericError("router logits are not finite")
    probs = softmax(logits)

    selected = np.empty((b, k), dtype=np.intp)
    for i in range(b):
        selected[i] = np.sort(topk_indices(logits[i], k))
    probs_selected = np.take_along_axis(probs, selected, axis=1)
    prob_mass = probs_selected.sum(axis=1)
    gates = probs_selected / prob_mass[:, None] if renormalize_gates \
        else probs_selected.copy()

    if config.is_latent:
        z = np.empty((b, in_dim))
        for i in range(b):
            z[i] = weights.w_down @ x_batch[i]
    else:
        z = x_batch

    mix = np.zeros((b, in_dim))
    h1 = np.empty((b, k, m))
    hg = np.empty((b, k, m)) if gated else None
    act = np.empty((b, k, m))
    expert_out = np.empty((b, k, in_dim))

    # Expert-major loop: touches each selected expert once (cheap for lazy
    # weight lists) while preserving per-token ascending-index accumulation.
    token_ids = np.repeat(np.arange(b), k)
    slot_ids = np.tile(np.arange(k), b)
    expert_ids = selected.ravel()
    for e in np.unique(expert_ids):
        w = weights.routed[e]
        for tok, slot in zip(token_ids[expert_ids == e],
                             slot_ids[expert_ids == e]):
            eh1, ehg, eact, eout = _apply_expert(w, z[tok], config.activation)
            h1[tok, slot] = eh1
            if gated:
                hg[tok, slot] = ehg
            act[tok, slot] = eact
            expert_out[tok, slot] = eout
            mix[tok] += gates[tok, slot] * eout

    if config.is_latent:
        y = np.empty((b, d))
        for i in range(b):
            y[i] = weights.w_up @ mix[i]
    else:
        y = mix.copy()

    s = config.shared_experts
    shared_h1 = np.empty((s, b, m))
    shared_hg = np.empty((s, b, m)) if gated else None
    shared_act = np.empty((s, b, m))
    shared_out = np.empty((s, b, d))
    for j in range(s):
        w = weights.shared[j]
        for i in range(b):
            sh1, shg, sact, sout = _apply_expert(w, x_batch[i],
                                                 config.activation)
            shared_h1[j, i] = sh1
            if gated:
                shared_hg[j, i] = shg
            shared_act[j, i] = sact
            shared_out[j, i] = sout
        y = y + shared_out[j]

    if not np.all(np.isfinite(y)):
        raise NumericError("layer output is not finite")

    trace = ForwardTrace(
        config=config, renormalize=renormalize_gates, x=x_batch,
        logits=logits, probs=probs, selected=selected, gates=gates,
        probs_selected=probs_selected, prob_mass=prob_mass, z=z, mix=mix,
        h1=h1, hg=hg, act=act, expert_out=expert_out,
        shared_h1=shared_h1, shared_hg=shared_hg, shared_act=shared_act,
        shared_out=shared_out)
    return y, trace
