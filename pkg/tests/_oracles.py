"""Independent reference implementations used only by the tests.

Everything here is written against the documented behavior, not against
the package internals: pure-int splitmix for the PRNG, full sorts for
routing, scalar loops for expert math, and central finite differences
for gradients.
"""

from __future__ import annotations

import math

import numpy as np

M64 = (1 << 64) - 1


def splitmix_step(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & M64
    x ^= x >> 30
    x = (x * 0xBF58476D1FFB39E7) & M64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & M64
    x ^= x >> 31
    return x


def unit_uniform_ref(seed: int, stream_id: int, index: int) -> float:
    h = splitmix_step(seed & M64)
    h = splitmix_step(h ^ stream_id)
    h = splitmix_step(h ^ index)
    return (h >> 11) * 2.0**-53


def init_value_ref(seed: int, stream_id: int, index: int, fan_in: int) -> float:
    return (2.0 * unit_uniform_ref(seed, stream_id, index) - 1.0) / math.sqrt(fan_in)


def softmax_ref(logits) -> list[float]:
    mx = max(logits)
    exps = [math.exp(v - mx) for v in logits]
    total = sum(exps)
    return [e / total for e in exps]


def topk_ref(probs, k: int) -> list[int]:
    """Full sort of all probabilities, ties broken toward the lower index."""
    return sorted(range(len(probs)), key=lambda i: (-probs[i], i))[:k]


def silu_ref(u: float) -> float:
    return u / (1.0 + math.exp(-u))


def expert_forward_pure(w_fc1, w_gate, w_fc2, z, activation: str) -> list[float]:
    """Triple-loop scalar evaluation of one expert."""
    m, in_dim = len(w_fc1), len(z)
    h = []
    for r in range(m):
        acc = 0.0
        for c in range(in_dim):
            acc += w_fc1[r][c] * z[c]
        h.append(acc)
    if activation == "swiglu":
        act = []
        for r in range(m):
            acc = 0.0
            for c in range(in_dim):
                acc += w_gate[r][c] * z[c]
            act.append(silu_ref(acc) * h[r])
    else:
        act = [max(v, 0.0) ** 2 for v in h]
    out = []
    for r in range(in_dim):
        acc = 0.0
        for c in range(m):
            acc += w_fc2[r][c] * act[c]
        out.append(acc)
    return out


def _matvec_per_scalar(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Each output scalar computed independently (row-by-row dot)."""
    out = np.empty(mat.shape[0])
    for r in range(mat.shape[0]):
        out[r] = float(np.dot(mat[r], vec))
    return out


def layer_forward_per_scalar(weights, config, x_batch: np.ndarray,
                             renormalize: bool = False) -> np.ndarray:
    """Scalar-at-a-time re-evaluation of the full layer semantics."""
    out = np.empty_like(x_batch)
    for b in range(x_batch.shape[0]):
        x = x_batch[b]
        logits = _matvec_per_scalar(weights.router, x)
        probs = softmax_ref(logits.tolist())
        chosen = sorted(topk_ref(probs, config.k_active))
        gates = [probs[i] for i in chosen]
        if renormalize:
            mass = sum(gates)
            gates = [g / mass for g in gates]
        z = _matvec_per_scalar(weights.w_down, x) if config.is_latent else x
        mix = np.zeros(config.routed_in_dim)
        for gate, e in zip(gates, chosen):
            w = weights.routed[e]
            h1 = _matvec_per_scalar(w.w_fc1, z)
            if config.activation == "swiglu":
                hg = _matvec_per_scalar(w.w_gate, z)
                act = np.array([silu_ref(v) for v in hg]) * h1
            else:
                act = np.maximum(h1, 0.0) ** 2
            mix = mix + gate * _matvec_per_scalar(w.w_fc2, act)
        y = _matvec_per_scalar(weights.w_up, mix) if config.is_latent else mix.copy()
        for w in weights.shared:
            h1 = _matvec_per_scalar(w.w_fc1, x)
            if config.activation == "swiglu":
                hg = _matvec_per_scalar(w.w_gate, x)
                act = np.array([silu_ref(v) for v in hg]) * h1
            else:
                act = np.maximum(h1, 0.0) ** 2
            y = y + _matvec_per_scalar(w.w_fc2, act)
        out[b] = y
    return out


def fd_layer_grads(forward_fn, weights, config, x: np.ndarray, dy: np.ndarray,
                   h: float = 1e-5):
    """Central finite differences of sum(dy * forward) over all parameters.

    Returns (per-array FD gradients keyed like the analytic containers,
    FD input gradient).
    """

    def loss() -> float:
        return float(np.sum(dy * forward_fn(weights, config, x)))

    def fd_array(arr: np.ndarray) -> np.ndarray:
        grad = np.empty_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up = loss()
            arr[idx] = orig - h
            down = loss()
            arr[idx] = orig
            grad[idx] = (up - down) / (2.0 * h)
        return grad

    grads = {"router": fd_array(weights.router)}
    if config.is_latent:
        grads["w_down"] = fd_array(weights.w_down)
        grads["w_up"] = fd_array(weights.w_up)
    grads["routed"] = {}
    for e in range(config.n_routed_eff):
        w = weights.routed[e]
        entry = {"w_fc1": fd_array(w.w_fc1), "w_fc2": fd_array(w.w_fc2)}
        if w.w_gate is not None:
            entry["w_gate"] = fd_array(w.w_gate)
        grads["routed"][e] = entry
    grads["shared"] = []
    for w in weights.shared:
        entry = {"w_fc1": fd_array(w.w_fc1), "w_fc2": fd_array(w.w_fc2)}
        if w.w_gate is not None:
            entry["w_gate"] = fd_array(w.w_gate)
        grads["shared"].append(entry)
    return grads, fd_array(x)


def max_rel_err(analytic: np.ndarray, estimate: np.ndarray,
                floor: float = 1.0) -> float:
    """Worst relative disagreement, floored for near-zero components."""
    err = np.abs(analytic - estimate)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(estimate)), floor)
    return float(np.max(err / denom))


def bisect_intensity_threshold(target: float, d: int, m: int,
                               lo: float = 1e-9, hi: float = 1e12,
                               tol: float = 1e-9) -> float | None:
    """Solve 2 t d m / (d m + t (d + m)) = target by bisection."""

    def intensity(t: float) -> float:
        return 2.0 * t * d * m / (d * m + t * (d + m))

    if intensity(hi) < target:
        return None
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        if intensity(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)
