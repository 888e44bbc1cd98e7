"""Counter-based deterministic random number generation.

Every random value in this package is a pure function of
``(seed, stream_id, flat_index)``, so any single matrix entry can be
reproduced in isolation, in any language, without generating its
predecessors.  The derivation chains three splitmix64 steps:

    h = mix(seed); h = mix(h ^ stream_id); h = mix(h ^ flat_index)

where ``mix(x)`` adds the 64-bit golden-ratio increment and applies the
splitmix64 finalizer.  The top 53 bits of the result map to a uniform
double in [0, 1).
"""

from __future__ import annotations

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1FFB39E7)
_MUL2 = np.uint64(0x94D049BB133111EB)
_U53_SCALE = 2.0**-53

# Stream ids for the fixed per-layer matrices.  Expert matrices start at
# EXPERT_STREAM_BASE and occupy EXPERT_STREAM_STRIDE consecutive ids per
# expert (fc1, gate, fc2, one spare); shared experts follow the routed
# ones in id space.
STREAM_ROUTER = 0
STREAM_DOWN = 1
STREAM_UP = 2
STREAM_TOKENS = 3
EXPERT_STREAM_BASE = 16
EXPERT_STREAM_STRIDE = 4
OFFSET_FC1 = 0
OFFSET_GATE = 1
OFFSET_FC2 = 2


def expert_stream(expert_index: int, offset: int) -> int:
    """Stream id of one matrix of one expert.

    Routed experts use indices ``0 .. n_routed_eff - 1``; shared experts
    continue at ``n_routed_eff + j``.
    """
    return EXPERT_STREAM_BASE + EXPERT_STREAM_STRIDE * expert_index + offset


def _mix(x: np.ndarray) -> np.ndarray:
    """One splitmix64 step (gamma increment + finalizer) on a uint64 array."""
    x = x + _GAMMA
    x ^= x >> np.uint64(30)
    x = x * _MUL1
    x ^= x >> np.uint64(27)
    x = x * _MUL2
    x ^= x >> np.uint64(31)
    return x


def _mix_int(x: int) -> int:
    """Same step on a plain Python int (mod 2**64)."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 30
    x = (x * 0xBF58476D1FFB39E7) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 31
    return x


def unit_uniform(seed: int, stream_id: int, n: int, start: int = 0) -> np.ndarray:
    """``n`` uniform [0, 1) doubles at flat indices ``start .. start+n-1``."""
    idx = np.arange(start, start + n, dtype=np.uint64)
    h = _mix_int(_mix_int(int(seed) & 0xFFFFFFFFFFFFFFFF) ^ int(stream_id))
    out = _mix(np.uint64(h) ^ idx)
    return (out >> np.uint64(11)).astype(np.float64) * _U53_SCALE


def uniform_matrix(seed: int, stream_id: int, rows: int, cols: int, scale: float) -> np.ndarray:
    """Row-major (rows, cols) matrix, entries uniform in [-scale, scale)."""
    u = unit_uniform(seed, stream_id, rows * cols)
    return ((2.0 * u - 1.0) * scale).reshape(rows, cols)


def fan_in_matrix(seed: int, stream_id: int, rows: int, cols: int) -> np.ndarray:
    """(rows, cols) matrix with uniform(-1/sqrt(cols), 1/sqrt(cols)) entries."""
    return uniform_matrix(seed, stream_id, rows, cols, 1.0 / np.sqrt(float(cols)))


def token_batch(seed: int, count: int, dim: int) -> np.ndarray:
    """Deterministic (count, dim) token batch with entries in [-1, 1)."""
    u = unit_uniform(seed, STREAM_TOKENS, count * dim)
    return (2.0 * u - 1.0).reshape(count, dim)
