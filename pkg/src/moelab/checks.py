"""Self-check suite behind the ``check`` command.

Each check is a small deterministic experiment with a pass/fail verdict;
golden files pin a handful of values recorded at build time so silent
numeric drift (or a corrupted install) is caught in the field.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import rng
from .accounting import count_flops, count_params
from .backward import moe_layer_backward
from .config import HardwareSpec, MoEConfig, load_hardware_spec, with_variant
from .expressivity import diversity_gain, log_binomial
from .goldenio import digest_vector, read_golden
from .layer import moe_layer_forward, route, softmax, topk_margin
from .perf import (
    arithmetic_intensity,
    comm_compute_ratio,
    compute_bound_intensity,
    cost_table,
    roofline_attainable,
    solve_t_exp_threshold,
)
from .scaling import fit_log_linear, invert_scaling_law
from .weights import identity_projections, init_weights

GOLDEN_DIR_ENV = "MOELAB_GOLDEN_DIR"

GOLDEN_PRNG_HEAD = "wfc1_16BT-2BA_seed0_first4.bin"
GOLDEN_SMALL_FORWARD = "forward_small_seed0.bin"
GOLDEN_FIXTURE_FORWARD = "forward_16BT-2BA_seed0_t3.bin"

# Small latent config that exercises every code path quickly.
SMALL_CONFIG = MoEConfig(layers=2, hidden_dim=32, latent_dim=8, routed_experts=8,
                         active_experts=2, shared_experts=1, intermediate_dim=16,
                         activation="swiglu", variant="latent_acc")
SMALL_FORWARD_TOKENS = 4

GRADCHECK_CONFIGS = {
    "swiglu": MoEConfig(layers=1, hidden_dim=8, latent_dim=4, routed_experts=4,
                        active_experts=2, shared_experts=1, intermediate_dim=6,
                        activation="swiglu", variant="latent_eff"),
    "squared_relu": MoEConfig(layers=1, hidden_dim=8, latent_dim=4, routed_experts=4,
                              active_experts=2, shared_experts=1, intermediate_dim=6,
                              activation="squared_relu", variant="latent_eff"),
}


def golden_dir() -> Path:
    override = os.environ.get(GOLDEN_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "golden"


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _gb200() -> HardwareSpec:
    return load_hardware_spec("GB200-NVL72-EP64")


def _check_prng_golden(seed: int) -> tuple[bool, str]:
    golden = read_golden(golden_dir() / GOLDEN_PRNG_HEAD)
    stream = rng.expert_stream(0, rng.OFFSET_FC1)
    u = rng.unit_uniform(0, stream, golden.size)
    got = (2.0 * u - 1.0) / math.sqrt(2048.0)
    ok = bool(np.array_equal(got, golden))
    return ok, f"first {golden.size} init values vs golden file"


def _check_small_forward_golden(seed: int) -> tuple[bool, str]:
    golden = read_golden(golden_dir() / GOLDEN_SMALL_FORWARD)
    weights = init_weights(SMALL_CONFIG, 0)
    x = rng.token_batch(0, SMALL_FORWARD_TOKENS, SMALL_CONFIG.hidden_dim)
    y, _ = moe_layer_forward(weights, SMALL_CONFIG, x)
    ok = y.size == golden.size and bool(
        np.allclose(y.ravel(), golden, rtol=1e-12, atol=1e-15))
    return ok, f"{y.size}-element forward output vs golden file"


def _check_fixture_forward_golden(seed: int) -> tuple[bool, str]:
    from .analysis import run_forward
    from .config import load_model_config
    golden = read_golden(golden_dir() / GOLDEN_FIXTURE_FORWARD)
    config = load_model_config("16BT-2BA")
    y, _ = run_forward(config, 0, 3)
    ok = y.size == golden.size and bool(
        np.allclose(y.ravel(), golden, rtol=1e-12, atol=1e-15))
    return ok, "16BT-2BA seed-0 3-token forward vs golden file"


def _check_routing_oracle(seed: int) -> tuple[bool, str]:
    gen = np.random.default_rng(seed)
    trials = 500
    for _ in range(trials):
        n = int(gen.integers(2, 65))
        k = int(gen.integers(1, n + 1))
        d = int(gen.integers(1, 17))
        router = gen.standard_normal((n, d))
        x = gen.standard_normal(d)
        decision = route(router, x, k)
        p = softmax(router @ x)
        expected = sorted(range(n), key=lambda i: (-p[i], i))[:k]
        if sorted(decision.indices.tolist()) != sorted(expected):
            return False, f"index set mismatch at n={n}, k={k}"
        if abs(p.sum() - 1.0) > 1e-12:
            return False, "softmax mass deviates from 1"
        if not np.all((decision.weights > 0) & (decision.weights < 1)):
            return False, "selected weight outside (0, 1)"
    return True, f"{trials} random routes match the full-sort reference"


def _check_scale_invariance(seed: int) -> tuple[bool, str]:
    gen = np.random.default_rng(seed + 1)
    for _ in range(100):
        router = gen.standard_normal((16, 8))
        x = gen.standard_normal(8)
        c = float(gen.uniform(0.1, 10.0))
        base = route(router, x, 4).indices
        scaled = route(c * router, x, 4).indices
        if set(base.tolist()) != set(scaled.tolist()):
            return False, f"selection changed under logit scale {c:.3f}"
    return True, "top-k selection invariant under positive router scaling"


def _check_permutation_equivariance(seed: int) -> tuple[bool, str]:
    gen = np.random.default_rng(seed + 2)
    config = SMALL_CONFIG
    weights = init_weights(config, 3)
    x = rng.token_batch(3, 3, config.hidden_dim)
    y, _ = moe_layer_forward(weights, config, x)
    perm = gen.permutation(config.n_routed_eff)
    permuted = init_weights(config, 3)
    permuted.router = weights.router[perm]
    permuted.routed = [weights.routed[i] for i in perm]
    y2, _ = moe_layer_forward(permuted, config, x)
    diff = float(np.max(np.abs(y - y2)))
    return diff <= 1e-12, f"max output drift {diff:.3e} under expert permutation"


def _check_identity_collapse(seed: int) -> tuple[bool, str]:
    worst = 0.0
    for s in range(5):
        std = MoEConfig(layers=1, hidden_dim=16, latent_dim=16, routed_experts=6,
                        active_experts=2, shared_experts=1, intermediate_dim=12,
                        activation="swiglu", variant="standard")
        lat = with_variant(std, "latent_eff", alpha=1)
        x = rng.token_batch(s, 4, std.hidden_dim)
        y_std, _ = moe_layer_forward(init_weights(std, s), std, x)
        w_lat = identity_projections(init_weights(lat, s), lat)
        y_lat, _ = moe_layer_forward(w_lat, lat, x)
        worst = max(worst, float(np.max(np.abs(y_std - y_lat))))
    return worst <= 1e-12, f"max deviation {worst:.3e} across 5 seeds"


def _fd_max_rel_err(config: MoEConfig, seed: int) -> float:
    """Central finite differences over every weight and input entry."""
    weights = init_weights(config, seed)
    gen = np.random.default_rng(seed)
    x = gen.uniform(-1.0, 1.0, size=(2, config.hidden_dim))
    dy = gen.standard_normal((2, config.hidden_dim))
    y, trace = moe_layer_forward(weights, config, x)
    if min(topk_margin(trace.probs[i], config.k_active) for i in range(2)) <= 1e-3:
        return -1.0  # caller retries with another seed
    grads, dx = moe_layer_backward(trace, weights, config, dy)

    def loss_at(arr, idx, delta, recompute):
        old = arr[idx]
        arr[idx] = old + delta
        val = float(np.sum(dy * recompute()))
        arr[idx] = old
        return val

    h = 1e-5
    worst = 0.0

    def fd(arr, analytic, recompute):
        nonlocal worst
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            up = loss_at(arr, idx, +h, recompute)
            down = loss_at(arr, idx, -h, recompute)
            est = (up - down) / (2 * h)
            ana = analytic[idx]
            err = abs(ana - est) / max(abs(ana), abs(est), 1.0)
            worst = max(worst, err)

    def forward():
        return moe_layer_forward(weights, config, x)[0]

    fd(weights.router, grads.router, forward)
    if config.is_latent:
        fd(weights.w_down, grads.w_down, forward)
        fd(weights.w_up, grads.w_up, forward)
    for e, eg in sorted(grads.routed.items()):
        fd(weights.routed[e].w_fc1, eg.w_fc1, forward)
        if eg.w_gate is not None:
            fd(weights.routed[e].w_gate, eg.w_gate, forward)
        fd(weights.routed[e].w_fc2, eg.w_fc2, forward)
    for j, sg in enumerate(grads.shared):
        fd(weights.shared[j].w_fc1, sg.w_fc1, forward)
        if sg.w_gate is not None:
            fd(weights.shared[j].w_gate, sg.w_gate, forward)
        fd(weights.shared[j].w_fc2, sg.w_fc2, forward)
    fd(x, dx, forward)
    return float(worst)


def _check_gradients(seed: int) -> tuple[bool, str]:
    worst = 0.0
    for activation, config in GRADCHECK_CONFIGS.items():
        err = -1.0
        s = seed
        while err < 0:  # skip seeds whose routing margin is too thin
            err = _fd_max_rel_err(config, s)
            s += 1
        worst = max(worst, err)
    return bool(worst < 1e-5), f"max rel err vs finite differences {worst:.3e}"


def _check_accounting_parity(seed: int) -> tuple[bool, str]:
    gen = np.random.default_rng(seed + 4)
    for _ in range(50):
        alpha = int(gen.integers(1, 9))
        ell = int(gen.integers(1, 65))
        n = int(gen.integers(1, 65))
        base = MoEConfig(
            layers=int(gen.integers(1, 9)), hidden_dim=alpha * ell, latent_dim=alpha * ell,
            routed_experts=n, active_experts=int(gen.integers(1, n + 1)),
            shared_experts=int(gen.integers(0, 4)),
            intermediate_dim=int(gen.integers(1, 257)),
            activation=["swiglu", "squared_relu"][int(gen.integers(0, 2))],
            variant="standard")
        eff = with_variant(base, "latent_eff", alpha)
        acc = with_variant(base, "latent_acc", alpha)
        p0, pe, pa = count_params(base), count_params(eff), count_params(acc)
        if not (p0.routed_total == pe.routed_total == pa.routed_total):
            return False, "routed parameter parity violated"
        f0, fa = count_flops(base), count_flops(acc)
        if f0.routed != fa.routed:
            return False, "acc-variant routed FLOP parity violated"
        if count_flops(eff).routed * alpha != f0.routed:
            return False, "eff-variant routed FLOP scaling violated"
    return True, "50 random configs hold exact parameter/FLOP parity"


def _check_cost_parity(seed: int) -> tuple[bool, str]:
    gen = np.random.default_rng(seed + 5)
    hw = _gb200()
    for _ in range(50):
        alpha = int(gen.integers(1, 9))
        config = MoEConfig(
            layers=1, hidden_dim=alpha * int(gen.integers(1, 129)),
            latent_dim=1, routed_experts=int(gen.integers(1, 129)),
            active_experts=1, shared_experts=0,
            intermediate_dim=int(gen.integers(1, 1025)),
            activation="squared_relu", variant="standard")
        config = with_variant(config, "latent_acc", alpha)
        rows = cost_table(config, hw, float(gen.integers(1, 2049)))
        std, eff, acc = rows
        if acc.comm_bytes != std.comm_bytes or \
                acc.weight_bytes_per_expert != std.weight_bytes_per_expert:
            return False, "acc row deviates from standard"
        if eff.comm_bytes * alpha != std.comm_bytes or \
                eff.weight_bytes_per_expert * alpha != std.weight_bytes_per_expert:
            return False, "eff row is not exactly standard / alpha"
    return True, "50 random cost tables hold exact cross-variant parity"


def _check_roofline(seed: int) -> tuple[bool, str]:
    hw = _gb200()
    theta = compute_bound_intensity(hw)
    if theta != 1250.0:
        return False, f"compute-bound intensity {theta} != 1250"
    if roofline_attainable(hw, theta) != hw.peak_flops:
        return False, "roofline knee does not reach peak FLOP/s"
    t_star = solve_t_exp_threshold(hw, 4096, 1536)
    if t_star is None or abs(t_star - 1418.8) > 0.1:
        return False, f"token threshold {t_star} not within 1418.8 +/- 0.1"
    if abs(arithmetic_intensity(t_star, 4096, 1536) - theta) > 1e-9 * theta:
        return False, "threshold does not reproduce the knee intensity"
    ratio = comm_compute_ratio(hw, 1536)
    if abs(ratio - 9.04) > 0.0904:
        return False, f"comm/compute ratio {ratio} not within 1% of 9.04"
    return True, f"knee 1250, threshold {t_star:.1f}, comm/compute {ratio:.2f}"


def _check_diversity(seed: int) -> tuple[bool, str]:
    spot = diversity_gain(8, 2, 2).log_gain
    if abs(spot - math.log(1820.0 / 784.0)) > 1e-9:
        return False, f"spot diversity gain {spot} off"
    gen = np.random.default_rng(seed + 6)
    for _ in range(300):
        n = int(gen.integers(1, 201))
        k = int(gen.integers(1, n + 1))
        alpha = int(gen.integers(1, 9))
        if diversity_gain(n, k, alpha).log_gain < -1e-9:
            return False, f"diversity inequality violated at ({n}, {k}, {alpha})"
    if log_binomial(16, 4) != math.log(1820):
        return False, "exact binomial path drifted"
    return True, "300 random draws satisfy the scaled-choice inequality"


def _check_epm(seed: int) -> tuple[bool, str]:
    fit = fit_log_linear([(10.0, 1.0), (100.0, 2.0)])
    if abs(fit.a - 1.0 / math.log(10.0)) > 1e-12 or abs(fit.b) > 1e-12:
        return False, "two-point fit is not exact"
    n = invert_scaling_law(fit, 3.0)
    if abs(n - 1000.0) > 1e-9 * 1000.0:
        return False, f"inversion returned {n}, expected 1000"
    round_trip = invert_scaling_law(fit, fit.predict(55.5))
    if abs(round_trip - 55.5) > 1e-9 * 55.5:
        return False, "predict/invert round trip drifted"
    return True, "fit, inversion and round trip all exact"


_FAST_CHECKS: list[tuple[str, Callable[[int], tuple[bool, str]]]] = [
    ("prng_golden", _check_prng_golden),
    ("forward_golden_small", _check_small_forward_golden),
    ("routing_oracle", _check_routing_oracle),
    ("routing_scale_invariance", _check_scale_invariance),
    ("permutation_equivariance", _check_permutation_equivariance),
    ("identity_collapse", _check_identity_collapse),
    ("gradient_check", _check_gradients),
    ("accounting_parity", _check_accounting_parity),
    ("cost_table_parity", _check_cost_parity),
    ("roofline_values", _check_roofline),
    ("diversity_inequality", _check_diversity),
    ("epm_arithmetic", _check_epm),
]

_FULL_CHECKS = [("forward_golden_16BT-2BA", _check_fixture_forward_golden)]


def run_checks(seed: int = 0, full: bool = False) -> list[CheckResult]:
    """Run the invariant suite; failures never raise, they report."""
    suite = list(_FAST_CHECKS) + (list(_FULL_CHECKS) if full else [])
    results = []
    for name, fn in suite:
        try:
            passed, detail = fn(seed)
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name=name, passed=passed, detail=detail))
    return results
