"""Report builders: workload resolution, notes, serializability."""

import json

import pytest

from moelab import ConfigError, HardwareSpec, MoEConfig, load_hardware_spec, \
    with_variant
from moelab.analysis import analyze, resolve_workload, roofline_rows, run_forward


def base_config(**overrides):
    cfg = dict(layers=2, hidden_dim=64, latent_dim=64, routed_experts=16,
               active_experts=4, shared_experts=1, intermediate_dim=32,
               activation="swiglu", variant="standard")
    cfg.update(overrides)
    return MoEConfig(**cfg)


def test_workload_requires_exactly_one_input():
    cfg = base_config()
    with pytest.raises(ConfigError):
        resolve_workload(cfg, None, None)
    with pytest.raises(ConfigError):
        resolve_workload(cfg, 1.0, 2.0)


def test_workload_variant_scaling():
    eff = with_variant(base_config(), "latent_eff", 4)
    wl = resolve_workload(eff, 256.0, None)
    # same total tokens hit 4x the experts at the same top-k
    assert wl["t_exp_standard"] == 256.0
    assert wl["t_exp"] == 64.0
    assert wl["t_total"] == 256.0 * 16 / 4

    acc = with_variant(base_config(), "latent_acc", 4)
    wl = resolve_workload(acc, 256.0, None)
    assert wl["t_exp"] == 256.0  # top-k scales with the expert count

    wl = resolve_workload(base_config(), None, 1024.0)
    assert wl["t_exp"] == 1024.0 * 4 / 16


def test_analyze_report_is_json_ready(gb200):
    report = analyze(base_config(), gb200, t_exp=128.0)
    assert json.loads(json.dumps(report)) == report
    assert report["workload"]["t_exp"] == 128.0
    assert report["flops"]["routed"] == 4 * 3 * 2 * 64 * 32


def test_analyze_alpha_soft_limit_note(gb200):
    eff = with_variant(base_config(), "latent_eff", 8)
    report = analyze(eff, gb200, t_exp=16.0)
    assert any("alpha=8" in note for note in report["notes"])
    mild = with_variant(base_config(), "latent_eff", 4)
    report = analyze(mild, gb200, t_exp=16.0)
    assert not any("alpha=4 exceeds" in note for note in report["notes"])


def test_analyze_never_compute_bound_note():
    # huge peak relative to HBM: the knee is above the intensity asymptote
    hw = HardwareSpec(peak_flops=1e18, bw_hbm=1e12, bw_nvl=1e11, ep=4)
    report = analyze(base_config(), hw, t_exp=4.0)
    assert report["memory"]["t_exp_threshold"] is None
    assert any("never" in note for note in report["notes"])


def test_analyze_always_surfaces_flop_convention(gb200):
    report = analyze(base_config(), gb200, t_exp=1.0)
    assert any("one-GEMM-per-expert" in note for note in report["notes"])


def test_roofline_rows_validation(gb200):
    with pytest.raises(ConfigError):
        roofline_rows(base_config(), gb200, [])


def test_run_forward_validation():
    with pytest.raises(ConfigError):
        run_forward(base_config(), 0, 0)


def test_run_forward_digest_tracks_flags():
    cfg = base_config()
    _, plain = run_forward(cfg, 0, 2)
    _, renorm = run_forward(cfg, 0, 2, renormalize_gates=True)
    assert plain != renorm
    _, again = run_forward(cfg, 0, 2)
    assert plain == again
