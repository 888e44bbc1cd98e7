"""Config validation, JSON ingestion, fixtures, variant derivation."""

import json

import pytest

from moelab import ConfigError, MoEConfig, HardwareSpec, load_hardware_spec, \
    load_model_config, with_variant
from moelab.config import MODEL_FIXTURES


def make(**overrides):
    base = dict(layers=2, hidden_dim=16, latent_dim=4, routed_experts=8,
                active_experts=2, shared_experts=1, intermediate_dim=12,
                activation="swiglu", variant="latent_eff")
    base.update(overrides)
    return MoEConfig(**base)


def test_derived_quantities():
    cfg = make()
    assert cfg.alpha == 4
    assert cfg.n_routed_eff == 32
    assert cfg.k_active == 2
    assert cfg.routed_in_dim == 4
    acc = make(variant="latent_acc")
    assert acc.k_active == 8
    std = make(variant="standard", latent_dim=16)
    assert std.alpha == 1 and std.routed_in_dim == 16 and std.n_routed_eff == 8


def test_standard_ignores_latent_dim():
    # unused for the standard variant, treated as the hidden width
    cfg = make(variant="standard", latent_dim=5)
    assert cfg.routed_in_dim == 16 and cfg.alpha == 1


@pytest.mark.parametrize("overrides", [
    dict(hidden_dim=0), dict(layers=-1), dict(shared_experts=-2),
    dict(activation="gelu"), dict(variant="dense"),
    dict(latent_dim=32),                      # latent wider than hidden
    dict(latent_dim=5),                       # non-integer compression
    dict(active_experts=40),                  # K > alpha * N
    dict(variant="standard", latent_dim=16, active_experts=9),  # K > N
])
def test_invalid_configs_rejected(overrides):
    with pytest.raises(ConfigError):
        make(**overrides)


def test_acc_allows_k_up_to_base_n():
    cfg = make(variant="latent_acc", active_experts=8)
    assert cfg.k_active == 32 == cfg.n_routed_eff


def test_json_requires_exact_keys(tmp_path):
    good = make().to_dict()
    path = tmp_path / "cfg.json"

    path.write_text(json.dumps({**good, "extra": 1}))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_model_config(path)

    missing = dict(good)
    del missing["latent_dim"]
    path.write_text(json.dumps(missing))
    with pytest.raises(ConfigError, match="missing keys"):
        load_model_config(path)

    path.write_text(json.dumps(good))
    assert load_model_config(path) == make()

    path.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed"):
        load_model_config(path)

    with pytest.raises(ConfigError, match="not found"):
        load_model_config(tmp_path / "nope.json")


def test_builtin_model_fixtures():
    sixteen = load_model_config("16BT-2BA")
    assert (sixteen.layers, sixteen.hidden_dim, sixteen.routed_experts,
            sixteen.active_experts, sixteen.shared_experts,
            sixteen.intermediate_dim) == (27, 2048, 64, 6, 2, 1408)
    assert sixteen.activation == "swiglu" and sixteen.variant == "standard"

    big = load_model_config("95BT-8BA")
    assert (big.layers, big.hidden_dim, big.routed_experts, big.active_experts,
            big.shared_experts, big.intermediate_dim) == (32, 4096, 128, 6, 2, 2688)
    assert big.activation == "squared_relu"

    hybrid = load_model_config("Hybrid-73BT-8BA")
    assert hybrid.hidden_dim == 4096 and hybrid.intermediate_dim == 2688
    assert hybrid.layers == 24  # MoE sublayers only

    assert set(MODEL_FIXTURES) == {"16BT-2BA", "95BT-8BA", "Hybrid-73BT-8BA"}


def test_fixtures_dir_override(tmp_path, monkeypatch):
    custom = make().to_dict()
    (tmp_path / "16BT-2BA.json").write_text(json.dumps(custom))
    monkeypatch.setenv("MOELAB_FIXTURES_DIR", str(tmp_path))
    assert load_model_config("16BT-2BA") == make()


def test_hardware_fixture_and_defaults(tmp_path):
    hw = load_hardware_spec("GB200-NVL72-EP64")
    assert hw.peak_flops == 10e15 and hw.bw_hbm == 8e12 and hw.bw_nvl == 900e9
    assert hw.ep == 64
    assert (hw.bytes_dispatch, hw.bytes_aggregate, hw.bytes_weight) == (0.5, 2.0, 0.5)

    path = tmp_path / "hw.json"
    path.write_text(json.dumps({"peak_flops": 1e15, "bw_hbm": 1e12,
                                "bw_nvl": 1e11, "ep": 8}))
    hw2 = load_hardware_spec(path)
    assert hw2.bytes_dispatch == 0.5 and hw2.bytes_aggregate == 2.0

    path.write_text(json.dumps({"peak_flops": 1e15, "bw_hbm": 1e12,
                                "bw_nvl": 1e11, "ep": 8, "nonsense": 1}))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_hardware_spec(path)


def test_hardware_validation():
    with pytest.raises(ConfigError):
        HardwareSpec(peak_flops=-1, bw_hbm=1, bw_nvl=1, ep=1)
    with pytest.raises(ConfigError):
        HardwareSpec(peak_flops=1, bw_hbm=1, bw_nvl=1, ep=0)


def test_with_variant_round_trip():
    std = make(variant="standard", latent_dim=16)
    eff = with_variant(std, "latent_eff", 4)
    assert eff.latent_dim == 4 and eff.variant == "latent_eff"
    assert eff.n_routed_eff == 4 * std.routed_experts
    back = with_variant(eff, "standard")
    assert back.latent_dim == back.hidden_dim and back.variant == "standard"
    with pytest.raises(ConfigError):
        with_variant(std, "latent_eff", 5)  # 16 not divisible by 5
