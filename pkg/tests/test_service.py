"""HTTP service contract, and the CLI as a remote thin client."""

import base64
import json

import httpx
import numpy as np
import pytest
from fastapi.testclient import TestClient

from moelab.analysis import run_forward
from moelab.config import load_model_config
from moelab.goldenio import decode_vector
from moelab.service import app
from moelab.cli import main

QWEN = dict(layers=1, hidden_dim=4096, latent_dim=4096, routed_experts=128,
            active_experts=8, shared_experts=0, intermediate_dim=1536,
            activation="squared_relu", variant="standard")
SMALL = dict(layers=1, hidden_dim=24, latent_dim=24, routed_experts=6,
             active_experts=2, shared_experts=1, intermediate_dim=10,
             activation="swiglu", variant="standard")


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def test_health_and_fixtures(client):
    health = client.get("/health").json()
    assert health["status"] == "ok"
    fixtures = client.get("/fixtures").json()
    assert set(fixtures["models"]) == {"16BT-2BA", "95BT-8BA", "Hybrid-73BT-8BA"}
    assert fixtures["hardware"] == ["GB200-NVL72-EP64"]


def test_analyze_with_fixture_names(client):
    resp = client.post("/analyze", json={
        "model": "95BT-8BA", "hardware": "GB200-NVL72-EP64", "t_exp": 256})
    assert resp.status_code == 200
    body = resp.json()
    assert body["memory"]["regime"] == "memory_bound"
    assert body["params"]["routed_total"] == 128 * 2 * 4096 * 2688


def test_analyze_with_inline_configs(client):
    resp = client.post("/analyze", json={
        "model": QWEN,
        "hardware": {"peak_flops": 10e15, "bw_hbm": 8e12, "bw_nvl": 900e9,
                     "ep": 64},
        "t_total": 4096})
    assert resp.status_code == 200
    assert resp.json()["workload"]["t_exp"] == 256.0


def test_analyze_unknown_fixture_400(client):
    resp = client.post("/analyze", json={
        "model": "unknown-model", "hardware": "GB200-NVL72-EP64", "t_exp": 1})
    assert resp.status_code == 400
    assert "unknown" in resp.json()["detail"]


def test_analyze_invalid_payload_422(client):
    resp = client.post("/analyze", json={
        "model": dict(QWEN, surprise=1), "hardware": "GB200-NVL72-EP64",
        "t_exp": 1})
    assert resp.status_code == 422


def test_analyze_semantic_config_error_400(client):
    resp = client.post("/analyze", json={
        "model": dict(QWEN, latent_dim=3000, variant="latent_eff"),
        "hardware": "GB200-NVL72-EP64", "t_exp": 1})
    assert resp.status_code == 400
    assert "multiple" in resp.json()["detail"]


def test_roofline_endpoint(client):
    resp = client.post("/roofline", json={
        "model": QWEN, "hardware": "GB200-NVL72-EP64",
        "t_exp": [1, 1419, 1e6]})
    assert resp.status_code == 200
    regimes = [row["regime"] for row in resp.json()["rows"]]
    assert regimes == ["memory_bound", "compute_bound", "compute_bound"]
    empty = client.post("/roofline", json={
        "model": QWEN, "hardware": "GB200-NVL72-EP64", "t_exp": []})
    assert empty.status_code == 422


def test_compare_endpoint(client):
    resp = client.post("/compare", json={
        "model": dict(QWEN, latent_dim=1024, variant="latent_acc"),
        "hardware": "GB200-NVL72-EP64"})
    assert resp.status_code == 200
    rows = {r["variant"]: r for r in resp.json()["rows"]}
    assert rows["latent_eff"]["comm_ratio_vs_standard"] == 0.25
    assert rows["latent_acc"]["comm_ratio_vs_standard"] == 1.0


def test_forward_endpoint_matches_library(client):
    resp = client.post("/forward", json={"model": SMALL, "seed": 5, "tokens": 2})
    assert resp.status_code == 200
    body = resp.json()
    y, digest = run_forward(
        load_model_config_from_dict(SMALL), 5, 2)
    assert body["digest"] == digest
    vec = decode_vector(base64.b64decode(body["data_base64"]))
    assert np.array_equal(vec, y.ravel())
    assert body["elements"] == y.size and body["hidden_dim"] == 24


def load_model_config_from_dict(data):
    from moelab.config import MoEConfig
    return MoEConfig.from_dict(data)


def test_epm_endpoints(client):
    fit = client.post("/epm/fit", json={
        "points": [{"n_params": 10, "score": 1}, {"n_params": 100, "score": 2}]})
    assert fit.status_code == 200
    assert abs(fit.json()["a"] - 0.43429448190325176) < 1e-12

    too_few = client.post("/epm/fit", json={"points": [{"n_params": 10, "score": 1}]})
    assert too_few.status_code == 422
    degenerate = client.post("/epm/fit", json={
        "points": [{"n_params": 10, "score": 1}, {"n_params": 10, "score": 2}]})
    assert degenerate.status_code == 400

    lam = client.post("/epm/lambda", json={"n_eff": 1.35e12, "n_treat": 1e12})
    assert lam.json()["epm_lambda"] == 1.35

    iso = client.post("/epm/iso", json={"epm_lambda": 1.35, "n_treat": 1e12})
    assert iso.json()["n_iso"] == 1.35e12 and iso.json()["delta"] == 3.5e11


def test_check_endpoint(client):
    resp = client.post("/check", json={"seed": 0})
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is True
    assert all(r["passed"] for r in body["results"])
    assert {r["name"] for r in body["results"]} >= {
        "prng_golden", "routing_oracle", "gradient_check", "roofline_values"}


def test_cli_talks_to_remote_server(monkeypatch, capsys, tmp_path):
    """--server routes every command through HTTP instead of in-process calls."""
    test_client = TestClient(app)

    def fake_post(url, json=None, timeout=None):
        assert url.startswith("http://svc")
        return test_client.post(url.removeprefix("http://svc"), json=json)

    monkeypatch.setattr(httpx, "post", fake_post)

    cfg_path = tmp_path / "m.json"
    cfg_path.write_text(json.dumps(SMALL))
    rc = main(["forward", "--model", str(cfg_path), "--seed", "5", "--tokens", "2",
               "--out", str(tmp_path / "remote.bin"), "--server", "http://svc"])
    out = capsys.readouterr().out
    assert rc == 0
    _, local_digest = run_forward(load_model_config_from_dict(SMALL), 5, 2)
    assert out.split()[0] == f"sha256={local_digest}"

    rc = main(["epm", "lambda", "1.35e12", "1e12", "--server", "http://svc"])
    assert rc == 0
    assert "lambda=1.35" in capsys.readouterr().out

    # remote config errors surface as exit code 2
    rc = main(["analyze", "--model", str(cfg_path), "--hw", "GB200-NVL72-EP64",
               "--server", "http://svc"])
    assert rc == 2
