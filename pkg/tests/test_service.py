import json

import pytest
from fastapi.testclient import TestClient

from mcsim import __version__
from mcsim.service import app

from conftest import FIXTURES, constant_path, udp_scenario

client = TestClient(app)


def scenario_doc(**overrides):
    return udp_scenario(
        "DC_Reo",
        [constant_path("A", 15e6), constant_path("B", 12e6)],
        32.0,
        duration_s=1.0,
        t_reordering_ms=60,
        **overrides,
    )


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": __version__}


def test_validate_scenario():
    resp = client.post("/validate", json={"config": scenario_doc()})
    assert resp.status_code == 200
    body = resp.json()
    assert body["valid"] is True
    assert body["kind"] == "scenario"
    assert body["normalized"]["mode"] == "DC_Reo"
    assert body["normalized"]["paths"][1]["backhaul_delay_ms"] == 10.0


def test_validate_rejects_bad_config_with_422():
    doc = scenario_doc()
    doc["paths"] = doc["paths"][:1]
    resp = client.post("/validate", json={"config": doc})
    assert resp.status_code == 422
    assert "at least 2" in resp.json()["detail"]


def test_validate_matrix_lists_run_keys():
    matrix = json.loads((FIXTURES / "paper_s5.json").read_text())
    resp = client.post("/validate", json={"config": matrix, "base_dir": str(FIXTURES)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["kind"] == "matrix"
    assert len(body["run_keys"]) == 16


def test_run_returns_metrics_and_artifacts():
    resp = client.post("/run", json={"config": scenario_doc()})
    assert resp.status_code == 200
    body = resp.json()
    assert body["run_key"] == "DC_Reo"
    totals = body["metrics"]["totals"]
    assert totals["submitted_sdus"] > 0
    assert body["metrics"]["accounting"]["balanced"] is True
    assert body["artifacts"]["csv_text"].startswith("# schema=mcsim-metrics-v1")
    assert json.loads(body["artifacts"]["json_text"])["totals"] == totals


def test_run_without_artifacts():
    resp = client.post("/run", json={"config": scenario_doc(), "include_artifacts": False})
    assert resp.status_code == 200
    assert resp.json()["artifacts"] is None


def test_run_rejects_bad_config():
    doc = scenario_doc()
    doc["mode"] = "TRIPLE"
    resp = client.post("/run", json={"config": doc})
    assert resp.status_code == 422


def test_run_is_deterministic_through_the_wire():
    payload = {"config": scenario_doc(seed=99)}
    a = client.post("/run", json=payload).json()
    b = client.post("/run", json=payload).json()
    assert a["artifacts"]["csv_text"] == b["artifacts"]["csv_text"]
    assert a["artifacts"]["json_text"] == b["artifacts"]["json_text"]


def test_sweep_runs_matrix_and_builds_summary():
    matrix = {
        "base": scenario_doc(),
        "axes": {"t_reordering_ms": [40, 80]},
    }
    resp = client.post("/sweep", json={"matrix": matrix, "include_artifacts": True})
    assert resp.status_code == 200
    body = resp.json()
    assert [r["run_key"] for r in body["runs"]] == [
        "base__t_reordering_ms-40",
        "base__t_reordering_ms-80",
    ]
    assert all(r["ok"] for r in body["runs"])
    assert all(r["artifacts"]["csv_text"] for r in body["runs"])
    summary_lines = body["summary_csv"].strip().split("\n")
    assert len(summary_lines) == 3


def test_sweep_rejects_bad_matrix():
    resp = client.post("/sweep", json={"matrix": {"nope": 1}})
    assert resp.status_code == 422


def test_trace_generation_endpoint():
    resp = client.post("/traces", json={"seed": 11, "seconds": 12, "cqi_min": 5, "cqi_max": 9})
    assert resp.status_code == 200
    body = resp.json()
    lines = body["csv_text"].strip().split("\n")
    assert lines[0] == "second,cqi"
    assert len(lines) == 13
    assert body["manifest"]["seconds"] == 12
    assert 5 <= body["manifest"]["cqi_min"] <= body["manifest"]["cqi_max"] <= 9


def test_trace_generation_rejects_bad_band():
    resp = client.post("/traces", json={"seed": 1, "cqi_min": 9, "cqi_max": 5})
    assert resp.status_code == 422
