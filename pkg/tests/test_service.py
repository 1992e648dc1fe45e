"""HTTP endpoints round-trip the core results."""

import pytest
from fastapi.testclient import TestClient

from prevtrial.service import app

client = TestClient(app)

LAYER_2570 = {
    "design": "layer",
    "pe_null": 0.25,
    "pe_alt": 0.70,
    "inc_treat": 0.0015,
    "inc_control": 0.005,
}


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_size():
    resp = client.post("/size", json=LAYER_2570)
    assert resp.status_code == 200
    body = resp.json()
    assert body["required_events"] == 51
    assert body["n_total"] == 8302


def test_size_linear_model():
    resp = client.post("/size", json={**LAYER_2570, "model": "linear_person_time"})
    assert resp.json()["n_total"] == 8268


def test_size_validation_names_field():
    resp = client.post("/size", json={**LAYER_2570, "dropout": 1.2})
    assert resp.status_code == 422
    detail = resp.json()["detail"][0]
    assert "annual_dropout" in detail["loc"]


def test_table2():
    resp = client.post("/table2", json={})
    rows = resp.json()["rows"]
    assert len(rows) == 12
    assert rows[5]["n_published"] == 8211
    assert rows[5]["n_linear_person_time"] == 8268


def test_power_deterministic():
    payload = {
        "design": "layer",
        "pe_null": 0.0,
        "pe_alt": 0.5,
        "inc_treat": 0.015,
        "inc_control": 0.03,
        "n_total": 600,
        "n_reps": 200,
        "seed": 5,
    }
    a = client.post("/power", json=payload).json()
    b = client.post("/power", json=payload).json()
    assert a == b
    assert a["mc_replicates"] == 200
    assert 0.0 <= a["rejection_rate"] <= 1.0


def test_counterfactual():
    payload = {
        "experimental": {"events": 12, "person_years": 4000.0},
        "control": {"events": 40, "person_years": 4000.0},
        "theta_c": {"low": 0.4, "high": 0.7},
    }
    body = client.post("/counterfactual", json=payload).json()
    assert body["rate_ratio"]["rr"] == pytest.approx(0.3, rel=1e-9)
    assert body["estimate"]["point"] == pytest.approx(0.82, rel=1e-9)
    assert body["estimate"]["ui_low"] <= body["estimate"]["ci_low"]
    assert body["estimate"]["ui_high"] >= body["estimate"]["ci_high"]
    assert body["additive_difference"]["difference"] == pytest.approx(0.007, rel=1e-9)


def test_counterfactual_air():
    payload = {
        "experimental": {"events": 12, "person_years": 4000.0},
        "control": {"events": 40, "person_years": 4000.0},
        "theta_c": {"low": 0.4, "high": 0.7},
        "parameter": "AIR",
    }
    body = client.post("/counterfactual", json=payload).json()
    assert body["estimate"]["point"] == pytest.approx(0.82 / 0.4, rel=1e-9)


def test_sentinel():
    payload = {
        "cohorts": [
            {"label": "a", "window_start": 0.0, "window_end": 1.0, "events": 40, "person_years": 1000.0},
            {"label": "b", "window_start": 0.0, "window_end": 1.0, "events": 40, "person_years": 1000.0},
        ]
    }
    body = client.post("/sentinel", json=payload).json()
    assert len(body["windows"]) == 1
    assert body["windows"][0]["events"] == 80
    assert body["windows"][0]["cohorts"] == ["a", "b"]


REGIMEN = {
    "name": "mono",
    "body_weight_kg": 70.0,
    "doses": [{"week": 0, "mg_per_kg": 10.0}, {"week": 8, "mg_per_kg": 10.0}],
    "antibodies": [
        {
            "name": "ab1",
            "pk": {"model": "one_compartment", "clearance_l_per_day": 0.15, "v_central_l": 3.5},
        }
    ],
}

PANEL = [
    {"virus_id": "v1", "antibody": "ab1", "ic80_ug_ml": 0.5},
    {"virus_id": "v2", "antibody": "ab1", "ic80_ug_ml": ">50"},
]


def test_bnab_score_and_rank():
    resp = client.post(
        "/bnab/score",
        json={"regimens": [REGIMEN], "panel": PANEL, "window_days": 112},
    )
    assert resp.status_code == 200
    body = resp.json()
    entry = body["regimens"][0]
    aucs = {pv["virus_id"]: pv["auc_titer_days"] for pv in entry["per_virus"]}
    assert aucs["v2"] == 0.0
    assert aucs["v1"] > 0.0
    assert entry["score"] == pytest.approx((aucs["v1"] + aucs["v2"]) / 2.0, rel=1e-9)

    rank = client.post(
        "/bnab/rank",
        json={"scores": [{"regimen": "mono", "score": entry["score"]}, {"regimen": "zero", "score": 0.0}]},
    ).json()
    assert rank["ranking"][0]["regimen"] == "mono"
    assert rank["ranking"][0]["rank"] == 1


def test_bnab_score_curves():
    resp = client.post(
        "/bnab/score",
        json={
            "regimens": [REGIMEN],
            "panel": PANEL[:1],
            "window_days": 112,
            "include_curves": True,
        },
    )
    curves = resp.json()["curves"]
    assert len(curves) == 1
    assert len(curves[0]["id80"]) == 113


def test_bnab_empty_regimens():
    resp = client.post("/bnab/score", json={"regimens": [], "panel": PANEL})
    assert resp.status_code == 422
    assert "regimens" in resp.json()["detail"][0]["loc"]


def test_bnab_missing_panel_pair():
    resp = client.post(
        "/bnab/score",
        json={"regimens": [REGIMEN], "panel": [{"virus_id": "v1", "antibody": "zz", "ic80_ug_ml": 1.0}]},
    )
    assert resp.status_code == 422
    assert "panel" in resp.json()["detail"][0]["loc"]
