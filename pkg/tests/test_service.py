import json
import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from starlette.testclient import TestClient

from benchforge.service import create_app


@pytest.fixture()
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def judge_mock(tmp_path):
    script = tmp_path / "judge.json"
    script.write_text(json.dumps([{"default": "VERDICT: PASS"}]))
    return f"mock:{script}"


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_full_pipeline_endpoint(client, tmp_path):
    payload = {
        "task": "calendar",
        "seed": 12,
        "count": 6,
        "out": str(tmp_path / "run"),
        "judge_backend": judge_mock(tmp_path),
        "target_backend": "oracle",
    }
    response = client.post("/pipeline", json=payload)
    assert response.status_code == 200
    body = response.json()
    assert [s["stage"] for s in body["stages"]] == [
        "plan", "generate", "verify", "evaluate", "report",
    ]
    assert (tmp_path / "run" / "scores" / "report" / "report.json").exists()


def test_stage_endpoints_in_sequence(client, tmp_path):
    payload = {
        "seed": 2,
        "count": 4,
        "out": str(tmp_path / "run"),
        "judge_backend": judge_mock(tmp_path),
        "target_backend": "refuse",
    }
    for endpoint in ("/plan", "/generate", "/verify", "/evaluate", "/report"):
        response = client.post(endpoint, json=payload)
        assert response.status_code == 200, (endpoint, response.text)


def test_config_error_maps_to_400(client, tmp_path):
    response = client.post("/plan", json={"task": "chess", "out": str(tmp_path / "run")})
    assert response.status_code == 400
    assert response.json()["error"] == "config"


def test_validation_error_maps_to_422(client, tmp_path):
    # verify before anything has run
    response = client.post(
        "/verify", json={"out": str(tmp_path / "empty"), "judge_backend": judge_mock(tmp_path)}
    )
    assert response.status_code == 422
    assert response.json()["error"] == "validation"


def test_gate_pending_maps_to_409(client, tmp_path):
    payload = {"count": 4, "out": str(tmp_path / "run"), "gates": "interactive"}
    response = client.post("/plan", json=payload)
    assert response.status_code == 409
    body = response.json()
    assert body["error"] == "gate_pending"
    assert body["stage"] == "plan"
    assert body["artifact"].endswith("plan.txt")
    # approving via the API unblocks the stage
    approve = client.post("/gates/approve", json={"out": payload["out"], "stage": "plan"})
    assert approve.status_code == 200
    assert approve.json()["status"] == "approved"
    assert client.post("/plan", json=payload).status_code == 200


def test_backend_error_maps_to_502(client, tmp_path):
    # a mock generator with no matching rules dies on the first textgen call
    dead = tmp_path / "dead.json"
    dead.write_text(json.dumps([{"pattern": "will never match anything useful", "response": "x"}]))
    payload = {
        "task": "textgen",
        "count": 2,
        "out": str(tmp_path / "run"),
        "backend": f"mock:{dead}",
        "judge_backend": judge_mock(tmp_path),
    }
    client.post("/plan", json=payload)
    response = client.post("/generate", json=payload)
    assert response.status_code == 502
    assert response.json()["error"] == "backend"
