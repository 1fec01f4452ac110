"""HTTP facade: request/response models and endpoint behavior."""

from fastapi.testclient import TestClient

from conftest import load_scenario
from ddsim.service import ScenarioRequest, app, execute

client = TestClient(app)


def post(endpoint: str, name: str, **extra):
    payload = {"source": load_scenario(name), "name": name, **extra}
    resp = client.post(endpoint, json=payload)
    assert resp.status_code == 200
    return resp.json()


def test_healthz():
    assert client.get("/healthz").json() == {"status": "ok"}


def test_run_endpoint_clean_scenario():
    doc = post("/run", "geometry_default")
    assert doc["exit_code"] == 0
    assert doc["report"]["scenario"] == "geometry_default"
    assert doc["report"]["events"]


def test_run_endpoint_error_scenario():
    doc = post("/run", "geometry_exclude")
    assert doc["exit_code"] == 1
    codes = [d["code"] for d in doc["report"]["diagnostics"]]
    assert codes == ["E_PARTIAL_DEEPCOPY"]


def test_check_endpoint_downgrades():
    doc = post("/check", "geometry_exclude")
    assert doc["exit_code"] == 0
    assert doc["report"]["diagnostics"][0]["severity"] == "warning"
    assert "events" not in doc["report"]


def test_parse_error_is_a_report_not_a_500():
    resp = client.post("/run", json={"source": "type {"})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["exit_code"] == 2


def test_deterministic_flag_forwarded():
    doc = post("/run", "reduction_det", deterministic_reductions=True)
    assert all(r["deterministic"] for r in doc["report"]["reductions"])


def test_in_process_execute_matches_http():
    request = ScenarioRequest(source=load_scenario("clean"), name="clean")
    local = execute(request, "run")
    remote = post("/run", "clean")
    assert local.exit_code == remote["exit_code"]
    assert local.report == remote["report"]
