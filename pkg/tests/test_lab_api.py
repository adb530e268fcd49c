import pytest
from fastapi.testclient import TestClient

from app.apis.lab_api import LabAPI
from app.models.experiment import ExperimentJob, JobStatus


@pytest.fixture
def client():
    return TestClient(LabAPI().get_app())


def test_root_and_health(client):
    assert client.get("/").json() == {"message": "SQKD Lab API is running"}
    health = client.get("/health")
    assert health.status_code == 200
    assert health.json()["status"] == "healthy"


def test_bounds(client):
    response = client.get("/bounds", params={"n": 40, "epsilon": 0.5})
    assert response.status_code == 200
    body = response.json()
    assert body["parameters"]["n"] == 40
    assert body["values"]["entropy_gap_bound"] == pytest.approx(0.02917, abs=1e-5)


def test_bounds_rejects_out_of_range_query(client):
    assert client.get("/bounds", params={"epsilon": 2.0}).status_code == 422


def test_verify_entropy(client):
    response = client.post("/verify", json={"scope": "entropy"})
    assert response.status_code == 200
    body = response.json()
    assert body["exit_code"] == 0
    assert body["failed"] == 0
    assert body["passed"] == len(body["reports"])


def test_verify_bad_scope(client):
    assert client.post("/verify", json={"scope": "everything"}).status_code == 400


def test_experiment_lifecycle(client):
    response = client.post("/experiments", json={"protocol": "p2", "n": 2, "trials": 5, "seed": 7})
    assert response.status_code == 202
    experiment_id = response.json()["experiment_id"]

    # background tasks finish before TestClient returns the response
    job = client.get(f"/experiments/{experiment_id}").json()
    assert job["status"] == JobStatus.completed.value
    assert job["summary"]["trials"] == 5
    assert job["summary"]["master_seed"] == 7


def test_experiment_bad_request(client):
    assert client.post("/experiments", json={"n": 3}).status_code == 400
    assert client.post("/experiments", json={"n": 2, "attack": "beam_splitter"}).status_code == 400


def test_unknown_experiment(client):
    assert client.get("/experiments/deadbeef").status_code == 404


def test_finished_jobs_are_evicted_oldest_first():
    client = TestClient(LabAPI(max_jobs=2).get_app())
    request = {"protocol": "p2", "n": 2, "trials": 2, "seed": 1}
    ids = [client.post("/experiments", json=request).json()["experiment_id"] for _ in range(3)]
    assert client.get(f"/experiments/{ids[0]}").status_code == 404
    assert client.get(f"/experiments/{ids[1]}").status_code == 200
    assert client.get(f"/experiments/{ids[2]}").status_code == 200
    assert client.get("/health").json()["jobs"] == 2


def test_pending_jobs_are_never_evicted():
    api = LabAPI(max_jobs=2)
    for key in ("a", "b"):
        api.jobs[key] = ExperimentJob(experiment_id=key, status=JobStatus.queued)
    client = TestClient(api.get_app())
    response = client.post("/experiments", json={"protocol": "p2", "n": 2, "trials": 2})
    assert response.status_code == 429
    assert set(api.jobs) == {"a", "b"}
