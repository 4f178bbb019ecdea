import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from topoforge.service import create_app, validate_problem, ProblemIn


def cantilever_body(nx=16, vf=0.4, angle=270.0):
    return {
        "nx": nx, "ny": nx,
        "anchors": [{"kind": "segment", "site": "BL", "end": "TL"}],
        "load": {"x": 1.0, "y": 0.5, "angle_deg": angle},
        "vf": vf,
    }


def parse_sse(text):
    events = []
    for block in text.split("\n\n"):
        lines = [ln for ln in block.splitlines() if ln]
        if not lines:
            continue
        event = lines[0].removeprefix("event: ")
        data = json.loads(lines[1].removeprefix("data: "))
        events.append((event, data))
    return events


@pytest.fixture()
def client(tmp_path):
    app = create_app(checkpoint_dir=str(tmp_path))
    with TestClient(app) as c:
        c.checkpoint_dir = tmp_path
        yield c


class TestProblems:
    def test_cantilever_returns_fields(self, client):
        r = client.post("/api/problems", json=cantilever_body())
        assert r.status_code == 200, r.text
        body = r.json()
        assert len(body["stress"]) == 16 and len(body["stress"][0]) == 16
        assert len(body["strain"]) == 16
        assert body["load_node"] == 8 * 17 + 16

    def test_vf_out_of_range_422(self, client):
        r = client.post("/api/problems", json=cantilever_body(vf=0.7))
        assert r.status_code == 422
        codes = [d["code"] for d in r.json()["detail"]]
        assert "vf_out_of_range" in codes

    def test_vf_override_flag(self, client):
        body = cantilever_body(vf=0.7)
        body["allow_any_vf"] = True
        assert client.post("/api/problems", json=body).status_code == 200

    def test_identical_bodies_identical_fields(self, client):
        r1 = client.post("/api/problems", json=cantilever_body())
        r2 = client.post("/api/problems", json=cantilever_body())
        assert r1.json()["stress"] == r2.json()["stress"]
        assert r1.json()["strain"] == r2.json()["strain"]

    def test_too_many_anchors(self, client):
        body = cantilever_body()
        body["anchors"] = [{"kind": "point", "site": s}
                           for s in ("BL", "BR", "TL", "TR", "MB")]
        r = client.post("/api/problems", json=body)
        assert r.status_code == 422
        assert "anchor_count" in [d["code"] for d in r.json()["detail"]]

    def test_insufficient_supports(self, client):
        body = cantilever_body()
        body["anchors"] = [{"kind": "point", "site": "BL"}]
        r = client.post("/api/problems", json=body)
        assert r.status_code == 422
        assert "insufficient_supports" in [d["code"] for d in r.json()["detail"]]

    def test_load_on_support(self, client):
        body = cantilever_body()
        body["load"] = {"x": 0.0, "y": 0.0, "angle_deg": 0.0}
        r = client.post("/api/problems", json=body)
        assert r.status_code == 422
        assert "load_on_support" in [d["code"] for d in r.json()["detail"]]


class TestSimpJobs:
    def test_progress_events_and_terminal(self, client):
        pid = client.post("/api/problems",
                          json=cantilever_body()).json()["problem_id"]
        r = client.post("/api/jobs", json={"problem_id": pid, "engine": "simp",
                                           "params": {"iters": 6}})
        assert r.status_code == 200
        job_id = r.json()["job_id"]
        with client.stream("GET", f"/api/jobs/{job_id}/events") as stream:
            text = "".join(chunk for chunk in stream.iter_text())
        events = parse_sse(text)
        progress = [e for e in events if e[0] == "progress"]
        done = [e for e in events if e[0] == "done"]
        assert len(progress) == 6
        assert len(done) == 1
        assert all("compliance" in e[1] and "volume" in e[1] for e in progress)
        assert all(len(e[1]["density"]["q"]) <= 32 * 32 for e in progress)
        result = done[0][1]
        assert np.array(result["density"]).shape == (16, 16)
        assert len(result["compliance_history"]) == 6
        assert result["metrics"]["vf_error_pct"] < 6.0

    def test_job_state_and_unknown_404(self, client):
        assert client.get("/api/jobs/nope").status_code == 404
        assert client.delete("/api/jobs/nope").status_code == 404

    def test_cancel_mid_run(self, client):
        pid = client.post("/api/problems",
                          json=cantilever_body(nx=32)).json()["problem_id"]
        job_id = client.post("/api/jobs",
                             json={"problem_id": pid, "engine": "simp",
                                   "params": {"iters": 400}}).json()["job_id"]
        time.sleep(0.3)
        r = client.delete(f"/api/jobs/{job_id}")
        assert r.status_code == 200
        for _ in range(100):
            state = client.get(f"/api/jobs/{job_id}").json()
            if state["status"] in ("cancelled", "done", "failed"):
                break
            time.sleep(0.1)
        assert state["status"] == "cancelled"
        assert state["result"] is None

    def test_cancel_after_done_409(self, client):
        pid = client.post("/api/problems",
                          json=cantilever_body()).json()["problem_id"]
        job_id = client.post("/api/jobs",
                             json={"problem_id": pid, "engine": "simp",
                                   "params": {"iters": 2}}).json()["job_id"]
        for _ in range(100):
            if client.get(f"/api/jobs/{job_id}").json()["status"] == "done":
                break
            time.sleep(0.1)
        assert client.delete(f"/api/jobs/{job_id}").status_code == 409

    def test_unknown_problem_404(self, client):
        r = client.post("/api/jobs", json={"problem_id": "nope",
                                           "engine": "simp"})
        assert r.status_code == 404

    def test_rerun_reproduces_result(self, client):
        pid = client.post("/api/problems",
                          json=cantilever_body()).json()["problem_id"]
        results = []
        for _ in range(2):
            job_id = client.post("/api/jobs",
                                 json={"problem_id": pid, "engine": "simp",
                                       "params": {"iters": 4}}).json()["job_id"]
            with client.stream("GET", f"/api/jobs/{job_id}/events") as stream:
                text = "".join(stream.iter_text())
            done = [e for e in parse_sse(text) if e[0] == "done"][0][1]
            results.append(done)
        assert results[0]["density"] == results[1]["density"]
        assert results[0]["compliance_history"] == results[1]["compliance_history"]


@pytest.fixture(scope="module")
def tiny_checkpoint(tmp_path_factory):
    """A 2-step desk checkpoint at 16x16 (pipeline quality irrelevant)."""
    from helpers import write_synthetic_dataset
    from topoforge.dit import DiTConfig, TrainConfig, train
    root = tmp_path_factory.mktemp("ck")
    data = write_synthetic_dataset(str(root / "d.tds"), 4, nx=16, ny=16)
    cfg = DiTConfig(img_size=16, patch_size=4, depth=2, token_dim=16, heads=2)
    out = str(root / "tiny.ckpt")
    train(data, cfg, TrainConfig(batch_size=2, total_steps=2, T=100,
                                 checkpoint_interval=2), out,
          model_name="DiT-D-4")
    return out


class TestDitJobs:
    def test_dit_job_runs_to_done(self, client, tiny_checkpoint):
        pid = client.post("/api/problems",
                          json=cantilever_body()).json()["problem_id"]
        job_id = client.post(
            "/api/jobs",
            json={"problem_id": pid, "engine": "dit",
                  "params": {"steps": 5, "seed": 1,
                             "checkpoint": tiny_checkpoint}}).json()["job_id"]
        with client.stream("GET", f"/api/jobs/{job_id}/events") as stream:
            text = "".join(stream.iter_text())
        events = parse_sse(text)
        done = [e for e in events if e[0] == "done"]
        assert len(done) == 1, text
        assert np.array(done[0][1]["density"]).shape == (16, 16)
        assert "metrics" in done[0][1]

    def test_dit_without_checkpoint_fails(self, client):
        pid = client.post("/api/problems",
                          json=cantilever_body()).json()["problem_id"]
        job_id = client.post("/api/jobs",
                             json={"problem_id": pid, "engine": "dit",
                                   "params": {"steps": 5}}).json()["job_id"]
        for _ in range(100):
            state = client.get(f"/api/jobs/{job_id}").json()
            if state["status"] in ("failed", "done"):
                break
            time.sleep(0.05)
        assert state["status"] == "failed"
        assert "checkpoint" in state["error"]


class TestCheckpointRoutes:
    def test_empty_dir_lists_nothing(self, client):
        assert client.get("/api/checkpoints").json() == []

    def test_corrupt_checkpoint_422(self, client):
        bad = client.checkpoint_dir / "bad.ckpt"
        bad.write_bytes(b"NOTADITC" + b"\0" * 64)
        r = client.post("/api/checkpoints/load", json={"path": str(bad)})
        assert r.status_code == 422
        assert "magic" in r.json()["detail"][0]["msg"]

    def test_load_echoes_header(self, client, tiny_checkpoint):
        r = client.post("/api/checkpoints/load",
                        json={"path": tiny_checkpoint})
        assert r.status_code == 200
        body = r.json()
        assert body["model_name"] == "DiT-D-4"
        assert body["config"]["img_size"] == 16
        assert body["config"]["patch_size"] == 4
        assert body["schedule"]["T"] == 100
        from topoforge.dit import load_checkpoint
        ckpt = load_checkpoint(tiny_checkpoint)
        assert body["config"] == ckpt.config.to_dict()
        assert body["step"] == ckpt.step

    def test_listing_parses_headers(self, client, tiny_checkpoint):
        import shutil
        shutil.copy(tiny_checkpoint, client.checkpoint_dir / "m.ckpt")
        listed = client.get("/api/checkpoints").json()
        assert len(listed) == 1
        assert listed[0]["model_name"] == "DiT-D-4"
        assert listed[0]["patch_size"] == 4


class TestValidationHelper:
    def test_validate_problem_mirrors_codes(self):
        body = ProblemIn(**cantilever_body(vf=0.9))
        problem, errors = validate_problem(body)
        assert problem is None
        assert errors[0]["code"] == "vf_out_of_range"
