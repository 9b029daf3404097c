import base64

import pytest
from fastapi.testclient import TestClient

from tubetrack.server import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def demo_session(client):
    resp = client.post("/sessions", json={
        "demo": "crossing-pair", "shape": [161, 237], "sigma_n": 0.1,
        "rng_seed": 1,
        "config": {"threshold_quantile": 0.9, "min_len": 8},
    })
    assert resp.status_code == 200
    return resp.json()


class TestService:
    def test_session_summary(self, demo_session):
        assert demo_session["width"] == 237
        assert demo_session["height"] == 161
        assert demo_session["n_trajectories"] > 0
        assert demo_session["has_gt"]

    def test_trajectory_overlay(self, client, demo_session):
        sid = demo_session["session_id"]
        resp = client.get(f"/sessions/{sid}/trajectories")
        assert resp.status_code == 200
        doc = resp.json()
        assert len(doc["trajectories"]) == demo_session["n_trajectories"]
        png = base64.b64decode(doc["zeta_png"])
        assert png[:8] == b"\x89PNG\r\n\x1a\n"

    def test_image_endpoint(self, client, demo_session):
        sid = demo_session["session_id"]
        resp = client.get(f"/sessions/{sid}/image")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_track_returns_path_and_score(self, client, demo_session):
        sid = demo_session["session_id"]
        # seeds on the longest trajectory endpoints
        trajs = demo_session["trajectories"]
        longest = max(trajs, key=lambda t: len(t["points"]))
        pts = [longest["points"][0], longest["points"][-1]]
        resp = client.post(f"/sessions/{sid}/track",
                           json={"points": pts, "metric": "fsr"})
        assert resp.status_code == 200
        doc = resp.json()
        assert len(doc["path"]["polyline"]) > 10
        assert "j_score" in doc
        assert doc["seconds"]["total"] >= 0

    def test_unknown_session_404(self, client):
        resp = client.get("/sessions/nope/trajectories")
        assert resp.status_code == 404

    def test_bad_seed_rejected(self, client, demo_session):
        sid = demo_session["session_id"]
        resp = client.post(f"/sessions/{sid}/track",
                           json={"points": [[-5, -5], [10, 10]]})
        assert resp.status_code == 400
        assert resp.json()["error"] == "InputError"

    def test_missing_body_fields(self, client):
        resp = client.post("/sessions", json={})
        assert resp.status_code == 400


class TestDemoSpiralLoop:
    """Headless version of the browser flow: load the demo spiral, place
    two seeds on the spiral ends, read back the traced path and its score."""

    def test_spiral_demo_track_scores_high(self, client):
        from tubetrack.synth import generate_scene

        resp = client.post("/sessions", json={
            "demo": "spiral", "shape": [321, 474], "sigma_n": 0.15,
            "rng_seed": 8,
            "config": {"threshold_quantile": 0.9, "min_len": 8,
                       "tau": 7.0, "prolong_len": 16},
        })
        assert resp.status_code == 200
        sid = resp.json()["session_id"]
        scene = generate_scene("spiral", shape=(321, 474), widths=5.0,
                               sigma_n=0.15, rng_seed=8)
        seeds = [list(map(int, p)) for p in scene.seeds["target"]]
        track_resp = client.post(f"/sessions/{sid}/track",
                                 json={"points": seeds, "metric": "fsr"})
        assert track_resp.status_code == 200
        doc = track_resp.json()
        assert doc["j_score"] >= 0.9
        kinds = {p["kind"] for p in doc["path"]["pieces"]}
        assert "bridge" in kinds and "trajectory" in kinds
