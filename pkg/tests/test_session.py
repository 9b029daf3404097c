import time

import numpy as np
import pytest

from tubetrack.config import PipelineConfig
from tubetrack.errors import NoRouteError
from tubetrack.session import path_json, prepare, track
from tubetrack.synth import accuracy, generate_scene

CFG = PipelineConfig(threshold_quantile=0.9, min_len=8)


@pytest.fixture(scope="module")
def small_scene():
    return generate_scene("crossing-pair", shape=(161, 237), widths=5.0,
                          sigma_n=0.1, rng_seed=1)


@pytest.fixture(scope="module")
def small_session(small_scene):
    return prepare(small_scene.image, CFG, gt_mask=small_scene.gt_masks["target"])


class TestPrepareTrack:
    def test_prepare_builds_all_graphs(self, small_session):
        assert set(small_session.graphs) == {"fsr", "fe", "angle"}
        assert len(small_session.trajectories) > 0

    def test_track_returns_path_and_timings(self, small_scene, small_session):
        report = track(small_session, small_scene.seeds["target"])
        assert report["metric"] == "fsr"
        assert len(report["path"]["polyline"]) > 50
        assert report["seconds"]["total"] > 0
        assert report["j_score"] > 0.5

    def test_track_metric_override(self, small_scene, small_session):
        report = track(small_session, small_scene.seeds["target"], metric="angle")
        assert report["metric"] == "angle"

    def test_track_is_deterministic(self, small_scene, small_session):
        a = track(small_session, small_scene.seeds["target"])
        b = track(small_session, small_scene.seeds["target"])
        assert path_json(a) == path_json(b)

    def test_three_seeds_concatenate(self, small_scene, small_session):
        s1, s2 = small_scene.seeds["target"]
        mid_traj = small_session.trajectories[
            int(np.argmax([len(t) for t in small_session.trajectories]))
        ]
        mid = tuple(mid_traj.points[len(mid_traj) // 2].tolist())
        report = track(small_session, [s1, mid, s2])
        assert len(report["path"]["polyline"]) > 10

    def test_blank_image_yields_no_route(self):
        blank = np.full((64, 64), 0.8)
        with pytest.warns(UserWarning):
            session = prepare(blank, CFG)
        assert len(session.trajectories) == 0
        with pytest.raises(NoRouteError):
            track(session, [(5, 5), (60, 60)])


class TestCache:
    def test_cache_speedup_and_identical_results(self, tmp_path):
        scene = generate_scene("crossing-pair", shape=(321, 474), widths=5.0,
                               sigma_n=0.15, rng_seed=2)
        t0 = time.perf_counter()
        fresh = prepare(scene.image, CFG, cache_dir=tmp_path)
        build_seconds = time.perf_counter() - t0
        assert not fresh.meta.get("loaded_from_cache")

        t0 = time.perf_counter()
        cached = prepare(scene.image, CFG, cache_dir=tmp_path)
        load_seconds = time.perf_counter() - t0
        assert cached.meta.get("loaded_from_cache")
        assert load_seconds * 10.0 <= build_seconds

        seeds = scene.seeds["target"]
        assert path_json(track(fresh, seeds)) == path_json(track(cached, seeds))

    def test_config_change_invalidates(self, tmp_path, small_scene):
        a = prepare(small_scene.image, CFG, cache_dir=tmp_path)
        b = prepare(small_scene.image, CFG.merged({"beta": 40.0}),
                    cache_dir=tmp_path)
        assert a.session_id != b.session_id
        assert not b.meta.get("loaded_from_cache")
