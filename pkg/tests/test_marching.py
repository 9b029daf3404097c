import heapq

import numpy as np
import pytest

from tubetrack.errors import BacktrackError, UnreachableTargetError
from tubetrack.lifted import MOVES, LiftedGrid, MetricParams, metric_eval
from tubetrack import marching
from tubetrack.marching import (
    GeodesicPath, backtrack, bridge, curvature_length, fast_march, path_cost,
)


def oracle_dijkstra(grid, params, source):
    """Textbook Dijkstra over the explicit stencil graph (test oracle)."""
    W, H, T = grid.width, grid.height, grid.n_theta
    h2 = grid.h2
    dist = {}
    heap = []
    for x, y, t in source:
        node = (int(x), int(y), int(t))
        heap.append((0.0, node))
    heapq.heapify(heap)
    best = {n: 0.0 for _, n in heap}
    while heap:
        d, node = heapq.heappop(heap)
        if node in dist:
            continue
        dist[node] = d
        x, y, t = node
        for dx, dy, dt in MOVES:
            nx, ny, nt = x + dx, y + dy, (t + dt) % T
            if not (0 <= nx < W and 0 <= ny < H):
                continue
            w = metric_eval(params, (nx, ny, nt * h2), (dx, dy, dt * h2))
            nd = d + w
            nbr = (nx, ny, nt)
            if nbr not in dist and nd < best.get(nbr, np.inf):
                best[nbr] = nd
                heapq.heappush(heap, (nd, nbr))
    return dist


def unit_cost_params(kind="fsr", n_theta=16, shape=(16, 16), beta=20.0):
    return MetricParams(kind=kind, epsilon=0.1, beta=beta,
                        cost=np.ones(shape + (n_theta,)))


def random_params(rng, kind="fsr", n_theta=8, shape=(16, 16)):
    cost = np.exp(-5.0 * rng.random(shape + (n_theta,)))
    return MetricParams(kind=kind, epsilon=0.1, beta=20.0, cost=cost)


class TestFastMarch:
    def test_source_point_has_zero_maps(self):
        grid = LiftedGrid(16, 16, 8)
        params = unit_cost_params(n_theta=8)
        res = fast_march(grid, params, [(5, 5, 0)])
        assert res.U[5, 5, 0] == 0.0
        assert res.E[5, 5, 0] == 0.0

    def test_straight_aligned_run_costs_length(self):
        grid = LiftedGrid(40, 11, 16)
        params = unit_cost_params(n_theta=16, shape=(11, 40))
        res = fast_march(grid, params, [(5, 5, 0)], stop=[(25, 5, 0)])
        u = res.U[5, 25, 0]
        assert abs(u - 20.0) <= 0.05 * 20.0
        assert res.E[5, 25, 0] == pytest.approx(20.0, rel=0.05)
        assert res.reached == (25, 5, 0)

    @pytest.mark.parametrize("kind", ["fsr", "fe"])
    @pytest.mark.parametrize("seed", [0, 1])
    def test_matches_dense_graph_oracle(self, kind, seed):
        rng = np.random.default_rng(seed)
        grid = LiftedGrid(12, 12, 8)
        params = random_params(rng, kind=kind, shape=(12, 12))
        source = [(3, 4, 1), (8, 8, 5)]
        res = fast_march(grid, params, source)
        dist = oracle_dijkstra(grid, params, source)
        for (x, y, t), d in dist.items():
            assert res.U[y, x, t] == pytest.approx(d, rel=1e-6)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_batched_and_sequential_engines_agree(self, seed):
        rng = np.random.default_rng(seed + 10)
        grid = LiftedGrid(14, 10, 8)
        params = random_params(rng, shape=(10, 14))
        src = [(2, 2, 0), (11, 7, 4)]
        a = fast_march(grid, params, src, engine="batched")
        b = fast_march(grid, params, src, engine="sequential")
        assert np.allclose(a.U, b.U, rtol=1e-12, atol=1e-12)
        finite = np.isfinite(a.E) & np.isfinite(b.E)
        assert np.allclose(a.E[finite], b.E[finite], rtol=1e-9, atol=1e-9)

    def test_sequential_acceptance_is_monotone(self):
        rng = np.random.default_rng(7)
        grid = LiftedGrid(10, 10, 8)
        params = random_params(rng, shape=(10, 10))
        res = fast_march(grid, params, [(4, 4, 0)], engine="sequential",
                         record_order=True)
        seq = [res.U.reshape(-1)[i] for i in res.accepted_order]
        assert all(a <= b + 1e-15 for a, b in zip(seq, seq[1:]))

    def test_early_stop_reaches_minimal_target(self):
        rng = np.random.default_rng(3)
        grid = LiftedGrid(12, 12, 8)
        params = random_params(rng, shape=(12, 12))
        src = [(2, 2, 0)]
        stops = [(9, 9, t) for t in range(8)]
        res = fast_march(grid, params, src, stop=stops)
        full = fast_march(grid, params, src)
        u_min = min(full.U[9, 9, t] for t in range(8))
        x, y, t = res.reached
        assert res.U[y, x, t] == pytest.approx(u_min, rel=1e-9)

    def test_source_overlapping_stop_is_immediate_hit(self):
        grid = LiftedGrid(10, 10, 8)
        params = unit_cost_params(n_theta=8, shape=(10, 10))
        res = fast_march(grid, params, [(3, 3, 0), (4, 4, 1)],
                         stop=[(4, 4, 1), (9, 9, 2)])
        assert res.reached == (4, 4, 1)
        assert res.U[4, 4, 1] == 0.0

    def test_empty_stop_set_unreachable(self):
        grid = LiftedGrid(10, 10, 8)
        params = unit_cost_params(n_theta=8, shape=(10, 10))
        with pytest.raises(UnreachableTargetError):
            fast_march(grid, params, [(3, 3, 0)], stop=np.empty((0, 3), dtype=int))

    def test_e_map_tracks_datafree_length(self):
        # halved cost should halve U but leave E untouched on the same route
        grid = LiftedGrid(30, 9, 16)
        base = unit_cost_params(n_theta=16, shape=(9, 30))
        cheap = MetricParams(kind="fsr", epsilon=0.1, beta=20.0,
                             cost=np.full((9, 30, 16), 0.5))
        r1 = fast_march(grid, base, [(4, 4, 0)], stop=[(24, 4, 0)])
        r2 = fast_march(grid, cheap, [(4, 4, 0)], stop=[(24, 4, 0)])
        assert r2.U[4, 24, 0] == pytest.approx(0.5 * r1.U[4, 24, 0], rel=1e-9)
        assert r2.E[4, 24, 0] == pytest.approx(r1.E[4, 24, 0], rel=1e-9)


class TestBacktrack:
    def test_start_in_source_gives_single_point(self):
        grid = LiftedGrid(10, 10, 8)
        params = unit_cost_params(n_theta=8, shape=(10, 10))
        res = fast_march(grid, params, [(3, 3, 2)])
        path = backtrack(res, params, (3, 3, 2))
        assert len(path) == 1
        assert path.samples[0, 0] == 3.0

    def test_straight_route_stays_near_chord(self):
        grid = LiftedGrid(40, 11, 16)
        params = unit_cost_params(n_theta=16, shape=(11, 40))
        res = fast_march(grid, params, [(5, 5, 0)], stop=[(25, 5, 0)])
        path = backtrack(res, params, (25, 5, 0))
        assert np.abs(path.spatial[:, 1] - 5.0).max() < 1.0
        assert path.spatial[0, 0] == pytest.approx(5.0, abs=1.0)
        assert path.spatial[-1, 0] == 25.0

    def test_path_cost_consistent_with_distance(self):
        grid = LiftedGrid(40, 11, 16)
        params = unit_cost_params(n_theta=16, shape=(11, 40))
        res = fast_march(grid, params, [(5, 5, 0)], stop=[(25, 5, 0)])
        path = backtrack(res, params, (25, 5, 0))
        recomputed = path_cost(params, path)
        assert recomputed == pytest.approx(res.U[5, 25, 0], rel=0.02)

    def test_infinite_start_rejected(self):
        grid = LiftedGrid(12, 12, 8)
        params = unit_cost_params(n_theta=8, shape=(12, 12))
        res = fast_march(grid, params, [(2, 2, 0)], stop=[(4, 2, 0)])
        far_corner = (11, 11, 4)
        assert not np.isfinite(res.U[11, 11, 4])
        with pytest.raises(BacktrackError):
            backtrack(res, params, far_corner)


class TestCurvatureLength:
    def test_straight_path_is_arc_length(self):
        xs = np.linspace(0, 20, 41)
        samples = np.column_stack([xs, np.zeros_like(xs), np.zeros_like(xs)])
        assert curvature_length(GeodesicPath(samples), 20.0) == pytest.approx(20.0)

    @pytest.mark.parametrize("radius", [25.0, 50.0, 100.0])
    def test_quarter_circle_closed_form(self, radius):
        beta = 20.0
        u = np.linspace(0, np.pi / 2, 2001)
        x = radius * np.cos(u)
        y = radius * np.sin(u)
        tangent = u + np.pi / 2  # tangent angle of the circle
        path = GeodesicPath(np.column_stack([x, y, tangent]))
        expected = (np.pi * radius / 2.0) * np.sqrt(1.0 + (beta / radius) ** 2)
        assert curvature_length(path, beta) == pytest.approx(expected, rel=0.01)

    def test_doubling_beta_never_decreases(self):
        rng = np.random.default_rng(0)
        steps = rng.normal(size=(30, 3)) * [1.0, 1.0, 0.2]
        samples = np.cumsum(steps, axis=0)
        p = GeodesicPath(samples)
        assert curvature_length(p, 40.0) >= curvature_length(p, 20.0)

    def test_single_sample_rejected(self):
        from tubetrack.errors import InputError
        with pytest.raises(InputError):
            curvature_length(GeodesicPath(np.zeros((1, 3))), 20.0)


def lifted_segment(x0, x1, y, n_theta, theta_bin=0):
    half = n_theta // 2
    pts = []
    for x in range(x0, x1):
        pts.append((x, y, theta_bin))
        pts.append((x, y, theta_bin + half))
    return pts


class TestExports:
    def test_march_maps_round_trip(self, tmp_path):
        grid = LiftedGrid(12, 10, 8)
        params = unit_cost_params(n_theta=8, shape=(10, 12))
        res = fast_march(grid, params, [(2, 2, 0)])
        p = tmp_path / "maps.tff1"
        marching.save_march_maps(p, res)
        u, e = marching.load_march_maps(p)
        assert u.shape == (10, 12, 8)
        assert np.allclose(u, res.U, atol=1e-4)
        assert np.allclose(e[np.isfinite(e)], res.E[np.isfinite(res.E)], atol=1e-3)

    def test_path_json_has_polyline_and_theta(self):
        import json

        path = GeodesicPath(np.array([[1.0, 2.0, 0.1], [2.0, 2.5, 0.2]]))
        doc = json.loads(marching.path_to_json(path))
        assert doc["polyline"] == [[1.0, 2.0], [2.0, 2.5]]
        assert doc["theta"] == [0.1, 0.2]


class TestBridge:
    def test_overlapping_sets_degenerate(self):
        grid = LiftedGrid(20, 10, 8)
        params = unit_cost_params(n_theta=8, shape=(10, 20))
        src = lifted_segment(2, 10, 5, 8)
        res = bridge(src, lifted_segment(8, 14, 5, 8), params, grid)
        assert res.distance == 0.0
        assert res.length == 0.0
        assert len(res.path) == 1

    def test_collinear_gap_length(self):
        grid = LiftedGrid(42, 11, 16)
        params = unit_cost_params(n_theta=16, shape=(11, 42))
        src = lifted_segment(2, 12, 5, 16)
        dst = lifted_segment(21, 31, 5, 16)
        res = bridge(src, dst, params, grid)
        assert abs(res.length - 10.0) <= 1.0
        # path runs from the source segment to the stop segment
        assert res.path.spatial[0, 0] <= 12
        assert res.path.spatial[-1, 0] >= 20

    def test_offset_bridge_exceeds_euclidean_gap(self):
        grid = LiftedGrid(46, 25, 16)
        params = unit_cost_params(n_theta=16, shape=(25, 46))
        src = lifted_segment(2, 14, 8, 16)
        dst = lifted_segment(26, 40, 16, 16)  # parallel, shifted down
        res = bridge(src, dst, params, grid)
        gap = np.hypot(26 - 13, 16 - 8)
        assert res.length > gap
