"""Label-setting front propagation on the lifted grid.

The solver computes, from a set of lifted source points, both the geodesic
distance map U under the data-driven metric and a companion map E that
accumulates the curvature-penalized but data-free length along the same
geodesic flow. Propagation stops as soon as any stop-set point is accepted,
giving the bridge distance and its data-free length in a single pass.
Geodesic paths are recovered afterwards by sub-grid gradient descent on U.

Two engines produce identical maps: a classic heap-based Dijkstra sweep
('sequential', one acceptance at a time, FIFO tie order) and a batched
variant ('batched') that accepts groups of provably settled nodes per
iteration so the inner work is vectorized. A node v with distance below
min(pending U) + F_min * cost(v) cannot be improved by any pending or
future node, because every edge into v costs at least F_min * cost(v);
accepting all such nodes at once preserves exact label-setting distances.
"""

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import BacktrackError, InputError, UnreachableTargetError
from .lifted import MOVES, metric_eval, move_table

FAR, TRIAL, ACCEPTED = 0, 1, 2

BIG = 1e30


@dataclass
class MarchResult:
    grid: object
    U: np.ndarray          # (H, W, n_theta) geodesic distance
    E: np.ndarray          # (H, W, n_theta) data-free curvature length
    state: np.ndarray      # (H, W, n_theta) FAR / TRIAL / ACCEPTED
    source: np.ndarray     # (n, 3) int lifted source points (x, y, t)
    parent: np.ndarray = None  # flat upwind predecessor per node, -1 at sources
    reached: tuple = None  # first accepted stop point (x, y, t), if any
    accepted_order: list = field(default_factory=list)


@dataclass
class GeodesicPath:
    """Lifted path samples ordered from source to query point.

    ``knots`` flags the samples the solver actually stepped through;
    samples inserted only to keep spatial spacing under one pixel are
    non-knots and are skipped when re-integrating the metric cost.
    """

    samples: np.ndarray  # (n, 3) float columns (x, y, theta)
    knots: np.ndarray = None  # (n,) bool

    def __post_init__(self):
        if self.knots is None:
            self.knots = np.ones(len(self.samples), dtype=bool)

    @property
    def spatial(self):
        return self.samples[:, :2]

    @property
    def tangents(self):
        return self.samples[:, 2]

    def knot_samples(self):
        return self.samples[self.knots]

    def __len__(self):
        return len(self.samples)


def _as_point_array(points):
    arr = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    return arr


def fast_march(grid, params, source, stop=None, engine="batched",
               record_order=False):
    """Propagate U and E from the source set, stopping at the stop set.

    Parameters
    ----------
    grid : LiftedGrid
    params : MetricParams
        Cost field shape must match the grid.
    source : (n, 3) int array of (x, y, theta-bin) lifted points
    stop : optional (m, 3) int array; propagation halts when one of these
        is accepted. None propagates until the heap empties.
    engine : {'batched', 'sequential'}
    record_order : bool
        Keep the flat indices in acceptance order (testing aid; implies the
        sequential engine's one-at-a-time semantics when used for the
        monotonicity invariant).

    Raises
    ------
    UnreachableTargetError
        Nonempty stop set that the front never reached.
    """
    if params.cost.shape != grid.shape:
        raise InputError(
            f"cost field shape {params.cost.shape} != grid shape {grid.shape}"
        )
    source = _as_point_array(source)
    if len(source) == 0:
        raise InputError("source set is empty")
    src_flat = np.unique(grid.flat_index(source[:, 0], source[:, 1], source[:, 2]))

    stop_flat = None
    if stop is not None:
        stop = _as_point_array(stop)
        stop_flat = np.unique(grid.flat_index(stop[:, 0], stop[:, 1], stop[:, 2]))

    n = grid.n_points
    U = np.full(n, np.inf)
    E = np.full(n, np.inf)
    state = np.zeros(n, dtype=np.uint8)
    parent = np.full(n, -1, dtype=np.int64)
    U[src_flat] = 0.0
    E[src_flat] = 0.0

    result = MarchResult(
        grid=grid,
        U=U.reshape(grid.shape),
        E=E.reshape(grid.shape),
        state=state.reshape(grid.shape),
        source=source,
        parent=parent,
    )

    # immediate hit: a stop point is already a source point
    if stop_flat is not None:
        overlap = np.intersect1d(src_flat, stop_flat)
        if overlap.size:
            state[src_flat] = ACCEPTED
            x, y, t = grid.unflatten(int(overlap[0]))
            result.reached = (int(x), int(y), int(t))
            return result

    if engine == "sequential":
        _march_sequential(grid, params, U, E, state, parent, src_flat,
                          stop_flat, result, record_order)
    elif engine == "batched":
        _march_batched(grid, params, U, E, state, parent, src_flat,
                       stop_flat, result, record_order)
    else:
        raise InputError(f"unknown engine {engine!r}")
    return result


def _neighbors_of(grid, flat_nodes, moves):
    """Vectorized stencil targets of a batch of flat nodes.

    Returns (src_idx, move_idx, tgt_flat) for the in-bounds combinations.
    """
    x, y, t = grid.unflatten(flat_nodes)
    nx = x[:, None] + moves[None, :, 0]
    ny = y[:, None] + moves[None, :, 1]
    nt = (t[:, None] + moves[None, :, 2]) % grid.n_theta
    ok = (nx >= 0) & (nx < grid.width) & (ny >= 0) & (ny < grid.height)
    src_idx, move_idx = np.nonzero(ok)
    tgt = (ny[ok] * grid.width + nx[ok]) * grid.n_theta + nt[ok]
    return src_idx, move_idx, tgt, nt[ok]


def _march_batched(grid, params, U, E, state, parent, src_flat, stop_flat,
                   result, record_order):
    moves, factors, increments = move_table(grid, params)
    cost_flat = np.ascontiguousarray(params.cost).reshape(-1)
    f_min = float(factors.min())
    stop_mask = None
    if stop_flat is not None:
        stop_mask = np.zeros(grid.n_points, dtype=bool)
        stop_mask[stop_flat] = True

    state[src_flat] = TRIAL
    pending = [src_flat]
    while pending:
        cand = np.unique(np.concatenate(pending))
        cand = cand[state[cand] == TRIAL]
        if not cand.size:
            break
        u_cand = U[cand]
        u_min = u_cand.min()
        # every edge into v costs >= f_min * cost(v): nodes below that
        # horizon are settled
        settle = u_cand < u_min + f_min * cost_flat[cand]
        batch = cand[settle]
        order = np.argsort(u_cand[settle], kind="stable")
        batch = batch[order]
        pending = [cand[~settle]]

        if stop_mask is not None and stop_mask[batch].any():
            hits = np.nonzero(stop_mask[batch])[0]
            cut = hits[0]
            accepted, rest = batch[: cut + 1], batch[cut + 1 :]
            state[accepted] = ACCEPTED
            if record_order:
                result.accepted_order.extend(accepted.tolist())
            if rest.size:
                pending.append(rest)
            x, y, t = grid.unflatten(int(batch[cut]))
            result.reached = (int(x), int(y), int(t))
            return

        state[batch] = ACCEPTED
        if record_order:
            result.accepted_order.extend(batch.tolist())

        src_idx, move_idx, tgt, tgt_theta = _neighbors_of(grid, batch, moves)
        open_t = state[tgt] != ACCEPTED
        src_idx, move_idx, tgt = src_idx[open_t], move_idx[open_t], tgt[open_t]
        tgt_theta = tgt_theta[open_t]
        if not tgt.size:
            continue
        val = U[batch[src_idx]] + cost_flat[tgt] * factors[tgt_theta, move_idx]
        better = val < U[tgt]
        if not better.any():
            continue
        src_idx, move_idx, tgt, val = (a[better] for a in (src_idx, move_idx, tgt, val))
        # one winner per target: smallest value, ties to smallest source
        rank = np.lexsort((batch[src_idx], val, tgt))
        tgt_r, val_r = tgt[rank], val[rank]
        first = np.ones(len(tgt_r), dtype=bool)
        first[1:] = tgt_r[1:] != tgt_r[:-1]
        w_tgt, w_val = tgt_r[first], val_r[first]
        w_src = batch[src_idx[rank][first]]
        w_move = move_idx[rank][first]
        improve = w_val < U[w_tgt]
        w_tgt, w_val = w_tgt[improve], w_val[improve]
        w_src, w_move = w_src[improve], w_move[improve]
        U[w_tgt] = w_val
        E[w_tgt] = E[w_src] + increments[w_move]
        parent[w_tgt] = w_src
        state[w_tgt] = TRIAL
        pending.append(w_tgt)

    if stop_flat is not None:
        accepted = state == ACCEPTED
        farthest = U[accepted].max() if accepted.any() else 0.0
        raise UnreachableTargetError(farthest)


def _march_sequential(grid, params, U, E, state, parent, src_flat, stop_flat,
                      result, record_order):
    moves, factors, increments = move_table(grid, params)
    cost_flat = np.ascontiguousarray(params.cost).reshape(-1)
    stop_set = set(stop_flat.tolist()) if stop_flat is not None else None

    counter = 0
    heap = []
    for s in src_flat.tolist():
        heapq.heappush(heap, (0.0, counter, s))
        counter += 1
        state[s] = TRIAL

    while heap:
        u, _, node = heapq.heappop(heap)
        if state[node] == ACCEPTED or u > U[node]:
            continue
        state[node] = ACCEPTED
        if record_order:
            result.accepted_order.append(int(node))
        if stop_set is not None and node in stop_set:
            x, y, t = grid.unflatten(int(node))
            result.reached = (int(x), int(y), int(t))
            return

        src_idx, move_idx, tgt, tgt_theta = _neighbors_of(
            grid, np.array([node]), moves
        )
        val = u + cost_flat[tgt] * factors[tgt_theta, move_idx]
        for m, p, v in zip(move_idx.tolist(), tgt.tolist(), val.tolist()):
            if state[p] != ACCEPTED and v < U[p]:
                U[p] = v
                E[p] = E[node] + increments[m]
                parent[p] = node
                state[p] = TRIAL
                heapq.heappush(heap, (v, counter, p))
                counter += 1

    if stop_set is not None:
        accepted = state == ACCEPTED
        farthest = U[accepted].max() if accepted.any() else 0.0
        raise UnreachableTargetError(farthest)


# --- path recovery ------------------------------------------------------

MAX_BACKTRACK_STEPS = 100_000
STAGNATION_TOL = 1e-9


def _interp_u(U, grid, x, y, theta):
    """Trilinear interpolation of U with a periodic angular axis.

    Unreached nodes (inf) enter as a large finite value so descent simply
    avoids them.
    """
    h, w, n_t = U.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    tf = theta / (2.0 * np.pi / n_t)
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    t0 = int(np.floor(tf)) % n_t
    fx, fy = x - np.floor(x), y - np.floor(y)
    ft = tf - np.floor(tf)
    x1, y1, t1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1), (t0 + 1) % n_t
    total = 0.0
    for cy, wy in ((y0, 1 - fy), (y1, fy)):
        for cx, wx in ((x0, 1 - fx), (x1, fx)):
            for ct, wt in ((t0, 1 - ft), (t1, ft)):
                wgt = wy * wx * wt
                if wgt == 0.0:
                    continue
                v = U[cy, cx, ct]
                total += wgt * (v if np.isfinite(v) else BIG)
    return total


def _source_cell_hit(source_set, grid, x, y, theta):
    """Source point in the grid cell around (x, y, theta), or None."""
    n_t = grid.n_theta
    tf = theta / grid.h2
    for cy in {int(np.floor(y)), int(np.ceil(y))}:
        for cx in {int(np.floor(x)), int(np.ceil(x))}:
            for ct in {int(np.floor(tf)) % n_t, int(np.ceil(tf)) % n_t}:
                if (cx, cy, ct) in source_set:
                    return (cx, cy, ct)
    return None


def _append_subdivided(samples, knots, target):
    """Append ``target`` as a knot, inserting non-knot samples so
    consecutive spatial positions stay at most one pixel apart (angles
    interpolate along the shorter arc)."""
    a = samples[-1]
    d_sp = float(np.hypot(target[0] - a[0], target[1] - a[1]))
    n = max(1, int(np.ceil(d_sp / 1.0)))
    dth = float(np.angle(np.exp(1j * (target[2] - a[2]))))
    for k in range(1, n + 1):
        f = k / n
        p = np.array([a[0] + f * (target[0] - a[0]),
                      a[1] + f * (target[1] - a[1]),
                      (a[2] + f * dth) % (2.0 * np.pi)])
        if np.allclose(p, samples[-1], atol=1e-12):
            continue
        samples.append(p)
        knots.append(k == n)


def _snap_to_corner(march, grid, pos):
    """Finite-U cell corner around ``pos`` with the smallest distance."""
    U = march.U
    n_t = grid.n_theta
    tf = pos[2] / grid.h2
    corners = []
    for cy in {int(np.floor(pos[1])), int(np.ceil(pos[1]))}:
        for cx in {int(np.floor(pos[0])), int(np.ceil(pos[0]))}:
            for ct in {int(np.floor(tf)) % n_t, int(np.ceil(tf)) % n_t}:
                if 0 <= cx < grid.width and 0 <= cy < grid.height:
                    u = U[cy, cx, ct]
                    if np.isfinite(u):
                        corners.append((u, cx, cy, ct))
    return min(corners) if corners else None


def _follow_chain(march, grid, node, samples, knots):
    """Append the exact upwind chain from ``node`` down to a source point."""
    flat = int(grid.flat_index(*node))
    while march.parent[flat] >= 0:
        flat = int(march.parent[flat])
        x, y, t = grid.unflatten(flat)
        _append_subdivided(
            samples, knots, np.array([float(x), float(y), float(t) * grid.h2])
        )


def backtrack(march, params, start):
    """Descend the distance map from ``start`` back to the source set.

    Takes half-pixel steps in the stencil direction maximizing the ratio of
    distance decrease to metric cost, with trilinear interpolation of U,
    and finishes when the walk enters a grid cell containing a source
    point. Where the interpolated descent stagnates away from the source
    (an interpolation pit on rough cost fields), the walk falls back to one
    hop along the exact upwind chain recorded during marching. The returned
    path is ordered source -> start.
    """
    grid = march.grid
    U = march.U
    x0, y0, t0 = (int(v) for v in start)
    if not np.isfinite(U[y0, x0, t0]):
        raise BacktrackError(f"start point {start} has infinite distance")
    source_set = {(int(x), int(y), int(t)) for x, y, t in march.source}

    if (x0, y0, t0) in source_set:
        return GeodesicPath(np.array([[x0, y0, t0 * grid.h2]]))

    moves = np.array([(dx, dy, dt * grid.h2) for dx, dy, dt in MOVES])
    dirs = moves / np.linalg.norm(moves, axis=1)[:, None]
    step = 0.5 * grid.h1

    pos = np.array([float(x0), float(y0), t0 * grid.h2])
    samples = [pos.copy()]
    knots = [True]
    last_corner_u = np.inf

    def partial():
        return GeodesicPath(np.array(samples[::-1]),
                            np.array(knots[::-1], dtype=bool))

    for _ in range(MAX_BACKTRACK_STEPS):
        hit = _source_cell_hit(source_set, grid, *pos)
        if hit is not None:
            _append_subdivided(samples, knots,
                               np.array([hit[0], hit[1], hit[2] * grid.h2]))
            break
        u_here = _interp_u(U, grid, *pos)
        best_score, best_cand, best_drop = 0.0, None, 0.0
        for d in dirs:
            cand = pos - step * d
            if not (0 <= cand[0] <= grid.width - 1 and 0 <= cand[1] <= grid.height - 1):
                continue
            u_cand = _interp_u(U, grid, *cand)
            drop = u_here - u_cand
            if drop <= 0:
                continue
            cost = metric_eval(params, pos, step * d)
            score = drop / cost
            if score > best_score:
                best_score, best_cand, best_drop = score, cand, drop
        if best_cand is None or best_drop <= STAGNATION_TOL:
            corner = _snap_to_corner(march, grid, pos)
            if corner is None:
                raise BacktrackError(
                    f"descent stagnated at {tuple(np.round(pos, 2))} "
                    f"(U ~ {u_here:.4g})", partial_path=partial(),
                )
            u_c, cx, cy, ct = corner
            node = (cx, cy, ct)
            _append_subdivided(samples, knots, np.array([cx, cy, ct * grid.h2]))
            if u_c >= last_corner_u - STAGNATION_TOL:
                # repeated pits without progress: finish along the chain
                _follow_chain(march, grid, node, samples, knots)
                break
            last_corner_u = u_c
            par = march.parent[grid.flat_index(cx, cy, ct)]
            if par < 0:
                break  # snapped corner is itself a source point
            px, py, pt = grid.unflatten(int(par))
            pos = np.array([float(px), float(py), float(pt) * grid.h2])
            _append_subdivided(samples, knots, pos)
            continue
        pos = best_cand
        pos[2] = pos[2] % (2.0 * np.pi)
        samples.append(pos.copy())
        knots.append(True)
    else:
        raise BacktrackError("backtrack exceeded the step budget",
                             partial_path=partial())

    path = GeodesicPath(np.array(samples[::-1]),
                        np.array(knots[::-1], dtype=bool))
    # the sub-grid descent is a smoothed approximation of the upwind chain;
    # when its re-integrated cost drifts from the marched distance (rough
    # cost fields, tiny distances) return the exact chain instead
    u0 = float(U[y0, x0, t0])
    if u0 > 0.0:
        drift = abs(path_cost(params, path) - u0) / u0
        if drift > 0.01:
            chain_samples = [np.array([float(x0), float(y0), t0 * grid.h2])]
            chain_knots = [True]
            _follow_chain(march, grid, (x0, y0, t0), chain_samples, chain_knots)
            path = GeodesicPath(np.array(chain_samples[::-1]),
                                np.array(chain_knots[::-1], dtype=bool))
    return path


def path_cost(params, path):
    """Metric length of a path, integrated over its knot samples.

    Matches the marching convention: each step is priced at its
    destination, and spacing-only samples between knots do not introduce
    extra evaluation points, so a path following the upwind chain
    reproduces the distance increments exactly."""
    total = 0.0
    s = path.knot_samples() if isinstance(path, GeodesicPath) else np.asarray(path)
    for k in range(1, len(s)):
        dx, dy = s[k, 0] - s[k - 1, 0], s[k, 1] - s[k - 1, 1]
        dnu = np.angle(np.exp(1j * (s[k, 2] - s[k - 1, 2])))
        if dx == 0 and dy == 0 and dnu == 0:
            continue
        total += metric_eval(params, s[k], (dx, dy, dnu))
    return total


def curvature_length(path, beta):
    """Curvature-penalized length: sum of sqrt(|dx|^2 + beta^2 dtheta^2).

    ``path`` must have at least two samples; angular increments are wrapped
    into (-pi, pi].
    """
    s = np.asarray(path.samples if isinstance(path, GeodesicPath) else path,
                   dtype=np.float64)
    if len(s) < 2:
        raise InputError("path needs at least 2 samples")
    d = np.diff(s, axis=0)
    dnu = np.angle(np.exp(1j * d[:, 2]))
    return float(np.sum(np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2
                                + beta**2 * dnu**2)))


def save_march_maps(path, march):
    """Dump the distance and length maps to a flat binary container.

    Same framing as the feature container (magic, dims, little-endian
    float32 planes): header then U and E; unreached nodes store inf.
    """
    import struct

    h, w, n_theta = march.U.shape
    with open(path, "wb") as fh:
        fh.write(b"TFF1")
        fh.write(struct.pack("<III", h, w, n_theta))
        fh.write(np.ascontiguousarray(march.U, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(march.E, dtype="<f4").tobytes())


def load_march_maps(path):
    """Read (U, E) written by :func:`save_march_maps`."""
    import struct

    with open(path, "rb") as fh:
        if fh.read(4) != b"TFF1":
            raise InputError("bad map container magic")
        h, w, n_theta = struct.unpack("<III", fh.read(12))
        n = h * w * n_theta
        u = np.frombuffer(fh.read(4 * n), dtype="<f4").astype(np.float64)
        e = np.frombuffer(fh.read(4 * n), dtype="<f4").astype(np.float64)
    return u.reshape(h, w, n_theta), e.reshape(h, w, n_theta)


def path_to_json(path):
    """Geodesic path as a JSON document: spatial polyline plus per-sample
    tangent angles."""
    import json

    return json.dumps({
        "polyline": [[float(x), float(y)] for x, y in path.spatial],
        "theta": [float(t) for t in path.tangents],
    }, sort_keys=True)


@dataclass
class BridgeResult:
    distance: float        # geodesic distance between the lifted sets
    length: float          # data-free curvature length of the winning path
    path: GeodesicPath
    reached: tuple


def bridge(source_points, stop_points, params, grid, engine="batched"):
    """Geodesic bridge from one lifted point set to another.

    Marches from ``source_points`` until a point of ``stop_points`` is
    accepted, then backtracks the connecting path. Overlapping sets short-
    circuit to a zero-length degenerate bridge.

    Raises UnreachableTargetError when no connection exists on the grid.
    """
    march = fast_march(grid, params, source_points, stop=stop_points,
                       engine=engine)
    x, y, t = march.reached
    if march.U[y, x, t] == 0.0:
        path = GeodesicPath(np.array([[x, y, t * grid.h2]]))
        return BridgeResult(0.0, 0.0, path, march.reached)
    path = backtrack(march, params, march.reached)
    return BridgeResult(float(march.U[y, x, t]), float(march.E[y, x, t]),
                        path, march.reached)
