"""Trajectory graph: curvature-penalized edge weights and route recovery.

Each disjoint trajectory becomes a node; adjacent trajectories (overlapping
tubular neighborhoods) are joined by an undirected edge whose weight is the
smaller of the two directional bridge lengths, measured by the data-free
curvature-penalized length accumulated during marching. User seed points
enter as degenerate one-point nodes, either aliasing the trajectory they
sit on or bridged to nearby trajectories. Dijkstra gives the node sequence;
the final centerline concatenates truncated trajectories with the stored
bridge paths.
"""

import heapq
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NoRouteError, UnreachableTargetError
from .lifted import LiftedGrid, MetricParams
from .marching import GeodesicPath, bridge
from .trajectories import LiftedTrajectory, adjacent

TGR_MAGIC = b"TGR1"
TGR_VERSION = 1

DEFAULT_WINDOW_PAD = 24


@dataclass
class SeedNode:
    """User-provided point attached to the graph as a one-point node."""

    node_id: int
    position: tuple           # (x, y) int pixel
    theta_star: int           # best orientation bin in [0, n_theta/2)
    n_theta: int
    snap_traj: int = None     # nearest trajectory id
    snap_dist: float = 0.0
    alias: int = None         # trajectory node this seed coincides with

    def lifted_points(self):
        x, y = self.position
        half = self.n_theta // 2
        return np.array([(x, y, self.theta_star),
                         (x, y, self.theta_star + half)], dtype=int)

    @property
    def points(self):
        return np.array([self.position], dtype=int)


@dataclass
class EdgeRecord:
    """Undirected edge with its winning bridge geodesic."""

    i: int
    j: int
    weight: float             # min of the two directional data-free lengths
    direction: tuple          # (src, dst) node ids of the winning bridge
    path: GeodesicPath        # ordered direction[0] -> direction[1]
    distance_ij: float = np.inf   # diagnostic geodesic distances (U-based)
    distance_ji: float = np.inf
    length_ij: float = np.inf
    length_ji: float = np.inf


class TrajectoryGraph:
    """Undirected weighted graph over trajectories and seed nodes."""

    def __init__(self):
        self.nodes = {}
        self.edges = {}
        self._adjacency = {}

    @staticmethod
    def _key(a, b):
        return (a, b) if a <= b else (b, a)

    def add_node(self, node_id, payload):
        self.nodes[node_id] = payload

    def add_edge(self, record):
        self.edges[self._key(record.i, record.j)] = record
        self._adjacency.setdefault(record.i, set()).add(record.j)
        self._adjacency.setdefault(record.j, set()).add(record.i)

    def edge(self, a, b):
        return self.edges.get(self._key(a, b))

    def neighbors(self, node_id):
        return sorted(self._adjacency.get(node_id, ()))

    def copy(self):
        g = TrajectoryGraph()
        g.nodes = dict(self.nodes)
        g.edges = dict(self.edges)
        g._adjacency = {k: set(v) for k, v in self._adjacency.items()}
        return g

    def component_size(self, start):
        seen = {start}
        queue = [start]
        while queue:
            n = queue.pop()
            for m in self.neighbors(n):
                if m not in seen:
                    seen.add(m)
                    queue.append(m)
        return len(seen)


def _crop_window(points_a, points_b, shape, pad):
    """Axis-aligned window around the closest pair of two pixel sets."""
    a = np.asarray(points_a, dtype=np.float64)
    b = np.asarray(points_b, dtype=np.float64)
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    ia, ib = np.unravel_index(np.argmin(d2), d2.shape)
    ca, cb = a[ia], b[ib]
    gap = float(np.hypot(*(ca - cb)))
    half = gap / 2.0 + float(pad)
    cx, cy = (ca + cb) / 2.0
    h, w = shape
    x0 = max(0, int(np.floor(cx - half)))
    y0 = max(0, int(np.floor(cy - half)))
    x1 = min(w, int(np.ceil(cx + half)) + 1)
    y1 = min(h, int(np.ceil(cy + half)) + 1)
    return x0, y0, x1, y1


def _points_in_window(lifted_pts, window):
    x0, y0, x1, y1 = window
    pts = np.asarray(lifted_pts)
    keep = (pts[:, 0] >= x0) & (pts[:, 0] < x1) & (pts[:, 1] >= y0) & (pts[:, 1] < y1)
    local = pts[keep].copy()
    local[:, 0] -= x0
    local[:, 1] -= y0
    return local


def bridge_pair(src_lifted, dst_lifted, params, window_pad=DEFAULT_WINDOW_PAD,
                engine="batched"):
    """One directional bridge, marched inside a local window.

    The window is centered on the closest pixel pair of the two point sets;
    the returned path samples are in global image coordinates. A None
    ``window_pad`` marches the full grid.
    """
    h, w, n_theta = params.cost.shape
    src = np.asarray(src_lifted, dtype=int)
    dst = np.asarray(dst_lifted, dtype=int)
    if window_pad is None:
        window = (0, 0, w, h)
    else:
        window = _crop_window(src[:, :2], dst[:, :2], (h, w), window_pad)
    x0, y0, x1, y1 = window
    src_local = _points_in_window(src, window)
    dst_local = _points_in_window(dst, window)
    if len(src_local) == 0 or len(dst_local) == 0:
        raise UnreachableTargetError(0.0)
    sub_cost = np.ascontiguousarray(params.cost[y0:y1, x0:x1, :])
    sub_params = MetricParams(kind=params.kind, epsilon=params.epsilon,
                              beta=params.beta, cost=sub_cost,
                              beta_length=params.beta_length)
    sub_grid = LiftedGrid(x1 - x0, y1 - y0, n_theta)
    result = bridge(src_local, dst_local, sub_params, sub_grid, engine=engine)
    samples = result.path.samples.copy()
    samples[:, 0] += x0
    samples[:, 1] += y0
    path = GeodesicPath(samples, result.path.knots.copy())
    reached = (result.reached[0] + x0, result.reached[1] + y0, result.reached[2])
    return result.distance, result.length, path, reached


def _edge_from_bridges(i, j, fwd, bwd):
    """Combine the two directional bridge outcomes into one edge record."""
    dist_ij = fwd[0] if fwd else np.inf
    dist_ji = bwd[0] if bwd else np.inf
    len_ij = fwd[1] if fwd else np.inf
    len_ji = bwd[1] if bwd else np.inf
    if not np.isfinite(len_ij) and not np.isfinite(len_ji):
        return None
    if len_ij <= len_ji:
        weight, direction, path = len_ij, (i, j), fwd[2]
    else:
        weight, direction, path = len_ji, (j, i), bwd[2]
    return EdgeRecord(i=i, j=j, weight=float(weight), direction=direction,
                      path=path, distance_ij=dist_ij, distance_ji=dist_ji,
                      length_ij=len_ij, length_ji=len_ji)


def adjacency_pairs(masks):
    """Symmetric closure of the neighborhood-intersection test."""
    pairs = []
    n = len(masks)
    for a in range(n):
        for b in range(a + 1, n):
            if adjacent(masks[a], masks[b].prolonged) or adjacent(
                masks[b], masks[a].prolonged
            ):
                pairs.append((masks[a].traj_id, masks[b].traj_id))
    return pairs


def build_graph(lifted, masks, params, window_pad=DEFAULT_WINDOW_PAD,
                engine="batched", n_jobs=1):
    """Build the trajectory graph with bridge-weighted edges.

    For every adjacent pair both directional bridges are computed and the
    smaller data-free length wins, making the weight symmetric by
    construction. Pairs whose bridges both fail are simply not connected.
    """
    graph = TrajectoryGraph()
    by_id = {lt.base_id: lt for lt in lifted}
    for lt in lifted:
        graph.add_node(lt.base_id, lt)
    pairs = adjacency_pairs(masks)

    tasks = []
    for i, j in pairs:
        tasks.append((i, j, by_id[i].lifted_points(), by_id[j].lifted_points()))

    results = {}
    if n_jobs and n_jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futs = {
                (i, j): pool.submit(_pair_task, src, dst, params, window_pad, engine)
                for i, j, src, dst in tasks
            }
            for key, fut in futs.items():
                results[key] = fut.result()
    else:
        for i, j, src, dst in tasks:
            results[(i, j)] = _pair_task(src, dst, params, window_pad, engine)

    for (i, j), (fwd, bwd) in sorted(results.items()):
        record = _edge_from_bridges(i, j, fwd, bwd)
        if record is not None:
            graph.add_edge(record)
    return graph


def _pair_task(src, dst, params, window_pad, engine):
    """Both directional bridges for one adjacent pair."""
    try:
        fwd = bridge_pair(src, dst, params, window_pad, engine)
    except UnreachableTargetError:
        fwd = None
    try:
        bwd = bridge_pair(dst, src, params, window_pad, engine)
    except UnreachableTargetError:
        bwd = None
    return fwd, bwd


def lift_seed(position, psi_os):
    """Best orientation bin of a pixel, as for trajectory lifting."""
    x, y = int(round(position[0])), int(round(position[1]))
    n_theta = psi_os.shape[2]
    half = n_theta // 2
    return int(np.argmax(psi_os[y, x, :half]))


def attach_seeds(graph, seeds, psi_os, trajectories, masks, params,
                 window_pad=DEFAULT_WINDOW_PAD, engine="batched"):
    """Attach seed points to a copy of the graph.

    A seed lying exactly on a trajectory pixel aliases that node. Any other
    seed becomes a new one-point node bridged to every trajectory whose
    neighborhood mask contains it, plus its nearest trajectory as fallback.

    Returns (graph_copy, [SeedNode, ...]); aliased seeds carry the aliased
    node id and add no edges.
    """
    g = graph.copy()
    n_theta = psi_os.shape[2]
    pixel_owner = {}
    for t in trajectories:
        for x, y in t.points.tolist():
            pixel_owner[(x, y)] = t.id

    lifted_by_id = {lt.base_id: lt for lt in g.nodes.values()
                    if isinstance(lt, LiftedTrajectory)}
    next_id = (max(g.nodes) + 1) if g.nodes else 0
    out = []
    for sx, sy in seeds:
        pos = (int(round(sx)), int(round(sy)))
        theta = lift_seed(pos, psi_os)
        if pos in pixel_owner:
            out.append(SeedNode(node_id=pixel_owner[pos], position=pos,
                                theta_star=theta, n_theta=n_theta,
                                snap_traj=pixel_owner[pos], snap_dist=0.0,
                                alias=pixel_owner[pos]))
            continue

        nearest, nearest_d = None, np.inf
        for t in trajectories:
            d = np.hypot(t.points[:, 0] - pos[0], t.points[:, 1] - pos[1]).min()
            if d < nearest_d:
                nearest, nearest_d = t.id, float(d)
        candidates = {m.traj_id for m in masks if m.mask[pos[1], pos[0]]}
        if nearest is not None:
            candidates.add(nearest)

        node = SeedNode(node_id=next_id, position=pos, theta_star=theta,
                        n_theta=n_theta, snap_traj=nearest, snap_dist=nearest_d)
        next_id += 1
        g.add_node(node.node_id, node)
        for cand in sorted(candidates):
            lt = lifted_by_id.get(cand)
            if lt is None:
                continue
            fwd, bwd = _pair_task(node.lifted_points(), lt.lifted_points(),
                                  params, window_pad, engine)
            record = _edge_from_bridges(node.node_id, cand, fwd, bwd)
            if record is not None:
                g.add_edge(record)
        out.append(node)
    return g, out


def shortest_sequence(graph, src, dst):
    """Dijkstra node route; ties broken toward the smaller predecessor id."""
    if src == dst:
        raise InputError("src and dst must differ")
    if src not in graph.nodes or dst not in graph.nodes:
        raise InputError("src and dst must be graph nodes")
    dist = {src: 0.0}
    pred = {src: None}
    settled = set()
    heap = [(0.0, src)]
    while heap:
        d, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == dst:
            break
        for nbr in graph.neighbors(node):
            if nbr in settled:
                continue
            w = graph.edge(node, nbr).weight
            nd = d + w
            if nd < dist.get(nbr, np.inf):
                dist[nbr] = nd
                pred[nbr] = node
                heapq.heappush(heap, (nd, nbr))
            elif (nd == dist.get(nbr, np.inf) and pred.get(nbr) is not None
                  and node < pred[nbr]):
                pred[nbr] = node
    if dst not in settled:
        raise NoRouteError(src, dst, graph.component_size(src))
    route = [dst]
    while pred[route[-1]] is not None:
        route.append(pred[route[-1]])
    return route[::-1]


@dataclass
class TrackedPath:
    """Concatenated centerline: truncated trajectories plus bridge paths."""

    nodes: list
    polyline: np.ndarray             # (n, 2) float (x, y)
    pieces: list = field(default_factory=list)  # {kind, span=[a, b)} metadata

    def to_json_dict(self):
        return {
            "nodes": [int(n) for n in self.nodes],
            "polyline": [[float(x), float(y)] for x, y in self.polyline],
            "pieces": [
                {"kind": p["kind"], "span": [int(p["span"][0]), int(p["span"][1])]}
                for p in self.pieces
            ],
        }


def _node_polyline(graph, node_id):
    payload = graph.nodes[node_id]
    return np.asarray(payload.points, dtype=np.float64)


def _nearest_index(poly, point):
    d = np.hypot(poly[:, 0] - point[0], poly[:, 1] - point[1])
    return int(np.argmin(d))


def _span_piece(poly, a, b):
    if a <= b:
        return poly[a : b + 1]
    return poly[b : a + 1][::-1]


def _oriented_bridge(graph, a, b):
    """Spatial bridge polyline ordered from node a to node b."""
    record = graph.edge(a, b)
    if record is None:
        raise InputError(f"no stored bridge between {a} and {b}")
    pts = record.path.spatial
    if record.direction == (a, b):
        return pts
    return pts[::-1]


def recover_path(graph, sequence, endpoints=None):
    """Assemble the final centerline for a node route.

    Interior trajectories keep only the portion between the two points
    where their incoming and outgoing bridges meet them. Terminal
    trajectory nodes truncate at the nearest point to the corresponding
    endpoint pixel when ``endpoints`` = ((x, y), (x, y)) is given.
    """
    if len(sequence) < 2:
        raise InputError("route must have at least 2 nodes")
    bridges = [_oriented_bridge(graph, a, b) for a, b in zip(sequence, sequence[1:])]

    chunks = []
    for k, node in enumerate(sequence):
        poly = _node_polyline(graph, node)
        incoming = bridges[k - 1] if k > 0 else None
        outgoing = bridges[k] if k < len(bridges) else None
        if len(poly) == 1:
            piece = poly
        else:
            if incoming is None:
                if endpoints is not None:
                    a = _nearest_index(poly, endpoints[0])
                else:
                    far = _nearest_index(poly, outgoing[0])
                    a = 0 if far >= len(poly) // 2 else len(poly) - 1
            else:
                a = _nearest_index(poly, incoming[-1])
            if outgoing is None:
                if endpoints is not None:
                    b = _nearest_index(poly, endpoints[1])
                else:
                    b = 0 if a >= len(poly) // 2 else len(poly) - 1
            else:
                b = _nearest_index(poly, outgoing[0])
            piece = _span_piece(poly, a, b)
        chunks.append(("trajectory", piece))
        if outgoing is not None:
            chunks.append(("bridge", np.asarray(outgoing, dtype=np.float64)))

    polyline = []
    pieces = []
    for kind, pts in chunks:
        start = len(polyline)
        for p in pts:
            if polyline and np.hypot(polyline[-1][0] - p[0],
                                     polyline[-1][1] - p[1]) < 1e-9:
                continue
            polyline.append([float(p[0]), float(p[1])])
        if len(polyline) == start:
            # piece collapsed onto the junction point; keep a zero-span marker
            pieces.append({"kind": kind, "span": (start, start)})
        else:
            pieces.append({"kind": kind, "span": (start, len(polyline))})
    return TrackedPath(nodes=list(sequence), polyline=np.asarray(polyline),
                       pieces=pieces)


def single_node_path(graph, node, start_xy, end_xy):
    """Route where both seeds alias one trajectory: its sub-polyline."""
    poly = _node_polyline(graph, node)
    a = _nearest_index(poly, start_xy)
    b = _nearest_index(poly, end_xy)
    piece = _span_piece(poly, a, b)
    return TrackedPath(nodes=[node], polyline=np.asarray(piece, dtype=np.float64),
                       pieces=[{"kind": "trajectory", "span": (0, len(piece))}])


def _concat_tracked(parts):
    nodes = []
    polyline = []
    pieces = []
    for part in parts:
        offset = len(polyline)
        skip_first = bool(
            polyline
            and len(part.polyline)
            and np.hypot(polyline[-1][0] - part.polyline[0][0],
                         polyline[-1][1] - part.polyline[0][1]) < 1e-9
        )
        drop = 1 if skip_first else 0
        for p in part.polyline[drop:]:
            polyline.append([float(p[0]), float(p[1])])
        for piece in part.pieces:
            a, b = piece["span"]
            pieces.append({"kind": piece["kind"],
                           "span": (max(offset, offset + a - drop),
                                    max(offset, offset + b - drop))})
        for n in part.nodes:
            if not nodes or nodes[-1] != n:
                nodes.append(n)
    return TrackedPath(nodes=nodes, polyline=np.asarray(polyline), pieces=pieces)


def track_route(graph, seed_nodes, positions):
    """Route through the seeds in order and assemble one centerline.

    ``seed_nodes`` are the attached SeedNode records (alias or bridged) and
    ``positions`` their pixel coordinates. Consecutive pairs are solved
    independently and concatenated; a pair collapsing onto a single node
    yields the trajectory sub-polyline between the two pixels.

    Returns (TrackedPath, dijkstra_seconds).
    """
    import time

    parts = []
    dijkstra_seconds = 0.0
    for k in range(len(seed_nodes) - 1):
        a = seed_nodes[k].alias if seed_nodes[k].alias is not None else seed_nodes[k].node_id
        b = seed_nodes[k + 1].alias if seed_nodes[k + 1].alias is not None else seed_nodes[k + 1].node_id
        pa, pb = positions[k], positions[k + 1]
        if a == b:
            parts.append(single_node_path(graph, a, pa, pb))
            continue
        t0 = time.perf_counter()
        route = shortest_sequence(graph, a, b)
        dijkstra_seconds += time.perf_counter() - t0
        parts.append(recover_path(graph, route, endpoints=(pa, pb)))
    return _concat_tracked(parts), dijkstra_seconds


# --- versioned binary container (magic "TGR1") --------------------------

def save_graph(path, graph):
    """Serialize nodes and edges (with bridge samples) to the container."""
    with open(path, "wb") as fh:
        fh.write(TGR_MAGIC)
        fh.write(struct.pack("<HI", TGR_VERSION, len(graph.nodes)))
        for node_id in sorted(graph.nodes):
            payload = graph.nodes[node_id]
            pts = payload.points
            if isinstance(payload, SeedNode):
                kind = 1
                thetas = np.array([payload.theta_star], dtype=int)
                n_theta = payload.n_theta
            elif isinstance(payload, LiftedTrajectory):
                kind = 0
                thetas = payload.theta_star
                n_theta = payload.n_theta
            else:  # plain trajectory (straight-segment baseline graph)
                kind = 2
                thetas = np.zeros(0, dtype=int)
                n_theta = 0
            fh.write(struct.pack("<IBII", node_id, kind, len(pts), n_theta))
            fh.write(np.ascontiguousarray(pts, dtype="<i4").tobytes())
            fh.write(np.ascontiguousarray(thetas, dtype="<i4").tobytes())
        fh.write(struct.pack("<I", len(graph.edges)))
        for key in sorted(graph.edges):
            r = graph.edges[key]
            dir_flag = 0 if r.direction == (r.i, r.j) else 1
            samples = np.ascontiguousarray(r.path.samples, dtype="<f8")
            fh.write(struct.pack("<IIdddddBI", r.i, r.j, r.weight,
                                 r.distance_ij, r.distance_ji,
                                 r.length_ij, r.length_ji,
                                 dir_flag, len(samples)))
            fh.write(samples.tobytes())


def load_graph(path):
    """Rebuild a graph from the container written by :func:`save_graph`."""
    with open(path, "rb") as fh:
        if fh.read(4) != TGR_MAGIC:
            raise InputError("bad graph container magic")
        version, n_nodes = struct.unpack("<HI", fh.read(6))
        if version != TGR_VERSION:
            raise InputError(f"unsupported graph container version {version}")
        graph = TrajectoryGraph()
        for _ in range(n_nodes):
            node_id, kind, n_pts, n_theta = struct.unpack("<IBII", fh.read(13))
            pts = np.frombuffer(fh.read(8 * n_pts), dtype="<i4").reshape(n_pts, 2)
            n_thetas = {0: n_pts, 1: 1, 2: 0}[kind]
            thetas = np.frombuffer(fh.read(4 * n_thetas), dtype="<i4")
            if kind == 1:
                graph.add_node(node_id, SeedNode(
                    node_id=node_id, position=(int(pts[0, 0]), int(pts[0, 1])),
                    theta_star=int(thetas[0]), n_theta=n_theta))
            elif kind == 0:
                graph.add_node(node_id, LiftedTrajectory(
                    base_id=node_id, points=pts.astype(int),
                    theta_star=thetas.astype(int), n_theta=n_theta))
            else:
                from .trajectories import Trajectory

                graph.add_node(node_id, Trajectory(id=node_id,
                                                   points=pts.astype(int)))
        (n_edges,) = struct.unpack("<I", fh.read(4))
        edge_fmt = "<IIdddddBI"
        edge_size = struct.calcsize(edge_fmt)
        for _ in range(n_edges):
            i, j, weight, dij, dji, lij, lji, dir_flag, n_s = struct.unpack(
                edge_fmt, fh.read(edge_size)
            )
            samples = np.frombuffer(fh.read(24 * n_s), dtype="<f8").reshape(n_s, 3)
            direction = (i, j) if dir_flag == 0 else (j, i)
            graph.add_edge(EdgeRecord(
                i=i, j=j, weight=weight, direction=direction,
                path=GeodesicPath(samples.astype(np.float64)),
                distance_ij=dij, distance_ji=dji, length_ij=lij, length_ji=lji))
    return graph
