"""Synthetic scenes, the accuracy score, and model comparisons.

Scenes hold two dark smooth structures on a bright noisy background with
per-structure ground truth, built to exercise the failure modes of
straight-segment grouping: a double-armed spiral, a near-closed loop with
a distractor crossing it twice close to the seeds, and a high-tortuosity
curve shadowing a smoother distractor.

The accuracy score of a tracked path is the fraction of its rasterized
pixels that land inside the ground-truth region. The straight-segment
baseline connects adjacent trajectories with line segments weighted by
Euclidean length and endpoint angles; it is a simplified stand-in for
angle-based grouping, used for ordering comparisons only.
"""

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .config import PipelineConfig
from .errors import GenerationError, InputError
from .features import compute_features
from .graph import (
    EdgeRecord, SeedNode, TrajectoryGraph, adjacency_pairs, attach_seeds,
    build_graph, track_route,
)
from .lifted import MetricParams
from .marching import GeodesicPath
from .trajectories import endpoint_tangent, extract_trajectories

SCENE_KINDS = ("spiral", "crossing-pair", "tortuous-pair")


@dataclass
class SyntheticScene:
    kind: str
    image: np.ndarray                  # (H, W) in [0, 1], noise applied
    clean: np.ndarray                  # (H, W) before noise
    gt_masks: dict                     # name -> (H, W) bool, full width
    centerlines: dict                  # name -> (n, 2) float samples
    seeds: dict                        # name -> [(x, y), (x, y)]
    sigma_n: float
    rng_seed: int
    widths: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.image.shape


@dataclass
class Score:
    j: float
    path_pixels: int
    hit_pixels: int


def _curve_margin_ok(samples, width, shape):
    h, w = shape
    m = width / 2.0 + 2.0
    return (samples[:, 0].min() >= m and samples[:, 0].max() <= w - 1 - m
            and samples[:, 1].min() >= m and samples[:, 1].max() <= h - 1 - m)


BACKGROUND_LEVEL = 0.82
STRUCTURE_LEVEL = 0.10


def render_curves(curves, widths, shape, sigma_n, rng, drawn=None):
    """Rasterize dark anti-aliased curves on a bright background.

    Darkness at distance d from a curve of width w ramps over a one-pixel
    band at d = w/2; multiple curves combine by darkness. The background
    sits below saturation so additive noise is only mildly clipped.
    Ground-truth masks cover the full footprint (d <= w/2 + 0.5) of the
    curves in ``curves``; ``drawn`` may override the sample set actually
    painted for a structure (interrupted structures render with gaps while
    their ground truth stays whole).
    """
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    pix = np.column_stack([xx.ravel(), yy.ravel()]).astype(np.float64)
    profile = np.ones(shape)
    masks = {}
    for name, samples in curves.items():
        width = widths[name]
        if not _curve_margin_ok(samples, width, shape):
            raise GenerationError(
                f"curve {name!r} leaves the canvas (shape {shape})"
            )
        dist_gt = cKDTree(samples).query(pix, workers=-1)[0].reshape(shape)
        masks[name] = dist_gt <= width / 2.0 + 0.5
        painted = (drawn or {}).get(name)
        if painted is None:
            dist = dist_gt
        else:
            dist = cKDTree(painted).query(pix, workers=-1)[0].reshape(shape)
        profile = np.minimum(profile, np.clip(dist - width / 2.0 + 0.5, 0.0, 1.0))
    clean = STRUCTURE_LEVEL + (BACKGROUND_LEVEL - STRUCTURE_LEVEL) * profile
    image = clean
    if sigma_n > 0:
        image = np.clip(clean + rng.normal(0.0, sigma_n, shape), 0.0, 1.0)
    return image, clean, masks


def _spiral_curves(shape, rng, widths):
    """Single interrupted spiral: the winding is whole in the ground truth
    but rendered with a few gaps on the inner windings, where a straight
    chord across a gap sags out of the centerline band while a
    curvature-following bridge stays on it."""
    h, w = shape
    cx, cy = w / 2.0, h / 2.0
    min_dim = min(h, w)
    a = min(10.0, 0.10 * min_dim) + rng.uniform(-1, 1)
    pitch = min(22.0, 0.18 * min_dim) + rng.uniform(-1, 1)
    b = pitch / (2 * np.pi)
    r_max = min(cx, cy) - 12.0
    phi_max = (r_max - a) / b
    if phi_max < 2 * np.pi:
        raise GenerationError(
            f"canvas {shape} too small for even one spiral winding"
        )
    phi = np.linspace(0.0, phi_max, int(phi_max * 40))
    r = a + b * phi
    target = np.column_stack([cx + r * np.cos(phi), cy + r * np.sin(phi)])

    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(target, axis=0).T))])
    total = arc[-1]
    n_gaps = 3
    gap_len = 22.0
    centers = np.sort(rng.uniform(0.025, 0.065, n_gaps)) * total
    keep = np.ones(len(target), dtype=bool)
    for c in centers:
        keep &= ~((arc > c - gap_len / 2.0) & (arc < c + gap_len / 2.0))
    drawn = {"target": target[keep]}

    seeds = [tuple(np.rint(target[0]).astype(int)),
             tuple(np.rint(target[-1]).astype(int))]
    return {"target": target}, seeds, drawn


def _crossing_curves(shape, rng, widths):
    """Near-closed loop with a distractor crossing it twice near the seeds.

    The loop's endpoints sit close together and the seeds a few pixels in
    from the tips; the distractor crosses the upper and lower arcs some
    distance along the loop, so a straight-segment graph can skip the whole
    loop through two cheap crossings while the tips stay intact.
    """
    h, w = shape
    cx, cy = w / 2.0, h / 2.0
    rx = w * 0.38 + rng.uniform(-4, 4)
    ry = h * 0.36 + rng.uniform(-4, 4)
    open_half = np.radians(24.0 + rng.uniform(-2, 2))
    ang = np.linspace(np.pi + open_half, np.pi - open_half + 2 * np.pi, 2400)
    target = np.column_stack([cx + rx * np.cos(ang), cy + ry * np.sin(ang)])

    # distractor: left-opening parabola through the loop interior, its arms
    # crossing the near-vertical left arcs at a steep angle
    x_open = cx - rx
    y_cross = 0.72 * ry
    apex = x_open + 0.62 * rx + rng.uniform(-3, 3)
    k = (apex - (x_open + 4.0)) / y_cross**2
    y_end = np.sqrt((apex - (x_open - 8.0)) / k)  # arms stop just past the arcs
    ts = np.linspace(-y_end, y_end, 1600)
    distractor = np.column_stack([apex - k * ts**2, cy + ts])

    off = int(12.0 / (np.hypot(*np.diff(target[:2], axis=0)[0]) + 1e-12))
    seeds = [tuple(np.rint(target[off]).astype(int)),
             tuple(np.rint(target[-1 - off]).astype(int))]
    return {"target": target, "distractor": distractor}, seeds, None


def _tortuous_curves(shape, rng, widths):
    """High-tortuosity target cut by a near-straight distractor.

    The target winds up and down across the band; the distractor runs
    through the meander center, crossing every steep arm, so skipping the
    winding along it is the tempting straight-segment shortcut. The target
    ends at apexes, keeping the seeds away from any crossing.
    """
    h, w = shape
    xs = np.linspace(14.0, w - 15.0, 2600)
    # apex bend radius ~ span^2 / (4 pi^2 amp waves^2) must stay a couple of
    # tube widths wide or the filter cannot follow the turns
    amp = h * 0.17
    waves = 3.0 + rng.uniform(-0.2, 0.2)
    cy = h * 0.50
    u = (xs - xs[0]) / (xs[-1] - xs[0])
    target = np.column_stack([xs, cy + amp * np.cos(waves * 2 * np.pi * u)])
    dist_y = cy + (h * 0.05) * np.sin(1.3 * 2 * np.pi * u + rng.uniform(0, np.pi))
    distractor = np.column_stack([xs, dist_y])
    seeds = [tuple(np.rint(target[0]).astype(int)),
             tuple(np.rint(target[-1]).astype(int))]
    return {"target": target, "distractor": distractor}, seeds, None


def generate_scene(kind, shape=(321, 474), widths=5.0, sigma_n=0.15, rng_seed=0):
    """Deterministic synthetic scene of the given kind.

    ``widths`` is either a scalar applied to both structures or a mapping
    {"target": w, "distractor": w}.
    """
    if kind not in SCENE_KINDS:
        raise InputError(f"unknown scene kind {kind!r}; choose from {SCENE_KINDS}")
    if sigma_n < 0:
        raise InputError("sigma_n must be >= 0")
    rng = np.random.default_rng(rng_seed)
    if np.isscalar(widths):
        widths = {"target": float(widths), "distractor": float(widths)}
    builder = {
        "spiral": _spiral_curves,
        "crossing-pair": _crossing_curves,
        "tortuous-pair": _tortuous_curves,
    }[kind]
    curves, seeds, drawn = builder(shape, rng, widths)
    image, clean, masks = render_curves(curves, widths, shape, sigma_n, rng,
                                        drawn=drawn)
    return SyntheticScene(kind=kind, image=image, clean=clean, gt_masks=masks,
                          centerlines=curves, seeds={"target": seeds},
                          sigma_n=float(sigma_n), rng_seed=int(rng_seed),
                          widths=widths)


# --- accuracy -----------------------------------------------------------

def _bresenham(p, q):
    """8-connected grid walk from p to q, inclusive."""
    x0, y0 = p
    x1, y1 = q
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    out = [(x0, y0)]
    while (x0, y0) != (x1, y1):
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x0 += sx
        if e2 < dx:
            err += dx
            y0 += sy
        out.append((x0, y0))
    return out


def rasterize_polyline(polyline):
    """Set of grid pixels an (n, 2) polyline passes through."""
    pts = np.rint(np.asarray(polyline, dtype=np.float64)).astype(int)
    if len(pts) == 0:
        return set()
    pixels = {tuple(pts[0])}
    for p, q in zip(pts[:-1], pts[1:]):
        pixels.update(_bresenham(tuple(p), tuple(q)))
    return pixels


def accuracy(path, gt_mask):
    """Fraction of traced pixels inside the ground-truth region."""
    polyline = path.polyline if hasattr(path, "polyline") else path
    pixels = rasterize_polyline(polyline)
    if not pixels:
        raise InputError("empty path")
    h, w = gt_mask.shape
    hits = sum(1 for x, y in pixels if 0 <= x < w and 0 <= y < h and gt_mask[y, x])
    return Score(j=hits / len(pixels), path_pixels=len(pixels), hit_pixels=hits)


# --- straight-segment baseline ------------------------------------------

def _fold_angle(u, v):
    """Unsigned angle between two directions, folded into [0, pi/2]."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    c = abs(float(np.dot(u, v)) / (nu * nv))
    return float(np.arccos(min(1.0, c)))


def group_angle_weight(traj_i, traj_j, lambda_a=1.0):
    """Straight-segment connection cost between two trajectories.

    Euclidean length of the segment joining the nearest endpoint pair,
    scaled by one plus the weighted angles between the segment and each
    trajectory's endpoint tangent.
    """
    ends_i = [(traj_i.points[0], "first"), (traj_i.points[-1], "last")]
    ends_j = [(traj_j.points[0], "first"), (traj_j.points[-1], "last")]
    best = None
    for pi, end_i in ends_i:
        for pj, end_j in ends_j:
            d = float(np.hypot(*(pi.astype(float) - pj.astype(float))))
            if best is None or d < best[0]:
                best = (d, pi, end_i, pj, end_j)
    d, pi, end_i, pj, end_j = best
    if d == 0.0:
        return 0.0, (pi, pj)
    seg = (pj - pi).astype(float) / d
    phi_i = _fold_angle(seg, endpoint_tangent(traj_i.points, end_i))
    phi_j = _fold_angle(seg, endpoint_tangent(traj_j.points, end_j))
    return d * (1.0 + lambda_a * (phi_i + phi_j)), (pi, pj)


def _segment_path(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    d = float(np.hypot(*(q - p)))
    n = max(2, int(np.ceil(d)) + 1)
    xs = np.linspace(p[0], q[0], n)
    ys = np.linspace(p[1], q[1], n)
    theta = float(np.arctan2(q[1] - p[1], q[0] - p[0])) % (2 * np.pi)
    return GeodesicPath(np.column_stack([xs, ys, np.full(n, theta)]))


def build_group_angle_graph(trajectories, masks, lambda_a=1.0):
    """Trajectory graph with straight-segment bridges (baseline weights)."""
    graph = TrajectoryGraph()
    by_id = {t.id: t for t in trajectories}
    for t in trajectories:
        graph.add_node(t.id, t)
    for i, j in adjacency_pairs(masks):
        w, (pi, pj) = group_angle_weight(by_id[i], by_id[j], lambda_a)
        graph.add_edge(EdgeRecord(i=i, j=j, weight=w, direction=(i, j),
                                  path=_segment_path(pi, pj),
                                  length_ij=w, length_ji=w))
    return graph


def _local_tangent(points, idx):
    lo, hi = max(0, idx - 2), min(len(points) - 1, idx + 2)
    if hi == lo:
        return np.zeros(2)
    d = (points[hi] - points[lo]).astype(float)
    n = np.linalg.norm(d)
    return d / n if n > 0 else np.zeros(2)


def attach_seeds_angle(graph, seeds, trajectories, masks, lambda_a=1.0):
    """Seed attachment for the straight-segment baseline.

    Seeds on a trajectory pixel alias it; others connect by a straight
    segment to the nearest point of each candidate trajectory (masks
    containing the seed, plus the nearest trajectory), weighted by length
    and the local tangent angle.
    """
    g = graph.copy()
    pixel_owner = {}
    for t in trajectories:
        for x, y in t.points.tolist():
            pixel_owner[(x, y)] = t.id
    next_id = (max(g.nodes) + 1) if g.nodes else 0
    out = []
    for sx, sy in seeds:
        pos = (int(round(sx)), int(round(sy)))
        if pos in pixel_owner:
            out.append(SeedNode(node_id=pixel_owner[pos], position=pos,
                                theta_star=0, n_theta=2,
                                snap_traj=pixel_owner[pos], alias=pixel_owner[pos]))
            continue
        nearest, nearest_d = None, np.inf
        for t in trajectories:
            d = np.hypot(t.points[:, 0] - pos[0], t.points[:, 1] - pos[1]).min()
            if d < nearest_d:
                nearest, nearest_d = t.id, float(d)
        candidates = {m.traj_id for m in masks if m.mask[pos[1], pos[0]]}
        if nearest is not None:
            candidates.add(nearest)
        node = SeedNode(node_id=next_id, position=pos, theta_star=0, n_theta=2,
                        snap_traj=nearest, snap_dist=nearest_d)
        next_id += 1
        g.add_node(node.node_id, node)
        for cand in sorted(candidates):
            t = next(t for t in trajectories if t.id == cand)
            dists = np.hypot(t.points[:, 0] - pos[0], t.points[:, 1] - pos[1])
            k = int(np.argmin(dists))
            d = float(dists[k])
            seg = (t.points[k] - np.asarray(pos)).astype(float)
            phi = _fold_angle(seg, _local_tangent(t.points, k))
            w = d * (1.0 + lambda_a * phi)
            g.add_edge(EdgeRecord(i=node.node_id, j=cand, weight=w,
                                  direction=(node.node_id, cand),
                                  path=_segment_path(pos, t.points[k]),
                                  length_ij=w, length_ji=w))
        out.append(node)
    return g, out


# --- model comparison ----------------------------------------------------

MODELS = ("group-fsr", "group-fe", "group-angle")


def compare_models(scene, config=None, models=MODELS, structure="target"):
    """Run the grouping models on one scene with identical seeds.

    Features and trajectories are computed once and shared. Tracking
    failures are recorded as a zero score with the error message. Returns
    a list of row dicts (scene, model, j, seconds, ...).
    """
    config = (config or PipelineConfig()).validate()
    feat = compute_features(scene.image, sigma=config.sigma, r_min=config.r_min,
                            r_max=config.r_max, n_theta=config.n_theta,
                            alpha=config.alpha, invert=config.invert)
    trajs, lifted, masks = extract_trajectories(
        feat, threshold_quantile=config.threshold_quantile,
        min_len=config.min_len, prolong_len=config.prolong_len, tau=config.tau,
    )
    seeds = scene.seeds[structure]
    gt = scene.gt_masks[structure]

    rows = []
    metric_graphs = {}
    for model in models:
        t0 = time.perf_counter()
        try:
            if model == "group-angle":
                base = build_group_angle_graph(trajs, masks, config.lambda_angle)
                g, snodes = attach_seeds_angle(base, seeds, trajs, masks,
                                               config.lambda_angle)
            else:
                kind = "fsr" if model == "group-fsr" else "fe"
                if kind not in metric_graphs:
                    params = MetricParams(kind=kind, epsilon=config.epsilon,
                                          beta=config.beta, cost=feat.cost,
                                          beta_length=config.beta_length)
                    metric_graphs[kind] = (params, build_graph(
                        lifted, masks, params, window_pad=config.window_pad,
                        engine=config.engine, n_jobs=config.n_jobs))
                params, base = metric_graphs[kind]
                g, snodes = attach_seeds(base, seeds, feat.psi_os, trajs, masks,
                                         params, window_pad=config.window_pad,
                                         engine=config.engine)
            tracked, _ = track_route(g, snodes, seeds)
            score = accuracy(tracked, gt)
            rows.append({
                "scene": f"{scene.kind}-{scene.rng_seed}", "model": model,
                "j": score.j, "seconds": time.perf_counter() - t0,
                "path_pixels": score.path_pixels, "error": "",
            })
        except Exception as exc:  # tracked as a failed run, not a crash
            rows.append({
                "scene": f"{scene.kind}-{scene.rng_seed}", "model": model,
                "j": 0.0, "seconds": time.perf_counter() - t0,
                "path_pixels": 0, "error": f"{type(exc).__name__}: {exc}",
            })
    return rows


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["scene", "model", "j", "seconds"])
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r[k] for k in ("scene", "model", "j", "seconds")})
    return buf.getvalue()


def rows_to_markdown(rows):
    lines = ["| scene | model | J | seconds |", "|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r['scene']} | {r['model']} | {r['j']:.4f} "
                     f"| {r['seconds']:.2f} |")
    return "\n".join(lines) + "\n"
