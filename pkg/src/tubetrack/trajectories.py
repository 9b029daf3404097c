"""Disjoint centerline trajectories from a vessel score map.

Thresholding the score map gives a tubularity segmentation; iterative
thinning reduces it to a one-pixel skeleton; removing branch points (skeleton
pixels with three or more skeleton neighbors) and short fragments leaves
disjoint open polylines. Each trajectory is lifted to the orientation domain
and given a tubular neighborhood used for adjacency tests.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.morphology import thin as _guo_hall_thin

from .errors import ConfigurationError

EIGHT_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass
class Trajectory:
    """Ordered 8-connected simple path of pixel coordinates (x, y)."""

    id: int
    points: np.ndarray  # (n, 2) int, columns (x, y)

    def __len__(self):
        return len(self.points)


@dataclass
class LiftedTrajectory:
    """A trajectory paired with its two per-pixel orientation bins."""

    base_id: int
    points: np.ndarray       # (n, 2) int, (x, y)
    theta_star: np.ndarray   # (n,) int, bins in [0, n_theta/2)
    n_theta: int

    def lifted_points(self):
        """All (x, y, bin) triples: theta* and theta* + pi per pixel."""
        half = self.n_theta // 2
        first = np.column_stack([self.points, self.theta_star])
        second = np.column_stack([self.points, self.theta_star + half])
        return np.concatenate([first, second], axis=0)


@dataclass
class NeighborhoodMask:
    """Tubular neighborhood of a tangent-prolonged trajectory."""

    traj_id: int
    prolonged: np.ndarray  # (m, 2) int, (x, y), prolongation included
    mask: np.ndarray       # (H, W) bool
    tau: float = 0.0


def segment_tubularity(zeta, threshold_quantile):
    """Binary tubularity mask: score at or above the given quantile of the
    nonzero scores. An all-zero score map yields an empty mask and a warning.
    """
    if not 0.0 < float(threshold_quantile) < 1.0:
        raise ConfigurationError(
            f"threshold_quantile must be in (0, 1), got {threshold_quantile}"
        )
    zeta = np.asarray(zeta, dtype=np.float64)
    floor = max(zeta.max() * 1e-9, 1e-12)
    nonzero = zeta[zeta > floor]
    if nonzero.size == 0:
        warnings.warn("vessel score map is identically zero; empty segmentation")
        return np.zeros(zeta.shape, dtype=bool)
    thr = np.quantile(nonzero, float(threshold_quantile))
    return zeta >= thr


def skeletonize(mask):
    """One-pixel-wide 8-connected skeleton via iterative thinning."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros_like(mask)
    return _guo_hall_thin(mask)


def _neighbor_counts(skeleton):
    kernel = np.ones((3, 3), dtype=int)
    kernel[1, 1] = 0
    return ndimage.convolve(skeleton.astype(int), kernel, mode="constant", cval=0)


def branch_points(skeleton):
    """Skeleton pixels with >= 3 skeleton 8-neighbors."""
    return skeleton & (_neighbor_counts(skeleton) >= 3)


def _trace_component(pixels):
    """Order a set of (y, x) pixels with degree <= 2 into one or more paths."""
    pixel_set = set(pixels)
    nbrs = {
        p: [q for d in EIGHT_NEIGHBORS if (q := (p[0] + d[0], p[1] + d[1])) in pixel_set]
        for p in pixels
    }
    visited = set()
    paths = []
    while len(visited) < len(pixels):
        remaining = [p for p in sorted(pixel_set) if p not in visited]
        endpoints = [p for p in remaining
                     if sum(q not in visited for q in nbrs[p]) <= 1]
        start = endpoints[0] if endpoints else remaining[0]
        path = [start]
        visited.add(start)
        current = start
        while True:
            nxt = [q for q in nbrs[current] if q not in visited]
            if not nxt:
                break
            current = sorted(nxt)[0]
            path.append(current)
            visited.add(current)
        paths.append(path)
    return paths


def split_trajectories(skeleton, min_len):
    """Break a skeleton into disjoint trajectories.

    Branch points are deleted, each remaining 8-connected component is traced
    into an ordered polyline, and components shorter than ``min_len`` grid
    points are discarded.
    """
    skeleton = np.asarray(skeleton, dtype=bool)
    remain = skeleton & ~branch_points(skeleton)
    labels, n_labels = ndimage.label(remain, structure=np.ones((3, 3), dtype=int))
    trajectories = []
    next_id = 0
    for lab in range(1, n_labels + 1):
        ys, xs = np.nonzero(labels == lab)
        pixels = list(zip(ys.tolist(), xs.tolist()))
        for path in _trace_component(pixels):
            if len(path) < int(min_len):
                continue
            pts = np.array([(x, y) for y, x in path], dtype=int)
            trajectories.append(Trajectory(id=next_id, points=pts))
            next_id += 1
    return trajectories


def lift_trajectory(traj, psi_os):
    """Assign each trajectory pixel its best orientation bin in [0, pi).

    The lifted set holds both that bin and its half-turn twin, so it always
    has exactly twice as many points as the base trajectory.
    """
    n_theta = psi_os.shape[2]
    half = n_theta // 2
    xs, ys = traj.points[:, 0], traj.points[:, 1]
    theta_star = np.argmax(psi_os[ys, xs, :half], axis=1).astype(int)
    return LiftedTrajectory(base_id=traj.id, points=traj.points.copy(),
                            theta_star=theta_star, n_theta=n_theta)


def endpoint_tangent(points, end, window=5):
    """Outward unit tangent at one end of a polyline.

    Least-squares line over the last ``window`` points, oriented away from
    the polyline interior. ``end`` is 'first' or 'last'.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return np.zeros(2)
    seg = pts[:window] if end == "first" else pts[-window:]
    centered = seg - seg.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    d = vt[0]
    tip = pts[0] if end == "first" else pts[-1]
    outward = tip - seg.mean(axis=0)
    if np.dot(d, outward) < 0:
        d = -d
    n = np.linalg.norm(d)
    return d / n if n > 0 else np.zeros(2)


def prolong_polyline(points, prolong_len, shape):
    """Extend a polyline at both ends along its endpoint tangents.

    Extension pixels are rounded to the grid and clipped at the image
    border; duplicates are dropped.
    """
    pts = np.asarray(points, dtype=int)
    if prolong_len <= 0 or len(pts) < 2:
        return pts.copy()
    h, w = shape
    pieces = []
    for end in ("first", "last"):
        d = endpoint_tangent(pts, end)
        tip = pts[0] if end == "first" else pts[-1]
        ext = []
        for t in range(1, int(prolong_len) + 1):
            q = np.rint(tip + t * d).astype(int)
            if not (0 <= q[0] < w and 0 <= q[1] < h):
                break
            if len(ext) == 0 or (q != ext[-1]).any():
                ext.append(q)
        pieces.append(np.array(ext, dtype=int).reshape(-1, 2))
    head = pieces[0][::-1]
    return np.concatenate([head, pts, pieces[1]], axis=0)


def build_neighborhood(traj, prolong_len, tau, shape):
    """Tubular neighborhood: pixels strictly within ``tau`` of the prolonged
    trajectory."""
    if tau <= 0:
        raise ConfigurationError(f"tau must be > 0, got {tau}")
    prolonged = prolong_polyline(traj.points, prolong_len, shape)
    occupancy = np.ones(shape, dtype=bool)
    occupancy[prolonged[:, 1], prolonged[:, 0]] = False
    dist = ndimage.distance_transform_edt(occupancy)
    return NeighborhoodMask(traj_id=traj.id, prolonged=prolonged,
                            mask=dist < float(tau), tau=float(tau))


def adjacent(mask_i, prolonged_j):
    """True when any pixel of the prolonged polyline lies in the mask."""
    pts = np.asarray(prolonged_j, dtype=int)
    if pts.size == 0:
        return False
    return bool(mask_i.mask[pts[:, 1], pts[:, 0]].any())


def extract_trajectories(feat, threshold_quantile=0.6, min_len=5,
                         prolong_len=10, tau=5.0):
    """Full extraction: segmentation, thinning, splitting, lifting, masks.

    Returns (trajectories, lifted, masks); all three lists align by index.
    """
    mask = segment_tubularity(feat.zeta, threshold_quantile)
    trajectories = []
    if mask.any():
        trajectories = split_trajectories(skeletonize(mask), min_len)
    lifted = [lift_trajectory(t, feat.psi_os) for t in trajectories]
    masks = [build_neighborhood(t, prolong_len, tau, feat.shape) for t in trajectories]
    return trajectories, lifted, masks


def trajectories_to_json(trajectories, params=None):
    doc = {
        "trajectories": [
            {"id": t.id, "points": t.points.tolist()} for t in trajectories
        ],
        "params": dict(params or {}),
    }
    return json.dumps(doc, sort_keys=True)


def trajectories_from_json(text):
    doc = json.loads(text)
    return [
        Trajectory(id=int(item["id"]), points=np.array(item["points"], dtype=int))
        for item in doc["trajectories"]
    ], doc.get("params", {})
