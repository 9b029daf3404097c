"""Offline preparation and interactive tracking.

``prepare`` runs the expensive stages once per (image, config) pair:
features, trajectories, and one bridge-weighted graph per metric (both
lifted metrics plus the straight-segment baseline, so the interactive
stage can switch between them). Results are cached on disk keyed by the
image content hash and the full parameter set; a config change therefore
rebuilds rather than reuses. ``track`` only attaches seeds, routes, and
assembles the centerline, keeping its latency interactive.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .errors import InputError, NoRouteError
from .features import compute_features, load_features, save_features
from .graph import attach_seeds, build_graph, load_graph, save_graph, track_route
from .images import image_bytes
from .lifted import MetricParams
from .synth import attach_seeds_angle, build_group_angle_graph
from .trajectories import (
    build_neighborhood, extract_trajectories, trajectories_from_json,
    trajectories_to_json,
)
from .validation import check_gray_image, check_seeds

METRIC_GRAPHS = ("fsr", "fe", "angle")


@dataclass
class Session:
    session_id: str
    image: np.ndarray
    config: PipelineConfig
    features: object
    trajectories: list
    lifted: list
    masks: list
    graphs: dict
    gt_mask: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def metric_params(self, kind):
        return MetricParams(kind=kind, epsilon=self.config.epsilon,
                            beta=self.config.beta, cost=self.features.cost,
                            beta_length=self.config.beta_length)


def _quantize_features(feat):
    """Round feature planes through the cache precision once, so fresh and
    reloaded sessions produce bit-identical results."""
    for name in ("zeta", "rho", "psi_os", "cost"):
        arr = getattr(feat, name)
        setattr(feat, name, arr.astype("<f4").astype(np.float64))
    return feat


def prepare(image, config=None, cache_dir=None, gt_mask=None):
    """Compute or load everything ``track`` needs for one image."""
    config = (config or PipelineConfig()).validate()
    image = check_gray_image(image)
    key = config.cache_key(image_bytes(image))

    cache = Path(cache_dir) if cache_dir else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
        session = _load_cached(cache, key, image, config, gt_mask)
        if session is not None:
            return session

    feat = _quantize_features(compute_features(
        image, sigma=config.sigma, r_min=config.r_min, r_max=config.r_max,
        n_theta=config.n_theta, alpha=config.alpha, invert=config.invert,
    ))
    trajs, lifted, masks = extract_trajectories(
        feat, threshold_quantile=config.threshold_quantile,
        min_len=config.min_len, prolong_len=config.prolong_len, tau=config.tau,
    )
    graphs = {}
    for kind in ("fsr", "fe"):
        params = MetricParams(kind=kind, epsilon=config.epsilon,
                              beta=config.beta, cost=feat.cost,
                              beta_length=config.beta_length)
        graphs[kind] = build_graph(lifted, masks, params,
                                   window_pad=config.window_pad,
                                   engine=config.engine, n_jobs=config.n_jobs)
    graphs["angle"] = build_group_angle_graph(trajs, masks, config.lambda_angle)

    session = Session(session_id=key, image=image, config=config,
                      features=feat, trajectories=trajs, lifted=lifted,
                      masks=masks, graphs=graphs, gt_mask=gt_mask)
    if cache is not None:
        _save_cached(cache, key, config, session)
    return session


def _cache_paths(cache, key):
    return {
        "features": cache / f"{key}.tff1",
        "trajectories": cache / f"{key}.trajs.json",
        "meta": cache / f"{key}.meta.json",
        "fsr": cache / f"{key}.fsr.tgr1",
        "fe": cache / f"{key}.fe.tgr1",
        "angle": cache / f"{key}.angle.tgr1",
    }


def _save_cached(cache, key, config, session):
    paths = _cache_paths(cache, key)
    save_features(paths["features"], session.features)
    paths["trajectories"].write_text(
        trajectories_to_json(session.trajectories, params=config.to_dict())
    )
    for kind in METRIC_GRAPHS:
        save_graph(paths[kind], session.graphs[kind])
    paths["meta"].write_text(json.dumps(
        {"config": config.to_dict(), "key": key}, sort_keys=True))


def _load_cached(cache, key, image, config, gt_mask):
    paths = _cache_paths(cache, key)
    if not all(p.exists() for p in paths.values()):
        return None
    feat = load_features(paths["features"])
    trajs, _ = trajectories_from_json(paths["trajectories"].read_text())
    masks = [build_neighborhood(t, config.prolong_len, config.tau, feat.shape)
             for t in trajs]
    lifted_graphs = {kind: load_graph(paths[kind]) for kind in METRIC_GRAPHS}
    from .trajectories import LiftedTrajectory

    lifted = [lifted_graphs["fsr"].nodes[t.id] for t in trajs
              if isinstance(lifted_graphs["fsr"].nodes.get(t.id), LiftedTrajectory)]
    return Session(session_id=key, image=image, config=config, features=feat,
                   trajectories=trajs, lifted=lifted, masks=masks,
                   graphs=lifted_graphs, gt_mask=gt_mask,
                   meta={"loaded_from_cache": True})


def track(session, seeds, metric=None):
    """Attach seeds, route through the graph, and assemble the centerline.

    Returns a report dict with the path, the node sequence, per-edge
    weights, and wall-time breakdown. Raises NoRouteError (with the source
    component size) when the seeds cannot be connected.
    """
    metric = (metric or session.config.metric).lower()
    if metric not in METRIC_GRAPHS:
        raise InputError(f"metric must be one of {METRIC_GRAPHS}, got {metric!r}")
    seeds = check_seeds(seeds, session.image.shape)
    positions = [(int(round(x)), int(round(y))) for x, y in seeds]

    t0 = time.perf_counter()
    if metric == "angle":
        graph, seed_nodes = attach_seeds_angle(
            session.graphs["angle"], positions, session.trajectories,
            session.masks, session.config.lambda_angle)
    else:
        graph, seed_nodes = attach_seeds(
            session.graphs[metric], positions, session.features.psi_os,
            session.trajectories, session.masks, session.metric_params(metric),
            window_pad=session.config.window_pad, engine=session.config.engine)
    attach_seconds = time.perf_counter() - t0

    try:
        tracked, dijkstra_seconds = track_route(graph, seed_nodes, positions)
    except NoRouteError as exc:
        raise _with_nearest_reachable(exc, graph, session, positions) from None

    edge_weights = []
    for a, b in zip(tracked.nodes, tracked.nodes[1:]):
        rec = graph.edge(a, b)
        edge_weights.append({"edge": [int(a), int(b)],
                             "weight": None if rec is None else rec.weight})
    report = {
        "metric": metric,
        "path": tracked.to_json_dict(),
        "nodes": [int(n) for n in tracked.nodes],
        "edge_weights": edge_weights,
        "seconds": {
            "attach": attach_seconds,
            "dijkstra": dijkstra_seconds,
            "total": time.perf_counter() - t0,
        },
    }
    if session.gt_mask is not None:
        from .synth import accuracy

        report["j_score"] = accuracy(tracked, session.gt_mask).j
    return report


def _with_nearest_reachable(exc, graph, session, positions):
    """Rebuild a no-route error listing the trajectories reachable from the
    source side, ordered by distance to the unreached seed."""
    reachable = set()
    queue = [exc.src]
    while queue:
        node = queue.pop()
        if node in reachable:
            continue
        reachable.add(node)
        queue.extend(graph.neighbors(node))
    target_xy = positions[-1]
    by_dist = []
    for t in session.trajectories:
        if t.id in reachable:
            d = float(np.hypot(t.points[:, 0] - target_xy[0],
                               t.points[:, 1] - target_xy[1]).min())
            by_dist.append((d, t.id))
    nearest = [tid for _, tid in sorted(by_dist)[:5]]
    return NoRouteError(exc.src, exc.dst, len(reachable), nearest=nearest)


def path_json(report):
    """Canonical byte-stable JSON for the tracked path alone."""
    return json.dumps(report["path"], sort_keys=True, separators=(",", ":"))
