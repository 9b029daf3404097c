"""Command-line interface: offline preparation, tracking, benchmarks, scoring."""

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from .config import PipelineConfig
from .errors import NoRouteError, TubetrackError
from .images import load_gray, save_gray
from .session import path_json, prepare, track
from . import synth


def _load_config(config_path, overrides):
    config = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
    if overrides:
        parsed = {}
        for item in overrides:
            key, _, value = item.partition("=")
            try:
                parsed[key] = json.loads(value)
            except json.JSONDecodeError:
                parsed[key] = value
        config = config.merged(parsed)
    return config.validate()


def _parse_points(text):
    points = []
    for chunk in text.split(";"):
        x, y = chunk.split(",")
        points.append((float(x), float(y)))
    return points


@click.group()
def main():
    """Tubular-structure centerline tracking."""


@main.command("prepare")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--cache", "cache_dir", type=click.Path(), default=".tubetrack-cache")
@click.option("--set", "overrides", multiple=True,
              help="Override a config key, e.g. --set threshold_quantile=0.9")
def prepare_cmd(image_path, config_path, cache_dir, overrides):
    """Build (or load) the feature field, trajectories and graphs."""
    config = _load_config(config_path, overrides)
    t0 = time.time()
    session = prepare(load_gray(image_path), config, cache_dir=cache_dir)
    click.echo(json.dumps({
        "session": session.session_id,
        "trajectories": len(session.trajectories),
        "edges": {k: len(g.edges) for k, g in session.graphs.items()},
        "seconds": round(time.time() - t0, 2),
        "cached": bool(session.meta.get("loaded_from_cache")),
    }))


@main.command("track")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--points", required=True,
              help="Seed pixels 'x1,y1;x2,y2[;x3,y3]' (origin top-left, y down)")
@click.option("--metric", default=None, type=click.Choice(["fsr", "fe", "angle"]))
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--cache", "cache_dir", type=click.Path(), default=".tubetrack-cache")
@click.option("--set", "overrides", multiple=True)
def track_cmd(image_path, points, metric, out_path, config_path, cache_dir, overrides):
    """Trace the centerline through the given seed points."""
    config = _load_config(config_path, overrides)
    session = prepare(load_gray(image_path), config, cache_dir=cache_dir)
    try:
        report = track(session, _parse_points(points), metric=metric)
    except NoRouteError as exc:
        click.echo(json.dumps({"error": "no-route", "detail": str(exc),
                               "component_size": exc.component_size,
                               "nearest_trajectories": exc.nearest}))
        sys.exit(2)
    if out_path:
        Path(out_path).write_text(path_json(report))
    summary = {k: report[k] for k in ("metric", "nodes", "edge_weights", "seconds")}
    if "j_score" in report:
        summary["j_score"] = report["j_score"]
    click.echo(json.dumps(summary))


@main.command()
@click.option("--scene", "kind", required=True,
              type=click.Choice(list(synth.SCENE_KINDS)))
@click.option("--seed", "rng_seed", default=2, type=int)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--size", default="474x321", help="Scene size WxH")
@click.option("--sigma-n", default=0.15, type=float)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--set", "overrides", multiple=True)
@click.option("--save-scene", "scene_dir", type=click.Path(), default=None,
              help="Persist the scene image (PNG) and ground truth (JSON)")
def bench(kind, rng_seed, report_path, size, sigma_n, config_path, overrides,
          scene_dir):
    """Generate a synthetic scene and compare the grouping models on it."""
    w, h = (int(v) for v in size.lower().split("x"))
    config = _load_config(config_path, overrides)
    scene = synth.generate_scene(kind, shape=(h, w), sigma_n=sigma_n,
                                 rng_seed=rng_seed)
    if scene_dir:
        out = Path(scene_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_gray(out / f"{kind}-{rng_seed}.png", scene.image)
        gt_doc = {
            "kind": kind, "rng_seed": rng_seed, "sigma_n": sigma_n,
            "seeds": {k: [[int(x), int(y)] for x, y in v]
                      for k, v in scene.seeds.items()},
            "gt_pixels": {name: np.argwhere(mask)[:, ::-1].tolist()
                          for name, mask in scene.gt_masks.items()},
        }
        (out / f"{kind}-{rng_seed}.gt.json").write_text(json.dumps(gt_doc))
    rows = synth.compare_models(scene, config)
    csv_text = synth.rows_to_csv(rows)
    if report_path:
        Path(report_path).write_text(csv_text)
    click.echo(synth.rows_to_markdown(rows))


@main.command("eval")
@click.option("--path", "path_file", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
def eval_cmd(path_file, gt_path):
    """Score a tracked path JSON against a ground-truth mask image."""
    doc = json.loads(Path(path_file).read_text())
    polyline = doc["polyline"] if isinstance(doc, dict) else doc
    gt = load_gray(gt_path) > 0.5
    score = synth.accuracy(np.asarray(polyline), gt)
    click.echo(json.dumps({"j": score.j, "path_pixels": score.path_pixels,
                           "hit_pixels": score.hit_pixels}))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8021, type=int)
@click.option("--cache", "cache_dir", type=click.Path(), default=None)
def serve(host, port, cache_dir):
    """Run the interactive HTTP service."""
    from .server import main as run_server

    run_server(host=host, port=port, cache_dir=cache_dir)


if __name__ == "__main__":
    main()
