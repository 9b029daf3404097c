"""HTTP service for the interactive tracking loop.

Sessions are immutable once prepared; concurrent track requests share them
read-only. A per-image build lock prevents duplicate preparation when the
same image is posted twice concurrently.
"""

import base64
import io
import tempfile
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Request, UploadFile
from fastapi.responses import JSONResponse, Response

from . import synth
from .config import PipelineConfig
from .errors import NoRouteError, TubetrackError
from .images import load_gray, save_gray
from .session import prepare, track


def _zeta_png_base64(zeta):
    peak = zeta.max()
    norm = zeta / peak if peak > 0 else zeta
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray((norm * 255).astype(np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def _session_summary(sid, session):
    h, w = session.image.shape
    return {
        "session_id": sid,
        "width": int(w),
        "height": int(h),
        "n_trajectories": len(session.trajectories),
        "trajectories": [
            {"id": int(t.id), "points": t.points.tolist()}
            for t in session.trajectories
        ],
        "has_gt": session.gt_mask is not None,
        "config": session.config.to_dict(),
    }


def create_app(cache_dir=None):
    app = FastAPI(title="tubetrack")
    app.state.sessions = {}
    app.state.locks = {}
    app.state.global_lock = threading.Lock()
    app.state.cache_dir = cache_dir

    def build_lock(key):
        with app.state.global_lock:
            return app.state.locks.setdefault(key, threading.Lock())

    @app.exception_handler(TubetrackError)
    async def tubetrack_error(request, exc):
        status = 422 if isinstance(exc, NoRouteError) else 400
        detail = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, NoRouteError):
            detail["component_size"] = exc.component_size
            detail["nearest_trajectories"] = exc.nearest
        return JSONResponse(status_code=status, content=detail)

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.json()
        overrides = body.get("config") or {}
        config = PipelineConfig.from_dict(overrides)
        gt_mask = None
        if body.get("demo"):
            kind = body["demo"]
            scene = synth.generate_scene(
                kind, shape=tuple(body.get("shape", (321, 474))),
                widths=body.get("widths", 5.0),
                sigma_n=body.get("sigma_n", 0.15),
                rng_seed=body.get("rng_seed", 2),
            )
            image = scene.image
            gt_mask = scene.gt_masks["target"]
        elif body.get("path"):
            image = load_gray(body["path"])
        else:
            return JSONResponse(status_code=400, content={
                "error": "InputError",
                "detail": "provide 'demo' kind, 'path', or upload to /sessions/upload",
            })
        key = config.cache_key(image.astype("<f4").tobytes())
        with build_lock(key):
            session = prepare(image, config, cache_dir=app.state.cache_dir,
                              gt_mask=gt_mask)
            sid = uuid.uuid4().hex[:12]
            app.state.sessions[sid] = session
        return _session_summary(sid, session)

    @app.post("/sessions/upload")
    async def create_session_upload(file: UploadFile = File(...)):
        data = await file.read()
        with tempfile.NamedTemporaryFile(suffix=Path(file.filename or "img.png").suffix,
                                         delete=False) as tmp:
            tmp.write(data)
            tmp_path = tmp.name
        image = load_gray(tmp_path)
        config = PipelineConfig()
        key = config.cache_key(image.astype("<f4").tobytes())
        with build_lock(key):
            session = prepare(image, config, cache_dir=app.state.cache_dir)
            sid = uuid.uuid4().hex[:12]
            app.state.sessions[sid] = session
        return _session_summary(sid, session)

    def get_session(sid):
        session = app.state.sessions.get(sid)
        if session is None:
            return None
        return session

    @app.get("/sessions/{sid}/trajectories")
    async def session_trajectories(sid: str):
        session = get_session(sid)
        if session is None:
            return JSONResponse(status_code=404,
                                content={"error": "NotFound", "detail": sid})
        return {
            "trajectories": [
                {"id": int(t.id), "points": t.points.tolist()}
                for t in session.trajectories
            ],
            "zeta_png": _zeta_png_base64(session.features.zeta),
        }

    @app.get("/sessions/{sid}/image")
    async def session_image(sid: str):
        session = get_session(sid)
        if session is None:
            return JSONResponse(status_code=404,
                                content={"error": "NotFound", "detail": sid})
        buf = io.BytesIO()
        from PIL import Image

        Image.fromarray((session.image * 255).astype(np.uint8)).save(
            buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/sessions/{sid}/track")
    async def session_track(sid: str, body: dict):
        session = get_session(sid)
        if session is None:
            return JSONResponse(status_code=404,
                                content={"error": "NotFound", "detail": sid})
        points = body.get("points") or []
        metric = body.get("metric")
        report = track(session, points, metric=metric)
        return report

    ui_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dist.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dist, html=True), name="ui")

    return app


def main(host="127.0.0.1", port=8021, cache_dir=None):
    import uvicorn

    uvicorn.run(create_app(cache_dir=cache_dir), host=host, port=port)
