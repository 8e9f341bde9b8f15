"""HTTP facade over the session engine for the browser UI and scripts."""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .generator import SLIDER_FEATURES, Category
from .session import (
    STAGE_RANKING,
    STAGE_REFINEMENT,
    OutOfStageError,
    SessionEngine,
    save_session,
)


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message


def _parse_category(raw) -> Category:
    if isinstance(raw, str) and len(raw) == 2 and set(raw) <= {"0", "1"}:
        return Category(int(raw[0]), int(raw[1]))
    if isinstance(raw, dict):
        try:
            return Category(int(raw["sex_bit"]), int(raw["age_bit"]))
        except (KeyError, TypeError, ValueError):
            pass
    raise _ApiError(400, "invalid_input", f"invalid category {raw!r}")


class SessionCreate(BaseModel):
    category: str | dict
    mode: str = "interactive"


class RankingBody(BaseModel):
    order: list[int]


class SliderBody(BaseModel):
    feature: str
    value: float


def create_app(engine: SessionEngine, sessions_dir: str | Path, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="faceforge")
    sessions_dir = Path(sessions_dir)
    sessions: dict = {}
    locks: dict = {}
    registry_lock = threading.Lock()

    def session_lock(sid: str) -> threading.Lock:
        with registry_lock:
            return locks.setdefault(sid, threading.Lock())

    def get_session(sid: str):
        s = sessions.get(sid)
        if s is None:
            raise _ApiError(404, "not_found", f"unknown session {sid}")
        return s

    @app.exception_handler(_ApiError)
    async def api_error_handler(_req: Request, exc: _ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(404)
    async def not_found_handler(_req: Request, _exc):
        return JSONResponse(status_code=404, content={"code": "not_found", "message": "unknown route"})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"code": "invalid_input", "message": str(exc)})

    @app.exception_handler(Exception)
    async def internal_handler(_req: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"code": "internal", "message": str(exc)})

    def slider_metadata(session=None):
        current = None
        if session is not None and session.reconstructions:
            params = engine.generator.decode_params(engine._refined_latent(session))
            current = {f: params.get(f) for f in SLIDER_FEATURES}
        return [
            {
                "name": f,
                "min": 0.0,
                "max": 1.0,
                "current": current[f] if current else 0.5,
            }
            for f in SLIDER_FEATURES
        ]

    @app.post("/api/sessions", status_code=201)
    def create(body: SessionCreate):
        category = _parse_category(body.category)
        if body.mode not in ("interactive", "simulated"):
            raise _ApiError(400, "invalid_input", f"invalid mode {body.mode!r}")
        session = engine.create_session(category, mode=body.mode)
        sessions[session.id] = session
        save_session(session, sessions_dir)
        return {"session_id": session.id, "stage": session.stage}

    @app.get("/api/sessions/{sid}")
    def get_state(sid: str):
        s = get_session(sid)
        out = {
            "session_id": s.id,
            "stage": s.stage,
            "iteration": s.iteration,
            "category": s.category.key(),
        }
        if s.reconstructions:
            out["reconstruction_svg"] = engine.current_face(s).svg
        if s.final_latent is not None:
            out["final_latent"] = s.final_latent.tolist()
        return out

    @app.get("/api/sessions/{sid}/aux")
    def aux(sid: str):
        s = get_session(sid)
        with session_lock(sid):
            if s.stage != STAGE_RANKING:
                raise _ApiError(409, "out_of_stage", "session is not in the ranking stage")
            aux_set = engine.next_aux_set(s)
            return {
                "iteration": s.iteration + 1,
                "faces": [{"index": k, "svg": img.svg} for k, img in enumerate(aux_set.images)],
            }

    @app.post("/api/sessions/{sid}/ranking")
    def ranking(sid: str, body: RankingBody):
        s = get_session(sid)
        with session_lock(sid):
            if s.stage != STAGE_RANKING:
                raise _ApiError(409, "out_of_stage", "session is not in the ranking stage")
            try:
                result = engine.submit_ranking(s, body.order)
            except ValueError as exc:
                raise _ApiError(400, "invalid_input", str(exc))
            save_session(s, sessions_dir)
            out = {
                "iteration": result["iteration"],
                "stopped": result["stopped"],
                "reconstruction_svg": engine.generator.render_latent(result["w_rec"]).svg,
            }
            if result["stopped"]:
                out["sliders"] = slider_metadata(s)
            return out

    @app.post("/api/sessions/{sid}/slider")
    def slider(sid: str, body: SliderBody):
        s = get_session(sid)
        with session_lock(sid):
            if s.stage != STAGE_REFINEMENT:
                raise _ApiError(409, "out_of_stage", "session is not in the refinement stage")
            if body.feature not in SLIDER_FEATURES:
                raise _ApiError(400, "invalid_input", f"unknown feature {body.feature!r}")
            if not 0.0 < body.value < 1.0:
                raise _ApiError(400, "invalid_input", "slider value must lie strictly inside (0, 1)")
            face = engine.refine(s, body.feature, body.value)
            save_session(s, sessions_dir)
            params = face.params
            return {
                "reconstruction_svg": face.svg,
                "features": {f: params.get(f) for f in SLIDER_FEATURES},
            }

    @app.post("/api/sessions/{sid}/finalize")
    def finalize(sid: str):
        s = get_session(sid)
        with session_lock(sid):
            if s.stage != STAGE_REFINEMENT:
                raise _ApiError(409, "out_of_stage", "session is not in the refinement stage")
            record = engine.finalize(s)
            save_session(s, sessions_dir)
            return {
                "session_id": record.session_id,
                "final_latent": record.final_latent.tolist(),
                "svg": record.svg,
                "n_events": len(record.events),
            }

    @app.get("/api/features")
    def features():
        return slider_metadata()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
