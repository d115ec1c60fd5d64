"""HTTP service exposing batch runs and streaming oracle sessions.

A session holds one replay engine; clients push ticks and get back the step
record with the consensus interval computed before the tick's prices entered
any state. Batch runs execute the same pipeline the CLI uses and return the
summary plus the artifact paths.
"""

from __future__ import annotations

import tempfile
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import runner
from ..feeds import FeedFormatError, ReplayEngine, Tick
from ..intervals import default_beta_hat
from ..metrics import summarize
from ..predictors import KalmanSettings, PredictorKind, make_predictor
from .models import (
    RunRequest,
    RunResponse,
    SessionCreated,
    SessionSpec,
    StepOut,
    TickIn,
)


@dataclass
class _Session:
    engine: ReplayEngine
    lock: threading.Lock


def _build_engine(spec: SessionSpec) -> ReplayEngine:
    if len(set(spec.sources)) != len(spec.sources):
        raise ValueError("duplicate source names")
    beta_hat = spec.beta_hat if spec.beta_hat is not None else default_beta_hat(len(spec.sources))
    settings = KalmanSettings(
        sigma2_0=spec.predictor.sigma2_0,
        w_bar=spec.predictor.w_bar,
        v_bar=spec.predictor.v_bar,
        w_bar_floor=spec.predictor.w_bar_floor,
        gamma_noise=spec.predictor.gamma_noise,
    )
    predictors = {
        name: make_predictor(
            PredictorKind(spec.predictor.kind),
            alpha_k=spec.alpha / len(spec.sources),
            settings=settings,
            m=spec.mvp.m,
            eta=spec.mvp.eta,
            r=spec.mvp.r,
            tau_max=spec.mvp.tau_max,
            seed=runner.source_seed(spec.seed, i),
        )
        for i, name in enumerate(spec.sources)
    }
    nu = 0.0 if spec.nu == "zero" else spec.nu
    return ReplayEngine(
        sources=spec.sources, predictors=predictors, beta_hat=beta_hat, nu=nu
    )


def create_app(data_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="conoracle", version="0.1.0")
    app.state.sessions = {}
    app.state.data_dir = Path(data_dir) if data_dir else Path(tempfile.gettempdir()) / "conoracle"

    def _session(session_id: str) -> _Session:
        try:
            return app.state.sessions[session_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no session {session_id}") from None

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "sessions": len(app.state.sessions)}

    @app.post("/runs", response_model=RunResponse)
    def runs(request: RunRequest) -> RunResponse:
        try:
            cfg = runner.build_config(request.config)
        except runner.ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        out_dir = request.out_dir or str(app.state.data_dir / f"run-{uuid.uuid4().hex[:12]}")
        try:
            result = runner.run(cfg, out_dir)
        except (runner.ConfigError, FeedFormatError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return RunResponse(
            summary=result.summary, paths=result.paths, out_dir=str(result.out_dir)
        )

    @app.post("/sessions", response_model=SessionCreated)
    def create_session(spec: SessionSpec) -> SessionCreated:
        try:
            engine = _build_engine(spec)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        session_id = uuid.uuid4().hex[:12]
        app.state.sessions[session_id] = _Session(engine=engine, lock=threading.Lock())
        return SessionCreated(
            session_id=session_id, sources=engine.sources, beta_hat=engine.beta_hat
        )

    @app.post("/sessions/{session_id}/ticks", response_model=StepOut)
    def push_tick(session_id: str, tick: TickIn) -> StepOut:
        session = _session(session_id)
        with session.lock:
            try:
                record = session.engine.step(
                    Tick(timestamp=tick.timestamp, prices=dict(tick.prices))
                )
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
        return StepOut.from_record(record)

    @app.get("/sessions/{session_id}/summary")
    def session_summary(session_id: str, warmup: int = 0) -> dict:
        session = _session(session_id)
        with session.lock:
            if not session.engine.records:
                raise HTTPException(status_code=400, detail="session has no ticks yet")
            summary = summarize(session.engine.records, warmup=warmup)
        summary["schema_version"] = runner.SCHEMA_VERSION
        summary["nu"] = session.engine.nu
        summary["beta_hat"] = session.engine.beta_hat
        summary["sources"] = session.engine.sources
        return summary

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        _session(session_id)
        del app.state.sessions[session_id]
        return {"deleted": session_id}

    return app


app = create_app()
