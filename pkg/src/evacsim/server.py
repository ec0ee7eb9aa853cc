"""WebSocket wire protocol for interactive clients.

Client to server: {"type": "start", "config": {...}}, then "look" / "move" /
"select" / "abort". Server to client: "snapshot" per tick, one "report" when
the session ends, "error" on bad input. Interactive sessions tick on a timer
at the configured rate; a "time_scale" in the start message speeds that up
for automated drivers.
"""
from __future__ import annotations

import asyncio
import json
import os
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse

from .errors import EvacsimError
from .session import Session, SessionConfig, create_session

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>evacsim</title></head>
<body><h1>evacsim session service</h1>
<p>No client bundle is installed. Connect to <code>/ws</code> with the wire
protocol, or pass --static with a built client.</p></body></html>
"""


def create_app(static_dir: str | None = None, out_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="evacsim")
    artifacts_dir = out_dir or os.environ.get("EVACSIM_LOG_DIR")

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=static_dir, html=True), name="client")

        @app.get("/")
        async def index_redirect():  # pragma: no cover - trivial
            from fastapi.responses import RedirectResponse

            return RedirectResponse("/app/")

    else:

        @app.get("/")
        async def index() -> HTMLResponse:
            return HTMLResponse(_FALLBACK_PAGE)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        session: Session | None = None
        ticker: asyncio.Task | None = None

        async def send_error(message: str) -> None:
            await ws.send_json({"type": "error", "error": message})

        async def tick_loop(sess: Session, time_scale: float) -> None:
            interval = sess.physics.dt / max(time_scale, 1e-6)
            try:
                await ws.send_json(sess.initial_snapshot.to_wire())
                while sess.live:
                    await asyncio.sleep(interval)
                    # The receiver may have aborted the session mid-sleep.
                    if not sess.live:
                        break
                    snapshot = sess.tick()
                    await ws.send_json(snapshot.to_wire())
                await ws.send_json(_report_message(sess))
                if artifacts_dir:
                    sess.finish(Path(artifacts_dir) / sess.id)
            except (WebSocketDisconnect, RuntimeError):
                pass

        try:
            while True:
                raw = await ws.receive_text()
                try:
                    message = json.loads(raw)
                except json.JSONDecodeError:
                    await send_error("message is not valid JSON")
                    continue
                kind = message.get("type")
                if kind == "start":
                    if session is not None:
                        await send_error("session already started")
                        continue
                    try:
                        config = SessionConfig.from_dict(message.get("config", {}))
                        session = create_session(config)
                    except EvacsimError as exc:
                        await send_error(str(exc))
                        continue
                    time_scale = float(message.get("time_scale", 1.0))
                    ticker = asyncio.create_task(tick_loop(session, time_scale))
                elif kind in ("look", "move", "select", "abort"):
                    if session is None:
                        await send_error("no session started")
                        continue
                    try:
                        session.submit_input(message)
                    except EvacsimError as exc:
                        await send_error(str(exc))
                else:
                    await send_error(f"unknown message type: {kind!r}")
        except WebSocketDisconnect:
            pass
        finally:
            if ticker is not None:
                ticker.cancel()

    return app


def _report_message(session: Session) -> dict:
    artifacts = session.finish()
    payload: dict = {
        "type": "report",
        "session_id": session.id,
        "aborted": session.aborted,
        "mode": session.config.mode,
    }
    if artifacts.record is not None:
        payload["record"] = artifacts.record
    if artifacts.report is not None:
        payload["report"] = artifacts.report
    return payload
