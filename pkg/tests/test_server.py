from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from evacsim.server import create_app
from evacsim.session import run_scripted_session, SessionConfig

from conftest import tp_config


def start_message(short_paths, seed=7):
    return {
        "type": "start",
        "time_scale": 200.0,
        "config": {
            "mode": "TP",
            "scene": short_paths["scene"],
            "scenario": short_paths["tp"],
            "seed": seed,
        },
    }


def drain_until(ws, wanted, limit=5000):
    for _ in range(limit):
        message = ws.receive_json()
        if message["type"] == wanted:
            return message
    raise AssertionError(f"no {wanted} message within {limit} frames")


def test_root_serves_fallback_page():
    client = TestClient(create_app())
    response = client.get("/")
    assert response.status_code == 200
    assert "evacsim" in response.text


def test_ws_session_streams_snapshots_and_reports_on_abort(short_paths, tmp_path):
    app = create_app(out_dir=str(tmp_path))
    client = TestClient(app)
    with client.websocket_connect("/ws") as ws:
        ws.send_json(start_message(short_paths))
        first = ws.receive_json()
        assert first["type"] == "snapshot"
        assert first["tick"] == 0
        assert first["phase"] == "PreQuake"
        # Choose the only panel on offer, then bail out.
        ws.send_json({"type": "select", "action": "follow_staff"})
        seen_travel = False
        for _ in range(300):
            snap = ws.receive_json()
            assert snap["type"] == "snapshot"
            if snap["player"]["traveling"]:
                seen_travel = True
                break
        assert seen_travel
        ws.send_json({"type": "abort"})
        report = drain_until(ws, "report")
        assert report["aborted"] is True
        assert report["mode"] == "TP"
    # Artifacts were written for the aborted session.
    dirs = list(tmp_path.iterdir())
    assert dirs and (dirs[0] / "commands.jsonl").exists()


def test_ws_rejects_bad_messages(short_paths):
    client = TestClient(create_app())
    with client.websocket_connect("/ws") as ws:
        ws.send_json({"type": "select", "action": "x"})
        assert ws.receive_json()["type"] == "error"
        ws.send_json({"type": "bogus"})
        assert ws.receive_json()["type"] == "error"
        ws.send_json({"type": "start", "config": {"mode": "BP", "scene": "/missing",
                                                  "scenario": "/missing"}})
        assert ws.receive_json()["type"] == "error"


def test_ws_command_trace_replays_identically(short_paths, tmp_path):
    """Engine-side client parity: a live WS session's captured command stream
    replayed headlessly yields the same event log."""
    app = create_app(out_dir=str(tmp_path))
    client = TestClient(app)
    with client.websocket_connect("/ws") as ws:
        ws.send_json(start_message(short_paths, seed=9))
        ws.receive_json()
        ws.send_json({"type": "look", "heading": 0.5})
        for _ in range(20):
            ws.receive_json()
        ws.send_json({"type": "select", "action": "follow_staff"})
        for _ in range(40):
            ws.receive_json()
        ws.send_json({"type": "abort"})
        drain_until(ws, "report")
    run_dir = next(tmp_path.iterdir())
    captured = [json.loads(line) for line in
                (run_dir / "commands.jsonl").read_text().splitlines()]
    live_log = (run_dir / "log.jsonl").read_text()

    replay = run_scripted_session(tp_config(short_paths, seed=9), captured)
    assert replay.log.to_jsonl() == live_log
