"""Command line entry points: run, serve, quake, analyze, assign, demo.

Report-producing subcommands write machine-readable JSON, an aligned text
table, and a matplotlib figure side by side.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import demo as demo_mod
from .damage import precompute_relocation
from .quake import (
    PhysicsParams,
    QuakeParams,
    export_signal_jsonl,
    generate_signal,
    run_quake,
)
from .scene import load_scene_file
from .session import SessionConfig, load_script, run_scripted_session, save_script
from .stats import (
    assign_groups,
    load_responses,
    render_assessment_text,
    summarize_assessment,
)
from .telemetry import EventLog, extract_bp_metrics


def _default_out() -> str:
    return os.environ.get("EVACSIM_LOG_DIR", "out")


def _quake_params(args) -> QuakeParams:
    rise = args.rise if args.rise is not None else 0.2 * args.duration
    decay = args.decay if args.decay is not None else 0.32 * args.duration
    hold = args.duration - rise - decay
    return QuakeParams(
        peak_accel=args.peak,
        base_frequency=args.freq,
        rise=rise,
        hold=hold,
        decay=decay,
        direction_drift=args.drift,
        intensity_label=args.label,
    )


def cmd_run(args) -> int:
    config = SessionConfig.from_file(args.config)
    commands = load_script(args.script) if args.script else []
    session = run_scripted_session(config, commands, max_ticks=args.max_ticks)
    out = Path(args.out or _default_out())
    artifacts = session.finish(out) if not session.live else None
    if session.live:
        print("session did not reach a terminal state; no artifacts written", file=sys.stderr)
        return 1
    print(f"session {artifacts.session_id}: {len(session.log)} events -> {out}")
    if artifacts.record is not None:
        print(json.dumps(artifacts.record, indent=2, sort_keys=True))
    if artifacts.report is not None:
        taken = artifacts.report["taken"]
        print(f"recommended behaviours taken: {taken}/12")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_quake_gen(args) -> int:
    params = _quake_params(args)
    signal = generate_signal(params, args.duration, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_signal_jsonl(signal, out)
    print(f"wrote {len(signal.samples)} samples to {out}")
    if args.plot:
        from .figures import render_signal_figure

        trace = None
        if args.scene:
            scene = load_scene_file(args.scene)
            _, trace, _ = run_quake(scene.session_copy(), signal, PhysicsParams())
        render_signal_figure(signal, args.plot, trace)
        print(f"wrote figure to {args.plot}")
    return 0


def cmd_quake_precompute(args) -> int:
    scene = load_scene_file(args.scene)
    params = _quake_params(args)
    signal = generate_signal(params, args.duration, args.seed)
    relocation = precompute_relocation(scene, set(args.regions), signal, PhysicsParams())
    relocation.save(args.out)
    print(f"wrote {len(relocation.entries)} final poses to {args.out}")
    return 0


def cmd_analyze_bp(args) -> int:
    log = EventLog.load(args.log)
    record = extract_bp_metrics(log)
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "record.json", "w", encoding="utf-8") as fh:
        json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
    lines = []
    width = max(len(k) for k in record.to_dict())
    for key, value in record.to_dict().items():
        shown = "-" if value is None else value
        lines.append(f"{key.ljust(width)}  {shown}")
    text = "\n".join(lines) + "\n"
    (out / "record.txt").write_text(text, encoding="utf-8")
    from .figures import render_bp_timeline

    render_bp_timeline(log, out / "record.png")
    print(text, end="")
    print(f"wrote record.json / record.txt / record.png to {out}")
    return 0


def cmd_analyze_assessment(args) -> int:
    with open(args.responses, "r", encoding="utf-8") as fh:
        responses = load_responses(json.load(fh))
    table = summarize_assessment(responses)
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "assessment.json", "w", encoding="utf-8") as fh:
        json.dump(table.to_dict(), fh, indent=2, sort_keys=True)
    text = render_assessment_text(table)
    (out / "assessment.txt").write_text(text, encoding="utf-8")
    from .figures import render_assessment_figure

    render_assessment_figure(table, out / "assessment.png")
    print(text, end="")
    print(f"wrote assessment.json / assessment.txt / assessment.png to {out}")
    return 0


def cmd_assign(args) -> int:
    sizes = None
    if args.sizes:
        a, b = args.sizes.split(",")
        sizes = (int(a), int(b))
    assignment = assign_groups(n=args.n, seed=args.seed, sizes=sizes)
    blob = json.dumps(assignment, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(blob + "\n", encoding="utf-8")
    counts = {"BP": 0, "TP": 0}
    for group in assignment.values():
        counts[group] += 1
    print(f"assigned {len(assignment)} participants: BP={counts['BP']} TP={counts['TP']}")
    if not args.out:
        print(blob)
    return 0


def cmd_demo(args) -> int:
    scene_path = demo_mod.data_path("scene_ach5.json")
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    scene = load_scene_file(scene_path)
    mode = args.mode
    scenario_path = demo_mod.data_path(f"scenario_{mode.lower()}.json")
    with open(scenario_path, "r", encoding="utf-8") as fh:
        scenario_doc = json.load(fh)
    quake_s = sum(scenario_doc["quake"]["envelope"].values())
    if mode == "BP":
        commands = demo_mod.bp_script(
            scene, args.variant, quake_s=quake_s,
            instruction_s=scenario_doc["steps"]["instruction_delay_s"],
        )
    else:
        commands = demo_mod.tp_script(args.variant if args.variant != "thorough" else "all",
                                      quake_s=quake_s)
    config = SessionConfig(
        mode=mode, scene=str(scene_path), scenario=str(scenario_path), seed=args.seed
    )
    save_script(commands, out / "script.jsonl")
    session = run_scripted_session(config, commands)
    if session.live:
        print("demo script did not finish the session", file=sys.stderr)
        return 1
    artifacts = session.finish(out)
    print(f"{mode} demo ({args.variant}) finished: {len(session.log)} events -> {out}")
    if artifacts.record:
        print(json.dumps(artifacts.record, indent=2, sort_keys=True))
    if artifacts.report:
        print(f"recommended behaviours taken: {artifacts.report['taken']}/12")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evacsim",
        description="Headless earthquake-evacuation serious-game engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a session from a config and input script")
    p.add_argument("--config", required=True)
    p.add_argument("--script")
    p.add_argument("--out")
    p.add_argument("--max-ticks", type=int, default=500_000)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="serve the wire protocol over WebSocket")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", default=None, help="directory of client assets to serve")
    p.set_defaults(func=cmd_serve)

    quake = sub.add_parser("quake", help="signal generation and pre-simulation")
    quake_sub = quake.add_subparsers(dest="quake_command", required=True)

    def _quake_args(q):
        q.add_argument("--peak", type=float, default=2.5)
        q.add_argument("--freq", type=float, default=2.0)
        q.add_argument("--duration", type=float, default=25.0)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--rise", type=float, default=None)
        q.add_argument("--decay", type=float, default=None)
        q.add_argument("--drift", type=float, default=0.3)
        q.add_argument("--label", default="MMI VII-VIII")

    p = quake_sub.add_parser("gen", help="generate a shaking signal")
    _quake_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--plot")
    p.add_argument("--scene", help="scene for the displacement trace in --plot")
    p.set_defaults(func=cmd_quake_gen)

    p = quake_sub.add_parser("precompute", help="pre-simulate off-stage regions")
    _quake_args(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--regions", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quake_precompute)

    analyze = sub.add_parser("analyze", help="post-session analytics")
    analyze_sub = analyze.add_subparsers(dest="analyze_command", required=True)

    p = analyze_sub.add_parser("bp", help="extract the behavioural record from a log")
    p.add_argument("--log", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze_bp)

    p = analyze_sub.add_parser("assessment", help="summarize questionnaire responses")
    p.add_argument("--responses", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze_assessment)

    p = sub.add_parser("assign", help="randomly split participants into the two groups")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", help="explicit sizes, e.g. 83,87")
    p.add_argument("--out")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("demo", help="scripted playthrough of the shipped scenarios")
    p.add_argument("--mode", choices=["BP", "TP"], default="BP")
    p.add_argument("--variant", default="thorough",
                   help="BP: thorough|careless|returner; TP: all|none|mixed")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
