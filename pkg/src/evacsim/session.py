"""Session orchestration: tick loop, input queue, snapshots, artifacts.

A session owns one mutable copy of the scene, the scenario's NPCs, a story
state and an event log. Inputs are queued and applied at the next tick
(last-wins per kind); every tick runs the same stage order — inputs, physics,
damage/relocation, NPCs, story transitions, telemetry — so a given (config,
seed, input script) reproduces the same event log byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .damage import DEFAULT_RELOCATION_BUDGET, RelocationBatcher, apply_damage, precompute_relocation
from .errors import (
    ConfigError,
    NotTerminalError,
    SessionEndedError,
    UnknownCommandError,
)
from .nav import (
    DEFAULT_WALK_SPEED,
    PlayerPose,
    WaitPoint,
    advance_waitpoint,
    gaze_move,
)
from .npc import DEFAULT_NPC_SPEED, NpcAgent, fire_trigger, tick_npc
from .quake import PhysicsParams, QuakeSignal, _any_motion, generate_signal
from .scene import RegionIndex, SceneGraph, load_scene_file, region_of
from .story import (
    Scenario,
    StoryState,
    advance_story_clock,
    apply_action,
    available_actions,
    build_report,
    load_scenario_file,
    phase_transition,
)
from .telemetry import Event, EventLog, extract_bp_metrics

COMMAND_KINDS = ("look", "move", "select", "abort")


@dataclass
class SessionConfig:
    mode: str
    scene: str
    scenario: str
    seed: int = 0
    occupant_role: str = "visitor"
    tick: float = 1.0 / 50.0
    input: str = "script"  # script | interactive

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path | None = None) -> "SessionConfig":
        try:
            cfg = cls(
                mode=str(raw["mode"]),
                scene=str(raw["scene"]),
                scenario=str(raw["scenario"]),
                seed=int(raw.get("seed", 0)),
                occupant_role=str(raw.get("occupant_role", "visitor")),
                tick=float(raw.get("tick", 1.0 / 50.0)),
                input=str(raw.get("input", "script")),
            )
        except KeyError as exc:
            raise ConfigError(f"config missing key {exc}") from None
        env_seed = os.environ.get("EVACSIM_SEED")
        if env_seed is not None:
            cfg.seed = int(env_seed)
        if base_dir is not None:
            base = Path(base_dir)
            if not Path(cfg.scene).is_absolute():
                cfg.scene = str(base / cfg.scene)
            if not Path(cfg.scenario).is_absolute():
                cfg.scenario = str(base / cfg.scenario)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "SessionConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw, base_dir=Path(path).parent)

    def validate(self) -> None:
        if self.mode not in ("BP", "TP"):
            raise ConfigError(f"mode must be BP or TP, got {self.mode!r}")
        if self.occupant_role not in ("staff", "visitor"):
            raise ConfigError(f"occupant_role must be staff or visitor, got {self.occupant_role!r}")
        if self.tick <= 0:
            raise ConfigError("tick must be > 0")
        for path in (self.scene, self.scenario):
            if not Path(path).is_file():
                raise ConfigError(f"referenced file does not exist: {path}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "scene": self.scene,
            "scenario": self.scenario,
            "seed": self.seed,
            "occupant_role": self.occupant_role,
            "tick": self.tick,
            "input": self.input,
        }

    def session_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return f"{self.mode.lower()}-{hashlib.sha256(blob.encode()).hexdigest()[:10]}"


@dataclass
class Snapshot:
    session_id: str
    tick: int
    phase: str
    player: dict
    objects_delta: dict[str, dict]
    npcs: list[dict]
    actions: list[str]
    panels: list[dict]
    dialogue: list[dict]
    terminal: bool
    report: dict | None = None

    def to_wire(self) -> dict:
        return {
            "type": "snapshot",
            "session_id": self.session_id,
            "tick": self.tick,
            "phase": self.phase,
            "player": self.player,
            "objects_delta": self.objects_delta,
            "npcs": self.npcs,
            "actions": self.actions,
            "panels": self.panels,
            "dialogue": self.dialogue,
            "terminal": self.terminal,
            "report": self.report,
        }


@dataclass
class SessionArtifacts:
    session_id: str
    config: dict
    seed: int
    aborted: bool
    log_path: str | None = None
    record: dict | None = None
    report: dict | None = None
    command_trace: list[dict] = field(default_factory=list)


def _object_state(obj) -> tuple:
    return (
        obj.pose.position[0],
        obj.pose.position[1],
        obj.pose.position[2],
        obj.pose.yaw,
        obj.current_variant,
        obj.toppled,
    )


class Session:
    def __init__(
        self,
        config: SessionConfig,
        scene: SceneGraph,
        scenario: Scenario,
    ):
        if scenario.mode != config.mode:
            raise ConfigError(
                f"config mode {config.mode} does not match scenario mode {scenario.mode}"
            )
        self.config = config
        self.id = config.session_id()
        self.scene = scene.session_copy()
        self.scenario = scenario
        self.physics = PhysicsParams(dt=config.tick)
        self.physics.validate()
        self.story = StoryState(mode=config.mode, occupant_role=config.occupant_role)
        self.log = EventLog()
        self.npcs: dict[str, NpcAgent] = {a.id: a for a in scenario.fresh_npcs()}
        self.npc_order = sorted(self.npcs)
        self.node_positions = {n.id: n.pos for n in self.scene.walk_nodes.values()}
        self.region_index = RegionIndex(self.scene)

        self.signal: QuakeSignal = generate_signal(
            scenario.quake, scenario.quake.duration, config.seed, sample_dt=config.tick
        )
        self.relocation = None
        if scenario.relocation_regions:
            self.relocation = precompute_relocation(
                self.scene, set(scenario.relocation_regions), self.signal, self.physics
            )
        self._batcher: RelocationBatcher | None = None

        start = self.scene.node(scenario.start_node)
        self.pose = PlayerPose(
            position=start.pos,
            heading=0.0,
            current_region=region_of(self.scene, start.pos).id,
        )
        self.waitpoint: WaitPoint | None = (
            scenario.waitpoints[scenario.start_waitpoint]
            if scenario.mode == "TP" and scenario.start_waitpoint
            else None
        )
        self._travel_queue: list[tuple[float, float]] = []
        self._travel_dest: WaitPoint | None = None

        self.tick_index = 0
        self.live = True
        self.aborted = False
        self.walk_speed = DEFAULT_WALK_SPEED
        self.npc_speed = DEFAULT_NPC_SPEED

        self._pending: dict[str, dict] = {}
        self.command_trace: list[dict] = []
        self._events_this_tick: list[tuple[str, dict]] = []
        self._phase_events: list[str] = []
        self._phase_started_at: dict[str, float] = {"PreQuake": 0.0}
        self._quake_t0: float | None = None
        self._quake_started = False
        self._quake_ended = False
        self._physics_active = False
        self._damage_applied = False
        self._report: dict | None = None
        self._last_obj_state: dict[str, tuple] = {}
        self._dialogue_this_tick: list[dict] = []

        self._emit("SessionStarted", {
            "mode": config.mode,
            "seed": config.seed,
            "occupant_role": config.occupant_role,
            "scenario_quake_s": scenario.quake.duration,
        })
        self._flush_events(0.0)
        self.initial_snapshot = self._snapshot(initial=True)

    # -- input ---------------------------------------------------------------

    def submit_input(self, command: dict) -> dict:
        if not self.live:
            raise SessionEndedError("session has ended")
        kind = command.get("type")
        if kind not in COMMAND_KINDS:
            raise UnknownCommandError(f"unknown command type: {kind!r}")
        if kind == "select":
            action = command.get("action")
            if action not in self.scenario.actions:
                raise UnknownCommandError(f"unknown action id: {action!r}")
        self.command_trace.append({"tick": self.tick_index, **command})
        if kind == "abort":
            self.aborted = True
            self.live = False
            self._emit("SessionEnded", {"completed": False, "aborted": True})
            self._flush_events(self.tick_index * self.physics.dt)
            return {"ok": True, "tick": self.tick_index, "aborted": True}
        self._pending[kind] = command
        return {"ok": True, "tick": self.tick_index}

    # -- tick loop -----------------------------------------------------------

    def tick(self) -> Snapshot:
        if not self.live:
            raise SessionEndedError("session has ended")
        t = self.tick_index * self.physics.dt
        dt = self.physics.dt
        self._dialogue_this_tick = []

        # 1. inputs
        look = self._pending.pop("look", None)
        move = self._pending.pop("move", None)
        select = self._pending.pop("select", None)
        if look is not None:
            self.pose.heading = float(look.get("heading", self.pose.heading))
        for ev in advance_story_clock(self.story, self.scenario, t):
            self._events_this_tick.append(ev)
        if select is not None:
            self._handle_select(str(select.get("action")), t)
        if move is not None and self.scenario.mode == "BP" and bool(move.get("held")):
            self.pose = gaze_move(self.pose, True, dt, self.walk_speed, self.scene)
        self._playback_travel(dt)
        self._detect_region_change()

        # 2. physics
        if self.story.phase == "Earthquake" and self._quake_t0 is None:
            self._quake_t0 = t
            self._quake_started = True
            self._emit("QuakeStarted", {"t": t})
            if self.relocation is not None:
                self._batcher = RelocationBatcher(self.relocation, DEFAULT_RELOCATION_BUDGET)
            self._physics_active = True
        if self._physics_active and self._quake_t0 is not None:
            tau = t - self._quake_t0
            from .quake import step as quake_step

            for ev in quake_step(
                self.scene, self.signal, tau, self.physics, None, self.region_index
            ):
                self._events_this_tick.append((ev.kind, ev.to_payload()))
            if tau > self.signal.duration and not _any_motion(
                self.scene, None, self.region_index
            ):
                self._physics_active = False

        # 3. damage / relocation batches
        self._apply_damage_if_due(t)
        if self._batcher is not None and not self._batcher.complete:
            applied = self._batcher.apply_next(self.scene)
            if applied:
                self._emit(
                    "RelocationProgress",
                    {
                        "applied": applied,
                        "remaining": len(self.relocation.entries) - self._batcher._cursor,
                    },
                )

        # 4. NPCs
        for npc_id in self.npc_order:
            for ev in tick_npc(
                self.npcs[npc_id],
                self.story.phase,
                dt,
                self.node_positions,
                self.npc_speed,
            ):
                self._events_this_tick.append(ev)

        # 5. story transitions
        self._run_transitions(t)
        self._probe_time_triggers(t)
        if self.story.terminal and self.live:
            self._finish_terminal(t)

        # 6. telemetry
        self._flush_events(t)

        self.tick_index += 1
        return self._snapshot()

    # -- stages --------------------------------------------------------------

    def _handle_select(self, action_id: str, t: float) -> None:
        from .errors import ActionUnavailableError

        if self.scenario.mode == "TP":
            if self.waitpoint is None:
                return  # traveling between wait points: selections are dropped
            wp = self.waitpoint
            try:
                events, phase_events = apply_action(
                    self.story,
                    self.scenario,
                    self.scene,
                    self.npcs,
                    action_id,
                    t,
                    region_of(self.scene, self.pose.position).id,
                    waitpoint=wp,
                )
            except ActionUnavailableError:
                return
            self._events_this_tick.extend(events)
            self._phase_events.extend(phase_events)
            self._fire_player_action_triggers(action_id)
            if action_id in wp.outgoing:
                nxt, trajectory = advance_waitpoint(wp, action_id, self.scenario.waitpoints)
                if self.story.terminal:
                    self._arrive_at(nxt, teleport=True)
                elif nxt.id != wp.id or trajectory:
                    points = [self.node_positions[n] for n in trajectory]
                    dest_pos = self.node_positions[nxt.node]
                    if not points or points[-1] != dest_pos:
                        points.append(dest_pos)
                    self._travel_queue = points
                    self._travel_dest = nxt
                    self.waitpoint = None
        else:
            try:
                events, phase_events = apply_action(
                    self.story,
                    self.scenario,
                    self.scene,
                    self.npcs,
                    action_id,
                    t,
                    self.pose.current_region,
                )
            except ActionUnavailableError:
                return
            self._events_this_tick.extend(events)
            self._phase_events.extend(phase_events)
            self._fire_player_action_triggers(action_id)

    def _fire_player_action_triggers(self, action_id: str) -> None:
        probe = {"kind": "player_action", "action": action_id}
        for npc_id in self.npc_order:
            agent = self.npcs[npc_id]
            if agent.interactive:
                self._events_this_tick.extend(
                    fire_trigger(agent, probe, self.node_positions)
                )

    def _playback_travel(self, dt: float) -> None:
        if not self._travel_queue:
            return
        budget = self.walk_speed * dt
        x, y = self.pose.position
        while budget > 0 and self._travel_queue:
            tx, ty = self._travel_queue[0]
            dist = math.hypot(tx - x, ty - y)
            if dist <= budget:
                x, y = tx, ty
                budget -= dist
                self._travel_queue.pop(0)
            else:
                x += (tx - x) / dist * budget
                y += (ty - y) / dist * budget
                budget = 0.0
        self.pose.position = (x, y)
        if not self._travel_queue and self._travel_dest is not None:
            self._arrive_at(self._travel_dest)

    def _arrive_at(self, wp: WaitPoint, teleport: bool = False) -> None:
        self.waitpoint = wp
        self._travel_dest = None
        self._travel_queue = []
        if teleport:
            self.pose.position = self.node_positions[wp.node]
        self._emit("WaitPointReached", {"waitpoint": wp.id})
        for hook in wp.on_arrival:
            self._run_hook(hook)

    def _run_hook(self, hook: dict) -> None:
        op = hook.get("op")
        if op == "set_flag":
            self.story.flags[str(hook["flag"])] = True
        elif op == "clear_flag":
            self.story.flags[str(hook["flag"])] = False
        elif op == "set_interactable_state":
            self.scene.interactable(str(hook["id"])).state = str(hook["state"])
        elif op == "event":
            self._emit(str(hook["kind"]), dict(hook.get("payload", {})))

    def _detect_region_change(self) -> None:
        region = region_of(self.scene, self.pose.position).id
        if region != self.pose.current_region:
            self.pose.current_region = region
            self._emit("RegionEntered", {"region": region})
            probe = {"kind": "player_enters_region", "region": region}
            for npc_id in self.npc_order:
                agent = self.npcs[npc_id]
                if agent.interactive:
                    self._events_this_tick.extend(
                        fire_trigger(agent, probe, self.node_positions)
                    )

    def _apply_damage_if_due(self, t: float) -> None:
        spec = self.scenario.damage
        if spec is None or self._damage_applied or self._quake_t0 is None:
            return
        tau = t - self._quake_t0
        due = (
            (spec.trigger == "at_quake_start")
            or (spec.trigger == "at_time" and tau >= (spec.trigger_time or 0.0))
            or (spec.trigger == "at_quake_end" and self._quake_ended)
        )
        if due:
            for ev in apply_damage(self.scene, spec):
                self._events_this_tick.append((ev.kind, ev.to_payload()))
            self._damage_applied = True

    def _run_transitions(self, t: float) -> None:
        # Phase-driving events can cascade within one tick (e.g. the shaking
        # ends while the player is already outside the room).
        guard = 0
        while guard < 8:
            guard += 1
            event = self._next_phase_event(t)
            if event is None:
                break
            old = self.story.phase
            new_phase = phase_transition(self.story, event)
            self._phase_started_at[new_phase] = t
            self._emit("PhaseChanged", {"from": old, "to": new_phase, "event": event})
            if event == "quake_ended":
                self._quake_ended = True
                self._emit("QuakeEnded", {"t": t})
                self._apply_damage_if_due(t)
            for hook in self.scenario.phase_hooks.get(new_phase, []):
                self._run_hook(hook)
            probe = {"kind": "phase_change", "phase": new_phase}
            for npc_id in self.npc_order:
                agent = self.npcs[npc_id]
                if agent.interactive:
                    self._events_this_tick.extend(
                        fire_trigger(agent, probe, self.node_positions)
                    )

    def _next_phase_event(self, t: float) -> str | None:
        if self._phase_events:
            return self._phase_events.pop(0)
        phase = self.story.phase
        if (
            phase == "Earthquake"
            and self._quake_t0 is not None
            and (t - self._quake_t0 + self.physics.dt) >= self.signal.duration - 1e-9
        ):
            return "quake_ended"
        region = self.pose.current_region
        if phase == "PreEvacuation" and region != self.scenario.room_region:
            return "left_room"
        if phase == "IndoorEvacuation" and region in self.scenario.outdoor_regions:
            return "exited_building"
        return None

    def _probe_time_triggers(self, t: float) -> None:
        phase = self.story.phase
        started = self._phase_started_at.get(phase)
        if started is None:
            return
        probe = {"kind": "time_elapsed", "phase": phase, "elapsed": t - started}
        for npc_id in self.npc_order:
            agent = self.npcs[npc_id]
            if agent.interactive:
                self._events_this_tick.extend(fire_trigger(agent, probe, self.node_positions))

    def _finish_terminal(self, t: float) -> None:
        if self.scenario.mode == "TP":
            if self.story.phase == "OutdoorEvacuation":
                phase_transition(self.story, "terminal_choice")
                self._emit("PhaseChanged", {"from": "OutdoorEvacuation", "to": "Debrief",
                                            "event": "terminal_choice"})
                self._phase_started_at["Debrief"] = t
            self._flush_events(t)
            report = build_report(self.log, self.scenario)
            self._report = report.to_dict()
            self._emit("ReportShown", {"taken": report.taken_count, "missed": report.missed_count})
        self._emit("SessionEnded", {
            "completed": True,
            "aborted": False,
            "terminal_action": self.story.terminal_action,
        })
        self.live = False

    # -- bookkeeping ---------------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> None:
        self._events_this_tick.append((kind, payload))

    def _flush_events(self, t: float) -> None:
        for kind, payload in self._events_this_tick:
            if kind == "NpcSpoke":
                line = payload.get("line")
                meta = self.scenario.dialogue.get(line, {})
                self._dialogue_this_tick.append(
                    {
                        "npc": payload.get("npc"),
                        "line": line,
                        "speaker": meta.get("speaker", ""),
                        "text": meta.get("text", ""),
                    }
                )
            if kind == "InstructionGiven":
                self.story.flags["instructed"] = True
            self.log.record(Event(t=t, kind=kind, payload=payload))
        self._events_this_tick = []

    def _snapshot(self, initial: bool = False) -> Snapshot:
        delta: dict[str, dict] = {}
        for oid, obj in self.scene.objects.items():
            state = _object_state(obj)
            if initial or self._last_obj_state.get(oid) != state:
                self._last_obj_state[oid] = state
                delta[oid] = {
                    "position": [state[0], state[1], state[2]],
                    "yaw": state[3],
                    "variant": state[4],
                    "toppled": state[5],
                }
        region_id = self.pose.current_region
        if self.scenario.mode == "TP":
            actions = [
                a.id
                for a in available_actions(
                    self.story, self.scenario, self.scene, region_id, self.npcs, self.waitpoint
                )
            ]
            panel_actions = set(actions)
            panels = (
                [
                    {"action": p.action, "label": p.label, "bearing": p.bearing}
                    for p in self.waitpoint.panels
                    if p.action in panel_actions
                ]
                if self.waitpoint is not None
                else []
            )
        else:
            actions = [
                a.id
                for a in available_actions(
                    self.story, self.scenario, self.scene, region_id, self.npcs
                )
            ]
            panels = []
        return Snapshot(
            session_id=self.id,
            tick=self.tick_index,
            phase=self.story.phase,
            player={
                "position": [self.pose.position[0], self.pose.position[1]],
                "heading": self.pose.heading,
                "region": region_id,
                "waitpoint": self.waitpoint.id if self.waitpoint else None,
                "traveling": bool(self._travel_queue),
            },
            objects_delta=delta,
            npcs=[
                {
                    "id": npc_id,
                    "role": self.npcs[npc_id].role,
                    "activity": self.npcs[npc_id].activity,
                    "position": [self.npcs[npc_id].pos[0], self.npcs[npc_id].pos[1]],
                    "special": sorted(self.npcs[npc_id].special_states),
                }
                for npc_id in self.npc_order
            ],
            actions=actions,
            panels=panels,
            dialogue=list(self._dialogue_this_tick),
            terminal=self.story.terminal or not self.live,
            report=self._report,
        )

    def full_state(self) -> dict:
        """Complete object poses/variants; oracle for snapshot delta folding."""
        return {
            oid: {
                "position": [obj.pose.position[0], obj.pose.position[1], obj.pose.position[2]],
                "yaw": obj.pose.yaw,
                "variant": obj.current_variant,
                "toppled": obj.toppled,
            }
            for oid, obj in self.scene.objects.items()
        }

    def mark(self, note: str) -> None:
        self._emit("SnapshotMark", {"note": note})
        self._flush_events(self.tick_index * self.physics.dt)

    # -- artifacts -----------------------------------------------------------

    def finish(self, out_dir: str | Path | None = None) -> SessionArtifacts:
        if self.live:
            raise NotTerminalError("session still live; abort or play to a terminal state")
        artifacts = SessionArtifacts(
            session_id=self.id,
            config=self.config.to_dict(),
            seed=self.config.seed,
            aborted=self.aborted,
            command_trace=list(self.command_trace),
        )
        if not self.aborted:
            if self.config.mode == "BP":
                artifacts.record = extract_bp_metrics(self.log).to_dict()
            else:
                artifacts.report = self._report or build_report(self.log, self.scenario).to_dict()
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            log_path = out / "log.jsonl"
            self.log.save(log_path)
            artifacts.log_path = str(log_path)
            with open(out / "config.json", "w", encoding="utf-8") as fh:
                json.dump({"config": artifacts.config, "seed": artifacts.seed,
                           "session_id": self.id, "aborted": self.aborted}, fh, indent=2)
            with open(out / "commands.jsonl", "w", encoding="utf-8") as fh:
                for cmd in self.command_trace:
                    fh.write(json.dumps(cmd, sort_keys=True, separators=(",", ":")) + "\n")
            if artifacts.record is not None:
                with open(out / "record.json", "w", encoding="utf-8") as fh:
                    json.dump(artifacts.record, fh, indent=2, sort_keys=True)
            if artifacts.report is not None:
                with open(out / "report.json", "w", encoding="utf-8") as fh:
                    json.dump(artifacts.report, fh, indent=2, sort_keys=True)
        return artifacts


def create_session(config: SessionConfig) -> Session:
    scene = load_scene_file(config.scene)
    scenario = load_scenario_file(config.scenario, scene)
    return Session(config, scene, scenario)


def load_script(path: str | Path) -> list[dict]:
    commands = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                commands.append(json.loads(line))
    return commands


def save_script(commands: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cmd in commands:
            fh.write(json.dumps(cmd, sort_keys=True, separators=(",", ":")) + "\n")


def run_scripted_session(
    config: SessionConfig,
    commands: list[dict],
    max_ticks: int = 500_000,
) -> Session:
    """Drive a session from a (tick, command) script until it terminates."""
    session = create_session(config)
    by_tick: dict[int, list[dict]] = {}
    for cmd in commands:
        by_tick.setdefault(int(cmd.get("tick", 0)), []).append(cmd)
    last_scripted = max(by_tick) if by_tick else 0
    while session.live and session.tick_index < max_ticks:
        for cmd in by_tick.get(session.tick_index, []):
            payload = {k: v for k, v in cmd.items() if k != "tick"}
            session.submit_input(payload)
        if not session.live:
            break
        session.tick()
        if session.tick_index > last_scripted + 10_000 and session.live:
            break  # runaway script: bail deterministically
    return session
