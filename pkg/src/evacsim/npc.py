"""Routine-driven and event-triggered non-player characters.

Non-interactive agents cycle through an authored daily routine; interactive
agents additionally react to trigger rules (player entering a region, player
actions, phase changes, elapsed phase time). During the shaking phase every
able agent takes cover within one tick.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NotAssistableError, NotInteractiveError, SchemaError, ValidationError
from .geometry import Vec2

ROLES = frozenset({"doctor", "nurse", "visitor", "patient", "admin_staff"})
ACTIVITIES = frozenset({"walking", "talking", "standing", "sitting", "eating", "drinking"})
SPECIAL_STATES = frozenset({"taking_cover", "injured", "under_debris"})
ASSISTABLE = frozenset({"injured", "under_debris"})

DEFAULT_NPC_SPEED = 1.2


@dataclass
class RoutineStep:
    activity: str
    duration: float
    path: list[str] = field(default_factory=list)


@dataclass
class TriggerRule:
    pattern: dict
    responses: list[dict]
    once: bool = True
    fired: bool = False

    def matches(self, event: dict) -> bool:
        if self.once and self.fired:
            return False
        kind = self.pattern.get("kind")
        if kind != event.get("kind"):
            return False
        if kind == "player_enters_region":
            return self.pattern.get("region") == event.get("region")
        if kind == "player_action":
            return self.pattern.get("action") == event.get("action")
        if kind == "phase_change":
            return self.pattern.get("phase") == event.get("phase")
        if kind == "time_elapsed":
            return self.pattern.get("phase") == event.get("phase") and float(
                event.get("elapsed", 0.0)
            ) >= float(self.pattern.get("after", 0.0))
        return False


@dataclass
class NpcAgent:
    id: str
    role: str
    interactive: bool
    routine: list[RoutineStep]
    triggers: list[TriggerRule]
    pos: Vec2
    activity: str = "standing"
    special_states: set[str] = field(default_factory=set)
    dialogue_queue: list[str] = field(default_factory=list)
    # Routine/movement bookkeeping.
    routine_index: int = 0
    routine_elapsed: float = 0.0
    path_index: int = 0
    move_target: Vec2 | None = None

    @property
    def able(self) -> bool:
        return not (self.special_states & ASSISTABLE)


def load_npc(raw: dict) -> NpcAgent:
    npc_id = str(raw.get("id") or "")
    if not npc_id:
        raise SchemaError("npc entry missing id")
    role = raw.get("role", "visitor")
    if role not in ROLES:
        raise SchemaError(f"npc '{npc_id}': unknown role '{role}'")
    routine = []
    for step_raw in raw.get("routine", []):
        activity = step_raw.get("activity", "standing")
        if activity not in ACTIVITIES:
            raise SchemaError(f"npc '{npc_id}': unknown activity '{activity}'")
        duration = float(step_raw.get("duration", 1.0))
        if duration <= 0:
            raise ValidationError(f"npc '{npc_id}': routine durations must be > 0")
        routine.append(
            RoutineStep(activity=activity, duration=duration, path=list(step_raw.get("path", [])))
        )
    triggers = [
        TriggerRule(
            pattern=dict(rule.get("on", {})),
            responses=[dict(r) for r in rule.get("do", [])],
            once=bool(rule.get("once", True)),
        )
        for rule in raw.get("triggers", [])
    ]
    interactive = bool(raw.get("interactive", False))
    if not interactive and triggers:
        raise ValidationError(f"npc '{npc_id}' is non-interactive but declares triggers")
    for rule in triggers:
        if not rule.responses:
            raise ValidationError(f"npc '{npc_id}': trigger rule with empty response")
    agent = NpcAgent(
        id=npc_id,
        role=role,
        interactive=interactive,
        routine=routine,
        triggers=triggers,
        pos=tuple(raw.get("pos", (0.0, 0.0))),  # type: ignore[arg-type]
        activity=str(raw.get("activity", routine[0].activity if routine else "standing")),
        special_states=set(raw.get("special_states", ())),
    )
    return agent


def _walk_towards(agent: NpcAgent, target: Vec2, dt: float, speed: float) -> bool:
    """Move straight toward target; True when arrived."""
    dx = target[0] - agent.pos[0]
    dy = target[1] - agent.pos[1]
    dist = math.hypot(dx, dy)
    reach = speed * dt
    if dist <= reach or dist < 1e-12:
        agent.pos = target
        return True
    agent.pos = (agent.pos[0] + dx / dist * reach, agent.pos[1] + dy / dist * reach)
    return False


def tick_npc(
    agent: NpcAgent,
    phase: str,
    dt: float,
    node_positions: dict[str, Vec2] | None = None,
    speed: float = DEFAULT_NPC_SPEED,
) -> list[tuple[str, dict]]:
    """Advance one agent by dt within the given story phase."""
    if dt <= 0.0:
        return []
    events: list[tuple[str, dict]] = []
    nodes = node_positions or {}

    if not agent.able:
        return events  # injured / trapped agents hold still until assisted

    if phase == "Earthquake":
        if "taking_cover" not in agent.special_states:
            agent.special_states.add("taking_cover")
            agent.move_target = None
            events.append(("NpcStateChanged", {"npc": agent.id, "state": "taking_cover"}))
        return events
    agent.special_states.discard("taking_cover")

    if agent.move_target is not None:
        if _walk_towards(agent, agent.move_target, dt, speed):
            agent.move_target = None
            agent.activity = "standing"
        else:
            agent.activity = "walking"
        return events

    if phase == "PreQuake" and agent.routine:
        step = agent.routine[agent.routine_index]
        prev = agent.activity
        agent.activity = step.activity
        if step.activity == "walking" and step.path:
            if agent.path_index < len(step.path):
                target = nodes.get(step.path[agent.path_index])
                if target is not None and _walk_towards(agent, target, dt, speed):
                    agent.path_index += 1
        agent.routine_elapsed += dt
        if agent.routine_elapsed >= step.duration:
            agent.routine_elapsed = 0.0
            agent.path_index = 0
            agent.routine_index = (agent.routine_index + 1) % len(agent.routine)
            agent.activity = agent.routine[agent.routine_index].activity
            if agent.activity != prev:
                events.append(
                    ("NpcActivityChanged", {"npc": agent.id, "activity": agent.activity})
                )
        return events

    # After the shaking, scripted agents idle unless a trigger moves them.
    if phase != "PreQuake":
        agent.activity = "standing"
    return events


def fire_trigger(
    agent: NpcAgent,
    event: dict,
    node_positions: dict[str, Vec2] | None = None,
) -> list[tuple[str, dict]]:
    """Run the first matching trigger rule's responses, in order."""
    if not agent.interactive:
        raise NotInteractiveError(f"npc '{agent.id}' is not interactive")
    for rule in agent.triggers:
        if not rule.matches(event):
            continue
        rule.fired = True
        out: list[tuple[str, dict]] = []
        for resp in rule.responses:
            op = resp.get("op")
            if op == "say":
                line = str(resp["line"])
                agent.dialogue_queue.append(line)
                out.append(("NpcSpoke", {"npc": agent.id, "line": line}))
            elif op == "move_to":
                node = str(resp["node"])
                if node_positions and node in node_positions:
                    agent.move_target = node_positions[node]
                out.append(("NpcMoved", {"npc": agent.id, "node": node}))
            elif op == "set_state":
                agent.activity = str(resp["activity"])
                out.append(("NpcActivityChanged", {"npc": agent.id, "activity": agent.activity}))
            elif op == "set_special":
                state = str(resp["state"])
                agent.special_states.add(state)
                agent.move_target = None
                out.append(("NpcStateChanged", {"npc": agent.id, "state": state}))
            elif op == "grant_instruction":
                out.append(
                    (
                        "InstructionGiven",
                        {
                            "npc": agent.id,
                            "instruction": str(resp["instruction"]),
                            "feedback": False,
                        },
                    )
                )
            else:
                raise SchemaError(f"npc '{agent.id}': unknown trigger response op '{op}'")
        return out
    return []


def assist(agent: NpcAgent, by_player: bool = True) -> list[tuple[str, dict]]:
    """Clear an injured/trapped state; the telemetry counts this as helping."""
    if not (agent.special_states & ASSISTABLE):
        raise NotAssistableError(f"npc '{agent.id}' does not need assistance")
    agent.special_states -= ASSISTABLE
    return [("NpcAssisted", {"npc": agent.id, "by_player": by_player})]
