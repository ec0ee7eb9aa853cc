"""Phase machine, scenario files, action catalog, and the debrief report.

Story lines are data: a scenario file authors the action catalog (with its
recommended-practice flags), the NPCs, the damage spec, wait points and
dialogue, while this module interprets them. Free-roam sessions log behaviour
silently; wait-point sessions end in a debrief that scores the twelve
recommended behaviours.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .damage import DamageSpec
from .errors import (
    ActionUnavailableError,
    IllegalTransitionError,
    IncompleteSessionError,
    SchemaError,
    UnknownActionError,
    ValidationError,
)
from .nav import ActionPanel, WaitPoint
from .npc import ASSISTABLE, NpcAgent, load_npc
from .quake import QuakeParams
from .scene import SceneGraph, region_of

SCENARIO_SCHEMA_VERSION = 1

PHASES = (
    "PreQuake",
    "Earthquake",
    "PreEvacuation",
    "IndoorEvacuation",
    "OutdoorEvacuation",
    "Debrief",
)

PHASE_TRANSITIONS = {
    ("PreQuake", "belongings_left"): "Earthquake",
    ("Earthquake", "quake_ended"): "PreEvacuation",
    ("PreEvacuation", "left_room"): "IndoorEvacuation",
    ("IndoorEvacuation", "exited_building"): "OutdoorEvacuation",
    ("OutdoorEvacuation", "terminal_choice"): "Debrief",
}

RECOMMENDED_FLAGS = ("yes", "no", "neutral", "yes_for_visitors")

# The twelve recommended behaviours scored by the wait-point debrief,
# grouped by the phase they belong to, with the catalog actions that
# realize each one.
RECOMMENDED_BEHAVIOURS: list[dict] = [
    {
        "key": "take_cover",
        "label": "Drop, cover and hold, or shelter under a sturdy table",
        "group": "earthquake",
        "actions": ["drop_cover_hold_table"],
    },
    {
        "key": "mind_hazards",
        "label": "Watch out for falling objects and sharp debris",
        "group": "earthquake",
        "actions": ["watch_for_hazards"],
    },
    {
        "key": "wait_for_aftershocks",
        "label": "Stay put for 30 seconds in case the shaking resumes",
        "group": "pre_indoor",
        "actions": ["stay_under_cover_30s"],
    },
    {
        "key": "collect_belongings",
        "label": "Collect your personal belongings",
        "group": "pre_indoor",
        "actions": ["collect_belongings"],
    },
    {
        "key": "take_first_aid",
        "label": "Take the first aid kit with you",
        "group": "pre_indoor",
        "actions": ["take_first_aid"],
    },
    {
        "key": "help_people",
        "label": "Check on people nearby and help them",
        "group": "pre_indoor",
        "actions": ["assist_npc", "assist_nurse_with_injured", "help_npc_under_debris"],
    },
    {
        "key": "find_alternate_exit",
        "label": "Find another way out when an exit is blocked",
        "group": "pre_indoor",
        "actions": ["search_alternate_exit"],
    },
    {
        "key": "handle_fire",
        "label": "Put out small fires or report them",
        "group": "pre_indoor",
        "actions": ["extinguish_fire", "report_fire"],
    },
    {
        "key": "unplug_equipment",
        "label": "Unplug broken electrical equipment",
        "group": "pre_indoor",
        "actions": ["unplug_broken_equipment"],
    },
    {
        "key": "listen_radio",
        "label": "Use a radio to gather information",
        "group": "pre_indoor",
        "actions": ["use_radio"],
    },
    {
        "key": "use_stairs",
        "label": "Take the stairs down and out",
        "group": "pre_indoor",
        "actions": ["use_stairs"],
    },
    {
        "key": "safe_assembly",
        "label": "Assemble in open space, clear of buildings",
        "group": "outdoor",
        "actions": ["choose_assembly_area_safe"],
    },
]

DEFAULT_RATIONALES: dict[str, str] = {
    "take_cover": "Most shaking injuries come from things falling on people; "
    "a sturdy table shields your head and torso until the shaking stops.",
    "mind_hazards": "Broken glass, toppled shelving and dropped tiles keep "
    "hurting people after the shaking; scanning for them prevents cuts and trips.",
    "wait_for_aftershocks": "Aftershocks often follow within moments; staying "
    "put briefly means you are not caught mid-room by a second jolt.",
    "collect_belongings": "Phone, keys and ID let you call for help and prove "
    "who you are, and collecting them takes seconds when done on the way out.",
    "take_first_aid": "A kit in hand means cuts and sprains can be treated at "
    "the assembly area instead of re-entering the building.",
    "help_people": "People nearby may be trapped or hurt and unable to call "
    "out; a quick check saves lives at little cost to your own exit.",
    "find_alternate_exit": "Exits can be blocked by debris; knowing to turn "
    "around and try another route avoids crowding and wasted time.",
    "handle_fire": "Small fires grow fast in damaged buildings; extinguishing "
    "or reporting them early protects everyone still inside.",
    "unplug_equipment": "Damaged electrical equipment can arc and start fires "
    "once power returns; unplugging it removes that risk.",
    "listen_radio": "Official broadcasts say whether it is safe to leave and "
    "where to assemble; acting on rumours wastes time.",
    "use_stairs": "Lifts can fail in aftershocks or power cuts and trap you; "
    "stairs keep you in control of your own exit.",
    "safe_assembly": "Facades, glass and loose cladding fall into the street; "
    "open space clear of buildings is where falling debris cannot reach.",
}


@dataclass
class ActionDef:
    id: str
    label: str
    phases: set[str]
    recommended: str = "neutral"
    repeatable: bool = False
    regions: set[str] = field(default_factory=set)
    requires_flags: list[str] = field(default_factory=list)
    forbids_flags: list[str] = field(default_factory=list)
    requires_interactable: dict | None = None
    effects: list[dict] = field(default_factory=list)
    terminal: bool = False

    @property
    def deferred(self) -> bool:
        return any(e.get("op") == "timed_flag" for e in self.effects)

    def resolve_recommended(self, occupant_role: str) -> str:
        if self.recommended == "yes_for_visitors":
            return "yes" if occupant_role == "visitor" else "neutral"
        return self.recommended


@dataclass
class PendingWait:
    action_id: str
    flag: str
    complete_at: float
    cancel_unless_flag: str | None = None


@dataclass
class StoryState:
    mode: str
    occupant_role: str = "visitor"
    phase: str = "PreQuake"
    step_index: int = 0
    clock: float = 0.0
    flags: dict[str, bool] = field(default_factory=dict)
    taken_actions: set[str] = field(default_factory=set)
    pending_instructions: list[str] = field(default_factory=list)
    pending_waits: list[PendingWait] = field(default_factory=list)
    terminal: bool = False
    terminal_action: str | None = None

    def flag(self, name: str) -> bool:
        return bool(self.flags.get(name))


@dataclass
class Scenario:
    mode: str
    quake: QuakeParams
    start_node: str
    room_region: str
    outdoor_regions: set[str]
    instruction_delay_s: float
    phase_hooks: dict[str, list[dict]]
    actions: dict[str, ActionDef]
    npcs: list[NpcAgent]
    damage: DamageSpec | None
    dialogue: dict[str, dict]
    waitpoints: dict[str, WaitPoint]
    start_waitpoint: str | None
    rationales: dict[str, str]
    relocation_regions: set[str]

    def fresh_npcs(self) -> list[NpcAgent]:
        import copy

        return copy.deepcopy(self.npcs)

    def rationale(self, key: str) -> str:
        return self.rationales.get(key, DEFAULT_RATIONALES.get(key, ""))

    def terminal_actions(self) -> set[str]:
        return {a.id for a in self.actions.values() if a.terminal}


# ---------------------------------------------------------------------------
# Scenario loading
# ---------------------------------------------------------------------------


def _load_action(raw: dict) -> ActionDef:
    aid = str(raw.get("id") or "")
    if not aid:
        raise SchemaError("action entry missing id")
    phases = set(raw.get("phases", []))
    for p in phases:
        if p not in PHASES:
            raise SchemaError(f"action '{aid}': unknown phase '{p}'")
    recommended = raw.get("recommended", "neutral")
    if recommended not in RECOMMENDED_FLAGS:
        raise SchemaError(f"action '{aid}': unknown recommended flag '{recommended}'")
    return ActionDef(
        id=aid,
        label=str(raw.get("label", aid)),
        phases=phases,
        recommended=recommended,
        repeatable=bool(raw.get("repeatable", False)),
        regions=set(raw.get("regions", [])),
        requires_flags=list(raw.get("requires_flags", [])),
        forbids_flags=list(raw.get("forbids_flags", [])),
        requires_interactable=raw.get("requires_interactable"),
        effects=[dict(e) for e in raw.get("effects", [])],
        terminal=bool(raw.get("terminal", False)),
    )


_EFFECT_OPS = {
    "set_flag",
    "clear_flag",
    "set_interactable_state",
    "assist",
    "phase_event",
    "timed_flag",
}


def load_scenario(doc: dict, scene: SceneGraph) -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError("scenario document must be a JSON object")
    if doc.get("schema_version") != SCENARIO_SCHEMA_VERSION:
        raise SchemaError(f"unsupported scenario schema_version: {doc.get('schema_version')!r}")
    mode = doc.get("mode")
    if mode not in ("BP", "TP"):
        raise SchemaError(f"scenario mode must be BP or TP, got {mode!r}")

    quake = QuakeParams.from_dict(doc.get("quake", {}))
    quake.validate()

    steps = doc.get("steps", {})
    start_node = str(steps.get("start_node", ""))
    if start_node not in scene.walk_nodes:
        raise ValidationError(f"scenario start node '{start_node}' is not a walk node")
    room_region = str(steps.get("room_region", ""))
    if room_region not in scene.regions:
        raise ValidationError(f"scenario room region '{room_region}' does not exist")
    outdoor_regions = set(steps.get("outdoor_regions", []))
    for rid in outdoor_regions:
        if rid not in scene.regions:
            raise ValidationError(f"scenario outdoor region '{rid}' does not exist")

    phase_hooks: dict[str, list[dict]] = {}
    for phase, hooks in steps.get("phase_hooks", {}).items():
        if phase not in PHASES:
            raise SchemaError(f"phase hook for unknown phase '{phase}'")
        phase_hooks[phase] = [dict(h) for h in hooks]

    actions: dict[str, ActionDef] = {}
    for raw in doc.get("actions", []):
        action = _load_action(raw)
        if action.id in actions:
            raise ValidationError(f"duplicate action id: {action.id}")
        for region_id in action.regions:
            if region_id not in scene.regions:
                raise ValidationError(
                    f"action '{action.id}' names unknown region '{region_id}'"
                )
        for eff in action.effects:
            if eff.get("op") not in _EFFECT_OPS:
                raise SchemaError(f"action '{action.id}': unknown effect op '{eff.get('op')}'")
        actions[action.id] = action

    npcs = [load_npc(raw) for raw in doc.get("npcs", [])]
    npc_ids = {n.id for n in npcs}
    for action in actions.values():
        for eff in action.effects:
            if eff.get("op") == "assist" and eff.get("npc") not in npc_ids:
                raise ValidationError(
                    f"action '{action.id}' assists unknown npc '{eff.get('npc')}'"
                )

    dialogue = {str(k): dict(v) for k, v in doc.get("dialogue", {}).items()}
    for agent in npcs:
        for rule in agent.triggers:
            for resp in rule.responses:
                if resp.get("op") == "say" and str(resp.get("line")) not in dialogue:
                    raise ValidationError(
                        f"npc '{agent.id}' says unknown dialogue line '{resp.get('line')}'"
                    )

    damage = None
    if doc.get("damage_spec"):
        damage = DamageSpec.from_dict(doc["damage_spec"])
        damage.validate(scene)

    waitpoints: dict[str, WaitPoint] = {}
    for raw in doc.get("waitpoints", []) or []:
        wp = WaitPoint(
            id=str(raw["id"]),
            node=str(raw["node"]),
            panels=[
                ActionPanel(
                    action=str(p["action"]),
                    label=str(p.get("label", p["action"])),
                    bearing=float(p.get("bearing", 0.0)),
                )
                for p in raw.get("panels", [])
            ],
            outgoing={
                str(action): (str(dest["next"]), [str(n) for n in dest.get("trajectory", [])])
                for action, dest in raw.get("outgoing", {}).items()
            },
            on_arrival=[dict(h) for h in raw.get("on_arrival", [])],
        )
        if wp.id in waitpoints:
            raise ValidationError(f"duplicate wait point id: {wp.id}")
        waitpoints[wp.id] = wp

    start_waitpoint = steps.get("start_waitpoint")
    if mode == "TP":
        if not waitpoints:
            raise ValidationError("TP scenario declares no wait points")
        if start_waitpoint not in waitpoints:
            raise ValidationError(f"start wait point '{start_waitpoint}' does not exist")
        _validate_waitpoints(scene, waitpoints, actions, str(start_waitpoint))

    scenario = Scenario(
        mode=mode,
        quake=quake,
        start_node=start_node,
        room_region=room_region,
        outdoor_regions=outdoor_regions,
        instruction_delay_s=float(steps.get("instruction_delay_s", 40.0)),
        phase_hooks=phase_hooks,
        actions=actions,
        npcs=npcs,
        damage=damage,
        dialogue=dialogue,
        waitpoints=waitpoints,
        start_waitpoint=str(start_waitpoint) if start_waitpoint else None,
        rationales={str(k): str(v) for k, v in doc.get("rationales", {}).items()},
        relocation_regions=set(doc.get("relocation_regions", [])),
    )
    return scenario


def load_scenario_file(path: str | Path, scene: SceneGraph) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario(json.load(fh), scene)


def _validate_waitpoints(
    scene: SceneGraph,
    waitpoints: dict[str, WaitPoint],
    actions: dict[str, ActionDef],
    start: str,
) -> None:
    for wp in waitpoints.values():
        if wp.node not in scene.walk_nodes:
            raise ValidationError(f"wait point '{wp.id}' sits on unknown node '{wp.node}'")
        labels = [p.label for p in wp.panels]
        if len(labels) != len(set(labels)):
            raise ValidationError(f"wait point '{wp.id}' has duplicate panel labels")
        for panel in wp.panels:
            if panel.action not in actions:
                raise ValidationError(
                    f"wait point '{wp.id}' panel names unknown action '{panel.action}'"
                )
            if panel.action not in wp.outgoing and not actions[panel.action].terminal:
                raise ValidationError(
                    f"wait point '{wp.id}': panel action '{panel.action}' has no route "
                    "and is not terminal"
                )
        for action_id, (next_id, trajectory) in wp.outgoing.items():
            if action_id not in actions:
                raise ValidationError(
                    f"wait point '{wp.id}' routes unknown action '{action_id}'"
                )
            if next_id not in waitpoints:
                raise ValidationError(
                    f"wait point '{wp.id}' routes '{action_id}' to unknown '{next_id}'"
                )
            for node_id in trajectory:
                if node_id not in scene.walk_nodes:
                    raise ValidationError(
                        f"wait point '{wp.id}' trajectory uses unknown node '{node_id}'"
                    )
                node = scene.walk_nodes[node_id]
                if not region_of(scene, node.pos).on_stage:
                    raise ValidationError(
                        f"wait point '{wp.id}' trajectory node '{node_id}' is off stage"
                    )
    seen = {start}
    frontier = [start]
    while frontier:
        cur = waitpoints[frontier.pop()]
        for next_id, _ in cur.outgoing.values():
            if next_id not in seen:
                seen.add(next_id)
                frontier.append(next_id)
    unreachable = set(waitpoints) - seen
    if unreachable:
        raise ValidationError(f"unreachable wait points: {sorted(unreachable)}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _interactable_ok(scene: SceneGraph, region_id: str, requirement: dict) -> bool:
    kind = requirement.get("kind")
    wanted_state = requirement.get("state")
    for item in scene.interactables_in(region_id, kind=kind):
        if wanted_state is None or item.state == wanted_state:
            return True
    return False


def _assist_target_ok(state_npcs: dict[str, NpcAgent], action: ActionDef) -> bool:
    for eff in action.effects:
        if eff.get("op") == "assist":
            agent = state_npcs.get(str(eff.get("npc")))
            if agent is None or not (agent.special_states & ASSISTABLE):
                return False
    return True


def available_actions(
    state: StoryState,
    scenario: Scenario,
    scene: SceneGraph,
    region_id: str,
    npcs: dict[str, NpcAgent],
    waitpoint: WaitPoint | None = None,
) -> list[ActionDef]:
    """Actions offered right now: authored for the phase, preconditions met."""
    if state.terminal:
        return []
    if scenario.mode == "TP":
        if waitpoint is None:
            return []
        candidates = [scenario.actions[p.action] for p in waitpoint.panels]
    else:
        candidates = list(scenario.actions.values())
    out = []
    for action in candidates:
        if state.phase not in action.phases:
            continue
        if not action.repeatable and action.id in state.taken_actions:
            continue
        if scenario.mode == "BP" and action.regions and region_id not in action.regions:
            continue
        if any(not state.flag(f) for f in action.requires_flags):
            continue
        if any(state.flag(f) for f in action.forbids_flags):
            continue
        if action.requires_interactable is not None and not _interactable_ok(
            scene, region_id, action.requires_interactable
        ):
            continue
        if not _assist_target_ok(npcs, action):
            continue
        out.append(action)
    out.sort(key=lambda a: a.id)
    return out


def apply_action(
    state: StoryState,
    scenario: Scenario,
    scene: SceneGraph,
    npcs: dict[str, NpcAgent],
    action_id: str,
    t: float,
    region_id: str,
    waitpoint: WaitPoint | None = None,
) -> tuple[list[tuple[str, dict]], list[str]]:
    """Apply one action; returns (events, phase events for the session)."""
    if action_id not in scenario.actions:
        raise UnknownActionError(f"unknown action '{action_id}'")
    offered = {a.id for a in available_actions(state, scenario, scene, region_id, npcs, waitpoint)}
    if action_id not in offered:
        raise ActionUnavailableError(f"action '{action_id}' is not available now")
    action = scenario.actions[action_id]
    events: list[tuple[str, dict]] = []
    phase_events: list[str] = []

    for eff in action.effects:
        op = eff["op"]
        if op == "set_flag":
            state.flags[str(eff["flag"])] = True
        elif op == "clear_flag":
            state.flags[str(eff["flag"])] = False
        elif op == "set_interactable_state":
            scene.interactable(str(eff["id"])).state = str(eff["state"])
        elif op == "assist":
            from .npc import assist as npc_assist

            events.extend(npc_assist(npcs[str(eff["npc"])], by_player=True))
        elif op == "phase_event":
            phase_events.append(str(eff["event"]))
        elif op == "timed_flag":
            state.pending_waits.append(
                PendingWait(
                    action_id=action.id,
                    flag=str(eff["flag"]),
                    complete_at=t + float(eff["after"]),
                    cancel_unless_flag=eff.get("cancel_unless_flag"),
                )
            )

    state.taken_actions.add(action.id)
    if action.terminal:
        state.terminal = True
        state.terminal_action = action.id
    if not action.deferred:
        events.append(
            (
                "ActionTaken",
                {
                    "action": action.id,
                    "recommended": action.resolve_recommended(state.occupant_role),
                    "phase": state.phase,
                },
            )
        )
    return events, phase_events


def advance_story_clock(
    state: StoryState,
    scenario: Scenario,
    t: float,
) -> list[tuple[str, dict]]:
    """Complete or cancel pending timed actions; advance the story clock."""
    state.clock = max(state.clock, t)
    events: list[tuple[str, dict]] = []
    still: list[PendingWait] = []
    for wait in state.pending_waits:
        if wait.cancel_unless_flag is not None and not state.flag(wait.cancel_unless_flag):
            continue  # condition broken before completion: behaviour not performed
        if t >= wait.complete_at:
            state.flags[wait.flag] = True
            action = scenario.actions[wait.action_id]
            events.append(
                (
                    "ActionTaken",
                    {
                        "action": action.id,
                        "recommended": action.resolve_recommended(state.occupant_role),
                        "phase": state.phase,
                    },
                )
            )
        else:
            still.append(wait)
    state.pending_waits = still
    return events


def phase_transition(state: StoryState, event: str) -> str:
    """Advance the phase machine along the canonical order."""
    key = (state.phase, event)
    nxt = PHASE_TRANSITIONS.get(key)
    if nxt is None:
        raise IllegalTransitionError(f"event '{event}' is illegal in phase '{state.phase}'")
    if nxt == "Debrief" and state.mode != "TP":
        raise IllegalTransitionError("only wait-point sessions have a debrief phase")
    state.phase = nxt
    state.step_index += 1
    return nxt


@dataclass
class FeedbackReport:
    rows: list[dict]

    @property
    def taken_count(self) -> int:
        return sum(1 for r in self.rows if r["taken"])

    @property
    def missed_count(self) -> int:
        return sum(1 for r in self.rows if not r["taken"])

    def to_dict(self) -> dict:
        return {
            "behaviours": self.rows,
            "taken": self.taken_count,
            "missed": self.missed_count,
        }


def build_report(log, scenario: Scenario) -> FeedbackReport:
    """Score a finished wait-point session against the recommended behaviours."""
    terminal_ids = scenario.terminal_actions()
    events = list(log)
    took_terminal = any(
        ev.kind == "ActionTaken" and ev.payload.get("action") in terminal_ids
        for ev in events
    )
    if not took_terminal:
        raise IncompleteSessionError("session never made a terminal assembly choice")
    recommended_taken = {
        ev.payload.get("action")
        for ev in events
        if ev.kind == "ActionTaken" and ev.payload.get("recommended") == "yes"
    }
    rows = []
    for behaviour in RECOMMENDED_BEHAVIOURS:
        taken = any(a in recommended_taken for a in behaviour["actions"])
        rows.append(
            {
                "key": behaviour["key"],
                "label": behaviour["label"],
                "group": behaviour["group"],
                "taken": taken,
                "rationale": scenario.rationale(behaviour["key"]),
            }
        )
    return FeedbackReport(rows=rows)
