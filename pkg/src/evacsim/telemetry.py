"""Append-only session event log and the free-roam behavioural record.

Every observable thing a session does becomes one timestamped event; the
behavioural record is a pure function of the log, so re-extraction always
agrees with the original session.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ClockRegressionError, IncompleteSessionError, ValidationError

REGISTERED_KINDS = frozenset(
    {
        "SessionStarted",
        "PhaseChanged",
        "ActionTaken",
        "InstructionGiven",
        "NpcSpoke",
        "NpcMoved",
        "NpcAssisted",
        "NpcStateChanged",
        "NpcActivityChanged",
        "ObjectToppled",
        "ObjectSlid",
        "ObjectFell",
        "DamageApplied",
        "RelocationProgress",
        "RegionEntered",
        "WaitPointReached",
        "ExitBlockedSeen",
        "QuakeStarted",
        "QuakeEnded",
        "ReportShown",
        "ScoreShown",
        "FeedbackGiven",
        "SessionEnded",
        "SnapshotMark",
    }
)

# Feedback-bearing kinds that must never appear in a free-roam log before the
# session ends (the silent-observation guarantee).
FEEDBACK_KINDS = frozenset({"ReportShown", "ScoreShown", "FeedbackGiven"})


@dataclass
class Event:
    t: float
    kind: str
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"t": self.t, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "Event":
        raw = json.loads(line)
        return cls(t=float(raw["t"]), kind=str(raw["kind"]), payload=dict(raw.get("payload", {})))


class EventLog:
    """Single-writer, append-only timeline with non-decreasing timestamps."""

    def __init__(self) -> None:
        self._events: list[Event] = []

    def __iter__(self):
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    @property
    def last_t(self) -> float | None:
        return self._events[-1].t if self._events else None

    def record(self, event: Event) -> None:
        if event.kind not in REGISTERED_KINDS:
            raise ValidationError(f"unregistered event kind: {event.kind}")
        if self._events and event.t < self._events[-1].t:
            raise ClockRegressionError(
                f"event at t={event.t} after t={self._events[-1].t}"
            )
        self._events.append(event)

    def to_jsonl(self) -> str:
        return "".join(ev.to_json() + "\n" for ev in self._events)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> "EventLog":
        log = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    log.record(Event.from_json(line))
        return log


def neutrality_violations(log: EventLog) -> list[Event]:
    """Feedback-style events occurring before a free-roam session ended."""
    out = []
    for ev in log:
        if ev.kind == "SessionEnded":
            break
        if ev.kind in FEEDBACK_KINDS:
            out.append(ev)
        elif ev.kind == "InstructionGiven" and ev.payload.get("feedback"):
            out.append(ev)
    return out


# ---------------------------------------------------------------------------
# Behavioural record (one field per logged question row)
# ---------------------------------------------------------------------------


@dataclass
class BehaviouralRecord:
    # Shaking phase.
    first_action: str | None
    dch_first: bool
    time_to_dch: float | None
    # Between the shaking and leaving the room.
    time_under_table: float | None
    checked_damage: bool
    unplugged: bool
    phone_call: bool
    phone_text: bool
    assisted: bool
    radio: bool
    first_aid: bool
    laptop: bool
    belongings: bool
    waited_for_instruction: bool
    wait_before_exit: float | None
    # Indoor evacuation.
    checked_damage_evac: bool
    used_stairs_or_escalator: bool
    used_lift: bool
    checked_injured: bool
    checked_stair_damage: bool
    # Outdoors.
    stayed_close: bool
    returned_inside: bool
    identified_safe_area: bool

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Field name -> (question group, recommended answer where one exists).
# Groups mirror the four phases the questions are organized by.
BEHAVIOUR_FIELDS: dict[str, tuple[str, str | None]] = {
    "first_action": ("earthquake", None),
    "dch_first": ("earthquake", "yes"),
    "time_to_dch": ("earthquake", None),
    "time_under_table": ("pre_evacuation", None),
    "checked_damage": ("pre_evacuation", "yes"),
    "unplugged": ("pre_evacuation", "yes"),
    "phone_call": ("pre_evacuation", "no"),
    "phone_text": ("pre_evacuation", "yes"),
    "assisted": ("pre_evacuation", "yes"),
    "radio": ("pre_evacuation", "yes"),
    "first_aid": ("pre_evacuation", "yes"),
    "laptop": ("pre_evacuation", "yes"),
    "belongings": ("pre_evacuation", "yes"),
    "waited_for_instruction": ("pre_evacuation", "yes_for_visitors"),
    "wait_before_exit": ("pre_evacuation", None),
    "checked_damage_evac": ("indoor_evacuation", "yes"),
    "used_stairs_or_escalator": ("indoor_evacuation", "yes"),
    "used_lift": ("indoor_evacuation", "no"),
    "checked_injured": ("indoor_evacuation", "yes"),
    "checked_stair_damage": ("indoor_evacuation", "yes"),
    "stayed_close": ("outdoor_evacuation", "no"),
    "returned_inside": ("outdoor_evacuation", "no"),
    "identified_safe_area": ("outdoor_evacuation", "yes"),
}

DCH_ACTION = "drop_cover_hold_table"
LEAVE_COVER_ACTION = "get_out_from_under_table"
DESCENT_ACTIONS = ("use_stairs", "use_escalator", "use_lift")


def _phase_time(events: list[Event], phase: str) -> float | None:
    for ev in events:
        if ev.kind == "PhaseChanged" and ev.payload.get("to") == phase:
            return ev.t
    return None


def extract_bp_metrics(log: EventLog) -> BehaviouralRecord:
    """Compute the behavioural record from events alone."""
    events = list(log)
    started = next((ev for ev in events if ev.kind == "SessionStarted"), None)
    if started is None or started.payload.get("mode") != "BP":
        raise IncompleteSessionError("log is not a free-roam (BP) session")
    ended = next(
        (ev for ev in events if ev.kind == "SessionEnded" and ev.payload.get("completed")),
        None,
    )
    if ended is None:
        raise IncompleteSessionError("session did not run to completion")

    quake_start = _phase_time(events, "Earthquake")
    quake_end = _phase_time(events, "PreEvacuation")
    room_exit = _phase_time(events, "IndoorEvacuation")

    taken = [
        (ev.t, ev.payload.get("action"), ev.payload.get("phase"))
        for ev in events
        if ev.kind == "ActionTaken"
    ]

    def took(action_id: str) -> bool:
        return any(a == action_id for _, a, _ in taken)

    def first_taken(action_id: str) -> float | None:
        for t, a, _ in taken:
            if a == action_id:
                return t
        return None

    quake_actions = [(t, a) for t, a, phase in taken if phase == "Earthquake"]
    first_action = quake_actions[0][1] if quake_actions else None
    dch_t = first_taken(DCH_ACTION)
    time_to_dch = (dch_t - quake_start) if dch_t is not None and quake_start is not None else None

    under_at_quake_end = (
        dch_t is not None and quake_end is not None and dch_t <= quake_end
    )
    leave_t = first_taken(LEAVE_COVER_ACTION)
    time_under_table = (
        (leave_t - quake_end) if under_at_quake_end and leave_t is not None else None
    )

    evac_start_candidates = [t for t in (room_exit, first_taken("start_evacuating")) if t is not None]
    evac_start = min(evac_start_candidates) if evac_start_candidates else None
    instruction_t = next((ev.t for ev in events if ev.kind == "InstructionGiven"), None)
    waited_for_instruction = (
        instruction_t is not None and evac_start is not None and instruction_t <= evac_start
    )

    descent = next((a for _, a, _ in taken if a in DESCENT_ACTIONS), None)

    return BehaviouralRecord(
        first_action=first_action,
        dch_first=first_action == DCH_ACTION,
        time_to_dch=time_to_dch,
        time_under_table=time_under_table,
        checked_damage=took("check_damage_room"),
        unplugged=took("unplug_broken_equipment"),
        phone_call=took("phone_call"),
        phone_text=took("phone_text_browse"),
        assisted=any(
            ev.kind == "NpcAssisted" and ev.payload.get("by_player") for ev in events
        ),
        radio=took("use_radio"),
        first_aid=took("take_first_aid"),
        laptop=took("use_laptop"),
        belongings=took("collect_belongings"),
        waited_for_instruction=waited_for_instruction,
        wait_before_exit=(
            (room_exit - quake_end) if room_exit is not None and quake_end is not None else None
        ),
        checked_damage_evac=took("check_damage_evac"),
        used_stairs_or_escalator=descent in ("use_stairs", "use_escalator"),
        used_lift=descent == "use_lift",
        checked_injured=took("check_injured"),
        checked_stair_damage=took("check_stair_damage"),
        stayed_close=took("choose_assembly_area_unsafe"),
        returned_inside=took("return_inside"),
        identified_safe_area=took("choose_assembly_area_safe"),
    )
