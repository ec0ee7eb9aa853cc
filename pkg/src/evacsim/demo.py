"""Scripted playthroughs of the shipped demo scenarios.

These builders produce full input scripts for the default scene: a thorough
run that follows recommended practice, a careless run that ignores it, and a
run that goes back into the building. The same builders drive the CLI demo
and the behavioural-coverage suites.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .scene import SceneGraph
from .scripting import ScriptBuilder

WALK_IN = ["n_entrance", "n_exit", "n_stair_mid", "n_lobby", "n_corridor_e",
           "n_corridor_w", "n_meeting"]


def data_path(name: str) -> Path:
    return Path(str(resources.files("evacsim.data").joinpath(name)))


def bp_script(
    scene: SceneGraph,
    variant: str = "thorough",
    quake_s: float = 25.0,
    instruction_s: float = 40.0,
    tick: float = 1.0 / 50.0,
) -> list[dict]:
    b = ScriptBuilder(scene, "n_outdoor_start", tick)
    b.walk_path(WALK_IN)
    b.wait(0.5)
    b.select("leave_belongings")

    if variant == "thorough":
        b.wait(0.3)
        b.select("drop_cover_hold_table")
        b.wait(1.0)
        b.select("watch_for_hazards")
        b.wait(quake_s + 1.0)
        b.select("stay_under_cover_30s")
        b.wait(31.0)
        b.select("get_out_from_under_table")
        for action in ("check_damage_room", "unplug_broken_equipment",
                       "phone_text_browse", "assist_npc", "use_radio",
                       "take_first_aid", "use_laptop", "collect_belongings"):
            b.select(action)
        b.wait(max(0.0, instruction_s - 31.0) + 3.0)
        b.select("start_evacuating")
        b.walk_path(["n_corridor_w", "n_corridor_e", "n_lobby"])
        b.select("check_damage_evac")
        b.select("check_injured")
        b.walk_to("n_stair_mid")
        b.select("check_stair_damage")
        b.select("use_stairs")
        b.walk_path(["n_exit", "n_entrance", "n_assembly_safe"])
        b.wait(0.5)
        b.select("choose_assembly_area_safe")
    elif variant == "careless":
        b.wait(0.5)
        b.select("cover_beside_unsafe_object")
        b.wait(quake_s + 1.0)
        b.select("phone_call")
        b.walk_path(["n_corridor_w", "n_corridor_e", "n_lobby"])
        b.select("use_lift")
        b.walk_path(["n_stair_mid", "n_exit", "n_entrance", "n_assembly_near"])
        b.wait(0.5)
        b.select("choose_assembly_area_unsafe")
    elif variant == "returner":
        b.wait(0.5)
        b.select("watch_for_hazards")
        b.wait(3.0)
        b.select("drop_cover_hold_table")
        b.wait(quake_s + 1.0)
        b.select("get_out_from_under_table")
        b.select("start_evacuating")
        b.walk_path(["n_corridor_w", "n_corridor_e", "n_lobby"])
        b.select("use_escalator")
        b.walk_path(["n_stair_mid", "n_exit", "n_entrance"])
        b.wait(0.5)
        b.select("return_inside")
    else:
        raise ValueError(f"unknown BP variant: {variant}")
    return b.build()


# Wait long enough to cover the scripted trajectory between two wait points.
_TP_TRAVEL_WAITS = {
    "enter": 48.0,
    "to_corridor": 16.0,
    "to_lobby": 8.0,
    "to_exit": 12.0,
    "to_service": 28.0,
    "to_outside": 10.0,
}


def tp_script(
    variant: str = "all",
    quake_s: float = 25.0,
    tick: float = 1.0 / 50.0,
) -> list[dict]:
    class Seq:
        def __init__(self) -> None:
            self.tick = 0
            self.commands: list[dict] = []

        def select(self, action: str) -> None:
            self.commands.append({"tick": self.tick, "type": "select", "action": action})
            self.tick += 1

        def wait(self, seconds: float) -> None:
            self.tick += int(round(seconds / tick))

    s = Seq()
    s.wait(0.5)
    s.select("follow_staff")
    s.wait(_TP_TRAVEL_WAITS["enter"])
    s.select("leave_belongings")
    s.wait(0.5)

    if variant == "all":
        s.select("drop_cover_hold_table")
        s.wait(1.0)
        s.select("watch_for_hazards")
        s.wait(quake_s + 1.0)
        s.select("stay_under_cover_30s")
        s.wait(31.0)
        s.select("get_out_from_under_table")
        s.select("collect_belongings")
        s.select("take_first_aid")
        s.select("start_evacuating")
        s.wait(_TP_TRAVEL_WAITS["to_corridor"])
        for action in ("assist_nurse_with_injured", "help_npc_under_debris",
                       "unplug_broken_equipment", "use_radio", "extinguish_fire"):
            s.select(action)
        s.select("continue_to_lobby")
        s.wait(_TP_TRAVEL_WAITS["to_lobby"])
        s.select("use_stairs")
        s.wait(_TP_TRAVEL_WAITS["to_exit"])
        s.select("search_alternate_exit")
        s.wait(_TP_TRAVEL_WAITS["to_service"])
        s.select("exit_building")
        s.wait(_TP_TRAVEL_WAITS["to_outside"])
        s.select("choose_assembly_area_safe")
    elif variant == "none":
        s.select("flee_room_during_quake")
        s.wait(quake_s + 1.5)
        s.select("start_evacuating")
        s.wait(_TP_TRAVEL_WAITS["to_corridor"])
        s.select("continue_to_lobby")
        s.wait(_TP_TRAVEL_WAITS["to_lobby"])
        s.select("use_lift")
        s.wait(_TP_TRAVEL_WAITS["to_exit"])
        s.select("climb_through_debris")
        s.wait(_TP_TRAVEL_WAITS["to_outside"])
        s.select("choose_assembly_area_unsafe")
    elif variant == "mixed":
        s.select("drop_cover_hold_table")
        s.wait(quake_s + 1.5)
        s.select("collect_belongings")
        s.select("start_evacuating")
        s.wait(_TP_TRAVEL_WAITS["to_corridor"])
        s.select("continue_to_lobby")
        s.wait(_TP_TRAVEL_WAITS["to_lobby"])
        s.select("use_stairs")
        s.wait(_TP_TRAVEL_WAITS["to_exit"])
        s.select("climb_through_debris")
        s.wait(_TP_TRAVEL_WAITS["to_outside"])
        s.select("choose_assembly_area_safe")
    else:
        raise ValueError(f"unknown TP variant: {variant}")
    return s.commands


from .story import RECOMMENDED_BEHAVIOURS

# Behaviours each TP variant is expected to score.
TP_EXPECTED = {
    "all": {b["key"] for b in RECOMMENDED_BEHAVIOURS},
    "none": set(),
    "mixed": {"take_cover", "collect_belongings", "use_stairs", "safe_assembly"},
}
