from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacsim.errors import UnknownActionError
from evacsim.geometry import point_in_rect, ray_segment_distance
from evacsim.nav import (
    ActionPanel,
    PlayerPose,
    WaitPoint,
    advance_waitpoint,
    gaze_move,
    select_panel,
)
from evacsim.scene import load_scene

from conftest import box, make_simple_scene, simple_scene_doc


def open_scene():
    return make_simple_scene([])


def pose(x=0.0, y=0.0, heading=0.0):
    return PlayerPose(position=(x, y), heading=heading, current_region="main")


def test_held_button_advances_along_heading():
    new = gaze_move(pose(), True, 0.02, 1.4, open_scene())
    assert new.position == pytest.approx((0.028, 0.0), abs=1e-12)
    assert new.heading == 0.0


def test_released_button_is_a_no_op():
    p = pose(1.0, 2.0, 0.7)
    new = gaze_move(p, False, 0.02, 1.4, open_scene())
    assert new.position == (1.0, 2.0)
    assert new.heading == 0.7


def test_blocked_by_wall_stops_at_clearance():
    scene = open_scene()
    # Heading east into the region's outer wall at x=60.
    p = pose(59.99 - 0.05, 0.0, 0.0)
    new = gaze_move(p, True, 1.0, 1.4, scene, clearance=0.05, slide=False)
    # Oracle: ray-segment distance minus clearance.
    hit = min(
        d for a, b in scene.wall_segments
        if (d := ray_segment_distance(p.position, (1.0, 0.0), a, b)) is not None
    )
    assert new.position[0] == pytest.approx(p.position[0] + hit - 0.05, abs=1e-9)
    # A wall right at the clearance ring stops movement entirely.
    p2 = pose(59.99, 0.0, 0.0)
    new2 = gaze_move(p2, True, 1.0, 1.4, scene, clearance=0.05, slide=False)
    assert new2.position[0] <= p2.position[0] + 1e-12


def test_slides_along_wall():
    scene = open_scene()
    p = pose(59.8, 0.0, math.radians(45.0))
    new = gaze_move(p, True, 1.0, 1.4, scene, clearance=0.1)
    assert new.position[0] < 60.0  # never reaches the wall itself
    assert new.position[1] > 0.5  # but made progress along the wall


def test_obstacle_footprint_blocks():
    scene = make_simple_scene([box("table", (2.0, 0.0, 0.0), half=(0.5, 0.5, 0.4))])
    p = pose(0.0, 0.0, 0.0)
    new = gaze_move(p, True, 10.0, 1.4, scene, clearance=0.3, slide=False)
    # Stops at the padded footprint edge: x = 2 - 0.5 - 0.3.
    assert new.position[0] == pytest.approx(1.2, abs=1e-9)


@given(
    x=st.floats(-5.0, 5.0),
    y=st.floats(-5.0, 5.0),
    heading=st.floats(0.0, 2.0 * math.pi),
    steps=st.integers(1, 40),
)
@settings(max_examples=120, deadline=None)
def test_gaze_move_never_enters_footprints(x, y, heading, steps):
    scene = make_simple_scene([box("table", (2.0, 0.0, 0.0), half=(0.6, 0.4, 0.4),
                                   yaw=0.4)])
    table = scene.objects["table"]
    p = PlayerPose(position=(x, y), heading=heading, current_region="main")
    if point_in_rect(p.position, table.xy, 0.6, 0.4, 0.4, pad=0.3):
        return  # start pose already violates the clearance premise
    for _ in range(steps):
        p = gaze_move(p, True, 0.02, 1.4, scene, clearance=0.3)
        assert not point_in_rect(p.position, table.xy, 0.6, 0.4, 0.4)
        assert p.heading == heading  # rotation only ever comes from look input


def waitpoint():
    return WaitPoint(
        id="wp",
        node="n0",
        panels=[
            ActionPanel(action="a_left", label="Left", bearing=math.radians(-30.0)),
            ActionPanel(action="b_right", label="Right", bearing=math.radians(30.0)),
        ],
        outgoing={"a_left": ("wp2", ["n1"]), "b_right": ("wp", [])},
    )


def test_select_nearest_panel_within_cone():
    wp = waitpoint()
    chosen = select_panel(math.radians(25.0), wp, math.radians(20.0))
    assert chosen is not None and chosen.action == "b_right"


def test_select_none_outside_cone():
    wp = waitpoint()
    assert select_panel(0.0, wp, math.radians(20.0)) is None


def test_select_single_panel_dead_ahead():
    wp = WaitPoint(id="w", node="n", panels=[ActionPanel("only", "Only", 0.0)],
                   outgoing={"only": ("w", [])})
    chosen = select_panel(0.0, wp)
    assert chosen is not None and chosen.action == "only"


def test_select_tie_breaks_to_smaller_action_id():
    wp = WaitPoint(
        id="w", node="n",
        panels=[ActionPanel("zeta", "Z", math.radians(10.0)),
                ActionPanel("alpha", "A", math.radians(-10.0))],
        outgoing={"zeta": ("w", []), "alpha": ("w", [])},
    )
    chosen = select_panel(0.0, wp, math.radians(45.0))
    assert chosen is not None and chosen.action == "alpha"


def test_advance_waitpoint_routes_and_rejects():
    wp = waitpoint()
    wp2 = WaitPoint(id="wp2", node="n1", panels=[], outgoing={})
    table = {"wp": wp, "wp2": wp2}
    nxt, trajectory = advance_waitpoint(wp, "a_left", table)
    assert nxt.id == "wp2" and trajectory == ["n1"]
    with pytest.raises(UnknownActionError):
        advance_waitpoint(wp, "not_offered", table)
