"""Player movement: free gaze-directed roaming and scripted wait points.

Free roaming moves the player along their heading while a button is held;
heading itself only ever changes through look input, which keeps virtual and
physical rotation identical. Wait-point mode replaces movement with authored
trajectories chosen through action panels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UnknownActionError
from .geometry import (
    Vec2,
    angular_distance,
    ray_segment_distance,
    rect_corners,
    vec_dot,
    vec_sub,
    vec_unit,
)
from .scene import BLOCKING_KINDS, SceneGraph, region_of

DEFAULT_WALK_SPEED = 1.4
DEFAULT_CLEARANCE = 0.3
DEFAULT_CONE_HALF_ANGLE = math.radians(20.0)


@dataclass
class PlayerPose:
    position: Vec2
    heading: float
    current_region: str

    def copy(self) -> "PlayerPose":
        return PlayerPose(self.position, self.heading, self.current_region)


@dataclass
class ActionPanel:
    action: str
    label: str
    bearing: float


@dataclass
class WaitPoint:
    id: str
    node: str
    panels: list[ActionPanel]
    outgoing: dict[str, tuple[str, list[str]]]
    on_arrival: list[dict] = field(default_factory=list)


def _blocking_objects(scene: SceneGraph):
    return [o for o in scene.objects.values() if o.kind in BLOCKING_KINDS]


def _max_advance(
    scene: SceneGraph,
    origin: Vec2,
    direction: Vec2,
    want: float,
    clearance: float,
) -> tuple[float, tuple[Vec2, Vec2] | None]:
    """Farthest travel along direction before hitting a wall or footprint."""
    best = want
    hit: tuple[Vec2, Vec2] | None = None
    for a, b in scene.wall_segments:
        t = ray_segment_distance(origin, direction, a, b)
        if t is not None and t - clearance < best:
            best = max(0.0, t - clearance)
            hit = (a, b)
    for obj in _blocking_objects(scene):
        corners = rect_corners(
            obj.xy, obj.half_extents[0], obj.half_extents[1], obj.pose.yaw, pad=clearance
        )
        for i in range(4):
            a, b = corners[i], corners[(i + 1) % 4]
            t = ray_segment_distance(origin, direction, a, b)
            if t is not None and t < best:
                best = max(0.0, t)
                hit = (a, b)
    return best, hit


def gaze_move(
    pose: PlayerPose,
    button_held: bool,
    dt: float,
    speed: float,
    scene: SceneGraph,
    clearance: float = DEFAULT_CLEARANCE,
    slide: bool = True,
) -> PlayerPose:
    """Advance along the current heading while held; slide along blockers."""
    if not button_held or dt <= 0.0:
        return pose.copy()
    direction = (math.cos(pose.heading), math.sin(pose.heading))
    want = speed * dt
    advance, hit = _max_advance(scene, pose.position, direction, want, clearance)
    new_pos = (
        pose.position[0] + direction[0] * advance,
        pose.position[1] + direction[1] * advance,
    )
    if hit is not None and advance < want and slide:
        tangent = vec_unit(vec_sub(hit[1], hit[0]))
        along = vec_dot(direction, tangent)
        if along < 0:
            tangent = (-tangent[0], -tangent[1])
            along = -along
        remaining = (want - advance) * along
        if remaining > 1e-12 and along > 1e-9:
            slid, _ = _max_advance(scene, new_pos, tangent, remaining, clearance)
            new_pos = (new_pos[0] + tangent[0] * slid, new_pos[1] + tangent[1] * slid)
    try:
        region = region_of(scene, new_pos).id
    except Exception:
        return pose.copy()  # refused: would leave the walkable area
    return PlayerPose(position=new_pos, heading=pose.heading, current_region=region)


def select_panel(
    heading: float,
    waitpoint: WaitPoint,
    cone_half_angle: float = DEFAULT_CONE_HALF_ANGLE,
) -> ActionPanel | None:
    """Panel angularly nearest the gaze, if inside the cone; ties to smaller id."""
    best: ActionPanel | None = None
    best_key: tuple[float, str] | None = None
    for panel in waitpoint.panels:
        dist = angular_distance(panel.bearing, heading)
        if dist > cone_half_angle:
            continue
        key = (dist, panel.action)
        if best_key is None or key < best_key:
            best, best_key = panel, key
    return best


def advance_waitpoint(
    current: WaitPoint,
    chosen: str,
    waitpoints: dict[str, WaitPoint],
) -> tuple[WaitPoint, list[str]]:
    """Scripted next stop and trajectory for the chosen action."""
    nxt = current.outgoing.get(chosen)
    if nxt is None:
        raise UnknownActionError(
            f"action '{chosen}' is not offered at wait point '{current.id}'"
        )
    next_id, trajectory = nxt
    if next_id not in waitpoints:
        raise UnknownActionError(
            f"wait point '{current.id}' routes '{chosen}' to unknown '{next_id}'"
        )
    return waitpoints[next_id], list(trajectory)
