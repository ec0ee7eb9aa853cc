"""Deterministic input-script authoring for headless playthroughs.

A script is a list of {tick, type, ...} commands. The builder mirrors the
session's movement arithmetic (same float operations, no collisions assumed),
so a generated walk lands where it predicts to within one step.
"""
from __future__ import annotations

import math

from .nav import DEFAULT_WALK_SPEED
from .scene import SceneGraph


class ScriptBuilder:
    def __init__(
        self,
        scene: SceneGraph,
        start_node: str,
        tick: float = 1.0 / 50.0,
        speed: float = DEFAULT_WALK_SPEED,
    ):
        self.scene = scene
        self.dt = tick
        self.speed = speed
        self.pos = scene.node(start_node).pos
        self.cur_tick = 0
        self.commands: list[dict] = []

    def at_tick(self, tick: int) -> "ScriptBuilder":
        self.cur_tick = max(self.cur_tick, tick)
        return self

    def wait(self, seconds: float) -> "ScriptBuilder":
        self.cur_tick += int(round(seconds / self.dt))
        return self

    def wait_ticks(self, ticks: int) -> "ScriptBuilder":
        self.cur_tick += ticks
        return self

    def look(self, heading: float) -> "ScriptBuilder":
        self.commands.append({"tick": self.cur_tick, "type": "look", "heading": heading})
        return self

    def select(self, action: str) -> "ScriptBuilder":
        self.commands.append({"tick": self.cur_tick, "type": "select", "action": action})
        self.cur_tick += 1
        return self

    def abort(self) -> "ScriptBuilder":
        self.commands.append({"tick": self.cur_tick, "type": "abort"})
        return self

    def walk_to(self, node_id: str) -> "ScriptBuilder":
        """Turn toward a walk node and hold move until close to it."""
        target = self.scene.node(node_id).pos
        dx = target[0] - self.pos[0]
        dy = target[1] - self.pos[1]
        dist = math.hypot(dx, dy)
        if dist < 1e-9:
            return self
        heading = math.atan2(dy, dx)
        self.look(heading)
        step = self.speed * self.dt
        ticks = int(math.ceil(dist / step))
        for _ in range(ticks):
            self.commands.append({"tick": self.cur_tick, "type": "move", "held": True})
            self.cur_tick += 1
        # Mirror the per-tick position update to keep the model in sync.
        direction = (math.cos(heading), math.sin(heading))
        x, y = self.pos
        for _ in range(ticks):
            x += direction[0] * step
            y += direction[1] * step
        self.pos = (x, y)
        return self

    def walk_path(self, node_ids: list[str]) -> "ScriptBuilder":
        for node_id in node_ids:
            self.walk_to(node_id)
        return self

    def build(self) -> list[dict]:
        return list(self.commands)
