"""Qualitative damage (asset swaps) and pre-simulated object relocation.

Damage never changes geometry or collision: a swap only flips the object's
visual variant, mirroring the wall/ceiling replacement approach. Relocation
applies the final poses of an off-stage pre-simulation in bounded per-tick
batches so the live tick budget stays flat.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    RegionStagingError,
    SchemaError,
    UnknownObjectError,
    ValidationError,
    WrongKindError,
)
from .quake import PhysicsParams, QuakeSignal, TickEvent, params_hash, run_quake
from .scene import DAMAGEABLE_KINDS, Pose, RegionIndex, SceneGraph

DEFAULT_RELOCATION_BUDGET = 16


@dataclass
class DamageSpec:
    swaps: list[tuple[str, str]]
    trigger: str = "at_quake_start"  # at_quake_start | at_quake_end | at_time
    trigger_time: float | None = None
    placement_tags: list[str] = field(default_factory=list)

    def validate(self, scene: SceneGraph) -> None:
        if self.trigger not in ("at_quake_start", "at_quake_end", "at_time"):
            raise SchemaError(f"unknown damage trigger: {self.trigger}")
        if self.trigger == "at_time" and self.trigger_time is None:
            raise SchemaError("at_time trigger requires trigger_time")
        for object_id, variant in self.swaps:
            obj = scene.objects.get(object_id)
            if obj is None:
                raise UnknownObjectError(f"damage swap names unknown object '{object_id}'")
            if obj.kind not in DAMAGEABLE_KINDS:
                raise WrongKindError(
                    f"object '{object_id}' has kind '{obj.kind}'; only wall panels "
                    "and ceiling tiles take damage"
                )
            if obj.damaged_variant != variant:
                raise ValidationError(
                    f"object '{object_id}' declares no damaged variant '{variant}'"
                )

    @classmethod
    def from_dict(cls, raw: dict) -> "DamageSpec":
        trigger = raw.get("trigger", "at_quake_start")
        trigger_time = None
        if isinstance(trigger, dict):
            trigger_time = float(trigger["at_time"])
            trigger = "at_time"
        return cls(
            swaps=[(str(a), str(b)) for a, b in raw.get("swaps", [])],
            trigger=trigger,
            trigger_time=trigger_time,
            placement_tags=[str(t) for t in raw.get("placement_tags", [])],
        )


def apply_damage(scene: SceneGraph, spec: DamageSpec) -> list[TickEvent]:
    """Swap listed objects to their damaged variants; idempotent per spec."""
    spec.validate(scene)
    events: list[TickEvent] = []
    for object_id, variant in spec.swaps:
        obj = scene.objects[object_id]
        if obj.current_variant == variant:
            continue
        obj.current_variant = variant
        events.append(TickEvent("DamageApplied", object_id))
    return events


@dataclass
class RelocationEntry:
    object_id: str
    pose: Pose
    toppled: bool = False


@dataclass
class RelocationList:
    entries: list[RelocationEntry]
    seed: int
    params_digest: str

    def to_dict(self) -> dict:
        return {
            "provenance": {"seed": self.seed, "params_hash": self.params_digest},
            "entries": [
                {
                    "object": e.object_id,
                    "position": list(e.pose.position),
                    "yaw": e.pose.yaw,
                    "toppled": e.toppled,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RelocationList":
        prov = raw.get("provenance", {})
        return cls(
            entries=[
                RelocationEntry(
                    object_id=str(e["object"]),
                    pose=Pose(position=tuple(e["position"]), yaw=float(e.get("yaw", 0.0))),
                    toppled=bool(e.get("toppled", False)),
                )
                for e in raw.get("entries", [])
            ],
            seed=int(prov.get("seed", 0)),
            params_digest=str(prov.get("params_hash", "")),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "RelocationList":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def precompute_relocation(
    scene: SceneGraph,
    region_set: set[str],
    signal: QuakeSignal,
    params: PhysicsParams,
) -> RelocationList:
    """Run the quake on a copy restricted to off-stage regions; keep final poses."""
    for rid in sorted(region_set):
        region = scene.region(rid)
        if region.on_stage:
            raise RegionStagingError(f"region '{rid}' is on stage; cannot pre-simulate")
    work = scene.session_copy()
    index = RegionIndex(work)
    tracked = sorted(
        o.id
        for o in work.objects.values()
        if o.dynamic and o.kind != "floor" and index.region_id_of_object(o) in region_set
    )
    run_quake(work, signal, params, active_regions=region_set)
    entries = [
        RelocationEntry(
            object_id=oid,
            pose=work.objects[oid].pose.copy(),
            toppled=work.objects[oid].toppled,
        )
        for oid in tracked
    ]
    return RelocationList(
        entries=entries, seed=signal.seed, params_digest=params_hash(signal.params, params)
    )


class RelocationBatcher:
    """Applies a relocation list in at most `budget` entries per call."""

    def __init__(self, relocation: RelocationList, budget: int = DEFAULT_RELOCATION_BUDGET):
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self.relocation = relocation
        self.budget = budget
        self._cursor = 0

    @property
    def complete(self) -> bool:
        return self._cursor >= len(self.relocation.entries)

    @property
    def calls_required(self) -> int:
        n = len(self.relocation.entries)
        return -(-n // self.budget)

    def apply_next(self, scene: SceneGraph) -> int:
        """Apply the next batch; returns how many entries were applied."""
        applied = 0
        while applied < self.budget and not self.complete:
            entry = self.relocation.entries[self._cursor]
            obj = scene.objects.get(entry.object_id)
            if obj is None:
                raise UnknownObjectError(
                    f"relocation names unknown object '{entry.object_id}'"
                )
            obj.pose = entry.pose.copy()
            obj.velocity = (0.0, 0.0)
            obj.toppled = entry.toppled
            self._cursor += 1
            applied += 1
        return applied
