"""Shaking signal generation and per-tick rigid-body propagation.

The ground (every `floor` object) is kinematic: it follows the signal as a
single entity, one shared direction per tick. Everything resting on it is
advanced bottom-up along support chains with Coulomb stick/slip friction, a
rigid-block overturning check, and footprint slide-off. All updates run in a
fixed order (floors by id, then chains sorted by root id, depth, id), so a
given (scene, signal, params) triple is bit-reproducible.

Conventions:
  - velocities and forces live in the horizontal plane (2-vectors);
  - a rider's normal load is g * (its mass + everything stacked on it);
  - a toppled body snaps to the floor, keeps its yaw, and goes inert.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidParamsError, TickGridError
from .geometry import Vec2, point_in_rect, rect_half_extent_along, vec_unit
from .scene import RegionIndex, SceneGraph, SceneObject

DEFAULT_TICK = 1.0 / 50.0
GRAVITY = 9.81


@dataclass
class QuakeParams:
    peak_accel: float = 2.5
    base_frequency: float = 2.0
    rise: float = 5.0
    hold: float = 12.0
    decay: float = 8.0
    direction_drift: float = 0.3
    intensity_label: str = "MMI VII-VIII"

    @property
    def duration(self) -> float:
        return self.rise + self.hold + self.decay

    def validate(self, duration: float | None = None) -> None:
        if self.peak_accel <= 0:
            raise InvalidParamsError("peak_accel must be > 0")
        if self.base_frequency <= 0:
            raise InvalidParamsError("base_frequency must be > 0")
        if min(self.rise, self.hold, self.decay) < 0:
            raise InvalidParamsError("envelope stages must be >= 0")
        if duration is not None and abs(self.duration - duration) > 1e-9:
            raise InvalidParamsError(
                f"envelope stages sum to {self.duration}, expected duration {duration}"
            )

    def envelope(self, t: float) -> float:
        if t < 0.0 or t >= self.duration:
            return 0.0
        if t < self.rise:
            return t / self.rise
        if t < self.rise + self.hold:
            return 1.0
        return (self.duration - t) / self.decay

    def accel_magnitude(self, t: float) -> float:
        """Closed-form |a|(t): enveloped rectified sinusoid."""
        if t < 0.0 or t >= self.duration:
            return 0.0
        return (
            self.envelope(t)
            * self.peak_accel
            * abs(math.sin(2.0 * math.pi * self.base_frequency * t))
        )

    def to_dict(self) -> dict:
        return {
            "peak_accel": self.peak_accel,
            "base_frequency": self.base_frequency,
            "envelope": {"rise": self.rise, "hold": self.hold, "decay": self.decay},
            "direction_drift": self.direction_drift,
            "intensity_label": self.intensity_label,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "QuakeParams":
        env = raw.get("envelope", {})
        return cls(
            peak_accel=float(raw.get("peak_accel", 2.5)),
            base_frequency=float(raw.get("base_frequency", 2.0)),
            rise=float(env.get("rise", 5.0)),
            hold=float(env.get("hold", 12.0)),
            decay=float(env.get("decay", 8.0)),
            direction_drift=float(raw.get("direction_drift", 0.3)),
            intensity_label=str(raw.get("intensity_label", "MMI VII-VIII")),
        )


@dataclass
class PhysicsParams:
    g: float = GRAVITY
    dt: float = DEFAULT_TICK
    linear_damping: float = 0.05

    def validate(self) -> None:
        if self.dt <= 0:
            raise InvalidParamsError("dt must be > 0")
        if self.g <= 0:
            raise InvalidParamsError("g must be > 0")

    def to_dict(self) -> dict:
        return {"g": self.g, "dt": self.dt, "linear_damping": self.linear_damping}


def params_hash(qparams: QuakeParams, pparams: PhysicsParams) -> str:
    blob = json.dumps(
        {"quake": qparams.to_dict(), "physics": pparams.to_dict()},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class QuakeSignal:
    """Sampled (t, direction, accel) series on the tick grid."""

    samples: list[tuple[float, Vec2, float]]
    duration: float
    seed: int
    params: QuakeParams
    sample_dt: float = DEFAULT_TICK

    def sample_index(self, t: float) -> int:
        k = round(t / self.sample_dt)
        if abs(k * self.sample_dt - t) > 1e-9:
            raise TickGridError(f"t={t} is not on the {self.sample_dt}s sample grid")
        return k

    def at(self, t: float) -> tuple[Vec2, float]:
        """(direction, accel) at a grid-aligned time; zero accel past the end."""
        k = self.sample_index(t)
        if k < 0:
            return ((1.0, 0.0), 0.0)
        if k >= len(self.samples):
            return (self.samples[-1][1], 0.0)
        _, direction, accel = self.samples[k]
        return (direction, accel)


def generate_signal(
    params: QuakeParams,
    duration: float,
    seed: int,
    sample_dt: float = DEFAULT_TICK,
) -> QuakeSignal:
    """Deterministic enveloped sinusoid with a seeded drifting shaking axis.

    The stored accel is the magnitude (envelope * peak * |sin|); the unit
    direction flips sign with the sinusoid so the ground oscillates back and
    forth along the drifting axis instead of being pushed one way.
    """
    params.validate(duration)
    if sample_dt <= 0:
        raise InvalidParamsError("sample_dt must be > 0")
    rng = random.Random(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    samples: list[tuple[float, Vec2, float]] = []
    n = int(math.ceil(duration / sample_dt)) + 1
    for k in range(n):
        t = k * sample_dt
        accel = params.accel_magnitude(t) if t < duration else 0.0
        sign = -1.0 if math.sin(2.0 * math.pi * params.base_frequency * t) < 0.0 else 1.0
        samples.append((t, (sign * math.cos(theta), sign * math.sin(theta)), accel))
        theta += rng.uniform(-1.0, 1.0) * params.direction_drift * sample_dt
    return QuakeSignal(
        samples=samples, duration=duration, seed=seed, params=params, sample_dt=sample_dt
    )


def export_signal_jsonl(signal: QuakeSignal, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t, (dx, dy), accel in signal.samples:
            fh.write(
                json.dumps(
                    {"t": t, "dir_x": dx, "dir_y": dy, "accel": accel},
                    sort_keys=True,
                    separators=(",", ":"),
                )
                + "\n"
            )


def import_signal_jsonl(
    path: str | Path,
    params: QuakeParams | None = None,
    seed: int = 0,
    duration: float | None = None,
) -> QuakeSignal:
    samples: list[tuple[float, Vec2, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            samples.append((raw["t"], (raw["dir_x"], raw["dir_y"]), raw["accel"]))
    if not samples:
        raise InvalidParamsError(f"no samples in {path}")
    sample_dt = samples[1][0] - samples[0][0] if len(samples) > 1 else DEFAULT_TICK
    if duration is None:
        duration = samples[-1][0]
    return QuakeSignal(
        samples=samples,
        duration=duration,
        seed=seed,
        params=params or QuakeParams(),
        sample_dt=sample_dt,
    )


@dataclass
class ContactForce:
    carrier: str
    rider: str
    force: Vec2
    regime: str  # "stick" | "slip"

    @property
    def magnitude(self) -> float:
        return math.hypot(self.force[0], self.force[1])


def friction_update(
    carrier_accel: Vec2,
    rider: SceneObject,
    normal_load: float,
    dt: float,
    g: float,
    carrier_velocity: Vec2 = (0.0, 0.0),
) -> tuple[ContactForce, Vec2]:
    """One Coulomb contact update for a rider on an accelerating carrier.

    Sticks when the force needed to match the carrier's end-of-tick velocity
    stays within static friction; otherwise slips against kinetic friction.
    The slip increment can never overshoot the carrier velocity because
    mu_kinetic <= mu_static.
    """
    m_eff = normal_load / g
    target = (
        carrier_velocity[0] + carrier_accel[0] * dt,
        carrier_velocity[1] + carrier_accel[1] * dt,
    )
    dv = (target[0] - rider.velocity[0], target[1] - rider.velocity[1])
    dv_mag = math.hypot(dv[0], dv[1])
    needed = m_eff * dv_mag / dt
    max_static = rider.mu_static * normal_load
    if needed <= max_static:
        force = (m_eff * dv[0] / dt, m_eff * dv[1] / dt)
        return (
            ContactForce(carrier="", rider=rider.id, force=force, regime="stick"),
            target,
        )
    unit = (dv[0] / dv_mag, dv[1] / dv_mag)
    slip_mag = rider.mu_kinetic * normal_load
    force = (slip_mag * unit[0], slip_mag * unit[1])
    dv_slip = rider.mu_kinetic * g * dt
    new_v = (
        rider.velocity[0] + dv_slip * unit[0],
        rider.velocity[1] + dv_slip * unit[1],
    )
    return (
        ContactForce(carrier="", rider=rider.id, force=force, regime="slip"),
        new_v,
    )


def topple_check(
    obj: SceneObject,
    sustained_accel: float,
    direction: Vec2 | None = None,
    g: float = GRAVITY,
) -> bool:
    """Rigid-block overturning: unstable when a > g * (base half-width / com height)."""
    if obj.com_height <= 0:
        return False
    hx, hy = obj.half_extents[0], obj.half_extents[1]
    if direction is None or (direction[0] == 0.0 and direction[1] == 0.0):
        b = min(hx, hy)
    else:
        b = rect_half_extent_along(hx, hy, obj.pose.yaw, direction)
    return sustained_accel > g * (b / obj.com_height)


@dataclass
class TickEvent:
    kind: str  # ObjectToppled | ObjectSlid | ObjectFell
    object_id: str

    def to_payload(self) -> dict:
        return {"object": self.object_id}


def _update_order(scene: SceneGraph) -> list[tuple[str, int, str]]:
    """(root floor id, depth, id) for every dynamic non-floor object, sorted."""
    order = []
    for obj in scene.objects.values():
        if obj.kind == "floor" or not obj.dynamic:
            continue
        depth = 0
        cur = obj
        while cur.support_parent is not None:
            cur = scene.objects[cur.support_parent]
            depth += 1
        order.append((cur.id, depth, obj.id))
    order.sort()
    return order


def _stacked_mass(scene: SceneGraph, children: dict[str, list[str]], oid: str) -> float:
    total = 0.0
    stack = list(children.get(oid, ()))
    while stack:
        cid = stack.pop()
        total += scene.objects[cid].mass
        stack.extend(children.get(cid, ()))
    return total


def _root_floor(scene: SceneGraph, obj: SceneObject) -> SceneObject:
    cur = obj
    while cur.support_parent is not None:
        cur = scene.objects[cur.support_parent]
    return cur


def step(
    scene: SceneGraph,
    signal: QuakeSignal,
    t: float,
    params: PhysicsParams,
    active_regions: set[str] | None = None,
    region_index: RegionIndex | None = None,
) -> list[TickEvent]:
    """Advance the scene by one tick at grid-aligned time t.

    `active_regions=None` simulates bodies in on-stage regions only; passing a
    region id set restricts simulation to exactly those regions (used when
    pre-simulating off-stage areas).
    """
    k = t / params.dt
    if abs(k - round(k)) > 1e-6:
        raise TickGridError(f"t={t} is not aligned to dt={params.dt}")
    direction, accel = signal.at(t)
    index = region_index or RegionIndex(scene)
    events: list[TickEvent] = []
    dt, g = params.dt, params.g

    old_velocity: dict[str, Vec2] = {}
    realized_accel: dict[str, Vec2] = {}

    quake_active = t < signal.duration
    a_vec = (accel * direction[0], accel * direction[1])
    for floor in sorted(
        (o for o in scene.objects.values() if o.kind == "floor"), key=lambda o: o.id
    ):
        old_v = floor.velocity
        old_velocity[floor.id] = old_v
        if quake_active:
            new_v = (old_v[0] + a_vec[0] * dt, old_v[1] + a_vec[1] * dt)
        else:
            new_v = (0.0, 0.0)  # ground at rest once the shaking ends
        floor.velocity = new_v
        x, y, z = floor.pose.position
        floor.pose.position = (x + new_v[0] * dt, y + new_v[1] * dt, z)
        realized_accel[floor.id] = ((new_v[0] - old_v[0]) / dt, (new_v[1] - old_v[1]) / dt)

    children: dict[str, list[str]] = {}
    for obj in scene.objects.values():
        if obj.support_parent is not None:
            children.setdefault(obj.support_parent, []).append(obj.id)
    for lst in children.values():
        lst.sort()

    for _root, _depth, oid in _update_order(scene):
        obj = scene.objects[oid]
        if obj.toppled:
            continue
        rid = index.region_id_of_object(obj)
        if rid is None:
            obj.velocity = (0.0, 0.0)  # slid off the modeled area: freeze
            obj.slipping = False
            continue
        if active_regions is None:
            if not scene.regions[rid].on_stage:
                continue
        elif rid not in active_regions:
            continue
        carrier = scene.objects[obj.support_parent]  # chains end at a floor
        carrier_a = realized_accel.get(carrier.id, (0.0, 0.0))
        carrier_v_old = old_velocity.get(carrier.id, carrier.velocity)
        normal_load = g * (obj.mass + _stacked_mass(scene, children, obj.id))
        contact, new_v = friction_update(
            carrier_a, obj, normal_load, dt, g, carrier_velocity=carrier_v_old
        )
        contact.carrier = carrier.id

        slipping = contact.regime == "slip"
        if slipping and not obj.slipping:
            events.append(TickEvent("ObjectSlid", obj.id))
        obj.slipping = slipping

        transmitted = contact.magnitude / (normal_load / g)
        if transmitted > 0.0 and topple_check(
            obj, transmitted, direction=vec_unit(contact.force), g=g
        ):
            _topple(scene, children, obj, events)
            continue

        old_v = obj.velocity
        old_velocity[obj.id] = old_v
        if slipping and params.linear_damping > 0.0:
            keep = max(0.0, 1.0 - params.linear_damping * dt)
            new_v = (new_v[0] * keep, new_v[1] * keep)
        obj.velocity = new_v
        x, y, z = obj.pose.position
        obj.pose.position = (x + new_v[0] * dt, y + new_v[1] * dt, z)
        realized_accel[obj.id] = ((new_v[0] - old_v[0]) / dt, (new_v[1] - old_v[1]) / dt)

        if carrier.kind != "floor" and not point_in_rect(
            obj.xy,
            carrier.xy,
            carrier.half_extents[0],
            carrier.half_extents[1],
            carrier.pose.yaw,
        ):
            _drop_to_floor(scene, obj, events)

    return events


def _topple(
    scene: SceneGraph,
    children: dict[str, list[str]],
    obj: SceneObject,
    events: list[TickEvent],
) -> None:
    floor = _root_floor(scene, obj)
    obj.toppled = True
    obj.slipping = False
    obj.velocity = (0.0, 0.0)
    obj.support_parent = floor.id
    x, y, _z = obj.pose.position
    obj.pose.position = (x, y, floor.top_elevation)
    events.append(TickEvent("ObjectToppled", obj.id))
    for cid in children.get(obj.id, ()):
        child = scene.objects[cid]
        if not child.toppled:
            _drop_to_floor(scene, child, events)


def _drop_to_floor(scene: SceneGraph, obj: SceneObject, events: list[TickEvent]) -> None:
    floor = _root_floor(scene, obj)
    obj.support_parent = floor.id
    x, y, _z = obj.pose.position
    obj.pose.position = (x, y, floor.top_elevation)
    events.append(TickEvent("ObjectFell", obj.id))


def _any_motion(
    scene: SceneGraph,
    active_regions: set[str] | None,
    index: RegionIndex,
    threshold: float = 1e-12,
) -> bool:
    for obj in scene.objects.values():
        if not obj.dynamic or obj.toppled:
            continue
        if obj.kind != "floor":
            rid = index.region_id_of_object(obj)
            if rid is None:
                continue
            if active_regions is None:
                if not scene.regions[rid].on_stage:
                    continue
            elif rid not in active_regions:
                continue
        if abs(obj.velocity[0]) > threshold or abs(obj.velocity[1]) > threshold:
            return True
    return False


def run_quake(
    scene: SceneGraph,
    signal: QuakeSignal,
    params: PhysicsParams,
    active_regions: set[str] | None = None,
    settle_limit_s: float = 30.0,
) -> tuple[SceneGraph, list[tuple[float, float, float]], list[tuple[float, TickEvent]]]:
    """Fold `step` over the whole signal, then let bodies slide to rest.

    Returns the (mutated) scene, the primary floor displacement trace as
    (t, x, y) per tick, and timestamped events.
    """
    params.validate()
    index = RegionIndex(scene)
    floors = sorted(o.id for o in scene.objects.values() if o.kind == "floor")
    trace: list[tuple[float, float, float]] = []
    events: list[tuple[float, TickEvent]] = []
    k = 0
    max_ticks = int(round((signal.duration + settle_limit_s) / params.dt))
    while True:
        t = k * params.dt
        if t > signal.duration and not _any_motion(scene, active_regions, index):
            break
        if k > max_ticks:
            break
        for ev in step(scene, signal, t, params, active_regions, index):
            events.append((t, ev))
        primary = scene.objects[floors[0]]
        trace.append((t, primary.pose.position[0], primary.pose.position[1]))
        k += 1
    return scene, trace, events
