"""Declarative scene model: rigid bodies, support relations, regions, walk graph.

The world is 2.5D: every body is a yawed box footprint plus a height, and a
`support_parent` link says what it rests on. Quake forces propagate along
those links, so loading validates that every chain bottoms out at a floor.

Scene documents are plain JSON (see `load_scene`); the loaded SceneGraph is
treated as an immutable template and deep-copied per session.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import OutOfBoundsError, SchemaError, UnknownIdError, ValidationError
from .geometry import (
    Vec2,
    collinear_overlap,
    point_in_polygon,
    polygon_is_simple,
    subtract_intervals,
    vec_len,
    vec_sub,
)

SCHEMA_VERSION = 1

OBJECT_KINDS = frozenset(
    {"floor", "furniture", "wall_panel", "ceiling_tile", "loose_item", "fixture"}
)
DAMAGEABLE_KINDS = frozenset({"wall_panel", "ceiling_tile"})
# Footprints a walking player collides with; panels/tiles live on walls and
# ceilings and never block movement in the 2.5D model.
BLOCKING_KINDS = frozenset({"furniture", "fixture"})

INTERACTABLE_KINDS = frozenset(
    {
        "phone",
        "radio",
        "first_aid_kit",
        "laptop",
        "printer",
        "lift",
        "stairs",
        "escalator",
        "fire_extinguisher",
        "belongings",
        "door",
    }
)

STAGINGS = frozenset({"on_stage", "off_stage"})

DEFAULT_MU_STATIC = 0.5
DEFAULT_MU_KINETIC = 0.4


@dataclass
class Pose:
    """Position of a body: (x, y) in the floor plane, z = base elevation."""

    position: tuple[float, float, float]
    yaw: float = 0.0

    def copy(self) -> "Pose":
        return Pose(self.position, self.yaw)


@dataclass
class SceneObject:
    id: str
    kind: str
    mass: float
    half_extents: tuple[float, float, float]
    com_height: float
    pose: Pose
    mu_static: float = DEFAULT_MU_STATIC
    mu_kinetic: float = DEFAULT_MU_KINETIC
    velocity: tuple[float, float] = (0.0, 0.0)
    support_parent: str | None = None
    dynamic: bool = False
    damaged_variant: str | None = None
    # Runtime state, not part of the authored document.
    current_variant: str = "intact"
    toppled: bool = False
    slipping: bool = False

    @property
    def top_elevation(self) -> float:
        return self.pose.position[2] + 2.0 * self.half_extents[2]

    @property
    def xy(self) -> Vec2:
        return (self.pose.position[0], self.pose.position[1])


@dataclass
class Region:
    id: str
    polygon: list[Vec2]
    staging: str = "on_stage"

    @property
    def on_stage(self) -> bool:
        return self.staging == "on_stage"


@dataclass
class Interactable:
    id: str
    kind: str
    state: str
    object_id: str
    region_id: str


@dataclass
class WalkNode:
    id: str
    pos: Vec2


@dataclass
class AssemblyArea:
    node: str
    safe: bool


@dataclass
class SceneGraph:
    objects: dict[str, SceneObject]
    regions: dict[str, Region]
    walk_nodes: dict[str, WalkNode]
    walk_edges: list[tuple[str, str, float]]
    exits: list[str]
    assembly_areas: list[AssemblyArea]
    interactables: dict[str, Interactable]
    # Derived at load time.
    wall_segments: list[tuple[Vec2, Vec2]] = field(default_factory=list)

    def object(self, object_id: str) -> SceneObject:
        try:
            return self.objects[object_id]
        except KeyError:
            raise UnknownIdError(f"unknown object id: {object_id}") from None

    def region(self, region_id: str) -> Region:
        try:
            return self.regions[region_id]
        except KeyError:
            raise UnknownIdError(f"unknown region id: {region_id}") from None

    def node(self, node_id: str) -> WalkNode:
        try:
            return self.walk_nodes[node_id]
        except KeyError:
            raise UnknownIdError(f"unknown walk node: {node_id}") from None

    def interactable(self, iid: str) -> Interactable:
        try:
            return self.interactables[iid]
        except KeyError:
            raise UnknownIdError(f"unknown interactable: {iid}") from None

    def interactables_in(self, region_id: str, kind: str | None = None) -> list[Interactable]:
        out = []
        for item in self.interactables.values():
            if item.region_id != region_id:
                continue
            if kind is not None and item.kind != kind:
                continue
            out.append(item)
        return out

    def children_of(self, object_id: str) -> list[SceneObject]:
        return [o for o in self.objects.values() if o.support_parent == object_id]

    def session_copy(self) -> "SceneGraph":
        return copy.deepcopy(self)


# ---------------------------------------------------------------------------
# Loading and validation
# ---------------------------------------------------------------------------


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise SchemaError(f"{where}: missing required key '{key}'")
    return doc[key]


def _vec3(raw, where: str) -> tuple[float, float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise SchemaError(f"{where}: expected a 3-vector, got {raw!r}")
    return (float(raw[0]), float(raw[1]), float(raw[2]))


def _vec2(raw, where: str) -> Vec2:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise SchemaError(f"{where}: expected a 2-vector, got {raw!r}")
    return (float(raw[0]), float(raw[1]))


def _load_object(raw: dict) -> SceneObject:
    oid = str(_require(raw, "id", "object"))
    where = f"object '{oid}'"
    kind = _require(raw, "kind", where)
    if kind not in OBJECT_KINDS:
        raise SchemaError(f"{where}: unknown kind '{kind}'")
    pose_raw = _require(raw, "pose", where)
    pose = Pose(
        position=_vec3(_require(pose_raw, "position", where), where),
        yaw=float(pose_raw.get("yaw", 0.0)),
    )
    obj = SceneObject(
        id=oid,
        kind=kind,
        mass=float(_require(raw, "mass", where)),
        half_extents=_vec3(_require(raw, "half_extents", where), where),
        com_height=float(raw.get("com_height", raw["half_extents"][2])),
        pose=pose,
        mu_static=float(raw.get("mu_static", DEFAULT_MU_STATIC)),
        mu_kinetic=float(raw.get("mu_kinetic", DEFAULT_MU_KINETIC)),
        velocity=tuple(raw.get("velocity", (0.0, 0.0))),  # type: ignore[arg-type]
        support_parent=raw.get("support_parent"),
        dynamic=bool(raw.get("dynamic", False)),
        damaged_variant=raw.get("damaged_variant"),
    )
    if obj.mass <= 0:
        raise ValidationError(f"{where}: mass must be positive")
    if obj.mu_static < 0 or obj.mu_kinetic < 0:
        raise ValidationError(f"{where}: friction coefficients must be >= 0")
    if obj.mu_kinetic > obj.mu_static:
        raise ValidationError(f"{where}: mu_kinetic must be <= mu_static")
    if any(h <= 0 for h in obj.half_extents):
        raise ValidationError(f"{where}: half extents must be positive")
    if not obj.dynamic and obj.velocity != (0.0, 0.0):
        raise ValidationError(f"{where}: static object must have zero velocity")
    return obj


def load_scene(doc: dict) -> SceneGraph:
    """Build and validate a SceneGraph from a parsed scene document."""
    if not isinstance(doc, dict):
        raise SchemaError("scene document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported scene schema_version: {version!r}")

    objects: dict[str, SceneObject] = {}
    for raw in _require(doc, "objects", "scene"):
        obj = _load_object(raw)
        if obj.id in objects:
            raise ValidationError(f"duplicate object id: {obj.id}")
        objects[obj.id] = obj

    regions: dict[str, Region] = {}
    for raw in _require(doc, "regions", "scene"):
        rid = str(_require(raw, "id", "region"))
        if rid in regions:
            raise ValidationError(f"duplicate region id: {rid}")
        poly = [_vec2(p, f"region '{rid}'") for p in _require(raw, "polygon", f"region '{rid}'")]
        staging = raw.get("staging", "on_stage")
        if staging not in STAGINGS:
            raise SchemaError(f"region '{rid}': unknown staging '{staging}'")
        if not polygon_is_simple(poly):
            raise ValidationError(f"region '{rid}': polygon is self-intersecting")
        regions[rid] = Region(id=rid, polygon=poly, staging=staging)

    graph_raw = _require(doc, "walk_graph", "scene")
    walk_nodes: dict[str, WalkNode] = {}
    for raw in _require(graph_raw, "nodes", "walk_graph"):
        nid = str(_require(raw, "id", "walk node"))
        if nid in walk_nodes:
            raise ValidationError(f"duplicate walk node id: {nid}")
        walk_nodes[nid] = WalkNode(id=nid, pos=_vec2(_require(raw, "pos", f"node '{nid}'"), nid))
    walk_edges: list[tuple[str, str, float]] = []
    for raw in _require(graph_raw, "edges", "walk_graph"):
        a, b = str(raw[0]), str(raw[1])
        if a not in walk_nodes or b not in walk_nodes:
            raise ValidationError(f"walk edge ({a}, {b}) references unknown node")
        length = float(raw[2]) if len(raw) > 2 else vec_len(
            vec_sub(walk_nodes[b].pos, walk_nodes[a].pos)
        )
        walk_edges.append((a, b, length))

    exits = [str(e) for e in _require(doc, "exits", "scene")]
    assembly_areas = [
        AssemblyArea(node=str(_require(raw, "node", "assembly area")), safe=bool(raw.get("safe", True)))
        for raw in _require(doc, "assembly_areas", "scene")
    ]

    interactables: dict[str, Interactable] = {}
    for raw in _require(doc, "interactables", "scene"):
        iid = str(_require(raw, "id", "interactable"))
        if iid in interactables:
            raise ValidationError(f"duplicate interactable id: {iid}")
        kind = _require(raw, "kind", f"interactable '{iid}'")
        if kind not in INTERACTABLE_KINDS:
            raise SchemaError(f"interactable '{iid}': unknown kind '{kind}'")
        interactables[iid] = Interactable(
            id=iid,
            kind=kind,
            state=str(raw.get("state", "idle")),
            object_id=str(_require(raw, "object", f"interactable '{iid}'")),
            region_id=str(_require(raw, "region", f"interactable '{iid}'")),
        )

    scene = SceneGraph(
        objects=objects,
        regions=regions,
        walk_nodes=walk_nodes,
        walk_edges=walk_edges,
        exits=exits,
        assembly_areas=assembly_areas,
        interactables=interactables,
    )
    _validate(scene)
    scene.wall_segments = _build_walls(scene)
    return scene


def load_scene_file(path: str | Path) -> SceneGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scene(json.load(fh))


def _validate(scene: SceneGraph) -> None:
    floors = [o for o in scene.objects.values() if o.kind == "floor"]
    if not floors:
        raise ValidationError("support chain must terminate at floor (scene has none)")

    for obj in scene.objects.values():
        seen = {obj.id}
        cur = obj
        while cur.support_parent is not None:
            parent_id = cur.support_parent
            if parent_id not in scene.objects:
                raise ValidationError(
                    f"object '{cur.id}': support parent '{parent_id}' does not exist"
                )
            if parent_id in seen:
                raise ValidationError(f"support cycle through '{parent_id}'")
            seen.add(parent_id)
            cur = scene.objects[parent_id]
        if cur.kind != "floor":
            raise ValidationError(
                f"support chain must terminate at floor (object '{obj.id}' ends at '{cur.id}')"
            )
        if obj.damaged_variant is not None and obj.kind not in DAMAGEABLE_KINDS:
            raise ValidationError(
                f"object '{obj.id}': only wall panels and ceiling tiles take damage variants"
            )

    if not scene.exits:
        raise ValidationError("scene must declare at least one exit")
    for e in scene.exits:
        if e not in scene.walk_nodes:
            raise ValidationError(f"exit '{e}' is not a walk node")
    if not any(a.safe for a in scene.assembly_areas):
        raise ValidationError("scene must declare at least one safe assembly area")
    for area in scene.assembly_areas:
        if area.node not in scene.walk_nodes:
            raise ValidationError(f"assembly area node '{area.node}' is not a walk node")

    for node in scene.walk_nodes.values():
        containing = [r.id for r in scene.regions.values() if point_in_polygon(node.pos, r.polygon)]
        if len(containing) == 0:
            raise ValidationError(f"walk node '{node.id}' lies in no region")
        # Nodes on shared boundaries are owned by the tie-break region; a node
        # strictly inside two regions means the regions overlap.
        if len(containing) > 1 and not _all_share_boundary_point(scene, containing, node.pos):
            raise ValidationError(
                f"walk node '{node.id}' lies strictly inside {sorted(containing)}"
            )

    adjacency = region_adjacency(scene)
    for a, b, _length in scene.walk_edges:
        ra = region_of(scene, scene.walk_nodes[a].pos).id
        rb = region_of(scene, scene.walk_nodes[b].pos).id
        if ra != rb and rb not in adjacency.get(ra, set()):
            raise ValidationError(
                f"walk edge ({a}, {b}) spans non-adjacent regions {ra}/{rb}"
            )

    on_stage = [r for r in scene.regions.values() if r.on_stage]
    if on_stage and not _connected(set(r.id for r in on_stage), adjacency):
        raise ValidationError("on_stage regions do not form a connected sub-area")

    for item in scene.interactables.values():
        if item.object_id not in scene.objects:
            raise ValidationError(
                f"interactable '{item.id}' references missing object '{item.object_id}'"
            )
        if item.region_id not in scene.regions:
            raise ValidationError(
                f"interactable '{item.id}' references missing region '{item.region_id}'"
            )


def _all_share_boundary_point(scene: SceneGraph, region_ids: list[str], p: Vec2) -> bool:
    from .geometry import on_segment

    for rid in region_ids:
        poly = scene.regions[rid].polygon
        n = len(poly)
        if not any(on_segment(p, poly[i], poly[(i + 1) % n]) for i in range(n)):
            return False
    return True


def _connected(ids: set[str], adjacency: dict[str, set[str]]) -> bool:
    start = sorted(ids)[0]
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for nxt in adjacency.get(cur, set()):
            if nxt in ids and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen == ids


def region_adjacency(scene: SceneGraph) -> dict[str, set[str]]:
    """Regions sharing a boundary segment of positive length."""
    adj: dict[str, set[str]] = {rid: set() for rid in scene.regions}
    items = sorted(scene.regions.values(), key=lambda r: r.id)
    for i, ra in enumerate(items):
        na = len(ra.polygon)
        for rb in items[i + 1:]:
            nb = len(rb.polygon)
            shared = 0.0
            for ia in range(na):
                a1, a2 = ra.polygon[ia], ra.polygon[(ia + 1) % na]
                for ib in range(nb):
                    b1, b2 = rb.polygon[ib], rb.polygon[(ib + 1) % nb]
                    shared += collinear_overlap(a1, a2, b1, b2)
            if shared > 1e-6:
                adj[ra.id].add(rb.id)
                adj[rb.id].add(ra.id)
    return adj


def _build_walls(scene: SceneGraph) -> list[tuple[Vec2, Vec2]]:
    """Region boundary pieces not shared with any other region: impassable."""
    walls: list[tuple[Vec2, Vec2]] = []
    regions = sorted(scene.regions.values(), key=lambda r: r.id)
    for region in regions:
        n = len(region.polygon)
        for i in range(n):
            a = region.polygon[i]
            b = region.polygon[(i + 1) % n]
            length = vec_len(vec_sub(b, a))
            if length < 1e-12:
                continue
            holes: list[tuple[float, float]] = []
            for other in regions:
                if other.id == region.id:
                    continue
                m = len(other.polygon)
                for j in range(m):
                    c = other.polygon[j]
                    d = other.polygon[(j + 1) % m]
                    if collinear_overlap(a, b, c, d) <= 1e-9:
                        continue
                    # Parameterize the overlap on segment a-b.
                    ab = vec_sub(b, a)
                    denom = length * length
                    t1 = (vec_sub(c, a)[0] * ab[0] + vec_sub(c, a)[1] * ab[1]) / denom
                    t2 = (vec_sub(d, a)[0] * ab[0] + vec_sub(d, a)[1] * ab[1]) / denom
                    holes.append((max(min(t1, t2), 0.0), min(max(t1, t2), 1.0)))
            for lo, hi in subtract_intervals([(0.0, 1.0)], holes):
                if (hi - lo) * length < 1e-6:
                    continue
                ab = vec_sub(b, a)
                walls.append(
                    (
                        (a[0] + ab[0] * lo, a[1] + ab[1] * lo),
                        (a[0] + ab[0] * hi, a[1] + ab[1] * hi),
                    )
                )
    return walls


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def support_chain(scene: SceneGraph, object_id: str) -> list[str]:
    """Ids from the supporting floor up to and including `object_id`."""
    obj = scene.object(object_id)
    chain = [obj.id]
    cur = obj
    while cur.support_parent is not None:
        cur = scene.object(cur.support_parent)
        chain.append(cur.id)
    chain.reverse()
    return chain


def region_of(scene: SceneGraph, position: Vec2) -> Region:
    """The region containing a point; boundary ties go to the smallest id."""
    hits = [
        r for r in scene.regions.values() if point_in_polygon(position, r.polygon)
    ]
    if not hits:
        raise OutOfBoundsError(f"position {position} lies in no region")
    return min(hits, key=lambda r: r.id)


def serialize_scene(scene: SceneGraph) -> dict:
    """Inverse of load_scene over the authored fields of a valid scene."""
    objects = []
    for obj in scene.objects.values():
        raw: dict = {
            "id": obj.id,
            "kind": obj.kind,
            "mass": obj.mass,
            "mu_static": obj.mu_static,
            "mu_kinetic": obj.mu_kinetic,
            "half_extents": list(obj.half_extents),
            "com_height": obj.com_height,
            "pose": {"position": list(obj.pose.position), "yaw": obj.pose.yaw},
            "velocity": list(obj.velocity),
            "dynamic": obj.dynamic,
        }
        if obj.support_parent is not None:
            raw["support_parent"] = obj.support_parent
        if obj.damaged_variant is not None:
            raw["damaged_variant"] = obj.damaged_variant
        objects.append(raw)
    return {
        "schema_version": SCHEMA_VERSION,
        "objects": objects,
        "regions": [
            {"id": r.id, "polygon": [list(p) for p in r.polygon], "staging": r.staging}
            for r in scene.regions.values()
        ],
        "walk_graph": {
            "nodes": [{"id": n.id, "pos": list(n.pos)} for n in scene.walk_nodes.values()],
            "edges": [[a, b, length] for a, b, length in scene.walk_edges],
        },
        "exits": list(scene.exits),
        "assembly_areas": [{"node": a.node, "safe": a.safe} for a in scene.assembly_areas],
        "interactables": [
            {
                "id": i.id,
                "kind": i.kind,
                "state": i.state,
                "object": i.object_id,
                "region": i.region_id,
            }
            for i in scene.interactables.values()
        ],
    }


class RegionIndex:
    """Cached point-to-region lookup for bodies that rarely change region.

    Bodies that slide past every region polygon (off the modeled area) get
    None; the physics freezes them at the edge.
    """

    def __init__(self, scene: SceneGraph):
        self._scene = scene
        self._cache: dict[str, str] = {}

    def region_id_of_object(self, obj: SceneObject) -> str | None:
        cached = self._cache.get(obj.id)
        if cached is not None and point_in_polygon(obj.xy, self._scene.regions[cached].polygon):
            return cached
        try:
            region = region_of(self._scene, obj.xy)
        except OutOfBoundsError:
            return None
        self._cache[obj.id] = region.id
        return region.id

    def staging_of_object(self, obj: SceneObject) -> str | None:
        rid = self.region_id_of_object(obj)
        return self._scene.regions[rid].staging if rid is not None else None
