from __future__ import annotations

import copy

import pytest

from evacsim.errors import OutOfBoundsError, UnknownIdError, ValidationError
from evacsim.geometry import collinear_overlap
from evacsim.scene import (
    load_scene,
    region_adjacency,
    region_of,
    serialize_scene,
    support_chain,
)

from conftest import box, make_simple_scene, simple_scene_doc


def stack_doc():
    """Floor -> table -> box support stack."""
    return simple_scene_doc([
        box("table", (0, 0, 0), half=(1.0, 0.6, 0.4)),
        box("crate", (0.2, 0, 0.8), half=(0.2, 0.2, 0.2), parent="table"),
    ])


def test_minimal_stack_loads_with_chains_intact():
    scene = load_scene(stack_doc())
    assert set(scene.objects) == {"floor", "table", "crate"}
    assert support_chain(scene, "crate") == ["floor", "table", "crate"]


def test_support_chain_of_floor_is_identity():
    scene = load_scene(stack_doc())
    assert support_chain(scene, "floor") == ["floor"]


def test_support_chain_single_link():
    scene = make_simple_scene([box("chair", (2, 3, 0))])
    assert support_chain(scene, "chair") == ["floor", "chair"]


def test_support_chain_unknown_id():
    scene = load_scene(stack_doc())
    with pytest.raises(UnknownIdError):
        support_chain(scene, "ghost")


def test_scene_without_floor_rejected():
    doc = stack_doc()
    doc["objects"] = [o for o in doc["objects"] if o["id"] != "floor"]
    doc["objects"][0].pop("support_parent")
    with pytest.raises(ValidationError, match="floor"):
        load_scene(doc)


def test_support_cycle_rejected():
    doc = stack_doc()
    for raw in doc["objects"]:
        if raw["id"] == "table":
            raw["support_parent"] = "crate"
    with pytest.raises(ValidationError, match="cycle"):
        load_scene(doc)


def test_mu_ordering_enforced():
    doc = simple_scene_doc([box("b", (0, 0, 0), mu=(0.3, 0.5))])
    with pytest.raises(ValidationError, match="mu_kinetic"):
        load_scene(doc)


def two_region_doc():
    doc = simple_scene_doc([])
    doc["regions"] = [
        {"id": "a_west", "polygon": [[-10, -10], [0, -10], [0, 10], [-10, 10]],
         "staging": "on_stage"},
        {"id": "b_east", "polygon": [[0, -10], [10, -10], [10, 10], [0, 10]],
         "staging": "on_stage"},
    ]
    doc["walk_graph"]["nodes"] = [{"id": "n0", "pos": [-5.0, 0.0]}]
    return doc


def test_region_of_centroid():
    scene = load_scene(two_region_doc())
    assert region_of(scene, (-5.0, 0.0)).id == "a_west"
    assert region_of(scene, (5.0, 0.0)).id == "b_east"


def test_region_boundary_tie_breaks_to_smallest_id():
    scene = load_scene(two_region_doc())
    # (0, 3) sits exactly on the shared edge of a_west and b_east.
    assert region_of(scene, (0.0, 3.0)).id == "a_west"


def test_region_of_outside_everything():
    scene = load_scene(two_region_doc())
    with pytest.raises(OutOfBoundsError):
        region_of(scene, (100.0, 100.0))


def test_outdoor_point_in_demo_scene(scene_template):
    assert region_of(scene_template, (20.0, -12.0)).id == "outdoor"
    assert region_of(scene_template, (6.0, 15.0)).id == "meeting_room"


def test_serialize_round_trip(scene_template):
    doc = serialize_scene(scene_template)
    again = load_scene(doc)
    assert serialize_scene(again) == doc
    assert again.objects["table_meeting"].pose.position == \
        scene_template.objects["table_meeting"].pose.position
    assert set(again.interactables) == set(scene_template.interactables)


def test_every_chain_starts_at_floor(scene_template):
    for oid in scene_template.objects:
        chain = support_chain(scene_template, oid)
        assert len(chain) >= 1
        assert scene_template.objects[chain[0]].kind == "floor"


def test_walk_edges_connect_same_or_adjacent_regions(scene_template):
    adjacency = region_adjacency(scene_template)
    for a, b, _ in scene_template.walk_edges:
        ra = region_of(scene_template, scene_template.walk_nodes[a].pos).id
        rb = region_of(scene_template, scene_template.walk_nodes[b].pos).id
        assert ra == rb or rb in adjacency[ra]


def test_shared_boundaries_are_not_walls(scene_template):
    # The meeting room / corridor boundary (x=12, y in 10..20) must be open.
    shared = ((12.0, 10.0), (12.0, 20.0))
    for a, b in scene_template.wall_segments:
        assert collinear_overlap(a, b, *shared) < 1e-9


def test_outer_boundary_is_a_wall(scene_template):
    # The west side of the meeting room (x=0) borders nothing: must be solid.
    west = ((0.0, 10.0), (0.0, 20.0))
    total = sum(collinear_overlap(a, b, *west) for a, b in scene_template.wall_segments)
    assert total == pytest.approx(10.0, abs=1e-6)


def test_session_copy_is_independent(scene_template):
    clone = scene_template.session_copy()
    clone.objects["table_meeting"].pose.position = (99.0, 99.0, 0.0)
    assert scene_template.objects["table_meeting"].pose.position != (99.0, 99.0, 0.0)
