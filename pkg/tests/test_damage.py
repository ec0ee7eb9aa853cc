from __future__ import annotations

import copy

import pytest

from evacsim.damage import (
    DamageSpec,
    RelocationBatcher,
    RelocationList,
    apply_damage,
    precompute_relocation,
)
from evacsim.errors import RegionStagingError, UnknownObjectError, WrongKindError, ValidationError
from evacsim.quake import PhysicsParams, QuakeParams, generate_signal, run_quake
from evacsim.scene import load_scene

from conftest import box, simple_scene_doc


def panelled_doc(n_walls=2, n_tiles=3):
    objects = []
    for i in range(n_walls):
        objects.append({
            "id": f"wall_{i}", "kind": "wall_panel", "mass": 50.0,
            "half_extents": [2, 0.1, 1.3], "com_height": 1.3,
            "pose": {"position": [i * 5.0, 10.0, 0.0], "yaw": 0.0},
            "support_parent": "floor", "dynamic": False,
            "damaged_variant": f"wall_{i}_cracked",
        })
    for i in range(n_tiles):
        objects.append({
            "id": f"tile_{i}", "kind": "ceiling_tile", "mass": 10.0,
            "half_extents": [1, 1, 0.05], "com_height": 0.05,
            "pose": {"position": [i * 3.0, 0.0, 2.6], "yaw": 0.0},
            "support_parent": "floor", "dynamic": False,
            "damaged_variant": f"tile_{i}_cracked",
        })
    objects.append(box("couch", (3, 3, 0)))
    return simple_scene_doc(objects)


def full_spec():
    return DamageSpec(swaps=[("wall_0", "wall_0_cracked"), ("wall_1", "wall_1_cracked"),
                             ("tile_0", "tile_0_cracked"), ("tile_1", "tile_1_cracked"),
                             ("tile_2", "tile_2_cracked")])


def test_five_swaps_five_events():
    scene = load_scene(panelled_doc())
    events = apply_damage(scene, full_spec())
    assert len(events) == 5
    assert all(ev.kind == "DamageApplied" for ev in events)
    assert scene.objects["wall_0"].current_variant == "wall_0_cracked"
    assert scene.objects["tile_2"].current_variant == "tile_2_cracked"


def test_damage_is_idempotent():
    scene = load_scene(panelled_doc())
    apply_damage(scene, full_spec())
    again = apply_damage(scene, full_spec())
    assert again == []


def test_empty_spec_no_events():
    scene = load_scene(panelled_doc())
    assert apply_damage(scene, DamageSpec(swaps=[])) == []


def test_furniture_swap_rejected():
    scene = load_scene(panelled_doc())
    with pytest.raises(WrongKindError):
        apply_damage(scene, DamageSpec(swaps=[("couch", "couch_cracked")]))


def test_unknown_object_rejected():
    scene = load_scene(panelled_doc())
    with pytest.raises(UnknownObjectError):
        apply_damage(scene, DamageSpec(swaps=[("ghost", "x")]))


def test_undeclared_variant_rejected():
    scene = load_scene(panelled_doc())
    with pytest.raises(ValidationError):
        apply_damage(scene, DamageSpec(swaps=[("wall_0", "something_else")]))


def test_damage_never_touches_geometry():
    scene = load_scene(panelled_doc())
    before = {oid: (o.pose.position, o.half_extents) for oid, o in scene.objects.items()}
    apply_damage(scene, full_spec())
    for oid, obj in scene.objects.items():
        assert (obj.pose.position, obj.half_extents) == before[oid]


# -- relocation ---------------------------------------------------------------


def offstage_doc(n_items=10, seed_positions=None):
    doc = simple_scene_doc([])
    doc["regions"] = [
        {"id": "live", "polygon": [[-30, -30], [0, -30], [0, 30], [-30, 30]],
         "staging": "on_stage"},
        {"id": "store", "polygon": [[0, -30], [30, -30], [30, 30], [0, 30]],
         "staging": "off_stage"},
    ]
    doc["walk_graph"]["nodes"] = [{"id": "n0", "pos": [-5.0, 0.0]}]
    positions = seed_positions or [(5.0 + 2.0 * i, -20.0 + 4.0 * i, 0.0) for i in range(n_items)]
    for i, pos in enumerate(positions):
        doc["objects"].append(
            box(f"item_{i}", pos, half=(0.2, 0.2, 0.2), mass=3.0, mu=(0.2, 0.15),
                parent="floor")
        )
    return doc


def shaking(duration=2.0, peak=3.0, seed=13):
    params = QuakeParams(peak_accel=peak, base_frequency=2.0, rise=0.2,
                         hold=duration - 0.5, decay=0.3, direction_drift=0.4)
    return generate_signal(params, duration, seed)


def test_precompute_yields_entry_per_dynamic_object():
    scene = load_scene(offstage_doc(10))
    relocation = precompute_relocation(scene, {"store"}, shaking(), PhysicsParams())
    assert len(relocation.entries) == 10
    assert relocation.seed == 13
    # The source scene is untouched.
    assert scene.objects["item_0"].pose.position[0] == 5.0


def test_precompute_zero_forcing_keeps_initial_poses():
    from evacsim.quake import QuakeSignal

    scene = load_scene(offstage_doc(4))
    params = QuakeParams(peak_accel=2.0, rise=0.0, hold=0.1, decay=0.0)
    signal = QuakeSignal(
        samples=[(k * 0.02, (1.0, 0.0), 0.0) for k in range(6)],
        duration=0.1, seed=1, params=params,
    )
    relocation = precompute_relocation(scene, {"store"}, signal, PhysicsParams())
    for entry in relocation.entries:
        assert entry.pose.position == scene.objects[entry.object_id].pose.position


def test_precompute_deterministic():
    scene = load_scene(offstage_doc(6))
    a = precompute_relocation(scene, {"store"}, shaking(), PhysicsParams())
    b = precompute_relocation(scene, {"store"}, shaking(), PhysicsParams())
    assert a.to_dict() == b.to_dict()


def test_precompute_rejects_on_stage_region():
    scene = load_scene(offstage_doc(2))
    with pytest.raises(RegionStagingError):
        precompute_relocation(scene, {"live"}, shaking(), PhysicsParams())


def test_batching_call_counts():
    scene = load_scene(offstage_doc(25, seed_positions=[(1.0 + i, -25.0 + 2 * i, 0.0)
                                                        for i in range(25)]))
    relocation = precompute_relocation(scene, {"store"}, shaking(), PhysicsParams())
    assert len(relocation.entries) == 25
    batcher = RelocationBatcher(relocation, budget=10)
    assert batcher.calls_required == 3
    applied = []
    while not batcher.complete:
        applied.append(batcher.apply_next(scene))
    assert applied == [10, 10, 5]


def test_batched_poses_match_oracle_bit_exact():
    pp = PhysicsParams()
    signal = shaking()
    scene = load_scene(offstage_doc(9))

    # Oracle: run the quake directly on an independent copy.
    oracle = scene.session_copy()
    run_quake(oracle, signal, pp, active_regions={"store"})

    relocation = precompute_relocation(scene, {"store"}, signal, pp)
    for budget in (1, 7, 16):
        target = scene.session_copy()
        batcher = RelocationBatcher(relocation, budget=budget)
        calls = 0
        while not batcher.complete:
            batcher.apply_next(target)
            calls += 1
        assert calls == batcher.calls_required
        for entry in relocation.entries:
            assert target.objects[entry.object_id].pose.position == \
                oracle.objects[entry.object_id].pose.position
            assert target.objects[entry.object_id].pose.yaw == \
                oracle.objects[entry.object_id].pose.yaw


def test_batcher_empty_list_completes_immediately():
    scene = load_scene(offstage_doc(0))
    batcher = RelocationBatcher(RelocationList(entries=[], seed=0, params_digest=""), budget=4)
    assert batcher.complete
    assert batcher.calls_required == 0


def test_on_stage_objects_never_touched_by_relocation():
    doc = offstage_doc(3)
    doc["objects"].append(box("live_table", (-5.0, -5.0, 0.0)))
    scene = load_scene(doc)
    relocation = precompute_relocation(scene, {"store"}, shaking(), PhysicsParams())
    assert all(e.object_id != "live_table" for e in relocation.entries)
    before = scene.objects["live_table"].pose.position
    batcher = RelocationBatcher(relocation, budget=2)
    while not batcher.complete:
        batcher.apply_next(scene)
    assert scene.objects["live_table"].pose.position == before


def test_relocation_round_trips_through_json(tmp_path):
    scene = load_scene(offstage_doc(5))
    relocation = precompute_relocation(scene, {"store"}, shaking(), PhysicsParams())
    path = tmp_path / "reloc.json"
    relocation.save(path)
    again = RelocationList.load(path)
    assert again.to_dict() == relocation.to_dict()
