from __future__ import annotations

import json
from pathlib import Path

import pytest

from evacsim.demo import data_path
from evacsim.scene import load_scene, load_scene_file
from evacsim.session import SessionConfig

SCENE_PATH = data_path("scene_ach5.json")
BP_PATH = data_path("scenario_bp.json")
TP_PATH = data_path("scenario_tp.json")

# Short shaking + early doctor instruction: keeps scripted runs quick while
# exercising the same machinery as the shipped timings.
SHORT_QUAKE = {"rise": 1.0, "hold": 3.0, "decay": 2.0}
SHORT_INSTRUCTION_S = 8.0


@pytest.fixture(scope="session")
def scene_template():
    return load_scene_file(SCENE_PATH)


@pytest.fixture(scope="session")
def short_paths(tmp_path_factory):
    """(scene, bp scenario, tp scenario) paths with shortened timings."""
    root = tmp_path_factory.mktemp("short")
    out = {"scene": str(SCENE_PATH)}
    for mode, src in (("bp", BP_PATH), ("tp", TP_PATH)):
        doc = json.loads(Path(src).read_text())
        doc["quake"]["envelope"] = dict(SHORT_QUAKE)
        doc["steps"]["instruction_delay_s"] = SHORT_INSTRUCTION_S
        path = root / f"scenario_{mode}.json"
        path.write_text(json.dumps(doc))
        out[mode] = str(path)
    return out


@pytest.fixture(scope="session")
def short_quake_s():
    return sum(SHORT_QUAKE.values())


def bp_config(short_paths, seed=42, **kw):
    return SessionConfig(mode="BP", scene=short_paths["scene"],
                         scenario=short_paths["bp"], seed=seed, **kw)


def tp_config(short_paths, seed=7, **kw):
    return SessionConfig(mode="TP", scene=short_paths["scene"],
                         scenario=short_paths["tp"], seed=seed, **kw)


def simple_scene_doc(objects, region_half=60.0):
    """Single floor + one huge on-stage region around the given objects."""
    h = region_half
    return {
        "schema_version": 1,
        "objects": [
            {"id": "floor", "kind": "floor", "mass": 1e6, "mu_static": 1.0,
             "mu_kinetic": 0.8, "half_extents": [h, h, 0.1], "com_height": 0.1,
             "pose": {"position": [0.0, 0.0, -0.2], "yaw": 0.0}, "dynamic": True},
            *objects,
        ],
        "regions": [{"id": "main", "polygon": [[-h, -h], [h, -h], [h, h], [-h, h]],
                     "staging": "on_stage"}],
        "walk_graph": {"nodes": [{"id": "n0", "pos": [0.0, 0.0]}], "edges": []},
        "exits": ["n0"],
        "assembly_areas": [{"node": "n0", "safe": True}],
        "interactables": [],
    }


def box(id, pos, half=(0.3, 0.3, 0.3), mass=10.0, mu=(0.5, 0.4), parent="floor",
        com=None, velocity=(0.0, 0.0), yaw=0.0):
    return {
        "id": id, "kind": "furniture", "mass": mass,
        "mu_static": mu[0], "mu_kinetic": mu[1],
        "half_extents": list(half), "com_height": com if com is not None else half[2],
        "pose": {"position": list(pos), "yaw": yaw},
        "velocity": list(velocity),
        "support_parent": parent, "dynamic": True,
    }


def make_simple_scene(objects, region_half=60.0):
    return load_scene(simple_scene_doc(objects, region_half))
