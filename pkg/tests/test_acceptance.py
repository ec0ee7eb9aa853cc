"""Acceptance gate: every primary criterion at its stated tolerance.

Each test prints one [PASS]/[FAIL] line so the suite doubles as a checklist.
"""
from __future__ import annotations

import itertools
import json
import math
import random
import statistics
import time
from pathlib import Path

import pytest

from evacsim.damage import RelocationBatcher, precompute_relocation
from evacsim.demo import TP_EXPECTED, bp_script, tp_script
from evacsim.quake import PhysicsParams, QuakeParams, friction_update, generate_signal, run_quake
from evacsim.scene import load_scene
from evacsim.session import SessionConfig, create_session, run_scripted_session
from evacsim.stats import (
    LikertResponse,
    assign_groups,
    render_assessment_text,
    summarize_assessment,
    wilcoxon_signed_rank,
)
from evacsim.story import RECOMMENDED_BEHAVIOURS
from evacsim.telemetry import BehaviouralRecord, extract_bp_metrics, neutrality_violations

from conftest import (
    SHORT_INSTRUCTION_S,
    bp_config,
    box,
    simple_scene_doc,
    tp_config,
)

G = 9.81


def report(name: str, ok: bool, detail: str = "") -> None:
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}" + (f": {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Shared scripted runs (collected for the coverage and neutrality criteria).
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def bp_suite(short_paths, scene_template, short_quake_s):
    runs = {}
    for variant in ("thorough", "careless", "returner"):
        commands = bp_script(scene_template, variant, quake_s=short_quake_s,
                             instruction_s=SHORT_INSTRUCTION_S)
        session = run_scripted_session(bp_config(short_paths, seed=42), commands)
        assert not session.live, f"BP {variant} script did not finish"
        runs[variant] = session
    return runs


@pytest.fixture(scope="module")
def determinism_logs(short_paths, scene_template, short_quake_s):
    commands = bp_script(scene_template, "careless", quake_s=short_quake_s,
                         instruction_s=SHORT_INSTRUCTION_S)
    logs = []
    for _ in range(20):
        session = run_scripted_session(bp_config(short_paths, seed=1234), commands)
        assert not session.live
        logs.append(session.log.to_jsonl())
    return logs


def test_determinism_twenty_runs_byte_identical(determinism_logs):
    t0 = time.perf_counter()
    baseline = determinism_logs[0].encode("utf-8")
    identical = all(log.encode("utf-8") == baseline for log in determinism_logs)
    report(
        "determinism: 20 identical (scene, scenario, seed, script) runs",
        identical,
        f"{len(determinism_logs)} logs, {len(baseline)} bytes each, "
        f"{time.perf_counter() - t0:.2f}s compare",
    )


def test_friction_oracle_thousand_point_sweep():
    rng = random.Random(20260810)
    dt = 1.0 / 50.0
    worst_force_err = 0.0
    mismatches = 0
    for _ in range(1000):
        m = rng.uniform(0.5, 400.0)
        mu_s = rng.uniform(0.05, 1.5)
        mu_k = mu_s * rng.uniform(0.1, 1.0)
        accel = rng.uniform(0.0, 18.0)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        scene = load_scene(simple_scene_doc([box("r", (0, 0, 0), mass=m, mu=(mu_s, mu_k))]))
        rider = scene.objects["r"]
        a_vec = (accel * math.cos(angle), accel * math.sin(angle))
        force, _v = friction_update(a_vec, rider, m * G, dt, G)
        should_stick = m * accel <= mu_s * m * G
        if (force.regime == "stick") != should_stick:
            mismatches += 1
        if force.regime == "slip":
            err = abs(force.magnitude - mu_k * m * G) / max(mu_k * m * G, 1e-30)
            worst_force_err = max(worst_force_err, err)
    report(
        "friction: 1000-point sweep matches the closed-form Coulomb criterion",
        mismatches == 0 and worst_force_err <= 1e-9,
        f"mismatches={mismatches}, worst relative slip-force error={worst_force_err:.3e}",
    )


def _topples_at(peak: float, half_b: float, com_h: float) -> bool:
    scene = load_scene(simple_scene_doc(
        [box("blk", (0, 0, 0), half=(half_b, half_b, com_h), mass=25.0,
             mu=(2.5, 2.0), com=com_h)]
    ))
    params = QuakeParams(peak_accel=peak, base_frequency=2.0, rise=0.0, hold=1.0,
                         decay=0.0, direction_drift=0.0)
    signal = generate_signal(params, 1.0, seed=77)
    run_quake(scene, signal, PhysicsParams())
    return scene.objects["blk"].toppled


def test_overturning_oracle_fifty_geometries():
    rng = random.Random(31415)
    worst = 0.0
    for _ in range(50):
        com_h = rng.uniform(0.3, 1.5)
        ratio = rng.uniform(0.1, 0.6)
        half_b = ratio * com_h
        analytic = G * half_b / com_h
        lo, hi = 0.8 * analytic, 1.3 * analytic
        assert not _topples_at(lo, half_b, com_h)
        assert _topples_at(hi, half_b, com_h)
        for _ in range(22):
            mid = 0.5 * (lo + hi)
            if _topples_at(mid, half_b, com_h):
                hi = mid
            else:
                lo = mid
        onset = 0.5 * (lo + hi)
        worst = max(worst, abs(onset - analytic) / analytic)
    report(
        "overturning: simulated onset within 2% of g*b/h for 50 geometries",
        worst <= 0.02,
        f"worst relative deviation={worst * 100:.3f}%",
    )


def test_relocation_equivalence_twenty_scenes():
    rng = random.Random(808)
    pp = PhysicsParams()
    checked = 0
    for case in range(20):
        n = rng.randint(3, 14)
        objects = []
        for i in range(n):
            mu_s = rng.uniform(0.15, 0.5)
            objects.append(box(
                f"it{i}",
                (rng.uniform(2.0, 28.0), rng.uniform(-28.0, 28.0), 0.0),
                half=(rng.uniform(0.1, 0.5),) * 2 + (rng.uniform(0.1, 0.5),),
                mass=rng.uniform(1.0, 40.0),
                mu=(mu_s, mu_s * rng.uniform(0.5, 0.95)),
            ))
        doc = simple_scene_doc(objects)
        doc["regions"] = [
            {"id": "live", "polygon": [[-60, -60], [0, -60], [0, 60], [-60, 60]],
             "staging": "on_stage"},
            {"id": "store", "polygon": [[0, -60], [60, -60], [60, 60], [0, 60]],
             "staging": "off_stage"},
        ]
        doc["walk_graph"]["nodes"] = [{"id": "n0", "pos": [-5.0, 0.0]}]
        scene = load_scene(doc)
        params = QuakeParams(peak_accel=rng.uniform(1.5, 4.0), base_frequency=2.0,
                             rise=0.3, hold=1.2, decay=0.5,
                             direction_drift=rng.uniform(0.0, 0.6))
        signal = generate_signal(params, 2.0, seed=case)

        oracle = scene.session_copy()
        run_quake(oracle, signal, pp, active_regions={"store"})
        relocation = precompute_relocation(scene, {"store"}, signal, pp)
        assert len(relocation.entries) == n

        for budget in (1, 7, 16):
            target = scene.session_copy()
            batcher = RelocationBatcher(relocation, budget=budget)
            calls = 0
            while not batcher.complete:
                batcher.apply_next(target)
                calls += 1
            assert calls == -(-n // budget), (case, budget)
            for entry in relocation.entries:
                got = target.objects[entry.object_id].pose
                want = oracle.objects[entry.object_id].pose
                assert got.position == want.position and got.yaw == want.yaw
            checked += 1
    report(
        "relocation: batched application bit-equal to the pre-simulation oracle",
        checked == 60,
        f"{checked} scene/budget combinations, call counts exact",
    )


BOOLEAN_FIELDS = [
    "dch_first", "checked_damage", "unplugged", "phone_call", "phone_text",
    "assisted", "radio", "first_aid", "laptop", "belongings",
    "waited_for_instruction", "checked_damage_evac", "used_stairs_or_escalator",
    "used_lift", "checked_injured", "checked_stair_damage", "stayed_close",
    "returned_inside", "identified_safe_area",
]


def test_behavioural_question_coverage(bp_suite):
    records = {v: extract_bp_metrics(s.log).to_dict() for v, s in bp_suite.items()}
    missing_keys = set()
    for record in records.values():
        expected = {f.name for f in __import__("dataclasses").fields(BehaviouralRecord)}
        missing_keys |= expected - set(record)
    both_branches = {}
    for field in BOOLEAN_FIELDS:
        values = {records[v][field] for v in records}
        both_branches[field] = values == {True, False}
    durations_defined = (
        records["thorough"]["time_to_dch"] is not None
        and records["thorough"]["time_under_table"] is not None
        and records["careless"]["time_to_dch"] is None
        and records["careless"]["time_under_table"] is None
        and all(r["wait_before_exit"] is not None for r in records.values())
        and all(r["first_action"] is not None for r in records.values())
    )
    flat = [f for f, ok in both_branches.items() if not ok]
    report(
        "behavioural record: every question field defined, each boolean hits both branches",
        not missing_keys and not flat and durations_defined,
        f"fields={len(records['thorough'])}, single-branch={flat}, "
        f"missing={sorted(missing_keys)}",
    )


def test_recommended_behaviour_coverage(short_paths, short_quake_s):
    outcomes = {}
    for variant in ("all", "none", "mixed"):
        commands = tp_script(variant, quake_s=short_quake_s)
        session = run_scripted_session(tp_config(short_paths, seed=7), commands)
        assert not session.live, f"TP {variant} script did not finish"
        taken = {row["key"] for row in session._report["behaviours"] if row["taken"]}
        outcomes[variant] = taken
    ok = (
        outcomes["all"] == {b["key"] for b in RECOMMENDED_BEHAVIOURS}
        and outcomes["none"] == set()
        and outcomes["mixed"] == TP_EXPECTED["mixed"]
    )
    report(
        "debrief report: 12/12, 0/12 and the exact mixed subset",
        ok,
        f"all={len(outcomes['all'])}/12, none={len(outcomes['none'])}/12, "
        f"mixed={sorted(outcomes['mixed'])}",
    )


def _oracle_midranks(values):
    out = []
    for v in values:
        less = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        out.append(less + (equal + 1) / 2.0)
    return out


def _oracle_exact_p(x, y):
    nonzero = [a - b for a, b in zip(x, y) if a != b]
    n = len(nonzero)
    if n == 0:
        return 1.0
    ranks = _oracle_midranks([abs(d) for d in nonzero])
    s = sum(ranks)
    t_obs = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    w = min(t_obs, s - t_obs)
    hits = 0
    for signs in itertools.product((1, -1), repeat=n):
        t = sum(r for r, sign in zip(ranks, signs) if sign > 0)
        if min(t, s - t) <= w:
            hits += 1
    return hits / float(2**n)


def test_wilcoxon_exactness_thousand_cases():
    fixture = wilcoxon_signed_rank([1.0, 0.0, 3.0, 4.0, 5.0],
                                   [0.0, 2.0, 0.0, 0.0, 0.0], mode="exact")
    rng = random.Random(4242)
    mismatch = None
    for _ in range(1000):
        n = rng.randint(1, 10)
        x = [float(rng.randint(-3, 3)) for _ in range(n)]
        y = [float(rng.randint(-3, 3)) for _ in range(n)]
        got = wilcoxon_signed_rank(x, y, mode="exact").p_value
        want = _oracle_exact_p(x, y)
        if got != want:
            mismatch = (x, y, got, want)
            break
    report(
        "signed-rank test: exact p equals the sign-enumeration oracle on 1000 cases",
        fixture.p_value == 0.1875 and mismatch is None,
        f"fixture p={fixture.p_value}, first mismatch={mismatch}",
    )


def test_assessment_fixture_fidelity():
    assignment = assign_groups(n=170, seed=606, sizes=(83, 87))
    counts = {"BP": 0, "TP": 0}
    for group in assignment.values():
        counts[group] += 1
    rng = random.Random(99)
    responses = []
    for pid, group in assignment.items():
        for comp in ("env_realism", "quake_realism", "npc_realism", "navigability"):
            responses.append(LikertResponse(pid, group, comp, rng.randint(-1, 3)))
    table = summarize_assessment(responses)
    text = render_assessment_text(table)
    sizes_ok = counts == {"BP": 83, "TP": 87} and all(
        row.n_bp == 83 and row.n_tp == 87 for row in table.rows
    )
    layout_ok = (
        len(table.rows) == 4
        and "Mean" in text and "Std. Dev." in text and "P-Value" in text
        and text.count("BP") >= 4 and text.count("TP") >= 4
    )
    report(
        "assessment fixture: 170 = 83 + 87 round-trips into a four-row table",
        sizes_ok and layout_ok,
        f"groups={counts}, rows={len(table.rows)}",
    )


def _reference_world(tmp_path: Path, n_objects=500, n_npcs=20):
    rng = random.Random(5150)
    objects = []
    for i in range(n_objects):
        mu_s = rng.uniform(0.15, 0.8)
        objects.append(box(
            f"obj{i:03d}",
            (rng.uniform(-45.0, 45.0), rng.uniform(-45.0, 45.0), 0.0),
            half=(rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.5)),
            mass=rng.uniform(1.0, 80.0),
            mu=(mu_s, mu_s * rng.uniform(0.6, 0.95)),
        ))
    doc = simple_scene_doc(objects)
    doc["walk_graph"]["nodes"] = [
        {"id": "n0", "pos": [0.0, 0.0]}, {"id": "n1", "pos": [20.0, 0.0]},
        {"id": "n2", "pos": [0.0, 20.0]}, {"id": "n3", "pos": [-20.0, 0.0]},
    ]
    doc["walk_graph"]["edges"] = [["n0", "n1"], ["n0", "n2"], ["n0", "n3"]]
    scene_path = tmp_path / "ref_scene.json"
    scene_path.write_text(json.dumps(doc))

    npcs = []
    for i in range(n_npcs):
        npcs.append({
            "id": f"walker{i:02d}", "role": "visitor",
            "pos": [rng.uniform(-20, 20), rng.uniform(-20, 20)],
            "routine": [{"activity": "walking", "duration": 30.0,
                         "path": ["n1", "n2", "n3"]},
                        {"activity": "standing", "duration": 5.0}],
        })
    scenario = {
        "schema_version": 1,
        "mode": "BP",
        "quake": {"peak_accel": 2.5, "base_frequency": 2.0,
                  "envelope": {"rise": 2.0, "hold": 24.0, "decay": 4.0},
                  "direction_drift": 0.3, "intensity_label": "MMI VII-VIII"},
        "steps": {"start_node": "n0", "room_region": "main",
                  "outdoor_regions": [], "instruction_delay_s": 999.0},
        "actions": [{"id": "leave_belongings", "label": "drop bag",
                     "phases": ["PreQuake"],
                     "effects": [{"op": "phase_event", "event": "belongings_left"}]}],
        "npcs": npcs,
        "dialogue": {},
        "relocation_regions": [],
    }
    scenario_path = tmp_path / "ref_scenario.json"
    scenario_path.write_text(json.dumps(scenario))
    return SessionConfig(mode="BP", scene=str(scene_path), scenario=str(scenario_path),
                         seed=2026)


def test_tick_budget_on_reference_scene(tmp_path):
    config = _reference_world(tmp_path)
    session = create_session(config)
    session.submit_input({"type": "select", "action": "leave_belongings"})
    session.tick()  # quake begins next tick
    times = []
    for _ in range(1000):
        t0 = time.perf_counter()
        session.tick()
        times.append(time.perf_counter() - t0)
    median_ms = statistics.median(times) * 1000.0
    report(
        "tick budget: median <= 20 ms with 500 dynamic objects and 20 NPCs",
        median_ms <= 20.0,
        f"median={median_ms:.2f} ms, p90={sorted(times)[900] * 1000:.2f} ms "
        f"over {len(times)} ticks",
    )


def test_bp_neutrality_across_all_runs(bp_suite, determinism_logs):
    from evacsim.telemetry import Event, EventLog

    total = 0
    violations = []
    for variant, session in bp_suite.items():
        found = neutrality_violations(session.log)
        violations.extend((variant, v) for v in found)
        total += 1
    for blob in determinism_logs:
        log = EventLog()
        for line in blob.splitlines():
            log.record(Event.from_json(line))
        violations.extend(("determinism", v) for v in neutrality_violations(log))
        total += 1
    report(
        "silent observation: zero feedback events before session end in BP logs",
        not violations,
        f"{total} logs scanned, violations={violations[:3]}",
    )
