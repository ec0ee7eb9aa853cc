"""Deterministic, headless earthquake-evacuation serious-game engine.

Two session modes share one engine: a free-roam mode that silently logs
behaviour, and a wait-point training mode that scores twelve recommended
behaviours in a debrief report. Everything is reproducible from
(scene, scenario, seed, input script).
"""

from .damage import DamageSpec, RelocationBatcher, RelocationList, apply_damage, precompute_relocation
from .nav import ActionPanel, PlayerPose, WaitPoint, advance_waitpoint, gaze_move, select_panel
from .npc import NpcAgent, TriggerRule, assist, fire_trigger, tick_npc
from .quake import (
    ContactForce,
    PhysicsParams,
    QuakeParams,
    QuakeSignal,
    friction_update,
    generate_signal,
    run_quake,
    step,
    topple_check,
)
from .scene import (
    Interactable,
    Region,
    SceneGraph,
    SceneObject,
    load_scene,
    load_scene_file,
    region_of,
    serialize_scene,
    support_chain,
)
from .session import (
    Session,
    SessionArtifacts,
    SessionConfig,
    Snapshot,
    create_session,
    run_scripted_session,
)
from .stats import (
    LikertResponse,
    StatsResult,
    assign_groups,
    describe,
    rank_sum,
    summarize_assessment,
    wilcoxon_signed_rank,
)
from .story import (
    ActionDef,
    FeedbackReport,
    RECOMMENDED_BEHAVIOURS,
    Scenario,
    StoryState,
    apply_action,
    available_actions,
    build_report,
    load_scenario,
    load_scenario_file,
    phase_transition,
)
from .telemetry import BehaviouralRecord, Event, EventLog, extract_bp_metrics

__version__ = "0.1.0"
