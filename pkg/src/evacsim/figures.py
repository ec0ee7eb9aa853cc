"""Matplotlib figure rendering for the report paths (headless Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .quake import QuakeSignal
from .stats import AssessmentTable
from .telemetry import EventLog


def render_signal_figure(
    signal: QuakeSignal,
    path: str | Path,
    trace: list[tuple[float, float, float]] | None = None,
) -> None:
    """Acceleration series and, when given, the floor displacement trace."""
    n_rows = 2 if trace else 1
    fig, axes = plt.subplots(n_rows, 1, figsize=(8, 3 * n_rows), sharex=True, squeeze=False)
    ts = [s[0] for s in signal.samples]
    accels = [s[2] for s in signal.samples]
    ax = axes[0][0]
    ax.plot(ts, accels, lw=0.8, color="tab:red")
    ax.set_ylabel("acceleration (m/s$^2$)")
    ax.set_title(
        f"shaking signal: peak {signal.params.peak_accel} m/s$^2$, "
        f"{signal.params.base_frequency} Hz, seed {signal.seed} "
        f"({signal.params.intensity_label})"
    )
    if trace:
        ax2 = axes[1][0]
        ax2.plot([p[0] for p in trace], [p[1] for p in trace], label="x", lw=0.9)
        ax2.plot([p[0] for p in trace], [p[2] for p in trace], label="y", lw=0.9)
        ax2.set_ylabel("floor displacement (m)")
        ax2.legend(loc="upper right", fontsize=8)
    axes[-1][0].set_xlabel("time (s)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_assessment_figure(table: AssessmentTable, path: str | Path) -> None:
    """Grouped mean +/- sd bars per component and prototype."""
    fig, ax = plt.subplots(figsize=(8, 4))
    idx = range(len(table.rows))
    width = 0.38
    for offset, (proto, color) in enumerate((("BP", "tab:blue"), ("TP", "tab:orange"))):
        means = [
            (row.mean_bp if proto == "BP" else row.mean_tp) or 0.0 for row in table.rows
        ]
        sds = [
            (row.sd_bp if proto == "BP" else row.sd_tp) or 0.0 for row in table.rows
        ]
        xs = [i + (offset - 0.5) * width for i in idx]
        ax.bar(xs, means, width, yerr=sds, capsize=3, label=proto, color=color, alpha=0.85)
    ax.set_xticks(list(idx))
    ax.set_xticklabels([row.label for row in table.rows], rotation=15, ha="right", fontsize=8)
    ax.set_ylabel("mean score (-3 to +3)")
    ax.set_ylim(-3, 3)
    ax.axhline(0, color="black", lw=0.6)
    ax.legend()
    ax.set_title("participant assessment by component")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_bp_timeline(log: EventLog, path: str | Path) -> None:
    """Action/phase timeline of one free-roam session."""
    phases = [(ev.t, ev.payload.get("to", "")) for ev in log if ev.kind == "PhaseChanged"]
    actions = [(ev.t, ev.payload.get("action", "")) for ev in log if ev.kind == "ActionTaken"]
    fig, ax = plt.subplots(figsize=(9, 0.5 + 0.28 * max(1, len(actions))))
    for t, phase in phases:
        ax.axvline(t, color="tab:red", lw=0.8, alpha=0.6)
        ax.text(t, 1.01, phase, rotation=90, fontsize=7, va="bottom", ha="right",
                transform=ax.get_xaxis_transform())
    for i, (t, action) in enumerate(actions):
        ax.plot([t], [i], "o", color="tab:blue", ms=4)
        ax.text(t, i + 0.15, action, fontsize=7, va="bottom")
    ax.set_yticks([])
    ax.set_xlabel("session time (s)")
    ax.set_title("logged actions over session phases")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
