"""Descriptive statistics and nonparametric tests for questionnaire scores.

The paired signed-rank test is exact by default: for up to 25 nonzero
differences the null distribution is built by convolving the (tie-aware,
doubled-to-integer) ranks, which is equivalent to enumerating every sign
assignment. Larger samples fall back to the normal approximation with
tie-corrected variance and continuity correction.

Scores from the two prototypes come from independently sized groups, which a
paired test cannot consume as-is; when group sizes differ the summary flags
the named test as inapplicable and reports a clearly labeled rank-sum
alternative instead.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import (
    EmptyInputError,
    InsufficientDataError,
    LengthMismatchError,
    ValidationError,
)

EXACT_LIMIT = 25

LIKERT_MIN, LIKERT_MAX = -3, 3

COMPONENTS = (
    ("env_realism", "Virtual environment realism"),
    ("quake_realism", "Earthquake and damage realism"),
    ("npc_realism", "NPC realism"),
    ("navigability", "Navigability and interactivity"),
)
COMPONENT_KEYS = tuple(key for key, _ in COMPONENTS)
PROTOTYPES = ("BP", "TP")


@dataclass
class LikertResponse:
    participant: str
    prototype: str
    component: str
    score: int

    def __post_init__(self) -> None:
        if self.prototype not in PROTOTYPES:
            raise ValidationError(f"unknown prototype '{self.prototype}'")
        if self.component not in COMPONENT_KEYS:
            raise ValidationError(f"unknown component '{self.component}'")
        if not (LIKERT_MIN <= int(self.score) <= LIKERT_MAX):
            raise ValidationError(f"score {self.score} outside [{LIKERT_MIN}, {LIKERT_MAX}]")


@dataclass
class StatsResult:
    n: int
    mean: float | None = None
    sd: float | None = None
    statistic: float | None = None
    p_value: float | None = None
    method: str = ""
    note: str | None = None


def describe(scores: list[float]) -> StatsResult:
    """Arithmetic mean and sample standard deviation (n-1 denominator)."""
    n = len(scores)
    if n == 0:
        raise EmptyInputError("describe() needs at least one score")
    mean = sum(scores) / n
    if n < 2:
        raise InsufficientDataError("sample standard deviation needs n >= 2")
    var = sum((x - mean) ** 2 for x in scores) / (n - 1)
    return StatsResult(n=n, mean=mean, sd=math.sqrt(var), method="describe")


def _midranks(values: list[float]) -> list[float]:
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # 1-based mid-rank of the tie group
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _exact_two_sided_p(doubled_ranks: list[int], t2_obs: int) -> float:
    """P(min(T, S-T) <= min(t_obs, S-t_obs)) under random signs, exactly.

    T is the doubled positive-rank sum; convolution over the doubled ranks
    yields the full null distribution in integer arithmetic.
    """
    s2 = sum(doubled_ranks)
    counts = [0] * (s2 + 1)
    counts[0] = 1
    reached = 0
    for r in doubled_ranks:
        reached += r
        for t in range(reached, r - 1, -1):
            counts[t] += counts[t - r]
    w2 = min(t2_obs, s2 - t2_obs)
    hits = sum(c for t, c in enumerate(counts) if min(t, s2 - t) <= w2)
    return hits / float(2 ** len(doubled_ranks))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(
    x: list[float],
    y: list[float],
    mode: str = "exact",
) -> StatsResult:
    """Paired signed-rank test on x - y; zero differences are dropped.

    Returns W = min(W+, W-) and a two-sided p-value. If every difference is
    zero the result carries p = 1.0 and a note instead of raising.
    """
    if len(x) != len(y):
        raise LengthMismatchError(f"paired samples differ in length: {len(x)} vs {len(y)}")
    if mode not in ("exact", "approx"):
        raise ValidationError(f"unknown mode '{mode}'")
    diffs = [float(a) - float(b) for a, b in zip(x, y)]
    nonzero = [d for d in diffs if d != 0.0]
    n = len(nonzero)
    if n == 0:
        return StatsResult(
            n=0,
            statistic=0.0,
            p_value=1.0,
            method="wilcoxon-signed-rank",
            note="all differences zero; test degenerate",
        )
    if mode == "exact" and n > EXACT_LIMIT:
        raise InsufficientDataError(
            f"exact mode supports up to {EXACT_LIMIT} nonzero differences, got {n}"
        )
    ranks = _midranks([abs(d) for d in nonzero])
    w_plus = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, nonzero) if d < 0)
    statistic = min(w_plus, w_minus)

    if mode == "exact":
        doubled = [int(round(2.0 * r)) for r in ranks]
        t2_obs = int(round(2.0 * w_plus))
        p = min(1.0, _exact_two_sided_p(doubled, t2_obs))
        method = "wilcoxon-signed-rank-exact"
    else:
        s = sum(ranks)
        mean_t = s / 2.0
        var_t = sum(r * r for r in ranks) / 4.0
        dev = w_plus - mean_t
        correction = 0.5 if dev > 0 else (-0.5 if dev < 0 else 0.0)
        z = (dev - correction) / math.sqrt(var_t) if var_t > 0 else 0.0
        p = min(1.0, 2.0 * _normal_sf(abs(z)))
        method = "wilcoxon-signed-rank-normal"
    desc = describe(diffs) if len(diffs) >= 2 else StatsResult(n=len(diffs), mean=diffs[0], sd=None)
    return StatsResult(
        n=n,
        mean=desc.mean,
        sd=desc.sd,
        statistic=statistic,
        p_value=p,
        method=method,
    )


def rank_sum(x: list[float], y: list[float]) -> StatsResult:
    """Two-sample rank-sum test, normal approximation with tie correction.

    Labeled alternative for independent, unequally sized groups.
    """
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise EmptyInputError("rank_sum needs both samples non-empty")
    pooled = list(x) + list(y)
    ranks = _midranks(pooled)
    r1 = sum(ranks[:n1])
    u = r1 - n1 * (n1 + 1) / 2.0
    mean_u = n1 * n2 / 2.0
    total = n1 + n2
    tie_term = 0.0
    seen: dict[float, int] = {}
    for v in pooled:
        seen[v] = seen.get(v, 0) + 1
    for count in seen.values():
        tie_term += count**3 - count
    var_u = n1 * n2 / 12.0 * ((total + 1) - tie_term / (total * (total - 1)))
    if var_u <= 0:
        return StatsResult(
            n=total,
            statistic=u,
            p_value=1.0,
            method="rank-sum-normal",
            note="all pooled values tie; test degenerate",
        )
    dev = u - mean_u
    correction = 0.5 if dev > 0 else (-0.5 if dev < 0 else 0.0)
    z = (dev - correction) / math.sqrt(var_u)
    return StatsResult(
        n=total,
        statistic=u,
        p_value=min(1.0, 2.0 * _normal_sf(abs(z))),
        method="rank-sum-normal",
    )


# ---------------------------------------------------------------------------
# Assessment summary
# ---------------------------------------------------------------------------


@dataclass
class AssessmentRow:
    component: str
    label: str
    n_bp: int
    mean_bp: float | None
    sd_bp: float | None
    n_tp: int
    mean_tp: float | None
    sd_tp: float | None
    p_value: float | None
    p_method: str
    p_value_ranksum: float | None
    warning: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class AssessmentTable:
    rows: list[AssessmentRow]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "warnings": self.warnings}


def summarize_assessment(responses: list[LikertResponse]) -> AssessmentTable:
    """Per component x prototype descriptives plus a BP-vs-TP p-value.

    The named paired test applies only when the groups pair up one-to-one;
    with unequal group sizes its column is empty, a warning says why, and the
    rank-sum column carries the comparison.
    """
    table = AssessmentTable(rows=[])
    for key, label in COMPONENTS:
        groups: dict[str, list[int]] = {"BP": [], "TP": []}
        per_participant: dict[str, dict[str, int]] = {"BP": {}, "TP": {}}
        for resp in responses:
            if resp.component != key:
                continue
            groups[resp.prototype].append(resp.score)
            per_participant[resp.prototype][resp.participant] = resp.score
        bp, tp = groups["BP"], groups["TP"]

        def _desc(scores: list[int]):
            if len(scores) >= 2:
                d = describe([float(s) for s in scores])
                return d.mean, d.sd
            if len(scores) == 1:
                return float(scores[0]), None
            return None, None

        mean_bp, sd_bp = _desc(bp)
        mean_tp, sd_tp = _desc(tp)

        p_value = None
        p_method = "wilcoxon-signed-rank"
        p_ranksum = None
        warning = None
        if not bp or not tp:
            warning = f"{key}: responses for one prototype only; no comparison possible"
        else:
            p_ranksum = rank_sum([float(s) for s in bp], [float(s) for s in tp]).p_value
            if len(bp) == len(tp):
                xs = [float(per_participant["BP"][p]) for p in sorted(per_participant["BP"])]
                ys = [float(per_participant["TP"][p]) for p in sorted(per_participant["TP"])]
                if len(xs) == len(ys) == len(bp):
                    mode = "exact" if len(xs) <= EXACT_LIMIT else "approx"
                    result = wilcoxon_signed_rank(xs, ys, mode=mode)
                    p_value = result.p_value
                    p_method = result.method
            if p_value is None:
                warning = (
                    f"{key}: groups of {len(bp)} and {len(tp)} cannot be paired; "
                    "the paired signed-rank test is inapplicable, see rank-sum column"
                )
        if warning:
            table.warnings.append(warning)
        table.rows.append(
            AssessmentRow(
                component=key,
                label=label,
                n_bp=len(bp),
                mean_bp=mean_bp,
                sd_bp=sd_bp,
                n_tp=len(tp),
                mean_tp=mean_tp,
                sd_tp=sd_tp,
                p_value=p_value,
                p_method=p_method,
                p_value_ranksum=p_ranksum,
                warning=warning,
            )
        )
    return table


def _fmt(value: float | None, digits: int = 2) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def render_assessment_text(table: AssessmentTable) -> str:
    """Aligned two-lines-per-component layout: mean, sd, and the p-value."""
    headers = ("Component", "Prototype", "Mean", "Std. Dev.", "P-Value", "P-Value (rank-sum)")
    rows: list[tuple[str, ...]] = []
    for row in table.rows:
        rows.append(
            (
                row.label,
                "BP",
                _fmt(row.mean_bp),
                _fmt(row.sd_bp),
                _fmt(row.p_value, 3),
                _fmt(row.p_value_ranksum, 3),
            )
        )
        rows.append(("", "TP", _fmt(row.mean_tp), _fmt(row.sd_tp), "", ""))
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for r in rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))).rstrip())
    for warning in table.warnings:
        lines.append(f"* {warning}")
    return "\n".join(lines) + "\n"


def load_responses(raw: list[dict]) -> list[LikertResponse]:
    return [
        LikertResponse(
            participant=str(r["participant"]),
            prototype=str(r["prototype"]),
            component=str(r["component"]),
            score=int(r["score"]),
        )
        for r in raw
    ]


def assign_groups(
    n: int | None = None,
    ids: list[str] | None = None,
    seed: int = 0,
    sizes: tuple[int, int] | None = None,
) -> dict[str, str]:
    """Randomly partition participant ids into the two prototype groups."""
    if ids is None:
        if n is None:
            raise EmptyInputError("assign_groups needs n or ids")
        ids = [f"p{i + 1:03d}" for i in range(n)]
    ids = list(ids)
    total = len(ids)
    if sizes is None:
        sizes = (total // 2, total - total // 2)
    if sizes[0] + sizes[1] != total:
        raise ValidationError(f"sizes {sizes} do not partition {total} participants")
    rng = random.Random(seed)
    shuffled = list(ids)
    rng.shuffle(shuffled)
    assignment = {}
    for i, pid in enumerate(shuffled):
        assignment[pid] = "BP" if i < sizes[0] else "TP"
    return dict(sorted(assignment.items()))
