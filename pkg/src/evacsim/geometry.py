"""2D geometry helpers for the 2.5D world model.

Everything here is plain float math with a fixed evaluation order, so results
are bit-reproducible across runs. Polygons are lists of (x, y) vertices in
order, implicitly closed.
"""
from __future__ import annotations

import math

Vec2 = tuple[float, float]

EPS = 1e-9


def vec_add(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] + b[0], a[1] + b[1])


def vec_sub(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] - b[0], a[1] - b[1])


def vec_scale(v: Vec2, s: float) -> Vec2:
    return (v[0] * s, v[1] * s)


def vec_dot(a: Vec2, b: Vec2) -> float:
    return a[0] * b[0] + a[1] * b[1]


def vec_cross(a: Vec2, b: Vec2) -> float:
    return a[0] * b[1] - a[1] * b[0]


def vec_len(v: Vec2) -> float:
    return math.hypot(v[0], v[1])


def vec_unit(v: Vec2) -> Vec2:
    n = vec_len(v)
    if n < EPS:
        return (0.0, 0.0)
    return (v[0] / n, v[1] / n)


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def angular_distance(a: float, b: float) -> float:
    """Smallest absolute angle between two headings."""
    return abs(wrap_angle(a - b))


def on_segment(p: Vec2, a: Vec2, b: Vec2, eps: float = EPS) -> bool:
    """True if p lies on segment a-b (inclusive of endpoints)."""
    cross = vec_cross(vec_sub(b, a), vec_sub(p, a))
    if abs(cross) > eps * max(1.0, vec_len(vec_sub(b, a))):
        return False
    dot = vec_dot(vec_sub(p, a), vec_sub(b, a))
    return -eps <= dot <= vec_dot(vec_sub(b, a), vec_sub(b, a)) + eps


def point_in_polygon(p: Vec2, poly: list[Vec2]) -> bool:
    """Boundary-inclusive containment test (even-odd ray cast).

    Points exactly on an edge or vertex count as inside, so adjacent
    polygons both claim their shared boundary; callers break the tie.
    """
    n = len(poly)
    for i in range(n):
        if on_segment(p, poly[i], poly[(i + 1) % n]):
            return True
    x, y = p
    inside = False
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            t = (y - y1) / (y2 - y1)
            if x < x1 + t * (x2 - x1):
                inside = not inside
    return inside


def segments_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool:
    """Proper or touching intersection test between two segments."""
    d1 = vec_cross(vec_sub(a2, a1), vec_sub(b1, a1))
    d2 = vec_cross(vec_sub(a2, a1), vec_sub(b2, a1))
    d3 = vec_cross(vec_sub(b2, b1), vec_sub(a1, b1))
    d4 = vec_cross(vec_sub(b2, b1), vec_sub(a2, b1))
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    if abs(d1) < EPS and on_segment(b1, a1, a2):
        return True
    if abs(d2) < EPS and on_segment(b2, a1, a2):
        return True
    if abs(d3) < EPS and on_segment(a1, b1, b2):
        return True
    if abs(d4) < EPS and on_segment(a2, b1, b2):
        return True
    return False


def polygon_is_simple(poly: list[Vec2]) -> bool:
    """True if no two non-adjacent edges of the polygon intersect."""
    n = len(poly)
    if n < 3:
        return False
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or j == (i + 1) % n or (j + 1) % n == i:
                continue
            if segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def polygon_centroid(poly: list[Vec2]) -> Vec2:
    sx = sum(p[0] for p in poly)
    sy = sum(p[1] for p in poly)
    return (sx / len(poly), sy / len(poly))


def collinear_overlap(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> float:
    """Length of the collinear overlap between two segments (0 if none)."""
    da = vec_sub(a2, a1)
    la = vec_len(da)
    if la < EPS:
        return 0.0
    # Both b endpoints must lie on the a carrier line.
    if abs(vec_cross(da, vec_sub(b1, a1))) > EPS * max(1.0, la):
        return 0.0
    if abs(vec_cross(da, vec_sub(b2, a1))) > EPS * max(1.0, la):
        return 0.0
    t1 = vec_dot(vec_sub(b1, a1), da) / (la * la)
    t2 = vec_dot(vec_sub(b2, a1), da) / (la * la)
    lo, hi = min(t1, t2), max(t1, t2)
    lo = max(lo, 0.0)
    hi = min(hi, 1.0)
    if hi <= lo:
        return 0.0
    return (hi - lo) * la


def subtract_intervals(intervals: list[tuple[float, float]],
                       holes: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Subtract hole intervals from a list of closed intervals on a line."""
    out = list(intervals)
    for h_lo, h_hi in holes:
        nxt: list[tuple[float, float]] = []
        for lo, hi in out:
            if h_hi <= lo + EPS or h_lo >= hi - EPS:
                nxt.append((lo, hi))
                continue
            if h_lo > lo + EPS:
                nxt.append((lo, h_lo))
            if h_hi < hi - EPS:
                nxt.append((h_hi, hi))
        out = nxt
    return out


def rect_half_extent_along(half_x: float, half_y: float, yaw: float,
                           direction: Vec2) -> float:
    """Half-width of a yawed rectangle projected onto a unit direction."""
    c, s = math.cos(yaw), math.sin(yaw)
    ex = (c, s)
    ey = (-s, c)
    return half_x * abs(vec_dot(direction, ex)) + half_y * abs(vec_dot(direction, ey))


def point_in_rect(p: Vec2, center: Vec2, half_x: float, half_y: float,
                  yaw: float, pad: float = 0.0) -> bool:
    """Containment test against a yawed rectangle, optionally padded."""
    dx = p[0] - center[0]
    dy = p[1] - center[1]
    c, s = math.cos(yaw), math.sin(yaw)
    lx = dx * c + dy * s
    ly = -dx * s + dy * c
    return abs(lx) <= half_x + pad and abs(ly) <= half_y + pad


def ray_segment_distance(origin: Vec2, direction: Vec2, a: Vec2, b: Vec2) -> float | None:
    """Distance along a unit-direction ray to segment a-b, or None if missed."""
    seg = vec_sub(b, a)
    denom = vec_cross(direction, seg)
    if abs(denom) < EPS:
        return None
    diff = vec_sub(a, origin)
    t = vec_cross(diff, seg) / denom
    u = vec_cross(diff, direction) / denom
    if t >= -EPS and -EPS <= u <= 1.0 + EPS:
        return max(t, 0.0)
    return None


def rect_corners(center: Vec2, half_x: float, half_y: float, yaw: float,
                 pad: float = 0.0) -> list[Vec2]:
    c, s = math.cos(yaw), math.sin(yaw)
    hx, hy = half_x + pad, half_y + pad
    pts = []
    for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        lx, ly = sx * hx, sy * hy
        pts.append((center[0] + lx * c - ly * s, center[1] + lx * s + ly * c))
    return pts
