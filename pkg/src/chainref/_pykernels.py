"""Pure-Python reference kernels.

Same contract as the compiled ``_kernels`` module. Box rows are
``(cx, cy, cz, ex, ey, ez)``.
"""

from __future__ import annotations

import math

NEG_INF = -math.inf


def edit_distance(a, b) -> int:
    """Unit-cost Levenshtein distance between two integer sequences."""
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        ai = a[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            cur[j] = min(sub, dele, ins)
        prev = cur
    return prev[m]


def _dist(a, b) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def _footprint_overlap(s, r) -> bool:
    ox = min(s[0] + s[3] / 2.0, r[0] + r[3] / 2.0) - max(s[0] - s[3] / 2.0, r[0] - r[3] / 2.0)
    oy = min(s[1] + s[4] / 2.0, r[1] + r[4] / 2.0) - max(s[1] - s[4] / 2.0, r[1] - r[4] / 2.0)
    return ox > 0.0 and oy > 0.0


def predicate_score(code, s, r1, r2, on_gap, yaw_cos, yaw_sin) -> float:
    dx = s[0] - r1[0]
    dy = s[1] - r1[1]
    dz = s[2] - r1[2]
    if code == 0:  # Near
        return -_dist(s, r1)
    if code == 1:  # Far
        return _dist(s, r1)
    if 2 <= code <= 5:
        # offsets in the yaw-rotated horizontal frame
        hx = yaw_cos * dx + yaw_sin * dy
        hy = yaw_cos * dy - yaw_sin * dx
        if code == 2:
            return -hx
        if code == 3:
            return hx
        if code == 4:
            return -hy
        return hy
    if 6 <= code <= 9:
        if not _footprint_overlap(s, r1):
            return NEG_INF
        if code == 6:
            return dz
        if code == 7:
            return -dz
        if code == 8:
            gap = (s[2] - s[5] / 2.0) - (r1[2] + r1[5] / 2.0)
            if dz > 0.0 and abs(gap) <= on_gap:
                return -abs(gap)
            return NEG_INF
        gap = (r1[2] - r1[5] / 2.0) - (s[2] + s[5] / 2.0)
        if dz < 0.0 and abs(gap) <= on_gap:
            return -abs(gap)
        return NEG_INF
    if code == 10:
        if r2 is None:
            raise ValueError("Between needs a second reference box")
        return -abs(_dist(s, r1) + _dist(s, r2) - _dist(r1, r2))
    raise ValueError(f"unknown relation code {code}")


def predicate_scores(code, subjects, r1, r2, on_gap, yaw_cos, yaw_sin) -> list[float]:
    """Score every subject row against the reference box(es)."""
    if code == 10 and r2 is None:
        raise ValueError("Between needs a second reference box")
    return [predicate_score(code, s, r1, r2, on_gap, yaw_cos, yaw_sin) for s in subjects]
