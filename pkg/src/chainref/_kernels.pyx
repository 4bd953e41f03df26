# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirrors _pykernels operation-for-operation."""

from libc.math cimport sqrt, fabs, INFINITY
from libc.stdlib cimport malloc, free


def edit_distance(a, b):
    cdef Py_ssize_t n = len(a), m = len(b), i, j
    cdef long ai, sub, dele, ins
    cdef long *bb
    cdef long *prev
    cdef long *cur
    cdef long *tmp
    if n == 0:
        return m
    if m == 0:
        return n
    bb = <long *> malloc(m * sizeof(long))
    prev = <long *> malloc((m + 1) * sizeof(long))
    cur = <long *> malloc((m + 1) * sizeof(long))
    if bb == NULL or prev == NULL or cur == NULL:
        free(bb); free(prev); free(cur)
        raise MemoryError()
    try:
        for j in range(m):
            bb[j] = b[j]
        for j in range(m + 1):
            prev[j] = j
        for i in range(1, n + 1):
            ai = a[i - 1]
            cur[0] = i
            for j in range(1, m + 1):
                sub = prev[j - 1] + (0 if ai == bb[j - 1] else 1)
                dele = prev[j] + 1
                ins = cur[j - 1] + 1
                if dele < sub:
                    sub = dele
                if ins < sub:
                    sub = ins
                cur[j] = sub
            tmp = prev
            prev = cur
            cur = tmp
        return prev[m]
    finally:
        free(bb); free(prev); free(cur)


cdef inline double _dist(double *a, double *b) noexcept nogil:
    cdef double dx = a[0] - b[0]
    cdef double dy = a[1] - b[1]
    cdef double dz = a[2] - b[2]
    return sqrt(dx * dx + dy * dy + dz * dz)


cdef inline double _min(double a, double b) noexcept nogil:
    return b if b < a else a


cdef inline double _max(double a, double b) noexcept nogil:
    return b if b > a else a


cdef inline bint _overlap(double *s, double *r) noexcept nogil:
    cdef double ox = _min(s[0] + s[3] / 2.0, r[0] + r[3] / 2.0) - _max(s[0] - s[3] / 2.0, r[0] - r[3] / 2.0)
    cdef double oy = _min(s[1] + s[4] / 2.0, r[1] + r[4] / 2.0) - _max(s[1] - s[4] / 2.0, r[1] - r[4] / 2.0)
    return ox > 0.0 and oy > 0.0


cdef double _score(int code, double *s, double *r1, double *r2, double on_gap,
                   double c, double sn) noexcept nogil:
    cdef double dx = s[0] - r1[0]
    cdef double dy = s[1] - r1[1]
    cdef double dz = s[2] - r1[2]
    cdef double hx, hy, gap
    if code == 0:
        return -_dist(s, r1)
    if code == 1:
        return _dist(s, r1)
    if 2 <= code <= 5:
        hx = c * dx + sn * dy
        hy = c * dy - sn * dx
        if code == 2:
            return -hx
        if code == 3:
            return hx
        if code == 4:
            return -hy
        return hy
    if 6 <= code <= 9:
        if not _overlap(s, r1):
            return -INFINITY
        if code == 6:
            return dz
        if code == 7:
            return -dz
        if code == 8:
            gap = (s[2] - s[5] / 2.0) - (r1[2] + r1[5] / 2.0)
            if dz > 0.0 and fabs(gap) <= on_gap:
                return -fabs(gap)
            return -INFINITY
        gap = (r1[2] - r1[5] / 2.0) - (s[2] + s[5] / 2.0)
        if dz < 0.0 and fabs(gap) <= on_gap:
            return -fabs(gap)
        return -INFINITY
    return -fabs(_dist(s, r1) + _dist(s, r2) - _dist(r1, r2))


cdef int _load6(object row, double *out) except -1:
    cdef int k
    if len(row) != 6:
        raise ValueError("box rows must have 6 entries")
    for k in range(6):
        out[k] = row[k]
    return 0


def predicate_score(int code, s, r1, r2, double on_gap, double yaw_cos, double yaw_sin):
    cdef double sb[6]
    cdef double rb1[6]
    cdef double rb2[6]
    if code < 0 or code > 10:
        raise ValueError(f"unknown relation code {code}")
    if code == 10 and r2 is None:
        raise ValueError("Between needs a second reference box")
    _load6(s, sb)
    _load6(r1, rb1)
    if r2 is not None:
        _load6(r2, rb2)
    return _score(code, sb, rb1, rb2, on_gap, yaw_cos, yaw_sin)


def predicate_scores(int code, subjects, r1, r2, double on_gap, double yaw_cos, double yaw_sin):
    cdef double sb[6]
    cdef double rb1[6]
    cdef double rb2[6]
    if code < 0 or code > 10:
        raise ValueError(f"unknown relation code {code}")
    if code == 10 and r2 is None:
        raise ValueError("Between needs a second reference box")
    _load6(r1, rb1)
    if r2 is not None:
        _load6(r2, rb2)
    out = []
    for row in subjects:
        _load6(row, sb)
        out.append(_score(code, sb, rb1, rb2, on_gap, yaw_cos, yaw_sin))
    return out
