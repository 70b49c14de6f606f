# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simulation kernels.

Drop-in accelerated twin of ``sitdyn._fallback``: the positivity-
preserving finite-difference step, fate classification against a
threshold state, basin-entry simulation under constant or pulsed
releases, and dominance queries on the separatrix search tree.  See the
fallback module for the packed state/parameter layout; semantics here
must match it bit for bit (same operations in the same order).
"""

from libc.math cimport exp
from libc.stdlib cimport free, malloc

import numpy as np

PV_EGG_LAY = 0
PV_CAPACITY = 1
PV_FEMALE_FRAC = 2
PV_MATURATION = 3
PV_EGG_DEATH = 4
PV_MALE_DEATH = 5
PV_FEMALE_DEATH = 6
PV_ENCOUNTER = 7
PV_COMPET = 8
PV_STERILE_DEATH = 9
PV_SIZE = 10

COMPILED = True


cdef inline void _step(double* s, double u, double w, const double* pv,
                       bint mi_dynamic) noexcept nogil:
    cdef double e = s[0]
    cdef double m = s[1]
    cdef double mi = s[2]
    cdef double f = s[3]
    cdef double fst = s[4]
    cdef double b = pv[0]
    cdef double cap = pv[1]
    cdef double r = pv[2]
    cdef double hatch = pv[3]
    cdef double loss_e = hatch + pv[4]
    cdef double e1, m1, mi1, weighted, total, miss, found, fertile, sterile
    cdef double recruit

    e1 = (e + w * (b * f - loss_e * e)) / (1.0 + w * b * f / cap)
    m1 = m + w * ((1.0 - r) * hatch * e - pv[5] * m)
    if mi_dynamic:
        mi1 = mi + w * (u - pv[9] * mi)
    else:
        mi1 = mi
    weighted = pv[8] * mi1
    total = m1 + weighted
    if total > 0.0:
        miss = exp(-pv[7] * total)
        found = 1.0 - miss
        fertile = found * m1 / total
        sterile = miss + found * weighted / total
    else:
        fertile = 0.0
        sterile = 1.0
    recruit = r * hatch * e
    s[0] = e1
    s[1] = m1
    s[2] = mi1
    s[3] = f + w * (recruit * fertile - pv[6] * f)
    s[4] = fst + w * (recruit * sterile - pv[6] * fst)


def run_steps(double[::1] s, long nsteps, double u, double w,
              double[::1] pv, bint mi_dynamic):
    """Advance state ``s`` by ``nsteps`` steps at constant release rate ``u``."""
    cdef long k
    with nogil:
        for k in range(nsteps):
            _step(&s[0], u, w, &pv[0], mi_dynamic)


def classify_fate(double[::1] s, double mi, double w, double[::1] pv,
                  long max_steps, double[::1] ref):
    """Classify a 3-state as extinction- (1) or persistence-bound (2), else 0."""
    cdef double full[5]
    cdef double e, m, f
    cdef long n
    cdef int verdict = 0
    cdef long used = max_steps
    full[0] = s[0]
    full[1] = s[1]
    full[2] = mi
    full[3] = s[2]
    full[4] = 0.0
    with nogil:
        for n in range(max_steps):
            _step(full, 0.0, w, &pv[0], 0)
            e = full[0]
            m = full[1]
            f = full[3]
            if e < ref[0] and m < ref[1] and f < ref[2]:
                verdict = 1
                used = n + 1
                break
            if e > ref[0] and m > ref[1] and f > ref[2]:
                verdict = 2
                used = n + 1
                break
    s[0] = full[0]
    s[1] = full[1]
    s[2] = full[3]
    return verdict, used


cdef inline bint _query(const double[:, ::1] pts, const int[:, ::1] children,
                        int root, double x0, double x1, double x2,
                        int* stack) noexcept nogil:
    cdef int top, i, e, m, c
    if root < 0:
        return 0
    stack[0] = root
    top = 1
    while top > 0:
        top -= 1
        i = stack[top]
        e = 0
        if x0 > pts[i, 0]:
            e |= 4
        if x1 > pts[i, 1]:
            e |= 2
        if x2 > pts[i, 2]:
            e |= 1
        if e == 0:
            return 1
        m = e
        while m < 7:
            if (m & e) == e:
                c = children[i, m]
                if c >= 0:
                    stack[top] = c
                    top += 1
            m += 1
    return 0


def query_below(double[:, ::1] pts, int[:, ::1] children, int root,
                double x0, double x1, double x2):
    """Whether some stored point dominates ``(x0, x1, x2)`` componentwise."""
    cdef int n = pts.shape[0]
    cdef int* stack
    cdef bint hit
    if n == 0 or root < 0:
        return False
    stack = <int*> malloc((n + 8) * sizeof(int))
    if stack == NULL:
        raise MemoryError()
    try:
        hit = _query(pts, children, root, x0, x1, x2, stack)
    finally:
        free(stack)
    return bool(hit)


def query_many(double[:, ::1] pts, int[:, ::1] children, int root,
               double[:, ::1] xs):
    """Vector version of :func:`query_below` over rows of ``xs``."""
    cdef long nq = xs.shape[0]
    cdef int n = pts.shape[0]
    cdef long k
    cdef int* stack
    out = np.empty(nq, dtype=np.bool_)
    cdef unsigned char[::1] ov = out.view(np.uint8)
    if n == 0 or root < 0:
        out[:] = False
        return out
    stack = <int*> malloc((n + 8) * sizeof(int))
    if stack == NULL:
        raise MemoryError()
    try:
        with nogil:
            for k in range(nq):
                ov[k] = _query(pts, children, root, xs[k, 0], xs[k, 1],
                               xs[k, 2], stack)
    finally:
        free(stack)
    return out


def entry_steps(double[::1] s, double w, double[::1] pv, bint mi_dynamic,
                double u, double jump_amount, long jump_period_steps,
                long max_jumps, long max_steps, double[:, ::1] pts,
                int[:, ::1] children, int root):
    """Steps until the wild projection enters the certified extinction set.

    Returns the first step index at which ``(eggs, males, females)`` is
    dominated by a stored separatrix point, or −1 on budget exhaustion.
    """
    cdef long n = 0
    cdef long result = -1
    cdef int ntree = pts.shape[0]
    cdef int* stack = <int*> malloc((ntree + 8) * sizeof(int))
    if stack == NULL:
        raise MemoryError()
    try:
        with nogil:
            while True:
                if _query(pts, children, root, s[0], s[1], s[3], stack):
                    result = n
                    break
                if n >= max_steps:
                    break
                if (jump_amount > 0.0 and jump_period_steps > 0
                        and n % jump_period_steps == 0
                        and n / jump_period_steps < max_jumps):
                    s[2] += jump_amount
                _step(&s[0], u, w, &pv[0], mi_dynamic)
                n += 1
    finally:
        free(stack)
    return result
