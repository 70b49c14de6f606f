"""Pure-Python simulation kernels.

Reference implementations of the hot loops: the positivity-preserving
finite-difference step, fate classification against a threshold state,
basin-entry simulation under constant or pulsed releases, and dominance
queries on the separatrix search tree.  ``sitdyn._kernel`` is the
compiled twin with identical semantics; ``sitdyn._backend`` picks one at
import time.

State vectors are ``float64[5]`` in the order
``(eggs, males, released_males, females, sterilized_females)``.
Parameter vectors are ``float64[10]`` packed by
:func:`sitdyn.dynamics.pack_params`; the index constants below define
the layout.
"""

from __future__ import annotations

import math

import numpy as np

# ══════════════════════════════════════════════════════════════════════
# Packed-parameter layout (shared with the compiled kernel)
# ══════════════════════════════════════════════════════════════════════

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

COMPILED = False


def _step(s, u, w, pv, mi_dynamic):
    """Advance the packed 5-state one scheme step of weight ``w``, in place."""
    e, m, mi, f, fst = s[0], s[1], s[2], s[3], s[4]
    b = pv[PV_EGG_LAY]
    cap = pv[PV_CAPACITY]
    r = pv[PV_FEMALE_FRAC]
    hatch = pv[PV_MATURATION]
    loss_e = hatch + pv[PV_EGG_DEATH]

    e1 = (e + w * (b * f - loss_e * e)) / (1.0 + w * b * f / cap)
    m1 = m + w * ((1.0 - r) * hatch * e - pv[PV_MALE_DEATH] * m)
    if mi_dynamic:
        mi1 = mi + w * (u - pv[PV_STERILE_DEATH] * mi)
    else:
        mi1 = mi
    weighted = pv[PV_COMPET] * mi1
    total = m1 + weighted
    if total > 0.0:
        miss = math.exp(-pv[PV_ENCOUNTER] * total)
        found = 1.0 - miss
        fertile = found * m1 / total
        sterile = miss + found * weighted / total
    else:
        fertile = 0.0
        sterile = 1.0
    recruit = r * hatch * e
    f1 = f + w * (recruit * fertile - pv[PV_FEMALE_DEATH] * f)
    fst1 = fst + w * (recruit * sterile - pv[PV_FEMALE_DEATH] * fst)
    s[0], s[1], s[2], s[3], s[4] = e1, m1, mi1, f1, fst1


def run_steps(s, nsteps, u, w, pv, mi_dynamic):
    """Advance state ``s`` by ``nsteps`` steps at constant release rate ``u``.

    Args:
        s: ``float64[5]`` state, modified in place.
        nsteps: Number of steps to take.
        u: Constant release rate (individuals/day) fed to the released-male
            compartment when ``mi_dynamic`` is true.
        w: Scheme step weight (the denominator-adjusted step size).
        pv: Packed parameter vector.
        mi_dynamic: Whether the released-male compartment evolves (decay
            plus inflow ``u``) or stays frozen at its current value.
    """
    for _ in range(nsteps):
        _step(s, u, w, pv, mi_dynamic)


def classify_fate(s, mi, w, pv, max_steps, ref):
    """Classify a 3-state as extinction- or persistence-bound.

    Simulates the reduced (egg, male, female) system at frozen released-male
    level ``mi`` and compares each iterate with the threshold steady state
    ``ref``: once strictly below in every compartment the trajectory is
    certified extinct, once strictly above it is certified persistent.

    Args:
        s: ``float64[3]`` state ``(eggs, males, females)``, modified in
            place (left at the deciding iterate).
        mi: Frozen released-male level.
        w: Scheme step weight.
        pv: Packed parameter vector.
        max_steps: Step budget.
        ref: ``float64[3]`` threshold steady state at level ``mi``.

    Returns:
        Tuple ``(verdict, steps)`` with verdict 1 for extinction, 2 for
        persistence, 0 if undecided within the budget.
    """
    full = np.array([s[0], s[1], mi, s[2], 0.0])
    for n in range(max_steps):
        _step(full, 0.0, w, pv, False)
        e, m, f = full[0], full[1], full[3]
        if e < ref[0] and m < ref[1] and f < ref[2]:
            s[0], s[1], s[2] = e, m, f
            return 1, n + 1
        if e > ref[0] and m > ref[1] and f > ref[2]:
            s[0], s[1], s[2] = e, m, f
            return 2, n + 1
    s[0], s[1], s[2] = full[0], full[1], full[3]
    return 0, max_steps


def query_below(pts, children, root, x0, x1, x2):
    """Whether some stored point dominates ``(x0, x1, x2)`` componentwise.

    Args:
        pts: ``float64[n, 3]`` stored points.
        children: ``int32[n, 8]`` child links indexed by strict-excess
            bit pattern, −1 for absent.
        root: Index of the root node, −1 for an empty tree.
        x0: Query point, first component.
        x1: Query point, second component.
        x2: Query point, third component.

    Returns:
        True iff some stored point ``S`` satisfies ``x ≤ S`` in every
        component.
    """
    if root < 0:
        return False
    stack = [root]
    while stack:
        i = stack.pop()
        p0, p1, p2 = pts[i, 0], pts[i, 1], pts[i, 2]
        e = (4 if x0 > p0 else 0) | (2 if x1 > p1 else 0) | (1 if x2 > p2 else 0)
        if e == 0:
            return True
        m = e
        while m < 7:
            if (m & e) == e:
                c = children[i, m]
                if c >= 0:
                    stack.append(c)
            m += 1
    return False


def query_many(pts, children, root, xs):
    """Vector version of :func:`query_below` over rows of ``xs``."""
    out = np.empty(xs.shape[0], dtype=np.bool_)
    for k in range(xs.shape[0]):
        out[k] = query_below(pts, children, root, xs[k, 0], xs[k, 1], xs[k, 2])
    return out


def entry_steps(
    s,
    w,
    pv,
    mi_dynamic,
    u,
    jump_amount,
    jump_period_steps,
    max_jumps,
    max_steps,
    pts,
    children,
    root,
):
    """Steps until the wild population enters the certified extinction set.

    Simulates the packed 5-state under a constant release rate and/or
    periodic instantaneous releases, testing after every step (and at
    step 0) whether the wild projection ``(eggs, males, females)`` is
    dominated by a stored separatrix point.

    Args:
        s: ``float64[5]`` state, modified in place (left at the entry
            iterate, or at the final iterate on failure).
        w: Scheme step weight.
        pv: Packed parameter vector.
        mi_dynamic: Whether the released-male compartment evolves.
        u: Constant release rate.
        jump_amount: Individuals added instantaneously per pulse (0
            disables pulsing).
        jump_period_steps: Steps between pulses; the first pulse fires
            before step 0.
        max_jumps: Number of pulses after which pulsing stops.
        max_steps: Step budget.
        pts: Separatrix-tree point array.
        children: Separatrix-tree child links.
        root: Separatrix-tree root index.

    Returns:
        The first step index ``n`` (time ``n·dt``) at which the wild
        projection is inside the certified set, or −1 if the budget is
        exhausted first.
    """
    n = 0
    while True:
        if query_below(pts, children, root, s[0], s[1], s[3]):
            return n
        if n >= max_steps:
            return -1
        if (
            jump_amount > 0.0
            and jump_period_steps > 0
            and n % jump_period_steps == 0
            and n // jump_period_steps < max_jumps
        ):
            s[2] += jump_amount
        _step(s, u, w, pv, mi_dynamic)
        n += 1
