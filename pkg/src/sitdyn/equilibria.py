"""Steady states, the critical sterilizing level, and analytic bounds.

The reduced model's positive steady states are roots of a scalar
characteristic function of the scaled male population; their existence
is governed by the mate-finding (Allee) structure.  This module locates
those roots, classifies their stability, computes the critical
released-male level above which no positive steady state survives, and
evaluates closed-form componentwise bounds on the two positive steady
states used by the entrance-time machinery.

Scaled variables used throughout: ``x`` is the wild male population
times the mate-encounter rate, ``y`` the competitiveness-weighted
released-male population times the same rate.  The mating-failure
probability at total pressure ``x + y`` is ``exp(−(x+y))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from sitdyn.params import (
    Aggregates,
    InvalidParameterError,
    ModelParams,
    aggregates,
)

__all__ = [
    "Stability",
    "SteadyState",
    "SteadyStateSet",
    "CriticalRelease",
    "EquilibriumBounds",
    "NoPositiveEquilibriumError",
    "characteristic",
    "mating_failure_floor",
    "log_mating_failure_floor",
    "release_branches",
    "critical_release_level",
    "steady_states",
    "classify_stability",
    "equilibrium_bounds",
]

_ROOT_RTOL = 4.0 * np.finfo(float).eps


class NoPositiveEquilibriumError(ValueError):
    """No positive steady state exists for the requested computation."""


# ══════════════════════════════════════════════════════════════════════
# Characteristic function and branch curves
# ══════════════════════════════════════════════════════════════════════


def characteristic(
    x: float, y: float, offspring_number: float, allee_ratio: float
) -> float:
    """Steady-state characteristic function in scaled male variables.

    Positive steady states of the reduced model at scaled released-male
    pressure ``y`` are exactly the positive roots in ``x`` of this
    function.

    Args:
        x: Scaled wild male population, ≥ 0.
        y: Scaled weighted released-male population, ≥ 0.
        offspring_number: Basic offspring number.
        allee_ratio: Allee/capacity ratio.

    Returns:
        The characteristic value.
    """
    return x * (1.0 - allee_ratio * x) * (-math.expm1(-(x + y))) - (
        x + y
    ) / offspring_number


def _pressure_ceiling(allee_index: float) -> float:
    """Root of ``1 − exp(−v) = allee_index · v`` on ``(0, ∞)``.

    This is the largest scaled total male pressure at which the branch
    curves are defined; its exponential ``exp(−ceiling)`` is the
    mating-failure floor.
    """
    xi = allee_index
    if xi >= 1.0:
        raise NoPositiveEquilibriumError(
            f"allee index {xi:.6g} ≥ 1: no positive steady state exists"
        )
    if xi <= 0.0:
        raise InvalidParameterError(f"allee index must be > 0, got {xi!r}")

    def gap(v: float) -> float:
        return -math.expm1(-v) - xi * v

    lo = (1.0 - xi) * 1e-6
    hi = 2.0 / xi
    return float(brentq(gap, lo, hi, xtol=1e-300, rtol=_ROOT_RTOL))


def log_mating_failure_floor(allee_index: float) -> float:
    """Negative log of the mating-failure floor (always representable).

    Args:
        allee_index: Combined index ``4·allee_ratio/offspring_number``,
            in (0, 1).

    Returns:
        The scaled-pressure ceiling ``v`` with ``exp(−v)`` the smallest
        mating-failure probability compatible with a steady state.

    Raises:
        NoPositiveEquilibriumError: If the index is ≥ 1.
    """
    return _pressure_ceiling(allee_index)


def mating_failure_floor(allee_index: float) -> float:
    """Smallest mating-failure probability compatible with a steady state.

    The returned probability can underflow to 0.0 when the scaled
    pressure ceiling is large; use :func:`log_mating_failure_floor` for
    a representation that never underflows.

    Args:
        allee_index: Combined index in (0, 1).

    Returns:
        The floor probability in (0, 1) (possibly 0.0 by underflow).
    """
    return math.exp(-_pressure_ceiling(allee_index))


def _clamped_radicand(value: float) -> float:
    """Clamp tiny negative round-off in a radicand to zero."""
    if -1e-14 < value < 0.0:
        return 0.0
    return value


def release_branches(
    theta: float, offspring_number: float, allee_ratio: float
) -> tuple[float, float]:
    """Released-male pressures bounding the steady-state region.

    For a mating-failure probability ``theta``, returns the pair
    ``(lower, upper)`` of scaled released-male pressures at which a
    steady state with that failure probability exists; the critical
    release level is the maximum of the upper branch.

    Args:
        theta: Mating-failure probability, in the closed interval from
            the mating-failure floor to 1 (the value 1 is handled as a
            limit).
        offspring_number: Basic offspring number.
        allee_ratio: Allee/capacity ratio.

    Returns:
        The pair ``(lower_branch, upper_branch)`` with
        ``lower_branch ≤ upper_branch``.

    Raises:
        ValueError: If ``theta`` lies outside its domain.
        NoPositiveEquilibriumError: If no steady state exists at any
            failure probability (index ≥ 1).
    """
    xi = 4.0 * allee_ratio / offspring_number
    floor_v = _pressure_ceiling(xi)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta!r}")
    if theta < math.exp(-floor_v) or (theta == 0.0):
        raise ValueError(
            f"theta {theta!r} is below the mating-failure floor "
            f"{math.exp(-floor_v):.6g}"
        )
    if theta == 1.0:
        ratio = -1.0
    else:
        ratio = math.log(theta) / (1.0 - theta)
    radicand = _clamped_radicand(1.0 + xi * ratio)
    if radicand < 0.0:
        raise ValueError(
            f"theta {theta!r} is outside the branch domain (negative radicand)"
        )
    half = 1.0 / (2.0 * allee_ratio)
    spread = half * math.sqrt(radicand)
    base = -math.log(theta) - half
    return base - spread, base + spread


# ══════════════════════════════════════════════════════════════════════
# Critical released-male level
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class CriticalRelease:
    """Critical sterilizing level and its cheap closed-form over-estimate.

    Attributes:
        level: Released-male population above which no positive steady
            state exists (may be negative when the population cannot
            persist even unaided).
        cheap_overestimate: Closed-form upper bound on ``level``
            requiring no maximization.
    """

    level: float
    cheap_overestimate: float


def _branch_upper_v(v: float, psi: float, xi: float) -> float:
    """Upper branch as a function of scaled pressure ``v = −log θ``."""
    q = v / -math.expm1(-v) if v > 0.0 else 1.0
    radicand = _clamped_radicand(1.0 - xi * q)
    if radicand < 0.0:
        radicand = 0.0
    return v - (1.0 - math.sqrt(radicand)) / (2.0 * psi)


def _branch_upper_slope(v: float, psi: float, xi: float) -> float:
    """Derivative of the upper branch in the scaled-pressure variable."""
    em = -math.expm1(-v)
    q = v / em
    qp = (em - v * math.exp(-v)) / (em * em)
    radicand = _clamped_radicand(1.0 - xi * q)
    if radicand <= 0.0:
        return -math.inf
    return 1.0 - xi * qp / (4.0 * psi * math.sqrt(radicand))


def critical_release_level(p: ModelParams) -> CriticalRelease:
    """Critical released-male level for one parameter set.

    Maximizes the upper branch curve over its domain (golden-section
    search refined by a bisection on the derivative sign) and rescales
    from scaled pressure to individuals.

    Args:
        p: Model rates.

    Returns:
        The :class:`CriticalRelease`.

    Raises:
        NoPositiveEquilibriumError: If no positive steady state exists
            at any release level (allee index ≥ 1).
    """
    agg = aggregates(p)
    n, psi, xi = agg.offspring_number, agg.allee_ratio, agg.allee_index
    ceiling = _pressure_ceiling(xi)
    scale = p.sterile_competitiveness * p.mate_encounter_rate
    cheap = (n / (4.0 * psi)) * (1.0 - 1.0 / n) ** 2 / scale

    lo = ceiling * 1e-12
    hi = ceiling * (1.0 - 1e-12)
    if _branch_upper_slope(lo, psi, xi) <= 0.0:
        # The branch is non-increasing from the start: its supremum is
        # the limit at zero pressure.
        value = -(1.0 - math.sqrt(_clamped_radicand(1.0 - xi))) / (2.0 * psi)
        return CriticalRelease(level=value / scale, cheap_overestimate=cheap)

    # Golden-section search for the interior maximum.
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _branch_upper_v(c, psi, xi)
    fd = _branch_upper_v(d, psi, xi)
    while (b - a) > 1e-6 * ceiling:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _branch_upper_v(c, psi, xi)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _branch_upper_v(d, psi, xi)

    # Refine by bisection on the derivative sign.  The golden bracket
    # may not straddle the sign change, so expand it first if needed.
    left, right = a, b
    while _branch_upper_slope(left, psi, xi) <= 0.0 and left > lo:
        left = max(lo, left - (right - left))
    while _branch_upper_slope(right, psi, xi) >= 0.0 and right < hi:
        right = min(hi, right + (right - left))
    if _branch_upper_slope(left, psi, xi) > 0.0 > _branch_upper_slope(right, psi, xi):
        while (right - left) > 1e-13 * ceiling:
            mid = 0.5 * (left + right)
            if _branch_upper_slope(mid, psi, xi) > 0.0:
                left = mid
            else:
                right = mid
    peak = 0.5 * (left + right)
    value = _branch_upper_v(peak, psi, xi)
    return CriticalRelease(level=value / scale, cheap_overestimate=cheap)


# ══════════════════════════════════════════════════════════════════════
# Steady states
# ══════════════════════════════════════════════════════════════════════


class Stability(Enum):
    """Local stability classification of a steady state."""

    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class SteadyState:
    """One steady state of the reduced model.

    Attributes:
        eggs: Egg compartment value.
        males: Wild male compartment value.
        females: Female compartment value.
        stability: Local stability classification.
    """

    eggs: float
    males: float
    females: float
    stability: Stability

    @property
    def triple(self) -> np.ndarray:
        """The state as an ``(eggs, males, females)`` array."""
        return np.array([self.eggs, self.males, self.females])


@dataclass(frozen=True)
class SteadyStateSet:
    """All steady states of the reduced model at one released-male level.

    Attributes:
        zero: The empty state (always present, always stable).
        threshold: The lower positive steady state, when it exists —
            the tipping point between collapse and persistence.
        wild: The upper positive steady state, when it exists.  In the
            degenerate single-root case ``threshold`` and ``wild`` are
            the same state.
    """

    zero: SteadyState
    threshold: SteadyState | None
    wild: SteadyState | None

    @property
    def positive_count(self) -> int:
        """Number of distinct positive steady states (0, 1, or 2)."""
        if self.threshold is None:
            return 0
        if self.wild is None or self.wild is self.threshold:
            return 1
        return 2


def _state_from_scaled_males(
    x: float, p: ModelParams, agg: Aggregates, stability: Stability
) -> SteadyState:
    """Map a scaled male root to the full steady state."""
    scaled = agg.allee_ratio * x  # male population over its capacity scale
    males = x / p.mate_encounter_rate
    eggs = p.capacity * scaled
    females = (
        p.capacity
        * (p.egg_maturation_rate + p.egg_death_rate)
        / p.egg_lay_rate
        * scaled
        / (1.0 - scaled)
    )
    return SteadyState(
        eggs=eggs, males=males, females=females, stability=stability
    )


def steady_states(p: ModelParams, level: float = 0.0) -> SteadyStateSet:
    """All steady states at a frozen released-male level.

    Locates the maximum of the characteristic function first, then runs
    one bracketed root search on each side of it; roots are mapped back
    to full states and classified.

    Args:
        p: Model rates.
        level: Released-male population, ≥ 0.

    Returns:
        The :class:`SteadyStateSet`; absent positive states are None.
    """
    if level < 0.0:
        raise InvalidParameterError(f"level must be ≥ 0, got {level!r}")
    agg = aggregates(p)
    n, psi = agg.offspring_number, agg.allee_ratio
    zero = SteadyState(0.0, 0.0, 0.0, Stability.STABLE)
    if agg.allee_index >= 1.0:
        return SteadyStateSet(zero=zero, threshold=None, wild=None)

    y = p.mate_encounter_rate * p.sterile_competitiveness * level
    span = (1.0 - 1e-12) / psi

    def fx(x: float) -> float:
        return characteristic(x, y, n, psi)

    # Locate the maximum: geometric grid scan, then golden refinement.
    grid = span * np.geomspace(1e-14, 1.0, 4001)
    values = np.array([fx(x) for x in grid])
    j = int(np.argmax(values))
    a = grid[max(0, j - 1)]
    b = grid[min(len(grid) - 1, j + 1)]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fx(c), fx(d)
    while (b - a) > 1e-14 * span:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fx(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fx(d)
    x_peak = 0.5 * (a + b)
    f_peak = fx(x_peak)

    peak_scale = max(1.0, x_peak)
    if f_peak <= 0.0:
        if abs(f_peak) < 1e-12 * peak_scale:
            single = _state_from_scaled_males(
                x_peak, p, agg, _stability_at_root(x_peak, y, p, agg)
            )
            return SteadyStateSet(zero=zero, threshold=single, wild=single)
        return SteadyStateSet(zero=zero, threshold=None, wild=None)

    # Two sign changes bracket the positive hump around the maximum.
    x_lo = span * 1e-16
    lower = float(
        brentq(fx, x_lo, x_peak, xtol=1e-300, rtol=_ROOT_RTOL)
    )
    upper = float(
        brentq(fx, x_peak, span, xtol=1e-300, rtol=_ROOT_RTOL)
    )
    threshold = _state_from_scaled_males(
        lower, p, agg, _stability_at_root(lower, y, p, agg)
    )
    wild = _state_from_scaled_males(
        upper, p, agg, _stability_at_root(upper, y, p, agg)
    )
    return SteadyStateSet(zero=zero, threshold=threshold, wild=wild)


def _stability_at_root(
    x: float, y: float, p: ModelParams, agg: Aggregates
) -> Stability:
    """Stability of a positive root via the closed-form criterion."""
    scaled = agg.allee_ratio * x
    total = x + y
    crowd = y / total
    criterion = (1.0 - scaled) * (
        1.0
        + crowd
        + x * (-1.0 + agg.offspring_number * (x / total) * (1.0 - scaled))
    )
    return Stability.STABLE if criterion < 1.0 else Stability.UNSTABLE


def classify_stability(
    state, level: float, p: ModelParams, residual_tol: float = 1e-6
) -> Stability:
    """Classify the local stability of a steady state.

    The empty state is unconditionally stable; positive steady states
    are classified by the closed-form criterion in scaled variables.

    Args:
        state: The candidate steady state ``(eggs, males, females)``.
        level: Released-male population at which it is a steady state.
        p: Model rates.
        residual_tol: Relative tolerance of the is-this-an-equilibrium
            check.

    Returns:
        The :class:`Stability` verdict.

    Raises:
        ValueError: If the supplied state is not a steady state at this
            level (residual check).
    """
    e, m, f = (float(v) for v in state)
    scale = 1.0 + max(e, m, f)
    loss_e = p.egg_maturation_rate + p.egg_death_rate
    weighted = p.sterile_competitiveness * level
    total = m + weighted
    if total > 0.0:
        fertile = -math.expm1(-p.mate_encounter_rate * total) * m / total
    else:
        fertile = 0.0
    residual = max(
        abs(p.egg_lay_rate * f * (1.0 - e / p.capacity) - loss_e * e),
        abs(
            (1.0 - p.female_fraction) * p.egg_maturation_rate * e
            - p.male_death_rate * m
        ),
        abs(
            p.female_fraction * p.egg_maturation_rate * e * fertile
            - p.female_death_rate * f
        ),
    )
    if residual > residual_tol * scale:
        raise ValueError(
            f"state is not an equilibrium at level {level!r} "
            f"(residual {residual:.3g} exceeds tolerance)"
        )
    if max(e, m, f) <= residual_tol:
        return Stability.STABLE
    agg = aggregates(p)
    x = p.mate_encounter_rate * m
    y = p.mate_encounter_rate * p.sterile_competitiveness * level
    return _stability_at_root(x, y, p, agg)


# ══════════════════════════════════════════════════════════════════════
# Analytic equilibrium bounds
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class EquilibriumBounds:
    """Closed-form componentwise bounds on the two positive steady states.

    Attributes:
        growth_peak: Location (in capacity-scaled male units) of the
            peak of the net-reproduction curve.
        offspring_floor: Value the offspring number must exceed for the
            bound construction (tends to 1 as the Allee ratio vanishes).
        threshold_margin: Margin constant entering the upper bound on
            the threshold state.
        wild_margin: Margin constant entering the lower bound on the
            wild state.
        under_threshold: Componentwise lower bound on the threshold
            state, as ``(eggs, males, females)``.
        over_threshold: Componentwise upper bound on the threshold
            state.
        under_wild: Componentwise lower bound on the wild state.
        over_wild: Componentwise upper bound on the wild state.
    """

    growth_peak: float
    offspring_floor: float
    threshold_margin: float
    wild_margin: float
    under_threshold: np.ndarray
    over_threshold: np.ndarray
    under_wild: np.ndarray
    over_wild: np.ndarray


def growth_peak_location(allee_ratio: float) -> float:
    """Scaled location of the net-reproduction peak.

    Root of ``exp(−Z) = allee_ratio/(1 + allee_ratio − allee_ratio·Z)``
    between 0 and ``1/(2·allee_ratio)``.

    Args:
        allee_ratio: Allee/capacity ratio, > 0.

    Returns:
        The peak location ``Z``.
    """
    psi = allee_ratio
    if psi <= 0.0:
        raise InvalidParameterError(f"allee_ratio must be > 0, got {psi!r}")

    def gap(z: float) -> float:
        return math.exp(-z) * (1.0 + psi - psi * z) - psi

    hi = 1.0 / (2.0 * psi)
    return float(brentq(gap, 0.0, hi, xtol=1e-300, rtol=_ROOT_RTOL))


def equilibrium_bounds(p: ModelParams) -> EquilibriumBounds:
    """Closed-form bounds on the release-free positive steady states.

    Args:
        p: Model rates; requires offspring number > 2 and above the
            construction's floor.

    Returns:
        The :class:`EquilibriumBounds` with all four bound states.

    Raises:
        NoPositiveEquilibriumError: If the offspring number does not
            exceed the construction's floor.
        InvalidParameterError: If the offspring number is ≤ 2.
    """
    agg = aggregates(p)
    n, lam, psi = agg.offspring_number, agg.male_capacity_inv, agg.allee_ratio
    if n <= 2.0:
        raise InvalidParameterError(
            f"equilibrium bounds require offspring number > 2, got {n:.6g}"
        )
    z = growth_peak_location(psi)
    pz = psi * z
    floor = (1.0 + psi - pz) / (1.0 - pz) ** 2
    if n <= floor:
        raise NoPositiveEquilibriumError(
            f"offspring number {n:.6g} does not exceed the bound floor "
            f"{floor:.6g}"
        )
    wild_margin = 1.0 + psi / (1.0 - pz)
    threshold_margin = n - pz * (1.0 + psi - pz) / (1.0 - pz) ** 2

    k = p.capacity
    beta = p.mate_encounter_rate
    loss_e = p.egg_maturation_rate + p.egg_death_rate
    b = p.egg_lay_rate

    under_threshold = np.array(
        [
            lam * k / (n * beta),
            1.0 / (n * beta),
            (loss_e / b) * lam * k / (n * beta),
        ]
    )
    shrink = 1.0 - threshold_margin / n
    over_threshold = shrink * np.array(
        [k, 1.0 / lam, loss_e * k * n / (b * threshold_margin)]
    )
    grow = 1.0 - wild_margin / n
    under_wild = grow * np.array(
        [k, 1.0 / lam, loss_e * k * n / (b * wild_margin)]
    )
    top = 1.0 - 1.0 / n
    over_wild = top * np.array([k, 1.0 / lam, k * n * loss_e / b])
    return EquilibriumBounds(
        growth_peak=z,
        offspring_floor=floor,
        threshold_margin=threshold_margin,
        wild_margin=wild_margin,
        under_threshold=under_threshold,
        over_threshold=over_threshold,
        under_wild=under_wild,
        over_wild=over_wild,
    )
