"""Release schedules and suppression-threshold arithmetic.

A release programme is described by one of three schedule records:
a constant-rate release, a periodic piecewise rate profile, or periodic
instantaneous pulses.  This module computes, in closed form where
possible, the band the released-male population settles into under each
schedule, compares that band against the critical sterilizing level to
deliver a suppression verdict, and evaluates the sufficiency thresholds
(minimal pulse size for a period, maximal period for a pulse size, pulse
size for a prescribed effort multiple).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from sitdyn.params import InvalidParameterError, ModelParams, aggregates

__all__ = [
    "ReleaseSchedule",
    "ConstantRelease",
    "PeriodicRelease",
    "ImpulsiveRelease",
    "SterileEnvelope",
    "Verdict",
    "UnaidedCollapseError",
    "ThresholdNotMetError",
    "release_envelope",
    "extinction_threshold_check",
    "sufficiency_scale",
    "sufficient_impulse",
    "sufficient_period",
    "amount_for_effort",
    "min_release_count",
]


# ══════════════════════════════════════════════════════════════════════
# Errors
# ══════════════════════════════════════════════════════════════════════


class UnaidedCollapseError(ValueError):
    """The population dies out with no releases at all.

    Raised by the sufficiency thresholds when the basic offspring number
    is ≤ 1, where "enough sterile males for collapse" is not a
    meaningful question (zero is already enough).
    """


class ThresholdNotMetError(ValueError):
    """The schedule's released-male floor does not clear the critical level.

    Raised when a guarantee (e.g. a minimal release count) is requested
    for a schedule whose sustained released-male population is not
    provably above the critical sterilizing level.
    """


# ══════════════════════════════════════════════════════════════════════
# Schedule records
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class ReleaseSchedule:
    """Base record for release programmes.

    Attributes:
        initial_level: Released males already in the field at time 0
            (individuals).
    """

    initial_level: float = field(default=0.0, kw_only=True)

    def __post_init__(self) -> None:
        if self.initial_level < 0.0:
            raise InvalidParameterError(
                f"initial_level must be ≥ 0, got {self.initial_level!r}"
            )


@dataclass(frozen=True)
class ConstantRelease(ReleaseSchedule):
    """Continuous release at a constant rate.

    Attributes:
        rate: Released males per day, ≥ 0.
    """

    rate: float = 0.0

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.rate < 0.0:
            raise InvalidParameterError(f"rate must be ≥ 0, got {self.rate!r}")


@dataclass(frozen=True)
class PeriodicRelease(ReleaseSchedule):
    """Periodic release with an arbitrary rate profile over each period.

    Attributes:
        period: Repeat interval in days, > 0.
        profile: Rate profile on one period — a function of the time
            offset within the period, returning released males per day.
        count: Number of periods after which releases stop; None means
            the programme continues indefinitely.
    """

    period: float = 0.0
    profile: Callable[[float], float] = lambda t: 0.0
    count: int | None = None

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.period <= 0.0:
            raise InvalidParameterError(
                f"period must be > 0, got {self.period!r}"
            )
        if self.count is not None and self.count < 0:
            raise InvalidParameterError(
                f"count must be ≥ 0 or None, got {self.count!r}"
            )


@dataclass(frozen=True)
class ImpulsiveRelease(ReleaseSchedule):
    """Instantaneous pulse releases repeated periodically.

    Pulses fire at times 0, period, 2·period, …; each adds ``amount``
    released males to the field at once.

    Attributes:
        amount: Males released per pulse, ≥ 0.
        period: Days between pulses, > 0.
        count: Number of pulses after which releases stop; None means
            the programme continues indefinitely.
    """

    amount: float = 0.0
    period: float = 0.0
    count: int | None = None

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.amount < 0.0:
            raise InvalidParameterError(
                f"amount must be ≥ 0, got {self.amount!r}"
            )
        if self.period <= 0.0:
            raise InvalidParameterError(
                f"period must be > 0, got {self.period!r}"
            )
        if self.count is not None and self.count < 0:
            raise InvalidParameterError(
                f"count must be ≥ 0 or None, got {self.count!r}"
            )


# ══════════════════════════════════════════════════════════════════════
# Released-male envelope
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class SterileEnvelope:
    """Band the released-male population settles into.

    Attributes:
        lower: Infimum of the limiting released-male level
            (individuals).
        upper: Supremum of the limiting level.
        limit: The single limiting value for constant-rate schedules
            (where lower == upper == limit); None otherwise.
    """

    lower: float
    upper: float
    limit: float | None = None


def release_envelope(
    schedule: ReleaseSchedule, death_rate: float, resolution: float = 0.1
) -> SterileEnvelope:
    """Limiting band of the released-male population under a schedule.

    The released-male pool decays exponentially between inputs, so under
    an indefinitely repeated schedule it converges to a periodic regime;
    this returns that regime's extremes, in closed form for constant and
    pulsed schedules and by quadrature of the rate profile for general
    periodic ones.

    Args:
        schedule: The release programme (its ``count`` is ignored: the
            envelope describes the indefinitely-repeated regime).
        death_rate: Per-day mortality of released males, > 0.
        resolution: Grid spacing in days for profile quadrature
            (composite Simpson with midpoints) and extremum scanning;
            only used for :class:`PeriodicRelease`.

    Returns:
        The :class:`SterileEnvelope`.
    """
    if death_rate <= 0.0:
        raise InvalidParameterError(
            f"death_rate must be > 0, got {death_rate!r}"
        )
    if isinstance(schedule, ConstantRelease):
        level = schedule.rate / death_rate
        return SterileEnvelope(lower=level, upper=level, limit=level)
    if isinstance(schedule, ImpulsiveRelease):
        amount, period = schedule.amount, schedule.period
        lower = amount / math.expm1(death_rate * period)
        upper = amount / -math.expm1(-death_rate * period)
        return SterileEnvelope(lower=lower, upper=upper)
    if isinstance(schedule, PeriodicRelease):
        period = schedule.period
        n = max(2, math.ceil(period / resolution))
        h = period / n
        # Weighted running integral of profile(t)·exp(death_rate·t),
        # accumulated with per-step Simpson (endpoints + midpoint).
        grid = [0.0] * (n + 1)
        running = 0.0
        f_left = schedule.profile(0.0)
        for k in range(n):
            t0 = k * h
            t1 = t0 + h
            tm = t0 + 0.5 * h
            f_mid = schedule.profile(tm) * math.exp(death_rate * tm)
            f_right = schedule.profile(t1) * math.exp(death_rate * t1)
            running += (h / 6.0) * (f_left + 4.0 * f_mid + f_right)
            grid[k + 1] = running
            f_left = f_right
        decay = math.exp(-death_rate * period)
        start_level = decay / (1.0 - decay) * running
        levels = [
            math.exp(-death_rate * (k * h)) * (start_level + grid[k])
            for k in range(n + 1)
        ]
        return SterileEnvelope(lower=min(levels), upper=max(levels))
    raise TypeError(f"unsupported schedule type: {type(schedule).__name__}")


# ══════════════════════════════════════════════════════════════════════
# Suppression verdict
# ══════════════════════════════════════════════════════════════════════


class Verdict(Enum):
    """Stability verdict for an indefinitely repeated release programme."""

    ZERO_GLOBALLY_STABLE = "zero-globally-stable"
    BISTABLE = "bistable"
    INCONCLUSIVE = "inconclusive"


def extinction_threshold_check(schedule: ReleaseSchedule, p: ModelParams) -> Verdict:
    """Compare a schedule's released-male band to the critical level.

    If even the band's floor exceeds the critical sterilizing level, the
    empty population is globally stable (suppression certain from any
    start).  If even the band's ceiling stays below it, the system keeps
    its two-attractor structure.  Between the two — including the exact
    boundary cases — the theory is silent and the verdict is
    inconclusive.

    Args:
        schedule: A release programme with no stopping count (the
            verdict concerns the indefinitely repeated regime).
        p: Model rates.

    Returns:
        The :class:`Verdict`.

    Raises:
        ValueError: If the schedule has a finite stopping count.
    """
    count = getattr(schedule, "count", None)
    if count is not None:
        raise ValueError(
            "stability verdicts require an indefinitely repeated schedule "
            "(count=None)"
        )
    from sitdyn.equilibria import critical_release_level

    critical = critical_release_level(p).level
    env = release_envelope(schedule, p.sterile_death_rate)
    if env.lower > critical:
        return Verdict.ZERO_GLOBALLY_STABLE
    if env.upper < critical:
        return Verdict.BISTABLE
    return Verdict.INCONCLUSIVE


# ══════════════════════════════════════════════════════════════════════
# Sufficiency thresholds
# ══════════════════════════════════════════════════════════════════════


def sufficiency_scale(p: ModelParams) -> float:
    """Released-male scale whose sustained floor guarantees suppression.

    This is the population size ``S`` such that keeping the released-male
    pool above ``S`` at all times makes the empty state globally stable;
    the pulse-size and period thresholds below are its direct
    consequences.

    Args:
        p: Model rates.

    Returns:
        The scale in individuals.

    Raises:
        UnaidedCollapseError: If the offspring number is ≤ 1 (the
            population collapses with no releases; the scale is
            meaningless).
    """
    agg = aggregates(p)
    n = agg.offspring_number
    if n <= 1.0:
        raise UnaidedCollapseError(
            f"offspring number {n:.6g} ≤ 1: population collapses unaided"
        )
    return (
        (1.0 - p.female_fraction)
        * p.egg_maturation_rate
        * n
        / (4.0 * p.male_death_rate * p.sterile_competitiveness)
        * (1.0 - 1.0 / n) ** 2
        * p.capacity
    )


def sufficient_impulse(p: ModelParams, period: float) -> float:
    """Minimal pulse size guaranteeing suppression at a given period.

    Args:
        p: Model rates.
        period: Days between pulses, > 0.

    Returns:
        The minimal per-pulse release (individuals): pulses of at least
        this size every ``period`` days keep the released-male floor at
        or above the sufficiency scale.
    """
    if period <= 0.0:
        raise InvalidParameterError(f"period must be > 0, got {period!r}")
    return sufficiency_scale(p) * math.expm1(p.sterile_death_rate * period)


def sufficient_period(p: ModelParams, amount: float) -> float:
    """Maximal pulse period guaranteeing suppression at a given pulse size.

    Args:
        p: Model rates.
        amount: Males released per pulse, > 0.

    Returns:
        The largest period (days) at which ``amount``-sized pulses keep
        the released-male floor at or above the sufficiency scale.
    """
    if amount <= 0.0:
        raise InvalidParameterError(f"amount must be > 0, got {amount!r}")
    return math.log1p(amount / sufficiency_scale(p)) / p.sterile_death_rate


def amount_for_effort(p: ModelParams, effort: float, period: float) -> float:
    """Pulse size for a prescribed multiple of the sufficient release.

    Args:
        p: Model rates.
        effort: Dimensionless effort multiple, > 0 (1 is the sufficiency
            boundary when released males are fully competitive).
        period: Days between pulses, > 0.

    Returns:
        The per-pulse release (individuals).
    """
    if effort <= 0.0:
        raise InvalidParameterError(f"effort must be > 0, got {effort!r}")
    if period <= 0.0:
        raise InvalidParameterError(f"period must be > 0, got {period!r}")
    agg = aggregates(p)
    n = agg.offspring_number
    if n <= 1.0:
        raise UnaidedCollapseError(
            f"offspring number {n:.6g} ≤ 1: population collapses unaided"
        )
    return (
        p.capacity
        * effort
        * (1.0 - p.female_fraction)
        * p.egg_maturation_rate
        * n
        / (4.0 * p.male_death_rate)
        * (1.0 - 1.0 / n) ** 2
        * math.expm1(p.sterile_death_rate * period)
    )


def min_release_count(
    schedule: ReleaseSchedule, p: ModelParams, entry_time: float
) -> int:
    """Number of releases guaranteeing extinction for a periodic programme.

    Once the released-male floor clears the critical level, running the
    programme for at least the basin-entry time of that floor is enough;
    the count is that time divided by the period, rounded up.

    Args:
        schedule: A periodic or pulsed programme (must have a period).
        p: Model rates.
        entry_time: Basin-entry time in days computed at the schedule's
            released-male floor.

    Returns:
        The minimal number of release periods.

    Raises:
        ThresholdNotMetError: If the schedule's floor does not strictly
            exceed the critical sterilizing level.
    """
    period = getattr(schedule, "period", None)
    if period is None:
        raise ValueError("min_release_count requires a schedule with a period")
    from sitdyn.equilibria import critical_release_level

    critical = critical_release_level(p).level
    env = release_envelope(schedule, p.sterile_death_rate)
    if not env.lower > critical:
        raise ThresholdNotMetError(
            f"released-male floor {env.lower:.6g} does not exceed the "
            f"critical level {critical:.6g}; no extinction guarantee"
        )
    if entry_time < 0.0:
        raise InvalidParameterError(
            f"entry_time must be ≥ 0, got {entry_time!r}"
        )
    return math.ceil(entry_time / period)
