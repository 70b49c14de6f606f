"""Dynamical systems and integrators for the suppression models.

Provides the continuous right-hand sides of the four population models
(reduced egg/male/female, the same with a released-male compartment
driven by a release schedule, the reduced system with a sterilized-female
diagnostic, and the full model with a larval stage), the
positivity-preserving nonstandard finite-difference (NSFD) scheme used
for production simulation, a classical 4th-order reference integrator
used only as a validation oracle, and trajectory simulation with
release schedules and stop conditions.

Canonical trajectory storage for scheme-based runs is a ``(n, 5)`` array
whose columns are ``eggs, males, released_males, females,
sterilized_females`` (the kernel state order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from sitdyn import _backend
from sitdyn._backend import (
    PV_CAPACITY,
    PV_COMPET,
    PV_EGG_DEATH,
    PV_EGG_LAY,
    PV_ENCOUNTER,
    PV_FEMALE_DEATH,
    PV_FEMALE_FRAC,
    PV_MALE_DEATH,
    PV_MATURATION,
    PV_SIZE,
    PV_STERILE_DEATH,
)
from sitdyn.params import InvalidParameterError, ModelParams
from sitdyn.releases import (
    ConstantRelease,
    ImpulsiveRelease,
    PeriodicRelease,
    ReleaseSchedule,
)

__all__ = [
    "NsfdScheme",
    "Trajectory",
    "StopReason",
    "StepOverflowError",
    "nsfd_scheme",
    "pack_params",
    "rhs_reduced",
    "rhs_controlled",
    "rhs_tracked",
    "rhs_full",
    "nsfd_step",
    "reference_integrate",
    "simulate",
    "COL_EGGS",
    "COL_MALES",
    "COL_RELEASED",
    "COL_FEMALES",
    "COL_STERILIZED",
    "CONTROLLED_COLUMNS",
    "FULL_COLUMNS",
]

# Column layout of canonical trajectory arrays (and of the CSV export).
COL_EGGS = 0
COL_MALES = 1
COL_RELEASED = 2
COL_FEMALES = 3
COL_STERILIZED = 4
CONTROLLED_COLUMNS = ("E", "M", "Mi", "F", "Fst")
FULL_COLUMNS = ("E", "L", "M", "F", "Fst")

# Default step budget for open-ended simulations.
DEFAULT_MAX_STEPS = 300_000


class StepOverflowError(RuntimeError):
    """The reference integrator exceeded its step or refinement budget."""


# ══════════════════════════════════════════════════════════════════════
# Scheme configuration
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class NsfdScheme:
    """Configuration of the positivity-preserving difference scheme.

    The scheme replaces the raw step size by the weight
    ``(1 − exp(−max_loss_rate·dt))/max_loss_rate``, which is what keeps
    every iterate non-negative for arbitrary step sizes.

    Attributes:
        dt: Nominal step size in days.
        max_loss_rate: Largest per-day loss rate among the compartments
            (egg maturation+death, male death, female death, released-male
            death).
        step_weight: The denominator-adjusted step size actually used by
            the update; lies strictly between 0 and ``1/max_loss_rate``.
        max_steps: Default step budget for open-ended runs.
    """

    dt: float
    max_loss_rate: float
    step_weight: float
    max_steps: int = DEFAULT_MAX_STEPS


def nsfd_scheme(
    p: ModelParams,
    dt: float = 0.1,
    max_steps: int = DEFAULT_MAX_STEPS,
    *,
    dynamic_release_pool: bool = True,
) -> NsfdScheme:
    """Build the scheme configuration for one parameter set.

    Args:
        p: Model rates.
        dt: Step size in days.
        max_steps: Step budget for open-ended runs.
        dynamic_release_pool: Whether the released-male compartment is
            integrated (its death rate then joins the loss-rate maximum).
            Pass False for runs that hold that pool at an external
            constant level.

    Returns:
        The :class:`NsfdScheme` with the loss rate and step weight filled
        in.
    """
    if dt <= 0.0:
        raise InvalidParameterError(f"dt must be > 0, got {dt!r}")
    q = max(
        p.male_death_rate,
        p.female_death_rate,
        p.egg_maturation_rate + p.egg_death_rate,
    )
    if dynamic_release_pool:
        q = max(q, p.sterile_death_rate)
    weight = -math.expm1(-q * dt) / q
    return NsfdScheme(dt=dt, max_loss_rate=q, step_weight=weight, max_steps=max_steps)


def pack_params(p: ModelParams) -> np.ndarray:
    """Pack model rates into the flat vector consumed by the kernels."""
    pv = np.empty(PV_SIZE, dtype=np.float64)
    pv[PV_EGG_LAY] = p.egg_lay_rate
    pv[PV_CAPACITY] = p.capacity
    pv[PV_FEMALE_FRAC] = p.female_fraction
    pv[PV_MATURATION] = p.egg_maturation_rate
    pv[PV_EGG_DEATH] = p.egg_death_rate
    pv[PV_MALE_DEATH] = p.male_death_rate
    pv[PV_FEMALE_DEATH] = p.female_death_rate
    pv[PV_ENCOUNTER] = p.mate_encounter_rate
    pv[PV_COMPET] = p.sterile_competitiveness
    pv[PV_STERILE_DEATH] = p.sterile_death_rate
    return pv


# ══════════════════════════════════════════════════════════════════════
# Continuous right-hand sides
# ══════════════════════════════════════════════════════════════════════


def _mating_factors(males: float, released: float, p: ModelParams) -> tuple[float, float]:
    """Fertile and sterilizing insemination factors for given male levels.

    Returns the pair ``(fertile, sterilizing)`` where ``fertile`` is the
    probability an emerging female both finds a mate and mates a wild
    male, and ``sterilizing`` the probability she either never finds a
    mate or mates a released male.  Both are defined as their limits
    (0 and 1) when no males of either kind are present.
    """
    weighted = p.sterile_competitiveness * released
    total = males + weighted
    if total <= 0.0:
        return 0.0, 1.0
    miss = math.exp(-p.mate_encounter_rate * total)
    found = 1.0 - miss
    return found * males / total, miss + found * weighted / total


def rhs_reduced(s: Sequence[float], released: float, p: ModelParams) -> np.ndarray:
    """Reduced egg/male/female model at a frozen released-male level.

    Args:
        s: State ``(eggs, males, females)``.
        released: Released-male population, held constant.
        p: Model rates.

    Returns:
        The derivative as a length-3 array.
    """
    e, m, f = float(s[0]), float(s[1]), float(s[2])
    fertile, _ = _mating_factors(m, released, p)
    loss_e = p.egg_maturation_rate + p.egg_death_rate
    return np.array(
        [
            p.egg_lay_rate * f * (1.0 - e / p.capacity) - loss_e * e,
            (1.0 - p.female_fraction) * p.egg_maturation_rate * e
            - p.male_death_rate * m,
            p.female_fraction * p.egg_maturation_rate * e * fertile
            - p.female_death_rate * f,
        ]
    )


def rhs_controlled(s: Sequence[float], u: float, p: ModelParams) -> np.ndarray:
    """Reduced model with the released-male pool as a driven compartment.

    Args:
        s: State ``(eggs, males, released_males, females)``.
        u: Instantaneous release rate (individuals/day).
        p: Model rates.

    Returns:
        The derivative as a length-4 array.
    """
    e, m, mi, f = (float(v) for v in s)
    d3 = rhs_reduced((e, m, f), mi, p)
    return np.array([d3[0], d3[1], u - p.sterile_death_rate * mi, d3[2]])


def rhs_tracked(s: Sequence[float], u: float, p: ModelParams) -> np.ndarray:
    """Controlled model plus the passive sterilized-female diagnostic.

    Args:
        s: State ``(eggs, males, released_males, females,
            sterilized_females)``.
        u: Instantaneous release rate.
        p: Model rates.

    Returns:
        The derivative as a length-5 array.
    """
    e, m, mi, f, fst = (float(v) for v in s)
    fertile, sterile = _mating_factors(m, mi, p)
    loss_e = p.egg_maturation_rate + p.egg_death_rate
    recruit = p.female_fraction * p.egg_maturation_rate * e
    return np.array(
        [
            p.egg_lay_rate * f * (1.0 - e / p.capacity) - loss_e * e,
            (1.0 - p.female_fraction) * p.egg_maturation_rate * e
            - p.male_death_rate * m,
            u - p.sterile_death_rate * mi,
            recruit * fertile - p.female_death_rate * f,
            recruit * sterile - p.female_death_rate * fst,
        ]
    )


def rhs_full(s: Sequence[float], released: float, p: ModelParams) -> np.ndarray:
    """Full model with an explicit larval stage.

    Args:
        s: State ``(eggs, larvae, males, females, sterilized_females)``.
        released: Released-male population, held constant.
        p: Model rates; the larval-stage fields must be present.

    Returns:
        The derivative as a length-5 array.

    Raises:
        InvalidParameterError: If the larval-stage rates are missing.
    """
    if not p.has_larval_stage:
        raise InvalidParameterError(
            "full model requires the larval-stage rates "
            "(egg_hatch_rate, larval_maturation_rate, larval_death_rate)"
        )
    e, larv, m, f, fst = (float(v) for v in s)
    fertile, sterile = _mating_factors(m, released, p)
    recruit = p.female_fraction * p.larval_maturation_rate * larv
    return np.array(
        [
            p.egg_lay_rate * f * (1.0 - e / p.capacity)
            - (p.egg_hatch_rate + p.egg_death_rate) * e,
            p.egg_hatch_rate * e
            - (p.larval_maturation_rate + p.larval_death_rate) * larv,
            (1.0 - p.female_fraction) * p.larval_maturation_rate * larv
            - p.male_death_rate * m,
            recruit * fertile - p.female_death_rate * f,
            recruit * sterile - p.female_death_rate * fst,
        ]
    )


# ══════════════════════════════════════════════════════════════════════
# NSFD stepping
# ══════════════════════════════════════════════════════════════════════


def nsfd_step(
    s: Sequence[float],
    u: float,
    scheme: NsfdScheme,
    p: ModelParams,
    *,
    freeze_release_pool: bool = False,
) -> np.ndarray:
    """One step of the positivity-preserving scheme.

    The egg update is implicit in the logistic saturation term; the male
    and released-male updates are explicit; the female updates use the
    male levels already advanced to the end of the step.  Non-negative
    input with ``eggs ≤ capacity`` yields non-negative output.

    Args:
        s: State of length 4 ``(eggs, males, released_males, females)``
            or length 5 with the sterilized-female diagnostic appended.
        u: Release rate held over the step.
        scheme: Scheme configuration.
        p: Model rates.
        freeze_release_pool: If true, hold the released-male compartment
            fixed instead of applying decay and inflow (used when that
            pool is treated as an external constant).

    Returns:
        The advanced state, same length as the input.
    """
    n = len(s)
    if n not in (4, 5):
        raise ValueError(f"state must have length 4 or 5, got {n}")
    buf = np.zeros(5, dtype=np.float64)
    buf[:n] = np.asarray(s, dtype=np.float64)
    _backend.run_steps(
        buf, 1, float(u), scheme.step_weight, pack_params(p), not freeze_release_pool
    )
    return buf[:n]


# ══════════════════════════════════════════════════════════════════════
# Reference integrator (validation oracle)
# ══════════════════════════════════════════════════════════════════════


def reference_integrate(
    rhs: Callable[[np.ndarray, float], np.ndarray],
    s0: Sequence[float],
    horizon: float,
    tol: float = 1e-8,
    initial_dt: float = 0.05,
    max_refinements: int = 18,
) -> "Trajectory":
    """High-accuracy integration used as an oracle in validation tests.

    Classical explicit 4th-order stepping at a fixed step, repeated with
    the step halved until the endpoints of successive runs agree within
    ``tol`` in relative sup norm.  Tiny negative round-off is clamped
    to zero.

    Args:
        rhs: Function ``rhs(state, t)`` returning the derivative.
        s0: Initial state (any length).
        horizon: Integration time in days, > 0.
        tol: Relative endpoint agreement required between the last two
            refinements.
        initial_dt: Starting step size in days.
        max_refinements: Bound on the number of step halvings.

    Returns:
        A :class:`Trajectory` whose states have the same dimension as
        ``s0`` (raw model order, no canonical 6-column layout).

    Raises:
        StepOverflowError: If the refinement budget is exhausted before
            the endpoints agree.
    """
    if horizon <= 0.0:
        raise InvalidParameterError(f"horizon must be > 0, got {horizon!r}")
    x0 = np.asarray(s0, dtype=np.float64)

    def run(nsteps: int) -> tuple[np.ndarray, np.ndarray]:
        h = horizon / nsteps
        times = np.linspace(0.0, horizon, nsteps + 1)
        states = np.empty((nsteps + 1, x0.size))
        x = x0.copy()
        states[0] = x
        for k in range(nsteps):
            t = k * h
            k1 = rhs(x, t)
            k2 = rhs(x + 0.5 * h * k1, t + 0.5 * h)
            k3 = rhs(x + 0.5 * h * k2, t + 0.5 * h)
            k4 = rhs(x + h * k3, t + h)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            np.clip(x, 0.0, None, out=x)
            states[k + 1] = x
        return times, states

    nsteps = max(1, math.ceil(horizon / initial_dt))
    times, states = run(nsteps)
    for _ in range(max_refinements):
        times2, states2 = run(2 * nsteps)
        gap = np.max(np.abs(states2[-1] - states[-1]) / (1.0 + np.abs(states2[-1])))
        times, states, nsteps = times2, states2, 2 * nsteps
        if gap < tol:
            labels = tuple(f"x{i}" for i in range(x0.size))
            return Trajectory(
                times=times,
                states=states,
                columns=labels,
                events=[],
                reason=StopReason.HORIZON,
            )
    raise StepOverflowError(
        f"endpoint did not stabilize to {tol:g} within {max_refinements} step halvings"
    )


# ══════════════════════════════════════════════════════════════════════
# Trajectory simulation
# ══════════════════════════════════════════════════════════════════════


class StopReason(Enum):
    """Why a simulation ended."""

    HORIZON = "horizon"
    MAX_STEPS = "max-steps"
    CONDITION = "stop-condition"


@dataclass(frozen=True)
class Trajectory:
    """A simulated path of the population.

    Attributes:
        times: Strictly increasing sample times in days, starting at 0.
        states: Array of shape ``(len(times), d)``; :func:`simulate`
            produces ``d = 5`` in the column order ``E, M, Mi, F, Fst``.
        columns: Compartment labels for the state columns, used by the
            CSV export; compartments absent from the simulated model are
            simply not present.
        events: List of ``(time, kind)`` marks for release pulses and
            stop conditions.
        reason: Why the run ended.
    """

    times: np.ndarray
    states: np.ndarray
    columns: tuple[str, ...] = CONTROLLED_COLUMNS
    events: list[tuple[float, str]] = field(default_factory=list)
    reason: StopReason = StopReason.HORIZON

    @property
    def final_state(self) -> np.ndarray:
        """The last recorded state."""
        return self.states[-1]

    def to_csv(self, path) -> None:
        """Write the trajectory as CSV with header ``t,<columns>``.

        Decimal-point formatting, one row per recorded sample.
        """
        if self.states.shape[1] != len(self.columns):
            raise ValueError(
                f"state width {self.states.shape[1]} does not match "
                f"column labels {self.columns!r}"
            )
        data = np.column_stack([self.times, self.states])
        header = "t," + ",".join(self.columns)
        np.savetxt(path, data, delimiter=",", header=header, comments="",
                   fmt="%.10g")


def _release_plan(
    schedule: ReleaseSchedule | None, scheme: NsfdScheme
) -> tuple[float | Callable[[float], float], float, int, int]:
    """Normalize a schedule into (rate, pulse_amount, pulse_period_steps, pulse_count)."""
    if schedule is None:
        return 0.0, 0.0, 0, 0
    if isinstance(schedule, ConstantRelease):
        return float(schedule.rate), 0.0, 0, 0
    if isinstance(schedule, PeriodicRelease):
        period = float(schedule.period)

        def rate(t: float, _profile=schedule.profile, _period=period) -> float:
            return float(_profile(math.fmod(t, _period)))

        return rate, 0.0, 0, 0
    if isinstance(schedule, ImpulsiveRelease):
        period_steps = max(1, round(schedule.period / scheme.dt))
        count = (
            int(schedule.count)
            if schedule.count is not None
            else np.iinfo(np.int64).max
        )
        return 0.0, float(schedule.amount), period_steps, count
    raise TypeError(f"unsupported schedule type: {type(schedule).__name__}")


def simulate(
    s0: Sequence[float],
    schedule: ReleaseSchedule | None,
    scheme: NsfdScheme,
    p: ModelParams,
    *,
    stop: Callable[[float, np.ndarray], bool] | None = None,
    horizon: float | None = None,
    record_every: int = 1,
    freeze_release_pool: bool = False,
) -> Trajectory:
    """Simulate the controlled model under a release schedule.

    Steps the positivity-preserving scheme, sampling the schedule's
    release rate once per step and applying instantaneous pulses at
    their scheduled step indices (the first pulse of an impulsive
    schedule fires at time 0).  The run ends at the horizon, when the
    stop condition first holds, or when the step budget is exhausted,
    whichever comes first.

    Args:
        s0: Initial state of length 4 ``(eggs, males, released_males,
            females)`` or length 5 with the sterilized-female diagnostic.
        schedule: Release schedule, or None for no releases.
        scheme: Scheme configuration (supplies ``dt`` and the step
            budget).
        p: Model rates.
        stop: Optional predicate ``stop(t, state5)`` evaluated at every
            recorded state (column order ``E, M, Mi, F, Fst``),
            including the initial one.
        horizon: Optional run length in days; defaults to the step
            budget.
        record_every: Keep every k-th sample (the initial and final
            states are always kept).
        freeze_release_pool: Hold the released-male compartment constant
            (diagnostic runs at a pinned sterile level); incompatible
            with non-trivial schedules.

    Returns:
        The sampled :class:`Trajectory` with columns ``E, M, Mi, F,
        Fst``.
    """
    x = np.asarray(s0, dtype=np.float64)
    if x.ndim != 1 or x.size not in (4, 5):
        raise ValueError("initial state must have length 4 or 5")
    if np.any(x < 0.0):
        raise InvalidParameterError("initial state must be componentwise ≥ 0")
    if record_every < 1:
        raise ValueError(f"record_every must be ≥ 1, got {record_every!r}")
    buf = np.zeros(5, dtype=np.float64)
    buf[: x.size] = x
    rate, pulse_amount, pulse_period, pulse_count = _release_plan(schedule, scheme)
    if freeze_release_pool and schedule is not None and not (
        isinstance(schedule, ConstantRelease) and schedule.rate == 0.0
    ):
        raise ValueError(
            "freeze_release_pool only makes sense without an active schedule"
        )
    pv = pack_params(p)
    w = scheme.step_weight
    mi_dynamic = not freeze_release_pool
    n_steps = (
        scheme.max_steps if horizon is None else max(1, round(horizon / scheme.dt))
    )

    times: list[float] = []
    rows: list[np.ndarray] = []
    events: list[tuple[float, str]] = []

    def record(n: int) -> None:
        times.append(n * scheme.dt)
        rows.append(buf.copy())

    reason = StopReason.MAX_STEPS if horizon is None else StopReason.HORIZON
    n = 0
    while True:
        due_pulse = (
            pulse_amount > 0.0
            and pulse_period > 0
            and n % pulse_period == 0
            and n // pulse_period < pulse_count
        )
        if due_pulse:
            buf[2] += pulse_amount
            events.append((n * scheme.dt, "release-pulse"))
        if n % record_every == 0 or n == n_steps:
            record(n)
            if stop is not None and stop(n * scheme.dt, rows[-1]):
                reason = StopReason.CONDITION
                events.append((n * scheme.dt, "stop-condition"))
                break
        if n >= n_steps:
            break
        u = rate(n * scheme.dt) if callable(rate) else rate
        _backend.run_steps(buf, 1, float(u), w, pv, mi_dynamic)
        n += 1

    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(rows),
        columns=CONTROLLED_COLUMNS,
        events=events,
        reason=reason,
    )
