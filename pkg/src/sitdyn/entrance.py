"""Entrance times into the certified extinction set, with analytic bounds.

The release program's key performance number is how long the wild
population, started at its persistence steady state, takes to fall
inside the extinction basin once releases begin.  This module computes
that entrance time by direct simulation, brackets it with closed-form
floor/ceiling formulas obtained from linear comparison systems, exposes
every intermediate quantity of the ceiling derivation for audit, and
reports release-count/effort accounting for constant, periodic, and
pulsed schedules.

Entrance detection is two-staged.  A dominance query against a
separatrix cloud serves as a cheap sufficient certificate and supplies
a stopping bound, but the cloud's finite mesh cannot certify basin
membership for states whose female share is far below the mesh
granularity, which is exactly where pulsed programs cross over.  The
crossing step is therefore refined to the first iterate whose
release-free fate classification certifies extinction, located by
bisection over checkpointed deterministic replays of the same
trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sitdyn import _backend
from sitdyn.dynamics import NsfdScheme, _release_plan, nsfd_scheme, pack_params
from sitdyn.equilibria import (
    NoPositiveEquilibriumError,
    growth_peak_location,
    steady_states,
)
from sitdyn.params import InvalidParameterError, ModelParams, aggregates
from sitdyn.releases import ReleaseSchedule
from sitdyn.separatrix import (
    FateKind,
    SeparatrixCloud,
    _threshold_reference,
    fate,
)

__all__ = [
    "AnalyticBoundContext",
    "EntryCeiling",
    "EntranceReport",
    "NeverEnteredError",
    "BoundNotApplicableError",
    "COND_DECAY_DOMINANCE",
    "COND_MODE_WEIGHT_SIGN",
    "COND_MARGIN_POSITIVITY",
    "COND_DILUTION",
    "COND_DECAY_CASE_GAP",
    "entry_time_floor",
    "entry_time_ceiling",
    "bound_context",
    "bound_components",
    "entry_time_simulated",
    "entrance_time_controlled",
    "two_step_feasible",
]

# Applicability-condition labels shared by the ceiling and the audit
# decomposition.
COND_DECAY_DOMINANCE = "male-decay-dominance"
COND_MODE_WEIGHT_SIGN = "mode-weight-sign"
COND_MARGIN_POSITIVITY = "margin-positivity"
COND_DILUTION = "dilution"
COND_DECAY_CASE_GAP = "decay-case-gap"


class NeverEnteredError(RuntimeError):
    """The trajectory did not reach the certified set within the budget.

    Attributes:
        steps: The exhausted step budget.
    """

    def __init__(self, steps: int):
        self.steps = steps
        super().__init__(
            f"trajectory not inside the certified extinction set after "
            f"{steps} steps"
        )


class BoundNotApplicableError(ValueError):
    """The analytic decomposition's validity conditions fail here.

    Attributes:
        failed_conditions: Labels of the violated conditions.
    """

    def __init__(self, failed_conditions: tuple[str, ...]):
        self.failed_conditions = failed_conditions
        super().__init__(
            "analytic bound not applicable; failed conditions: "
            + ", ".join(failed_conditions)
        )


# ══════════════════════════════════════════════════════════════════════
# Closed-form floor
# ══════════════════════════════════════════════════════════════════════


def entry_time_floor(p: ModelParams) -> float:
    """Universal lower bound on the entrance time, in days.

    Valid for every release level (even an unbounded one): the female
    compartment cannot decay faster than pure exponential death, and it
    starts above the persistence state's floor while the target set
    sits below the threshold state's ceiling.

    Args:
        p: Model rates.

    Returns:
        The floor on the entrance time, in days.

    Raises:
        NoPositiveEquilibriumError: If the offspring number is too
            small for two positive steady states to exist.
    """
    agg = aggregates(p)
    n, psi = agg.offspring_number, agg.allee_ratio
    z = growth_peak_location(psi)
    pz = psi * z
    floor = (1.0 + psi - pz) / (1.0 - pz) ** 2
    if n <= floor:
        raise NoPositiveEquilibriumError(
            f"offspring number {n:.6g} does not exceed the existence floor "
            f"{floor:.6g}"
        )
    offset = 1.0 + psi - pz
    inner = (
        1.0
        + n * n * (1.0 - pz) ** 3 / (pz * offset * offset)
        - n * (1.0 - pz) / (pz * offset)
    )
    return math.log(inner) / p.female_death_rate


# ══════════════════════════════════════════════════════════════════════
# Closed-form ceiling
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class EntryCeiling:
    """Closed-form upper bound on the entrance time, when applicable.

    Attributes:
        value: The ceiling in days, or None when not applicable.
        failed_conditions: Labels of the violated applicability
            conditions (empty when applicable).
    """

    value: float | None
    failed_conditions: tuple[str, ...] = ()

    @property
    def applicable(self) -> bool:
        """Whether the ceiling holds for these parameters."""
        return self.value is not None


def _fertile_share(p: ModelParams, level: float) -> float:
    """Fraction of encounters still fertile at the persistence state.

    The wild-male steady state diluted by the released level; uses the
    exact steady state, not its closed-form approximation.
    """
    wild = steady_states(p, 0.0).wild
    if wild is None:
        raise NoPositiveEquilibriumError(
            "no persistence steady state: nothing to suppress"
        )
    return wild.males / (wild.males + level)


def entry_time_ceiling(p: ModelParams, level: float) -> EntryCeiling:
    """Closed-form upper bound on the entrance time at a constant level.

    Evaluates the dominant-mode decay formula when all four
    applicability conditions hold; otherwise reports which failed.  The
    singular-looking coupling factor is evaluated through the stable
    combination ``√((σF−σE)² + 4NσEσFε)``, which stays finite when the
    egg-loss and female-death rates coincide.

    Args:
        p: Model rates.
        level: Constant released-male population (> 0 for a finite
            bound).

    Returns:
        The :class:`EntryCeiling`.
    """
    agg = aggregates(p)
    n, psi = agg.offspring_number, agg.allee_ratio
    eps = _fertile_share(p, level)
    loss_e = p.egg_maturation_rate + p.egg_death_rate
    sig_e = p.male_death_rate / loss_e
    sig_f = p.male_death_rate / p.female_death_rate
    spread = math.sqrt((sig_f - sig_e) ** 2 + 4.0 * n * sig_e * sig_f * eps)

    failed = []
    if not (sig_e > 1.0 and sig_f > 1.0):
        failed.append(COND_DECAY_DOMINANCE)
    if not (spread < max((2.0 * n - 1.0) * sig_f + sig_e, (2.0 * sig_e - 1.0) * sig_f)):
        failed.append(COND_MODE_WEIGHT_SIGN)
    if not ((sig_f - 1.0) * (sig_e - 1.0) > eps * n):
        failed.append(COND_MARGIN_POSITIVITY)
    if not (eps * n < 1.0):
        failed.append(COND_DILUTION)
    if failed:
        return EntryCeiling(value=None, failed_conditions=tuple(failed))

    decay_weight = ((n - 1.0) * sig_f + 1.0 - eps * n) / (
        (sig_f - 1.0) * (sig_e - 1.0) - eps * n
    )
    slow_weight = (
        sig_e
        * sig_f
        * (spread + (2.0 * n - 1.0) * sig_f + sig_e)
        / ((2.0 * sig_e * sig_f - (sig_e + sig_f) + spread) * spread)
    )
    # (σF+σE−spread) cancels catastrophically as ε·N → 1 (spread → σF+σE);
    # multiply through by the conjugate: (σF+σE)² − spread² = 4σEσF(1−εN).
    prefactor = (sig_f + sig_e + spread) / (
        2.0 * p.female_death_rate * sig_f * (1.0 - eps * n)
    )
    value = prefactor * math.log((n - 1.0) / psi * (decay_weight + slow_weight))
    return EntryCeiling(value=value, failed_conditions=())


# ══════════════════════════════════════════════════════════════════════
# Audit decomposition of the ceiling
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class AnalyticBoundContext:
    """Every intermediate of the ceiling derivation, exposed for audit.

    The comparison system is linear in (eggs, females) with the male
    compartment slaved to it; its two decay modes ("slow" = dominant,
    least negative exponent; "fast" = subdominant) and the pure
    male-death mode carry explicit weights determined by the
    persistence-state initial data.

    Attributes:
        offspring_number: Basic offspring number.
        allee_ratio: Allee/capacity ratio.
        growth_peak: Net-reproduction peak location (capacity-scaled).
        growth_peak_offset: ``1 + allee_ratio·(1 − growth_peak)``
            combination entering the floor formula.
        rate_gap_sign: Sign of (egg loss rate − female death rate).
        male_to_egg_loss: Male death rate over egg loss rate.
        male_to_female_loss: Male death rate over female death rate.
        fertile_share: Fraction of encounters still fertile at the
            diluted persistence state, in (0, 1).
        coupling_factor: Mode-coupling factor ≥ 1 (infinite in the
            degenerate equal-rates case; the bound formulas avoid it).
        decay_slow: Dominant (least negative) mode exponent, per day.
        decay_fast: Subdominant mode exponent, per day.
        mode_slope_slow: Female-per-egg slope of the dominant mode.
        mode_slope_fast: Female-per-egg slope of the subdominant mode.
        egg_weight_slow: Egg-compartment weight on the dominant mode.
        egg_weight_fast: Egg-compartment weight on the subdominant mode.
        female_weight_slow: Female-compartment weight on the dominant
            mode.
        female_weight_fast: Female-compartment weight on the
            subdominant mode.
        male_weight_decay: Male-trajectory weight on the pure
            male-death mode (dimensionless normalization).
        male_weight_slow: Male-trajectory weight on the dominant mode.
        male_weight_fast: Male-trajectory weight on the subdominant
            mode.
        male_death_rate: Raw male death rate (closes the rate algebra
            for the component formulas).
        female_death_rate: Raw female death rate.
    """

    offspring_number: float
    allee_ratio: float
    growth_peak: float
    growth_peak_offset: float
    rate_gap_sign: float
    male_to_egg_loss: float
    male_to_female_loss: float
    fertile_share: float
    coupling_factor: float
    decay_slow: float
    decay_fast: float
    mode_slope_slow: float
    mode_slope_fast: float
    egg_weight_slow: float
    egg_weight_fast: float
    female_weight_slow: float
    female_weight_fast: float
    male_weight_decay: float
    male_weight_slow: float
    male_weight_fast: float
    male_death_rate: float
    female_death_rate: float


def bound_context(p: ModelParams, level: float) -> AnalyticBoundContext:
    """Assemble the full audit context of the ceiling derivation.

    All quantities are evaluated in numerically stable combinations;
    only the raw coupling factor can be infinite (degenerate equal
    egg-loss/female-death rates), and no downstream formula uses it
    directly.

    Args:
        p: Model rates.
        level: Constant released-male population.

    Returns:
        The :class:`AnalyticBoundContext`.
    """
    agg = aggregates(p)
    n, psi = agg.offspring_number, agg.allee_ratio
    z = growth_peak_location(psi)
    eps = _fertile_share(p, level)
    loss_e = p.egg_maturation_rate + p.egg_death_rate
    mu_f = p.female_death_rate
    mu_m = p.male_death_rate
    gap = loss_e - mu_f
    disc = math.sqrt(gap * gap + 4.0 * p.egg_lay_rate * p.female_fraction
                     * p.egg_maturation_rate * eps)
    sig_e = mu_m / loss_e
    sig_f = mu_m / mu_f
    k = p.capacity
    b = p.egg_lay_rate
    top = 1.0 - 1.0 / n

    # disc → loss_e+μF as ε·n → 1, so the slow root cancels catastrophically
    # in the textbook form 0.5·(−(loss_e+μF)+disc); use the conjugate form
    # via (loss_e+μF)² − disc² = 4·loss_e·μF·(1−εn) instead.
    kappa_slow = -2.0 * loss_e * mu_f * (1.0 - eps * n) / (loss_e + mu_f + disc)
    kappa_fast = 0.5 * (-(loss_e + mu_f) - disc)
    slope_slow = (gap + disc) / (2.0 * b)
    slope_fast = (gap - disc) / (2.0 * b)

    # Mode weights from the persistence-state ceiling as initial data.
    heavy = (2.0 * n - 1.0) * loss_e + mu_f
    egg_slow = 0.5 * k * top * (1.0 + heavy / disc)
    egg_fast = 0.5 * k * top * (1.0 - heavy / disc)
    female_slow = 0.25 * (k / b) * top * ((gap + heavy) + (disc + gap * heavy / disc))
    female_fast = 0.25 * (k / b) * top * ((gap + heavy) - (disc + gap * heavy / disc))

    margin = (sig_f - 1.0) * (sig_e - 1.0) - eps * n
    male_decay = ((n - 1.0) * sig_f + 1.0 - eps * n) / margin if margin != 0.0 else math.inf
    ratio = heavy / disc
    denom_slow = mu_m + kappa_slow
    denom_fast = mu_m + kappa_fast
    male_slow = (
        mu_m / denom_slow * 0.5 * (1.0 + ratio) if denom_slow != 0.0 else math.inf
    )
    male_fast = (
        mu_m / denom_fast * 0.5 * (1.0 - ratio) if denom_fast != 0.0 else math.inf
    )

    return AnalyticBoundContext(
        offspring_number=n,
        allee_ratio=psi,
        growth_peak=z,
        growth_peak_offset=1.0 + psi - psi * z,
        rate_gap_sign=math.copysign(1.0, gap) if gap != 0.0 else 0.0,
        male_to_egg_loss=sig_e,
        male_to_female_loss=sig_f,
        fertile_share=eps,
        coupling_factor=disc / abs(gap) if gap != 0.0 else math.inf,
        decay_slow=kappa_slow,
        decay_fast=kappa_fast,
        mode_slope_slow=slope_slow,
        mode_slope_fast=slope_fast,
        egg_weight_slow=egg_slow,
        egg_weight_fast=egg_fast,
        female_weight_slow=female_slow,
        female_weight_fast=female_fast,
        male_weight_decay=male_decay,
        male_weight_slow=male_slow,
        male_weight_fast=male_fast,
        male_death_rate=mu_m,
        female_death_rate=mu_f,
    )


def bound_components(
    ctx: AnalyticBoundContext,
) -> tuple[float, float, float]:
    """Per-compartment exit times whose maximum bounds the entrance time.

    Args:
        ctx: Audit context from :func:`bound_context`.

    Returns:
        Times in days ``(egg_time, female_time, male_time)`` at which
        each comparison compartment is certified below its target.

    Raises:
        BoundNotApplicableError: If a validity condition fails, or the
            male-mode case split lands in its excluded middle.
    """
    n, psi = ctx.offspring_number, ctx.allee_ratio
    sig_e, sig_f = ctx.male_to_egg_loss, ctx.male_to_female_loss
    eps = ctx.fertile_share
    mu_m = ctx.male_death_rate
    disc = ctx.decay_slow - ctx.decay_fast
    loss_e = mu_m / sig_e
    mu_f = ctx.female_death_rate
    heavy = (2.0 * n - 1.0) * loss_e + mu_f

    failed = []
    if not (sig_e > 1.0 and sig_f > 1.0):
        failed.append(COND_DECAY_DOMINANCE)
    if not (disc < heavy):
        # Subdominant egg weight must be negative for the single-mode
        # envelope.
        failed.append(COND_MODE_WEIGHT_SIGN)
    if not ((sig_f - 1.0) * (sig_e - 1.0) > eps * n):
        failed.append(COND_MARGIN_POSITIVITY)
    if not (eps * n < 1.0):
        failed.append(COND_DILUTION)
    small_case = mu_m + ctx.decay_slow < 0.0
    large_case = mu_m + ctx.decay_fast > 0.0
    if not failed and not (small_case or large_case):
        failed.append(COND_DECAY_CASE_GAP)
    if failed:
        raise BoundNotApplicableError(tuple(failed))

    slow_scale = -1.0 / ctx.decay_slow
    egg_time = slow_scale * math.log(
        (n - 1.0) / (2.0 * psi) * (1.0 + heavy / disc)
    )
    female_time = slow_scale * math.log(n * (n - 1.0) / psi)
    if small_case:
        male_time = math.log(
            (n - 1.0) * (ctx.male_weight_decay + ctx.male_weight_fast) / psi
        ) / mu_m
    else:
        male_time = slow_scale * math.log(
            (n - 1.0) * (ctx.male_weight_decay + ctx.male_weight_slow) / psi
        )
    return egg_time, female_time, male_time


# ══════════════════════════════════════════════════════════════════════
# Entry-step refinement machinery
# ══════════════════════════════════════════════════════════════════════


class _Replayer:
    """Deterministic replay of one release trajectory, with checkpoints.

    The refinement bisection probes the exact iterate at many step
    indices of the same trajectory; replaying each probe from scratch
    would be quadratic.  States at a fixed stride are therefore
    memoized, and a replay resumes from the nearest checkpoint at or
    below the target index.  ``state_at(n)`` reproduces exactly the
    iterate that the forward entrance loop samples at step ``n``: any
    pulse due at ``n`` itself has not yet been applied.
    """

    def __init__(
        self,
        x0: np.ndarray,
        rate,
        pulse_amount: float,
        pulse_period: int,
        pulse_count: int,
        scheme: NsfdScheme,
        pv: np.ndarray,
        mi_dynamic: bool,
        stride: int = 256,
    ):
        self._rate = rate
        self._pulse_amount = float(pulse_amount)
        self._pulse_period = int(pulse_period)
        self._pulse_count = int(pulse_count)
        self._w = scheme.step_weight
        self._dt = scheme.dt
        self._pv = pv
        self._mi_dynamic = bool(mi_dynamic)
        self._stride = int(stride)
        self._checkpoints: dict[int, np.ndarray] = {
            0: np.asarray(x0, dtype=np.float64).copy()
        }

    def state_at(self, n: int) -> np.ndarray:
        """The packed 5-state sampled at step index ``n``."""
        base = max(k for k in self._checkpoints if k <= n)
        buf = self._checkpoints[base].copy()
        k = base
        while k < n:
            nxt = min(n, (k // self._stride + 1) * self._stride)
            self._advance(buf, k, nxt)
            k = nxt
            if k % self._stride == 0 and k not in self._checkpoints:
                self._checkpoints[k] = buf.copy()
        return buf

    def _advance(self, buf: np.ndarray, start: int, stop: int) -> None:
        """Step ``buf`` from sample index ``start`` to ``stop`` in place."""
        if callable(self._rate):
            for j in range(start, stop):
                self._pulse(buf, j)
                _backend.run_steps(
                    buf, 1, self._rate(j * self._dt), self._w, self._pv,
                    self._mi_dynamic,
                )
        elif self._pulse_amount > 0.0 and self._pulse_period > 0:
            j = start
            while j < stop:
                self._pulse(buf, j)
                if j // self._pulse_period >= self._pulse_count:
                    nxt = stop
                else:
                    nxt = min(
                        stop, (j // self._pulse_period + 1) * self._pulse_period
                    )
                _backend.run_steps(
                    buf, nxt - j, self._rate, self._w, self._pv,
                    self._mi_dynamic,
                )
                j = nxt
        else:
            _backend.run_steps(
                buf, stop - start, self._rate, self._w, self._pv,
                self._mi_dynamic,
            )

    def _pulse(self, buf: np.ndarray, j: int) -> None:
        if (
            self._pulse_amount > 0.0
            and self._pulse_period > 0
            and j % self._pulse_period == 0
            and j // self._pulse_period < self._pulse_count
        ):
            buf[2] += self._pulse_amount


def _refine_entry(
    replayer: _Replayer,
    query_step: int,
    p: ModelParams,
    scheme: NsfdScheme,
    pulse_period: int,
    mi_dynamic: bool,
) -> tuple[int, np.ndarray]:
    """First step whose release-free fate is certified extinction.

    The dominance query supplies ``query_step`` as a stopping bound
    (−1 when it never fired within the budget).  Each probe replays the
    trajectory to one step index and classifies the wild projection's
    fate under the release-free flow against the threshold steady
    state; bisection then locates the first certified-extinct index.
    Because pulsed and inflow-driven pressure makes the sequence of
    fates along the trajectory non-monotone near the boundary, a
    bounded backward scan absorbs crossings earlier than the bisected
    one.

    Args:
        replayer: Checkpointed replayer primed with the initial state.
        query_step: Step at which the dominance query fired, or −1.
        p: Model rates.
        scheme: Scheme used by the forward entrance run.
        pulse_period: Pulse period in steps (0 when unpulsed).
        mi_dynamic: Whether the released-male pool evolves.

    Returns:
        ``(step, state)`` — the refined entry step and the packed
        5-state sampled there.

    Raises:
        NeverEnteredError: If no iterate within the step budget is
            certified extinction-bound.
    """
    reference = _threshold_reference(p, 0.0)
    free_scheme = nsfd_scheme(
        p, dt=scheme.dt, max_steps=scheme.max_steps,
        dynamic_release_pool=False,
    )
    memo: dict[int, bool] = {}

    def extinct(n: int) -> bool:
        if n not in memo:
            if reference is None:
                memo[n] = True
            else:
                triple = replayer.state_at(n)[[0, 1, 3]]
                verdict = fate(
                    triple, p, 0.0, free_scheme, reference=reference
                )
                memo[n] = verdict.kind is FateKind.EXTINCTION
        return memo[n]

    if extinct(0):
        return 0, replayer.state_at(0)
    max_steps = scheme.max_steps
    hi = query_step if query_step >= 0 else max_steps
    # The query certificate (or the budget endpoint) should itself be
    # extinction-fated; walk forward defensively when classification
    # cannot confirm it within its own budget.
    walk = pulse_period if pulse_period > 0 else 64
    while not extinct(hi):
        if hi >= max_steps:
            raise NeverEnteredError(max_steps)
        hi = min(max_steps, hi + walk)
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if extinct(mid):
            hi = mid
        else:
            lo = mid
    if pulse_period > 0:
        window = min(2 * pulse_period, 400)
    elif mi_dynamic:
        window = 64
    else:
        window = 0
    best = hi
    for j in range(hi - 1, max(0, hi - window) - 1, -1):
        if extinct(j):
            best = j
    return best, replayer.state_at(best)


# ══════════════════════════════════════════════════════════════════════
# Simulated entrance times
# ══════════════════════════════════════════════════════════════════════


def entry_time_simulated(
    p: ModelParams,
    level: float,
    cloud: SeparatrixCloud,
    scheme: NsfdScheme | None = None,
) -> float:
    """Entrance time at a constant frozen released level, by simulation.

    Starts from the release-free persistence steady state, holds the
    released-male pool at ``level``, and reports the first sample time
    (step resolution) at which the state's release-free fate is
    certified extinction — i.e. true entry into the release-free
    basin.  The cloud's dominance query supplies the stopping bound;
    the crossing step is then refined by bisected replays.

    Args:
        p: Model rates.
        level: Frozen released-male population.
        cloud: Separatrix cloud built for this parameter set at level 0.
        scheme: Scheme configuration; defaults to step 0.1 with the
            released-male pool held frozen.

    Returns:
        The entrance time in days.

    Raises:
        InvalidParameterError: If the cloud was built at a nonzero
            level.
        NeverEnteredError: If no iterate within the budget is certified
            extinction-bound.
    """
    if cloud.level != 0.0:
        raise InvalidParameterError(
            f"cloud was built at level {cloud.level!r}; the entrance time "
            "is defined against the release-free basin"
        )
    if scheme is None:
        scheme = nsfd_scheme(p, dynamic_release_pool=False)
    wild = steady_states(p, 0.0).wild
    if wild is None:
        raise NoPositiveEquilibriumError(
            "no persistence steady state: nothing to suppress"
        )
    pv = pack_params(p)
    x0 = np.array([wild.eggs, wild.males, level, wild.females, 0.0])
    buf = x0.copy()
    n_q = _backend.entry_steps(
        buf,
        scheme.step_weight,
        pv,
        False,
        0.0,
        0.0,
        0,
        0,
        scheme.max_steps,
        cloud.points,
        cloud.children,
        cloud.root,
    )
    replayer = _Replayer(x0, 0.0, 0.0, 0, 0, scheme, pv, False)
    step, _ = _refine_entry(
        replayer, n_q, p, scheme, pulse_period=0, mi_dynamic=False
    )
    return step * scheme.dt


@dataclass(frozen=True)
class EntranceReport:
    """Entrance time and effort accounting for one release program.

    Attributes:
        entry_time: First sample time inside the certified extinction
            set, in days.
        releases_made: Completed release periods by the reporting
            convention ``floor(entry_time/period)`` (0 for continuous
            schedules).
        effort_ratio: Total released individuals credited by that
            convention, relative to the persistence-state male
            population.
        female_ratio: Total female population (fertilized plus
            sterilized) at the entrance time relative to its
            pre-release equilibrium value; NaN when the sterilized
            diagnostic is disabled.
    """

    entry_time: float
    releases_made: int
    effort_ratio: float
    female_ratio: float


def entrance_time_controlled(
    schedule: ReleaseSchedule,
    p: ModelParams,
    cloud: SeparatrixCloud,
    with_diagnostic: bool = True,
    scheme: NsfdScheme | None = None,
) -> EntranceReport:
    """Entrance time under a live release schedule, with effort accounting.

    The released-male pool evolves dynamically (decay plus the
    schedule's inflow and pulses) from the schedule's initial level;
    the wild compartments start at the release-free persistence state,
    with the sterilized-female diagnostic at its matching equilibrium.
    Entry is the first sample whose release-free fate is certified
    extinction, with the cloud query as the stopping bound and the
    crossing refined by bisected replays; the female ratio is evaluated
    at that refined sample.

    Args:
        schedule: Release schedule (constant, periodic, or pulsed).
        p: Model rates.
        cloud: Separatrix cloud built for this parameter set at level 0.
        with_diagnostic: Track the sterilized-female compartment and
            report the final female ratio.
        scheme: Scheme configuration; defaults to step 0.1 with the
            released-male pool integrated.

    Returns:
        The :class:`EntranceReport`.

    Raises:
        NeverEnteredError: If no iterate within the budget is certified
            extinction-bound.
    """
    if cloud.level != 0.0:
        raise InvalidParameterError(
            f"cloud was built at level {cloud.level!r}; the entrance time "
            "is defined against the release-free basin"
        )
    if scheme is None:
        scheme = nsfd_scheme(p)
    wild = steady_states(p, 0.0).wild
    if wild is None:
        raise NoPositiveEquilibriumError(
            "no persistence steady state: nothing to suppress"
        )
    sterilized0 = (
        p.female_fraction
        * p.egg_maturation_rate
        * wild.eggs
        / p.female_death_rate
        * math.exp(-p.mate_encounter_rate * wild.males)
        if with_diagnostic
        else 0.0
    )
    buf = np.array(
        [wild.eggs, wild.males, schedule.initial_level, wild.females, sterilized0]
    )
    rate, pulse_amount, pulse_period, pulse_count = _release_plan(schedule, scheme)
    pv = pack_params(p)
    w = scheme.step_weight
    x0 = buf.copy()
    if callable(rate):
        n = -1
        step = 0
        while step <= scheme.max_steps:
            if _backend.query_below(
                cloud.points, cloud.children, cloud.root, buf[0], buf[1], buf[3]
            ):
                n = step
                break
            _backend.run_steps(buf, 1, rate(step * scheme.dt), w, pv, True)
            step += 1
    else:
        n = _backend.entry_steps(
            buf,
            w,
            pv,
            True,
            rate,
            pulse_amount,
            pulse_period,
            pulse_count,
            scheme.max_steps,
            cloud.points,
            cloud.children,
            cloud.root,
        )
    replayer = _Replayer(
        x0, rate, pulse_amount, pulse_period, pulse_count, scheme, pv, True
    )
    step, entry_state = _refine_entry(
        replayer, n, p, scheme, pulse_period=pulse_period, mi_dynamic=True
    )
    entry_time = step * scheme.dt

    period = getattr(schedule, "period", 0.0)
    if period and period > 0.0:
        releases_made = int(math.floor(entry_time / period))
    else:
        releases_made = 0
    released_total = _released_total(schedule, entry_time, releases_made)
    effort_ratio = released_total / wild.males
    if with_diagnostic:
        female_ratio = (entry_state[3] + entry_state[4]) / (
            wild.females + sterilized0
        )
    else:
        female_ratio = math.nan
    return EntranceReport(
        entry_time=entry_time,
        releases_made=releases_made,
        effort_ratio=effort_ratio,
        female_ratio=female_ratio,
    )


def _released_total(
    schedule: ReleaseSchedule, entry_time: float, releases_made: int
) -> float:
    """Released individuals credited by the reporting convention."""
    from sitdyn.releases import ConstantRelease, ImpulsiveRelease, PeriodicRelease

    if isinstance(schedule, ImpulsiveRelease):
        return releases_made * schedule.amount
    if isinstance(schedule, ConstantRelease):
        return schedule.rate * entry_time
    if isinstance(schedule, PeriodicRelease):
        # One period's worth of profile, integrated coarsely at the
        # reporting resolution.
        steps = 1000
        ts = np.linspace(0.0, schedule.period, steps + 1)
        vals = np.array([schedule.profile(t) for t in ts])
        per_period = float(0.5 * np.sum((vals[1:] + vals[:-1]) * np.diff(ts)))
        return releases_made * per_period
    return 0.0


# ══════════════════════════════════════════════════════════════════════
# Two-step refinement feasibility (predicate only)
# ══════════════════════════════════════════════════════════════════════


def two_step_feasible(p: ModelParams, level: float) -> bool:
    """Whether the two-stage comparison argument could close at this level.

    The one-step ceiling needs the released level to exceed
    ``offspring_number − 1`` times the persistence males; a second
    comparison stage relaxes that.  This predicate evaluates the relaxed
    condition's truth value only — the refined bound itself is
    deliberately not computed.

    Args:
        p: Model rates.
        level: Constant released-male population.

    Returns:
        True iff the relaxed feasibility condition holds.
    """
    agg = aggregates(p)
    n = agg.offspring_number
    male_ceiling = (1.0 - 1.0 / n) / agg.male_capacity_inv
    rho = level / male_ceiling
    phi = p.male_death_rate / (
        (1.0 - p.female_fraction) * p.egg_maturation_rate
    )
    return rho * ((rho + 1.0) * phi + n - 1.0) > n - 1.0
