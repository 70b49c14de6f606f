"""Population parameters, unit conversions, and aggregate indices.

This module holds every scalar quantity the rest of the toolkit consumes:

* :class:`BioParams` — life-table measurements as a field biologist would
  report them (clutch sizes, stage durations, survival fractions,
  half-lives in days).
* :class:`ModelParams` — per-day rates used by the dynamical systems,
  obtained from :class:`BioParams` through :func:`derive_model_params`
  or supplied directly.
* :class:`Aggregates` — the dimensionless indices (basic offspring
  number, inverse male capacity, mate-finding/capacity ratio) that
  control existence and stability of steady states.
* The componentwise partial order on population states used throughout
  the monotone-systems machinery (:func:`compare`, :func:`leq`,
  :func:`strictly_less`).

All rates are per day; all times are in days; all population sizes are
in individuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

__all__ = [
    "BioParams",
    "ModelParams",
    "Aggregates",
    "Order",
    "InvalidParameterError",
    "CalibrationInfeasibleError",
    "derive_model_params",
    "aggregates",
    "calibrate_capacity",
    "compare",
    "leq",
    "strictly_less",
]


# ══════════════════════════════════════════════════════════════════════
# Errors
# ══════════════════════════════════════════════════════════════════════


class InvalidParameterError(ValueError):
    """A parameter value violates its declared domain (sign or range)."""


class CalibrationInfeasibleError(ValueError):
    """No carrying capacity can realize the requested male population.

    Raised when the target male equilibrium cannot be a fixed point for
    any capacity, i.e. when mate finding at the target size is too weak
    for the population to replace itself.
    """


# ══════════════════════════════════════════════════════════════════════
# Parameter records
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class BioParams:
    """Raw life-table measurements for one mosquito population.

    Attributes:
        viable_egg_fraction: Fraction of laid eggs that are viable, in
            (0, 1].
        eggs_per_batch: Mean number of eggs laid per oviposition.
        batch_interval_days: Mean number of days between ovipositions
            (length of one feeding/laying cycle).
        egg_halflife_days: Half-life of an egg, in days.  Poorly known
            in the field; typical working interval 15–30 days.
        larval_stage_days: Mean duration of the larval stage, in days.
        larval_survival: Fraction of larvae surviving to emergence, in
            (0, 1].
        female_fraction: Fraction of emerging adults that are female,
            in (0, 1).
        male_halflife_days: Adult male half-life, in days.
        female_halflife_days: Adult female half-life, in days.
        sterile_competitiveness: Mating competitiveness of one released
            sterilizing male relative to one wild male (dimensionless,
            > 0; 1 means equally competitive).
    """

    viable_egg_fraction: float
    eggs_per_batch: float
    batch_interval_days: float
    egg_halflife_days: float
    larval_stage_days: float
    larval_survival: float
    female_fraction: float
    male_halflife_days: float
    female_halflife_days: float
    sterile_competitiveness: float = 1.0

    def __post_init__(self) -> None:
        for name in (
            "viable_egg_fraction",
            "eggs_per_batch",
            "batch_interval_days",
            "egg_halflife_days",
            "larval_stage_days",
            "larval_survival",
            "female_fraction",
            "male_halflife_days",
            "female_halflife_days",
            "sterile_competitiveness",
        ):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParameterError(
                    f"{name} must be finite and > 0, got {value!r}"
                )
        for name in ("viable_egg_fraction", "larval_survival"):
            if getattr(self, name) > 1.0:
                raise InvalidParameterError(
                    f"{name} is a fraction and must be ≤ 1, got {getattr(self, name)!r}"
                )
        if self.female_fraction >= 1.0:
            raise InvalidParameterError(
                f"female_fraction must be < 1, got {self.female_fraction!r}"
            )


@dataclass(frozen=True)
class ModelParams:
    """Per-day rates and scalar coefficients of the dynamical systems.

    The three optional larval-stage fields are only needed by the full
    five-compartment model (egg/larva/male/female/sterilized-female);
    the reduced egg/male/female model ignores them.

    Attributes:
        egg_lay_rate: Viable eggs laid per female per day.
        capacity: Egg carrying capacity of the environment
            (individuals).
        egg_maturation_rate: Effective per-day rate at which eggs become
            emerging adults in the reduced model (hatching discounted by
            larval survival).
        egg_death_rate: Per-day egg mortality rate.
        male_death_rate: Per-day adult male mortality rate.
        female_death_rate: Per-day adult female mortality rate.
        sterile_death_rate: Per-day mortality rate of released
            sterilizing males.
        female_fraction: Fraction of emerging adults that are female.
        mate_encounter_rate: Per-individual mate-finding coefficient:
            the probability a female finds a mate scales like
            ``1 − exp(−mate_encounter_rate · males)``.
        sterile_competitiveness: Mating competitiveness of one released
            male relative to one wild male.
        egg_hatch_rate: Per-day hatching rate of eggs into larvae (full
            model only).
        larval_maturation_rate: Per-day rate at which larvae emerge as
            adults (full model only).
        larval_death_rate: Per-day larval mortality rate (full model
            only).
    """

    egg_lay_rate: float
    capacity: float
    egg_maturation_rate: float
    egg_death_rate: float
    male_death_rate: float
    female_death_rate: float
    sterile_death_rate: float
    female_fraction: float
    mate_encounter_rate: float
    sterile_competitiveness: float = 1.0
    egg_hatch_rate: float | None = None
    larval_maturation_rate: float | None = None
    larval_death_rate: float | None = None

    def __post_init__(self) -> None:
        positives = (
            "egg_lay_rate",
            "capacity",
            "egg_maturation_rate",
            "male_death_rate",
            "female_death_rate",
            "sterile_death_rate",
            "mate_encounter_rate",
            "sterile_competitiveness",
        )
        for name in positives:
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParameterError(
                    f"{name} must be finite and > 0, got {value!r}"
                )
        if not math.isfinite(self.egg_death_rate) or self.egg_death_rate < 0.0:
            raise InvalidParameterError(
                f"egg_death_rate must be finite and ≥ 0, got {self.egg_death_rate!r}"
            )
        if not 0.0 < self.female_fraction < 1.0:
            raise InvalidParameterError(
                f"female_fraction must lie in (0, 1), got {self.female_fraction!r}"
            )
        larval = (
            self.egg_hatch_rate,
            self.larval_maturation_rate,
            self.larval_death_rate,
        )
        present = [v for v in larval if v is not None]
        if present and len(present) != 3:
            raise InvalidParameterError(
                "the three larval-stage rates (egg_hatch_rate, "
                "larval_maturation_rate, larval_death_rate) must be supplied "
                "together or not at all"
            )
        for value in present:
            if not math.isfinite(value) or value < 0.0:
                raise InvalidParameterError(
                    f"larval-stage rates must be finite and ≥ 0, got {value!r}"
                )

    @property
    def has_larval_stage(self) -> bool:
        """Whether the record carries the full-model larval rates."""
        return self.egg_hatch_rate is not None

    def with_capacity(self, capacity: float) -> "ModelParams":
        """Return a copy with a different carrying capacity."""
        return replace(self, capacity=capacity)


@dataclass(frozen=True)
class Aggregates:
    """Dimensionless indices summarizing one parameter set.

    Attributes:
        offspring_number: Basic offspring number — mean number of female
            offspring one female produces over her lifetime when mate
            finding is certain and the environment is empty.  Values
            above 1 are required for persistence.
        male_capacity_inv: Reciprocal of the male population scale: the
            male steady state times this number lies in (0, 1).  Units
            1/individual.
        allee_ratio: Ratio of ``male_capacity_inv`` to
            ``mate_encounter_rate``; measures how strongly mate scarcity
            (the Allee effect) bites at capacity-scale populations.
        allee_index: Combined index ``4·allee_ratio/offspring_number``
            controlling how close the population sits to losing its
            positive steady states.
    """

    offspring_number: float
    male_capacity_inv: float
    allee_ratio: float
    allee_index: float


# ══════════════════════════════════════════════════════════════════════
# Conversions
# ══════════════════════════════════════════════════════════════════════


def derive_model_params(
    bio: BioParams,
    *,
    egg_hatch_rate: float,
    mate_encounter_rate: float,
    capacity: float,
    sterile_death_rate: float,
) -> ModelParams:
    """Convert life-table measurements into per-day model rates.

    The conversions are the standard exponential-survival ones: a
    half-life of ``tau`` days becomes a death rate ``log(2)/tau``; a
    stage of mean duration ``tau`` days becomes a progression rate
    ``1/tau``; stage survival ``s`` over ``tau`` days becomes a death
    rate ``−log(s)/tau``.  The effective egg-to-adult rate discounts
    hatching by the fraction of larvae that survive to emergence.

    Args:
        bio: Life-table measurements.
        egg_hatch_rate: Per-day egg hatching rate.  Hard to measure in
            the field, hence a required explicit input.
        mate_encounter_rate: Per-individual mate-finding coefficient,
            likewise a required explicit input.
        capacity: Egg carrying capacity (individuals).
        sterile_death_rate: Per-day mortality of released males.

    Returns:
        A fully populated :class:`ModelParams`, including the larval
        rates needed by the full model.
    """
    larval_maturation = 1.0 / bio.larval_stage_days
    larval_death = -math.log(bio.larval_survival) / bio.larval_stage_days
    emergence_fraction = larval_maturation / (larval_maturation + larval_death)
    return ModelParams(
        egg_lay_rate=bio.viable_egg_fraction
        * bio.eggs_per_batch
        / bio.batch_interval_days,
        capacity=capacity,
        egg_maturation_rate=egg_hatch_rate * emergence_fraction,
        egg_death_rate=math.log(2.0) / bio.egg_halflife_days,
        male_death_rate=math.log(2.0) / bio.male_halflife_days,
        female_death_rate=math.log(2.0) / bio.female_halflife_days,
        sterile_death_rate=sterile_death_rate,
        female_fraction=bio.female_fraction,
        mate_encounter_rate=mate_encounter_rate,
        sterile_competitiveness=bio.sterile_competitiveness,
        egg_hatch_rate=egg_hatch_rate,
        larval_maturation_rate=larval_maturation,
        larval_death_rate=larval_death,
    )


def aggregates(p: ModelParams) -> Aggregates:
    """Compute the dimensionless indices for one parameter set.

    Args:
        p: Model rates.

    Returns:
        The :class:`Aggregates` record.
    """
    n = (
        p.egg_lay_rate
        * p.female_fraction
        * p.egg_maturation_rate
        / (p.female_death_rate * (p.egg_maturation_rate + p.egg_death_rate))
    )
    male_capacity_inv = p.male_death_rate / (
        (1.0 - p.female_fraction) * p.egg_maturation_rate * p.capacity
    )
    allee_ratio = male_capacity_inv / p.mate_encounter_rate
    return Aggregates(
        offspring_number=n,
        male_capacity_inv=male_capacity_inv,
        allee_ratio=allee_ratio,
        allee_index=4.0 * allee_ratio / n,
    )


def calibrate_capacity(p: ModelParams, target_males: float) -> float:
    """Carrying capacity that places a male steady state at a target size.

    Inverts the male fixed-point relation: choosing the returned
    capacity makes ``target_males`` an exact male steady state of the
    release-free reduced model (it may be either the stable upper state
    or the unstable threshold state, depending on parameters).

    Args:
        p: Model rates; the ``capacity`` field is ignored.
        target_males: Desired male steady-state size (individuals, > 0).

    Returns:
        The calibrated carrying capacity.

    Raises:
        CalibrationInfeasibleError: If no capacity can realize the
            target, i.e. the offspring number discounted by mate-finding
            success at the target size does not exceed 1.
    """
    if target_males <= 0.0:
        raise InvalidParameterError(
            f"target_males must be > 0, got {target_males!r}"
        )
    n = aggregates(p).offspring_number
    mating_success = -math.expm1(-p.mate_encounter_rate * target_males)
    discounted = n * mating_success
    if discounted <= 1.0:
        raise CalibrationInfeasibleError(
            "target male population is infeasible: offspring number "
            f"discounted by mate-finding success is {discounted:.6g} ≤ 1"
        )
    return (
        target_males
        * p.male_death_rate
        / (
            (1.0 - p.female_fraction)
            * p.egg_maturation_rate
            * (1.0 - 1.0 / discounted)
        )
    )


# ══════════════════════════════════════════════════════════════════════
# Componentwise partial order on population states
# ══════════════════════════════════════════════════════════════════════


class Order(Enum):
    """Outcome of a componentwise comparison of two population states.

    ``LESS_EQUAL`` is listed so the verdicts mirror the three order
    relations (≤, <, strictly-componentwise <) plus equality, but
    :func:`compare` always reports the strongest applicable relation,
    which is one of the other four: "≤ and equal" is ``EQUAL`` and
    "≤ and not equal" is already ``LESS``.
    """

    EQUAL = "equal"
    LESS_EQUAL = "less-equal"
    LESS = "less"
    STRICTLY_LESS = "strictly-less"
    INCOMPARABLE = "incomparable"


def compare(a: Sequence[float], b: Sequence[float]) -> Order:
    """Classify the componentwise relation of state ``a`` to state ``b``.

    The verdict is directional: it reports how ``a`` sits below ``b``.
    Any pair not satisfying ``a ≤ b`` componentwise — including pairs
    where ``b`` is below ``a`` — is reported ``INCOMPARABLE``; compare
    in the other direction to distinguish those cases.

    Args:
        a: First state (any sequence of numbers).
        b: Second state of the same length.

    Returns:
        The strongest of ``EQUAL``, ``STRICTLY_LESS`` (every component
        strictly smaller), ``LESS`` (componentwise ≤ with at least one
        equality and one strict inequality), or ``INCOMPARABLE``.

    Raises:
        ValueError: If the states have different lengths.
    """
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    all_le = True
    all_lt = True
    all_eq = True
    for x, y in zip(a, b):
        if x > y:
            all_le = False
            break
        if x == y:
            all_lt = False
        else:
            all_eq = False
    if not all_le:
        return Order.INCOMPARABLE
    if all_eq:
        return Order.EQUAL
    if all_lt:
        return Order.STRICTLY_LESS
    return Order.LESS


def leq(a: Sequence[float], b: Sequence[float]) -> bool:
    """Whether ``a ≤ b`` componentwise (equality allowed)."""
    return compare(a, b) in (Order.EQUAL, Order.LESS, Order.STRICTLY_LESS)


def strictly_less(a: Sequence[float], b: Sequence[float]) -> bool:
    """Whether every component of ``a`` is strictly below ``b``'s."""
    return compare(a, b) is Order.STRICTLY_LESS
