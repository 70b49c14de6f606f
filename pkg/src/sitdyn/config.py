"""Configuration files: flat INI sections mapped onto model objects.

The schema has five sections, all optional except that a model must be
specifiable either directly or through biological measurements:

``[model]``
    Rates per day, keyed by their conventional ascii symbols:
    ``b`` (viable eggs per female per day), ``K`` (egg capacity),
    ``nu_E`` (effective egg maturation), ``nu_E_tilde`` (raw hatching,
    staged model), ``mu_E``, ``mu_L``, ``nu_L``, ``mu_M``, ``mu_F``,
    ``mu_i`` (death rates), ``r`` (female fraction), ``beta``
    (mate-encounter rate per individual), ``gamma_i`` (released-male
    competitiveness), and ``M_target`` (male steady-state size the
    capacity is calibrated to, replacing ``K``).
``[bio]``
    Field measurements converted into rates when ``[model]`` does not
    set ``nu_E`` directly: ``r_viable``, ``N_eggs``, ``tau_gono``,
    ``tau_E``, ``tau_L``, ``r_L``, ``r``, ``tau_M``, ``tau_F``,
    ``gamma_i`` (durations in days, fractions in (0, 1]).
``[numerics]``
    ``dt`` (step, days), ``max_steps`` (budget), ``mesh_n`` (separatrix
    mesh refinement), ``eps`` (ray-bisection tolerance).
``[schedule]``
    ``kind`` (constant | periodic | impulsive), ``u0`` (rate,
    individuals/day), ``T`` (period, days), ``Lambda`` (pulse size,
    individuals), ``N_r`` (pulse count, or ``inf``), ``Mi0`` (initial
    released-male level).
``[sweep]``
    ``table`` (sweep identifier), ``nu_E``/``beta``/``phi``/``T``/``p``
    (comma-separated value lists), ``out`` (output file name).
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from sitdyn.dynamics import DEFAULT_MAX_STEPS
from sitdyn.params import (
    BioParams,
    ModelParams,
    calibrate_capacity,
    derive_model_params,
)
from sitdyn.releases import (
    ConstantRelease,
    ImpulsiveRelease,
    PeriodicRelease,
    ReleaseSchedule,
)

__all__ = [
    "ConfigError",
    "NumericsConfig",
    "ScheduleConfig",
    "SweepSpec",
    "RunConfig",
    "SWEEP_TABLE_IDS",
    "load_config",
    "resolve_config_path",
    "list_presets",
]

SWEEP_TABLE_IDS = (
    "effort_ratio",
    "tau_lower",
    "tau_upper",
    "tau_constant",
    "periodic_effort",
    "periodic_time",
    "case_study_time",
    "case_study_female_ratio",
)


class ConfigError(ValueError):
    """A configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class NumericsConfig:
    """Numerical settings shared by simulations and cloud builds.

    Attributes:
        dt: Scheme step size in days.
        max_steps: Step budget for open-ended runs.
        mesh_n: Separatrix simplex-mesh refinement.
        eps: Relative ray-bisection tolerance.
    """

    dt: float = 0.1
    max_steps: int = DEFAULT_MAX_STEPS
    mesh_n: int = 40
    eps: float = 1e-2


@dataclass(frozen=True)
class ScheduleConfig:
    """Declarative release schedule from a configuration file.

    Attributes:
        kind: One of ``constant``, ``periodic``, ``impulsive``.
        rate: Release rate in individuals/day (constant and periodic).
        period: Days between pulses / profile period.
        amount: Individuals per pulse (impulsive).
        count: Number of pulses, or None for unlimited.
        initial_level: Released-male population already present at
            time 0.
    """

    kind: str
    rate: float = 0.0
    period: float = 0.0
    amount: float = 0.0
    count: int | None = None
    initial_level: float = 0.0

    def build(self) -> ReleaseSchedule:
        """Instantiate the concrete schedule object."""
        if self.kind == "constant":
            return ConstantRelease(rate=self.rate, initial_level=self.initial_level)
        if self.kind == "periodic":
            rate = self.rate

            def profile(_t: float, _rate=rate) -> float:
                return _rate

            return PeriodicRelease(
                period=self.period,
                profile=profile,
                count=self.count,
                initial_level=self.initial_level,
            )
        if self.kind == "impulsive":
            return ImpulsiveRelease(
                amount=self.amount,
                period=self.period,
                count=self.count,
                initial_level=self.initial_level,
            )
        raise ConfigError(f"unknown schedule kind {self.kind!r}")


@dataclass(frozen=True)
class SweepSpec:
    """One sweep-table request.

    Attributes:
        table_id: Which table to produce (see ``SWEEP_TABLE_IDS``).
        nu_E_values: Egg-maturation-rate grid (table rows).
        beta_values: Mate-encounter-rate grid (table columns).
        phi_values: Release-level multiples of the critical level.
        period_values: Pulse periods in days.
        pulse_multiples: Pulse sizes as multiples of the persistence
            male population (case study).
        out: Output CSV file name.
    """

    table_id: str
    nu_E_values: tuple[float, ...]
    beta_values: tuple[float, ...]
    phi_values: tuple[float, ...] = ()
    period_values: tuple[float, ...] = ()
    pulse_multiples: tuple[float, ...] = ()
    out: str = ""

    def __post_init__(self) -> None:
        if self.table_id not in SWEEP_TABLE_IDS:
            raise ConfigError(
                f"unknown sweep table {self.table_id!r}; expected one of "
                + ", ".join(SWEEP_TABLE_IDS)
            )
        if not self.nu_E_values or not self.beta_values:
            raise ConfigError("sweep grids nu_E and beta must be non-empty")


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, parsed and validated.

    Attributes:
        model_template: Model rates before per-cell overrides; its
            capacity is a placeholder when ``m_target`` drives
            calibration.
        m_target: Male steady-state size the capacity is calibrated
            to, or None when the capacity is given directly.
        numerics: Numerical settings.
        schedule: Release schedule, when configured.
        sweep: Sweep request, when configured.
    """

    model_template: ModelParams
    m_target: float | None
    numerics: NumericsConfig
    schedule: ScheduleConfig | None = None
    sweep: SweepSpec | None = None

    def model_for(
        self, nu_E: float | None = None, beta: float | None = None
    ) -> ModelParams:
        """Model rates for one grid cell, with capacity calibration.

        Args:
            nu_E: Egg-maturation-rate override.
            beta: Mate-encounter-rate override.

        Returns:
            The cell's :class:`ModelParams`, capacity calibrated to
            ``m_target`` when configured.
        """
        overrides = {}
        if nu_E is not None:
            overrides["egg_maturation_rate"] = float(nu_E)
        if beta is not None:
            overrides["mate_encounter_rate"] = float(beta)
        p = (
            dataclasses.replace(self.model_template, **overrides)
            if overrides
            else self.model_template
        )
        if self.m_target is not None:
            p = p.with_capacity(calibrate_capacity(p, self.m_target))
        return p


# ══════════════════════════════════════════════════════════════════════
# Parsing helpers
# ══════════════════════════════════════════════════════════════════════


def _get_float(section: configparser.SectionProxy, key: str) -> float:
    try:
        return float(section[key])
    except KeyError:
        raise ConfigError(f"missing key {key!r} in section [{section.name}]")
    except ValueError:
        raise ConfigError(
            f"key {key!r} in section [{section.name}] is not a number: "
            f"{section[key]!r}"
        )


def _get_float_opt(
    section: configparser.SectionProxy, key: str, default: float
) -> float:
    if key not in section:
        return default
    return _get_float(section, key)


def _get_int_opt(section: configparser.SectionProxy, key: str, default: int) -> int:
    if key not in section:
        return default
    try:
        return int(section[key])
    except ValueError:
        raise ConfigError(
            f"key {key!r} in section [{section.name}] is not an integer: "
            f"{section[key]!r}"
        )


def _get_list(section: configparser.SectionProxy, key: str) -> tuple[float, ...]:
    if key not in section:
        return ()
    raw = section[key].replace(",", " ").split()
    try:
        return tuple(float(tok) for tok in raw)
    except ValueError:
        raise ConfigError(
            f"key {key!r} in section [{section.name}] is not a number list: "
            f"{section[key]!r}"
        )


def _parse_model(parser: configparser.ConfigParser) -> tuple[ModelParams, float | None]:
    """Build the model template from [model] and/or [bio]."""
    has_model = parser.has_section("model")
    model = parser["model"] if has_model else None
    m_target = (
        _get_float(model, "M_target")
        if has_model and "M_target" in model
        else None
    )

    if has_model and "nu_E" in model:
        capacity = _get_float_opt(model, "K", math.nan)
        if math.isnan(capacity):
            if m_target is None:
                raise ConfigError(
                    "section [model] must set either K or M_target"
                )
            capacity = 1.0  # placeholder; calibrated per cell
        kwargs = dict(
            egg_lay_rate=_get_float(model, "b"),
            capacity=capacity,
            egg_maturation_rate=_get_float(model, "nu_E"),
            egg_death_rate=_get_float(model, "mu_E"),
            male_death_rate=_get_float(model, "mu_M"),
            female_death_rate=_get_float(model, "mu_F"),
            sterile_death_rate=_get_float(model, "mu_i"),
            female_fraction=_get_float(model, "r"),
            mate_encounter_rate=_get_float(model, "beta"),
            sterile_competitiveness=_get_float_opt(model, "gamma_i", 1.0),
        )
        if "nu_E_tilde" in model or "nu_L" in model or "mu_L" in model:
            kwargs["egg_hatch_rate"] = _get_float(model, "nu_E_tilde")
            kwargs["larval_maturation_rate"] = _get_float(model, "nu_L")
            kwargs["larval_death_rate"] = _get_float(model, "mu_L")
        try:
            return ModelParams(**kwargs), m_target
        except ValueError as exc:
            raise ConfigError(f"invalid [model] section: {exc}") from exc

    if parser.has_section("bio"):
        bio_sec = parser["bio"]
        try:
            bio = BioParams(
                viable_egg_fraction=_get_float(bio_sec, "r_viable"),
                eggs_per_batch=_get_float(bio_sec, "N_eggs"),
                batch_interval_days=_get_float(bio_sec, "tau_gono"),
                egg_halflife_days=_get_float(bio_sec, "tau_E"),
                larval_stage_days=_get_float(bio_sec, "tau_L"),
                larval_survival=_get_float(bio_sec, "r_L"),
                female_fraction=_get_float(bio_sec, "r"),
                male_halflife_days=_get_float(bio_sec, "tau_M"),
                female_halflife_days=_get_float(bio_sec, "tau_F"),
                sterile_competitiveness=_get_float_opt(bio_sec, "gamma_i", 1.0),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid [bio] section: {exc}") from exc
        if not has_model:
            raise ConfigError(
                "a [model] section with beta, mu_i, nu_E_tilde and K or "
                "M_target is required alongside [bio]"
            )
        capacity = _get_float_opt(model, "K", math.nan)
        if math.isnan(capacity):
            if m_target is None:
                raise ConfigError("section [model] must set either K or M_target")
            capacity = 1.0
        try:
            derived = derive_model_params(
                bio,
                egg_hatch_rate=_get_float(model, "nu_E_tilde"),
                mate_encounter_rate=_get_float(model, "beta"),
                capacity=capacity,
                sterile_death_rate=_get_float(model, "mu_i"),
            )
        except ValueError as exc:
            raise ConfigError(f"cannot derive model rates: {exc}") from exc
        return derived, m_target

    raise ConfigError(
        "configuration must contain a [model] section (with nu_E) or a "
        "[bio] section"
    )


def _parse_schedule(parser: configparser.ConfigParser) -> ScheduleConfig | None:
    if not parser.has_section("schedule"):
        return None
    sec = parser["schedule"]
    kind = sec.get("kind", "").strip().lower()
    if kind not in ("constant", "periodic", "impulsive"):
        raise ConfigError(
            f"schedule kind must be constant, periodic, or impulsive; "
            f"got {kind!r}"
        )
    count_raw = sec.get("N_r", "").strip().lower()
    if count_raw in ("", "inf", "none"):
        count = None
    else:
        try:
            count = int(count_raw)
        except ValueError:
            raise ConfigError(f"N_r must be an integer or 'inf', got {count_raw!r}")
    cfg = ScheduleConfig(
        kind=kind,
        rate=_get_float_opt(sec, "u0", 0.0),
        period=_get_float_opt(sec, "T", 0.0),
        amount=_get_float_opt(sec, "Lambda", 0.0),
        count=count,
        initial_level=_get_float_opt(sec, "Mi0", 0.0),
    )
    try:
        cfg.build()
    except ValueError as exc:
        raise ConfigError(f"invalid [schedule] section: {exc}") from exc
    return cfg


def _parse_sweep(parser: configparser.ConfigParser) -> SweepSpec | None:
    if not parser.has_section("sweep"):
        return None
    sec = parser["sweep"]
    table_id = sec.get("table", "").strip()
    if not table_id:
        raise ConfigError("section [sweep] must set 'table'")
    return SweepSpec(
        table_id=table_id,
        nu_E_values=_get_list(sec, "nu_E"),
        beta_values=_get_list(sec, "beta"),
        phi_values=_get_list(sec, "phi"),
        period_values=_get_list(sec, "T"),
        pulse_multiples=_get_list(sec, "p"),
        out=sec.get("out", "").strip(),
    )


def list_presets() -> tuple[str, ...]:
    """Names of the configuration presets shipped with the package."""
    package = resources.files("sitdyn") / "presets"
    return tuple(
        sorted(
            entry.name[: -len(".cfg")]
            for entry in package.iterdir()
            if entry.name.endswith(".cfg")
        )
    )


def resolve_config_path(name: str) -> Path:
    """Resolve a --config argument to a readable file path.

    A value naming an existing file wins; otherwise the packaged
    presets are searched (with or without the ``.cfg`` suffix).

    Args:
        name: File path or preset name.

    Returns:
        The resolved path.

    Raises:
        ConfigError: If neither a file nor a preset matches.
    """
    path = Path(name)
    if path.is_file():
        return path
    stem = name[: -len(".cfg")] if name.endswith(".cfg") else name
    candidate = resources.files("sitdyn") / "presets" / f"{stem}.cfg"
    try:
        if candidate.is_file():
            return Path(str(candidate))
    except (OSError, TypeError):  # non-filesystem resource loaders
        pass
    raise ConfigError(
        f"configuration {name!r} is neither a file nor a preset "
        f"(presets: {', '.join(list_presets())})"
    )


def load_config(path) -> RunConfig:
    """Parse and validate a configuration file.

    Args:
        path: File path or preset name.

    Returns:
        The :class:`RunConfig`.

    Raises:
        ConfigError: On missing files, unknown keys' values, or
            inconsistent sections.
    """
    resolved = resolve_config_path(str(path))
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(resolved, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {resolved}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration {resolved}: {exc}") from exc

    model_template, m_target = _parse_model(parser)
    if parser.has_section("numerics"):
        sec = parser["numerics"]
        numerics = NumericsConfig(
            dt=_get_float_opt(sec, "dt", 0.1),
            max_steps=_get_int_opt(sec, "max_steps", DEFAULT_MAX_STEPS),
            mesh_n=_get_int_opt(sec, "mesh_n", 40),
            eps=_get_float_opt(sec, "eps", 1e-2),
        )
    else:
        numerics = NumericsConfig()
    return RunConfig(
        model_template=model_template,
        m_target=m_target,
        numerics=numerics,
        schedule=_parse_schedule(parser),
        sweep=_parse_sweep(parser),
    )
