"""Reference tables swept over rate grids, written as deterministic CSV.

Every table varies the egg-maturation rate down the rows and the
mate-encounter rate across the columns; some add a leading column for a
release-level multiple or pulse-size multiple.  Cells that fall outside
a quantity's domain (no persistence state, inapplicable bound, entrance
never certified within budget) are rendered literally as ``N/A``.
Re-running a sweep with an identical configuration produces a
byte-identical file, regardless of the worker count.

Table identifiers:

``effort_ratio``
    Critical released-male level over the persistence male population.
``tau_lower``
    Release-free analytic floor on the basin-entrance time (days).
``tau_upper``
    Analytic ceiling on the entrance time at a released level of
    ``phi`` times the critical level.
``tau_constant``
    Simulated entrance time at that frozen level, paired with the
    cumulative release effort of sustaining it.
``periodic_effort`` / ``periodic_time``
    Extremes over a (period, effort-multiple) grid of pulsed
    programmes: cumulative effort (or entrance time) with the
    achieving period and the companion quantity in parentheses.
``case_study_time`` / ``case_study_female_ratio``
    Pulsed programme at a fixed period with pulses sized as multiples
    of the persistence male population: entrance time, or total female
    population at entrance relative to its pre-release value.
"""

from __future__ import annotations

import contextlib
import csv
import functools
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from sitdyn.config import ConfigError, RunConfig, SweepSpec
from sitdyn.dynamics import NsfdScheme, nsfd_scheme
from sitdyn.entrance import (
    BoundNotApplicableError,
    NeverEnteredError,
    entrance_time_controlled,
    entry_time_ceiling,
    entry_time_floor,
    entry_time_simulated,
)
from sitdyn.equilibria import (
    NoPositiveEquilibriumError,
    critical_release_level,
    steady_states,
)
from sitdyn.params import CalibrationInfeasibleError, ModelParams
from sitdyn.releases import ImpulsiveRelease, UnaidedCollapseError, amount_for_effort
from sitdyn.separatrix import get_or_build_cloud

__all__ = ["NA", "run_sweep", "sweep_table"]

NA = "N/A"

#: Errors that mean "this cell has no value", not "the sweep is broken".
_SOFT_ERRORS = (
    NoPositiveEquilibriumError,
    NeverEnteredError,
    BoundNotApplicableError,
    CalibrationInfeasibleError,
    UnaidedCollapseError,
)


def _fmt(value: float) -> str:
    return format(value, ".6g")


def _sim_scheme(cfg: RunConfig, p: ModelParams, dynamic: bool) -> NsfdScheme:
    return nsfd_scheme(
        p,
        dt=cfg.numerics.dt,
        max_steps=cfg.numerics.max_steps,
        dynamic_release_pool=dynamic,
    )


def _cell_cloud(cfg: RunConfig, p: ModelParams):
    return get_or_build_cloud(
        p, 0.0, mesh_n=cfg.numerics.mesh_n, eps=cfg.numerics.eps
    )


def _case_period(cfg: RunConfig, spec: SweepSpec) -> float:
    if spec.period_values:
        return spec.period_values[0]
    if cfg.schedule is not None and cfg.schedule.period > 0.0:
        return cfg.schedule.period
    raise ConfigError(
        "case-study tables need a pulse period: set T in [sweep] or a "
        "[schedule] with a period"
    )


# ══════════════════════════════════════════════════════════════════════
# Per-cell computations (module level so worker processes can run them)
# ══════════════════════════════════════════════════════════════════════


def _cell(cfg: RunConfig, spec: SweepSpec, task: tuple) -> tuple[str, ...]:
    """One grid cell; returns its CSV cell strings."""
    kind, nu, beta, extra = task
    width = _CELL_WIDTH[kind]
    try:
        p = cfg.model_for(nu, beta)
        return _CELL_FNS[kind](cfg, spec, p, extra)
    except _SOFT_ERRORS:
        return (NA,) * width


def _cell_effort_ratio(
    cfg: RunConfig, spec: SweepSpec, p: ModelParams, extra
) -> tuple[str, ...]:
    crit = critical_release_level(p).level
    wild = steady_states(p).wild
    if wild is None:
        return (NA,)
    return (_fmt(crit / wild.males),)


def _cell_tau_lower(
    cfg: RunConfig, spec: SweepSpec, p: ModelParams, extra
) -> tuple[str, ...]:
    return (_fmt(entry_time_floor(p)),)


def _cell_tau_upper(
    cfg: RunConfig, spec: SweepSpec, p: ModelParams, extra
) -> tuple[str, ...]:
    level = extra * critical_release_level(p).level
    ceiling = entry_time_ceiling(p, level)
    if not ceiling.applicable:
        return (NA,)
    return (_fmt(ceiling.value),)


def _cell_tau_constant(
    cfg: RunConfig, spec: SweepSpec, p: ModelParams, extra
) -> tuple[str, ...]:
    level = extra * critical_release_level(p).level
    wild = steady_states(p).wild
    if wild is None:
        return (NA, NA)
    cloud = _cell_cloud(cfg, p)
    tau = entry_time_simulated(p, level, cloud, _sim_scheme(cfg, p, False))
    # Holding a decaying pool at a constant level costs its death rate
    # in fresh males per day.
    effort = level * p.sterile_death_rate * tau / wild.males
    return (_fmt(tau), _fmt(effort))


def _cell_periodic(
    cfg: RunConfig, spec: SweepSpec, p: ModelParams, extra
) -> tuple[str, ...]:
    """Scan the (period, effort-multiple) grid; report both extremes.

    Returns four cell strings: minimal and maximal cumulative effort
    (with period and entrance time), then minimal and maximal entrance
    time (with period and cumulative effort).
    """
    if not spec.period_values or not spec.phi_values:
        raise ConfigError("periodic tables need non-empty T and phi lists")
    cloud = _cell_cloud(cfg, p)
    scheme = _sim_scheme(cfg, p, True)
    outcomes = []
    for period in spec.period_values:
        for phi in spec.phi_values:
            amount = amount_for_effort(p, phi, period)
            schedule = ImpulsiveRelease(amount=amount, period=period, count=None)
            try:
                report = entrance_time_controlled(schedule, p, cloud, True, scheme)
            except NeverEnteredError:
                continue
            outcomes.append((period, report.effort_ratio, report.entry_time))
    if not outcomes:
        return (NA, NA, NA, NA)

    def by_effort(o):
        return (o[1], o[0])

    def by_time(o):
        return (o[2], o[0])

    lo_e = min(outcomes, key=by_effort)
    hi_e = max(outcomes, key=by_effort)
    lo_t = min(outcomes, key=by_time)
    hi_t = max(outcomes, key=by_time)
    return (
        f"{_fmt(lo_e[1])} ({_fmt(lo_e[0])}, {_fmt(lo_e[2])})",
        f"{_fmt(hi_e[1])} ({_fmt(hi_e[0])}, {_fmt(hi_e[2])})",
        f"{_fmt(lo_t[2])} ({_fmt(lo_t[0])}, {_fmt(lo_t[1])})",
        f"{_fmt(hi_t[2])} ({_fmt(hi_t[0])}, {_fmt(hi_t[1])})",
    )


def _cell_case_study(
    cfg: RunConfig, spec: SweepSpec, p: ModelParams, extra
) -> tuple[str, ...]:
    """Entrance time and female ratio for one pulsed case-study cell."""
    pulse_multiple = extra
    wild = steady_states(p).wild
    if wild is None:
        return (NA, NA)
    reference_males = cfg.m_target if cfg.m_target is not None else wild.males
    period = _case_period(cfg, spec)
    schedule = ImpulsiveRelease(
        amount=pulse_multiple * reference_males, period=period, count=None
    )
    cloud = _cell_cloud(cfg, p)
    report = entrance_time_controlled(
        schedule, p, cloud, True, _sim_scheme(cfg, p, True)
    )
    return (_fmt(report.entry_time), format(report.female_ratio, ".6f"))


_CELL_FNS = {
    "effort_ratio": _cell_effort_ratio,
    "tau_lower": _cell_tau_lower,
    "tau_upper": _cell_tau_upper,
    "tau_constant": _cell_tau_constant,
    "periodic": _cell_periodic,
    "case_study": _cell_case_study,
}
_CELL_WIDTH = {
    "effort_ratio": 1,
    "tau_lower": 1,
    "tau_upper": 1,
    "tau_constant": 2,
    "periodic": 4,
    "case_study": 2,
}


@contextlib.contextmanager
def _ordered_map(jobs: int):
    """Map preserving task order, optionally across worker processes."""
    if jobs <= 1:
        yield lambda fn, items: [fn(item) for item in items]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            yield lambda fn, items: list(pool.map(fn, items, chunksize=1))


# ══════════════════════════════════════════════════════════════════════
# Table assembly
# ══════════════════════════════════════════════════════════════════════


def _beta_header(spec: SweepSpec) -> list[str]:
    return [f"beta={_fmt(b)}" for b in spec.beta_values]


def sweep_table(
    cfg: RunConfig, spec: SweepSpec, jobs: int = 1
) -> tuple[list[str], list[list[str]]]:
    """Compute one sweep table.

    Args:
        cfg: Run configuration providing the model template and
            numerics.
        spec: Which table, over which grids.
        jobs: Worker processes for cell evaluation.

    Returns:
        ``(header, rows)`` of CSV cell strings.

    Raises:
        ConfigError: If the spec lacks a grid the table needs.
    """
    table = spec.table_id
    if table in ("effort_ratio", "tau_lower"):
        tasks = [
            (table, nu, beta, None)
            for nu in spec.nu_E_values
            for beta in spec.beta_values
        ]
        header = ["nu_E"] + _beta_header(spec)
        prefixes = [[_fmt(nu)] for nu in spec.nu_E_values]
    elif table in ("tau_upper", "tau_constant"):
        if not spec.phi_values:
            raise ConfigError(f"table {table!r} needs a non-empty phi list")
        tasks = [
            (table, nu, beta, phi)
            for phi in spec.phi_values
            for nu in spec.nu_E_values
            for beta in spec.beta_values
        ]
        if table == "tau_upper":
            header = ["phi", "nu_E"] + _beta_header(spec)
        else:
            header = ["phi", "nu_E"]
            for col in _beta_header(spec):
                header += [f"tau[{col}]", f"effort[{col}]"]
        prefixes = [
            [_fmt(phi), _fmt(nu)]
            for phi in spec.phi_values
            for nu in spec.nu_E_values
        ]
    elif table in ("periodic_effort", "periodic_time"):
        tasks = [
            ("periodic", nu, beta, None)
            for nu in spec.nu_E_values
            for beta in spec.beta_values
        ]
        header = ["which", "nu_E"] + _beta_header(spec)
        prefixes = None  # assembled specially below
    elif table in ("case_study_time", "case_study_female_ratio"):
        if not spec.pulse_multiples:
            raise ConfigError(f"table {table!r} needs a non-empty p list")
        tasks = [
            ("case_study", nu, beta, p_mult)
            for p_mult in spec.pulse_multiples
            for nu in spec.nu_E_values
            for beta in spec.beta_values
        ]
        header = ["p", "nu_E"] + _beta_header(spec)
        prefixes = [
            [_fmt(p_mult), _fmt(nu)]
            for p_mult in spec.pulse_multiples
            for nu in spec.nu_E_values
        ]
    else:  # pragma: no cover - SweepSpec already validates
        raise ConfigError(f"unknown sweep table {table!r}")

    worker = functools.partial(_cell, cfg, spec)
    with _ordered_map(jobs) as pmap:
        results = pmap(worker, tasks)

    n_beta = len(spec.beta_values)
    if table in ("periodic_effort", "periodic_time"):
        lo_idx, hi_idx = (0, 1) if table == "periodic_effort" else (2, 3)
        per_nu = [
            results[i * n_beta : (i + 1) * n_beta]
            for i in range(len(spec.nu_E_values))
        ]
        rows = [
            ["min", _fmt(nu)] + [cells[lo_idx] for cells in row]
            for nu, row in zip(spec.nu_E_values, per_nu)
        ] + [
            ["max", _fmt(nu)] + [cells[hi_idx] for cells in row]
            for nu, row in zip(spec.nu_E_values, per_nu)
        ]
        return header, rows

    if table == "case_study_time":
        pick = lambda cells: [cells[0]]  # noqa: E731
    elif table == "case_study_female_ratio":
        pick = lambda cells: [cells[1]]  # noqa: E731
    else:
        pick = list
    rows = []
    for row_i, prefix in enumerate(prefixes):
        cells: list[str] = []
        for col_i in range(n_beta):
            cells += pick(results[row_i * n_beta + col_i])
        rows.append(prefix + cells)
    return header, rows


def run_sweep(
    cfg: RunConfig,
    spec: SweepSpec | None = None,
    out_dir=".",
    jobs: int = 1,
) -> Path:
    """Compute a sweep table and write it as CSV.

    Args:
        cfg: Run configuration.
        spec: Table request; defaults to the configuration's [sweep]
            section.
        out_dir: Directory the CSV is written into.
        jobs: Worker processes.

    Returns:
        Path of the written CSV file.

    Raises:
        ConfigError: If no sweep is specified or a needed grid is
            missing.
    """
    if spec is None:
        spec = cfg.sweep
    if spec is None:
        raise ConfigError("no sweep requested: add a [sweep] section")
    header, rows = sweep_table(cfg, spec, jobs)
    out = Path(out_dir) / (spec.out or f"{spec.table_id}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return out
