"""Command-line interface.

Every subcommand reads a configuration file (or packaged preset) named
by ``--config`` and writes artefacts into ``--out``.  Exit status is 0
on success, 2 on configuration problems (including bad flags), and 3
when a requested quantity has no value for the configured rates
(collapse without releases, inapplicable bound, entrance never
certified, step budget exhausted).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from sitdyn import __version__
from sitdyn.config import (
    SWEEP_TABLE_IDS,
    ConfigError,
    RunConfig,
    list_presets,
    load_config,
)
from sitdyn.dynamics import StepOverflowError, nsfd_scheme, simulate
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
    equilibrium_bounds,
    steady_states,
)
from sitdyn.params import (
    CalibrationInfeasibleError,
    InvalidParameterError,
    aggregates,
)
from sitdyn.releases import (
    ImpulsiveRelease,
    ThresholdNotMetError,
    UnaidedCollapseError,
    extinction_threshold_check,
    release_envelope,
    sufficiency_scale,
)
from sitdyn.separatrix import (
    BisectionStalledError,
    CloudFormatError,
    FingerprintMismatchError,
    get_or_build_cloud,
    load_cloud,
    save_cloud,
)
from sitdyn.sweeps import NA, run_sweep

__all__ = ["main"]

#: Runtime failures reported as exit status 3.
_NUMERIC_ERRORS = (
    NoPositiveEquilibriumError,
    NeverEnteredError,
    BoundNotApplicableError,
    CalibrationInfeasibleError,
    UnaidedCollapseError,
    ThresholdNotMetError,
    BisectionStalledError,
    StepOverflowError,
    InvalidParameterError,
    CloudFormatError,
    FingerprintMismatchError,
)


def _fmt(value: float) -> str:
    return format(value, ".6g")


def _parse_state(text: str) -> np.ndarray:
    try:
        values = np.array([float(tok) for tok in text.split(",")])
    except ValueError:
        raise ConfigError(f"state {text!r} is not a comma-separated number list")
    if values.size not in (3, 5):
        raise ConfigError(
            "state must have 3 components (eggs,males,females) or 5 "
            "(eggs,males,released,females,sterilized)"
        )
    return values


def _default_initial(cfg: RunConfig, p) -> np.ndarray:
    """Persistence state, the schedule's initial release pool, and the
    matching sterilized-female equilibrium."""
    wild = steady_states(p).wild
    if wild is None:
        raise NoPositiveEquilibriumError(
            "no persistence steady state; pass --initial explicitly"
        )
    level = cfg.schedule.initial_level if cfg.schedule is not None else 0.0
    sterilized = (
        p.female_fraction
        * p.egg_maturation_rate
        * wild.eggs
        / p.female_death_rate
        * np.exp(-p.mate_encounter_rate * wild.males)
    )
    return np.array([wild.eggs, wild.males, level, wild.females, sterilized])


# ══════════════════════════════════════════════════════════════════════
# Subcommands
# ══════════════════════════════════════════════════════════════════════


def _cmd_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.model_for()
    scheme = nsfd_scheme(p, dt=cfg.numerics.dt, max_steps=cfg.numerics.max_steps)
    if args.initial is not None:
        state = _parse_state(args.initial)
        if state.size == 3:
            level = cfg.schedule.initial_level if cfg.schedule is not None else 0.0
            state = np.array([state[0], state[1], level, state[2], 0.0])
    else:
        state = _default_initial(cfg, p)
    schedule = cfg.schedule.build() if cfg.schedule is not None else None
    trajectory = simulate(
        state,
        schedule,
        scheme,
        p,
        horizon=args.horizon,
        record_every=args.record_every,
    )
    out = Path(args.out) / "trajectory.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    trajectory.to_csv(out)
    final = trajectory.final_state
    print(f"wrote {out} ({len(trajectory.times)} samples, {trajectory.reason.value})")
    print(
        "final state: eggs=%s males=%s released=%s females=%s sterilized=%s"
        % tuple(_fmt(v) for v in final)
    )
    return 0


def _cmd_equilibria(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.model_for()
    agg = aggregates(p)
    print(f"offspring number: {_fmt(agg.offspring_number)}")
    print(f"mating-failure index: {_fmt(agg.allee_index)}")
    states = steady_states(p, args.level)
    for label, state in (
        ("zero", states.zero),
        ("threshold", states.threshold),
        ("wild", states.wild),
    ):
        if state is None:
            print(f"{label} state: none")
            continue
        print(
            f"{label} state: eggs={_fmt(state.eggs)} males={_fmt(state.males)} "
            f"females={_fmt(state.females)} [{state.stability.value}]"
        )
    try:
        crit = critical_release_level(p)
    except NoPositiveEquilibriumError:
        print("critical released level: none (collapses without releases)")
        return 0
    print(
        f"critical released level: {_fmt(crit.level)} "
        f"(closed-form overestimate {_fmt(crit.cheap_overestimate)})"
    )
    wild = states.wild if args.level == 0.0 else steady_states(p).wild
    if wild is not None and wild.males > 0.0:
        print(f"effort ratio (critical / persistence males): "
              f"{_fmt(crit.level / wild.males)}")
    bounds = equilibrium_bounds(p)
    print(
        "persistence-state bracket (eggs): "
        f"[{_fmt(bounds.under_wild[0])}, {_fmt(bounds.over_wild[0])}]"
    )
    return 0


def _cmd_threshold(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.model_for()
    crit = critical_release_level(p)
    print(f"critical released level: {_fmt(crit.level)}")
    print(f"closed-form overestimate: {_fmt(crit.cheap_overestimate)}")
    try:
        scale = sufficiency_scale(p)
    except UnaidedCollapseError:
        print("sufficiency scale: none (collapses without releases)")
        return 0
    print(f"sufficiency scale: {_fmt(scale)}")
    if cfg.schedule is not None:
        schedule = cfg.schedule.build()
        envelope = release_envelope(schedule, p.sterile_death_rate)
        print(
            f"released-male band: [{_fmt(envelope.lower)}, {_fmt(envelope.upper)}]"
        )
        if schedule.count is None:
            verdict = extinction_threshold_check(schedule, p)
            print(f"verdict: {verdict.value}")
        else:
            print("verdict: n/a (finite programme; compare band manually)")
    return 0


def _cmd_separatrix(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.model_for()
    if args.action == "build":
        cloud = get_or_build_cloud(
            p,
            args.level,
            mesh_n=cfg.numerics.mesh_n,
            eps=cfg.numerics.eps,
            jobs=args.jobs,
        )
        out = Path(args.out) / "separatrix-cloud.txt"
        out.parent.mkdir(parents=True, exist_ok=True)
        save_cloud(cloud, out)
        print(
            f"wrote {out} ({cloud.points.shape[0]} points, "
            f"mesh {cloud.mesh_n}, tolerance {cloud.epsilon:g}, "
            f"{cloud.skipped} rays skipped)"
        )
        return 0
    # query
    if args.cloud is not None:
        cloud = load_cloud(args.cloud, p, args.level)
    else:
        cloud = get_or_build_cloud(
            p,
            args.level,
            mesh_n=cfg.numerics.mesh_n,
            eps=cfg.numerics.eps,
            jobs=args.jobs,
        )
    state = _parse_state(args.state)
    triple = state if state.size == 3 else state[[0, 1, 3]]
    inside = cloud.contains(triple)
    print("inside" if inside else "outside")
    return 0


def _cmd_tau(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.model_for()
    print(f"analytic floor: {_fmt(entry_time_floor(p))} days")
    crit = critical_release_level(p)
    if args.level is not None:
        levels = [("level", args.level)]
    else:
        phis = (
            [float(tok) for tok in args.phi.replace(",", " ").split()]
            if args.phi
            else [1.2]
        )
        levels = [(f"phi={_fmt(phi)}", phi * crit.level) for phi in phis]
    cloud = get_or_build_cloud(
        p, 0.0, mesh_n=cfg.numerics.mesh_n, eps=cfg.numerics.eps, jobs=args.jobs
    )
    scheme = nsfd_scheme(
        p,
        dt=cfg.numerics.dt,
        max_steps=cfg.numerics.max_steps,
        dynamic_release_pool=False,
    )
    for label, level in levels:
        ceiling = entry_time_ceiling(p, level)
        ceiling_text = (
            f"{_fmt(ceiling.value)} days"
            if ceiling.applicable
            else f"{NA} ({', '.join(ceiling.failed_conditions)})"
        )
        try:
            simulated = f"{_fmt(entry_time_simulated(p, level, cloud, scheme))} days"
        except NeverEnteredError:
            simulated = NA
        print(
            f"{label} (released level {_fmt(level)}): "
            f"simulated {simulated}, analytic ceiling {ceiling_text}"
        )
    return 0


def _cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    spec = cfg.sweep
    if args.table is not None:
        if spec is None:
            raise ConfigError(
                "--table needs grid lists from a [sweep] section"
            )
        spec = dataclasses.replace(spec, table_id=args.table, out="")
    out = run_sweep(cfg, spec, out_dir=args.out, jobs=args.jobs)
    print(f"wrote {out}")
    return 0


def _cmd_case_study(cfg: RunConfig, args: argparse.Namespace) -> int:
    spec = cfg.sweep
    if spec is None:
        raise ConfigError(
            "case-study needs a [sweep] section with nu_E, beta, p and T "
            "lists (see the onetahi preset)"
        )
    for table_id in ("case_study_time", "case_study_female_ratio"):
        table_spec = dataclasses.replace(spec, table_id=table_id, out="")
        out = run_sweep(cfg, table_spec, out_dir=args.out, jobs=args.jobs)
        print(f"wrote {out}")
    return 0


def _cmd_entrance(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.schedule is None:
        raise ConfigError("entrance needs a [schedule] section")
    p = cfg.model_for()
    cloud = get_or_build_cloud(
        p, 0.0, mesh_n=cfg.numerics.mesh_n, eps=cfg.numerics.eps, jobs=args.jobs
    )
    scheme = nsfd_scheme(p, dt=cfg.numerics.dt, max_steps=cfg.numerics.max_steps)
    report = entrance_time_controlled(cfg.schedule.build(), p, cloud, True, scheme)
    print(f"entrance time: {_fmt(report.entry_time)} days")
    print(f"releases made: {report.releases_made}")
    print(f"cumulative effort ratio: {_fmt(report.effort_ratio)}")
    print(f"female ratio at entrance: {report.female_ratio:.6f}")
    return 0


# ══════════════════════════════════════════════════════════════════════
# Parser
# ══════════════════════════════════════════════════════════════════════


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default="defaults",
        metavar="PATH",
        help="configuration file or preset name "
        f"(presets: {', '.join(list_presets())})",
    )
    common.add_argument(
        "--out", default=".", metavar="DIR", help="output directory"
    )
    common.add_argument(
        "--jobs", type=int, default=1, metavar="N", help="worker processes"
    )
    common.add_argument(
        "--seed",
        type=int,
        default=None,
        metavar="N",
        help="random seed (reserved; all current computations are "
        "deterministic)",
    )

    parser = argparse.ArgumentParser(
        prog="sitdyn",
        description="Sterile-male release planning for mosquito suppression.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser(
        "simulate", parents=[common], help="integrate the controlled model"
    )
    p_sim.add_argument(
        "--horizon", type=float, default=1000.0, metavar="DAYS",
        help="run length in days",
    )
    p_sim.add_argument(
        "--record-every", type=int, default=1, metavar="K",
        help="keep every K-th sample",
    )
    p_sim.add_argument(
        "--initial", metavar="E,M[,Mi],F[,Fst]", default=None,
        help="initial state; 3 or 5 comma-separated numbers "
        "(default: persistence state)",
    )
    p_sim.set_defaults(fn=_cmd_simulate)

    p_eq = sub.add_parser(
        "equilibria", parents=[common], help="steady states and stability"
    )
    p_eq.add_argument(
        "--level", type=float, default=0.0, metavar="MI",
        help="frozen released-male level",
    )
    p_eq.set_defaults(fn=_cmd_equilibria)

    p_thr = sub.add_parser(
        "threshold", parents=[common],
        help="critical released level and schedule verdict",
    )
    p_thr.set_defaults(fn=_cmd_threshold)

    p_sep = sub.add_parser(
        "separatrix", parents=[common], help="extinction-basin certificates"
    )
    p_sep.add_argument("action", choices=("build", "query"))
    p_sep.add_argument(
        "--level", type=float, default=0.0, metavar="MI",
        help="frozen released-male level",
    )
    p_sep.add_argument(
        "--state", metavar="E,M,F", default=None,
        help="state to test (query)",
    )
    p_sep.add_argument(
        "--cloud", metavar="FILE", default=None,
        help="cloud file to query (default: cache)",
    )
    p_sep.set_defaults(fn=_cmd_separatrix)

    p_tau = sub.add_parser(
        "tau", parents=[common],
        help="basin-entrance times at frozen released levels",
    )
    p_tau.add_argument(
        "--phi", metavar="LIST", default=None,
        help="released levels as multiples of the critical level "
        "(comma-separated, default 1.2)",
    )
    p_tau.add_argument(
        "--level", type=float, default=None, metavar="MI",
        help="absolute released level (overrides --phi)",
    )
    p_tau.set_defaults(fn=_cmd_tau)

    p_swp = sub.add_parser(
        "sweep", parents=[common], help="write a reference table as CSV"
    )
    p_swp.add_argument(
        "--table", choices=SWEEP_TABLE_IDS, default=None,
        help="table to produce (default: the configuration's)",
    )
    p_swp.set_defaults(fn=_cmd_sweep)

    p_case = sub.add_parser(
        "case-study", parents=[common],
        help="entrance-time and female-ratio tables for pulsed programmes",
    )
    p_case.set_defaults(fn=_cmd_case_study)

    p_ent = sub.add_parser(
        "entrance", parents=[common],
        help="entrance time and effort for the configured schedule",
    )
    p_ent.set_defaults(fn=_cmd_entrance)

    return parser


def main(argv: list[str] | None = None) -> int:
    """Run the command line; returns the process exit status."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "separatrix" and args.action == "query" and not args.state:
        parser.error("separatrix query requires --state E,M,F")
    try:
        cfg = load_config(args.config)
        return args.fn(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
