"""Configuration parsing, sweep tables, and the command line."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from conftest import preset_model

from sitdyn import (
    ConfigError,
    ConstantRelease,
    ImpulsiveRelease,
    PeriodicRelease,
    steady_states,
)
from sitdyn.cli import main
from sitdyn.config import (
    NumericsConfig,
    RunConfig,
    ScheduleConfig,
    SweepSpec,
    list_presets,
    load_config,
    resolve_config_path,
)
from sitdyn.entrance import entry_time_floor
from sitdyn.sweeps import run_sweep, sweep_table

TINY_CFG = """
[model]
b = 10
r = 0.49
nu_E = {nu_E}
mu_E = 0.03
mu_M = 0.1
mu_F = 0.04
beta = {beta}
gamma_i = 1
mu_i = 0.12
M_target = 5106

[numerics]
dt = 0.1
max_steps = 300000
mesh_n = 8
eps = 0.01
"""


@pytest.fixture()
def tiny_cfg_path(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CFG.format(nu_E=0.005, beta=1e-4))
    return path


# ══════════════════════════════════════════════════════════════════════
# Presets and parsing
# ══════════════════════════════════════════════════════════════════════


def test_presets_are_discoverable_and_parse():
    names = list_presets()
    assert {"defaults", "onetahi", "sweep"} <= set(names)
    for name in names:
        cfg = load_config(name)
        assert cfg.m_target == 5106.0
        assert cfg.numerics.mesh_n == 40


def test_resolve_config_path(tmp_path):
    assert resolve_config_path("defaults").is_file()
    assert resolve_config_path("defaults.cfg").is_file()
    own = tmp_path / "mine.cfg"
    own.write_text("[model]\n")
    assert resolve_config_path(str(own)) == own
    with pytest.raises(ConfigError):
        resolve_config_path("no-such-preset")


def test_defaults_preset_matches_shipped_rates():
    cfg = load_config("defaults")
    t = cfg.model_template
    assert (t.egg_lay_rate, t.female_fraction) == (10.0, 0.49)
    assert (t.egg_maturation_rate, t.egg_death_rate) == (0.005, 0.03)
    assert (t.male_death_rate, t.female_death_rate) == (0.1, 0.04)
    assert (t.mate_encounter_rate, t.sterile_death_rate) == (1e-4, 0.12)
    assert cfg.schedule is None
    assert cfg.sweep is None


def test_model_for_calibrates_each_cell():
    cfg = load_config("defaults")
    for nu, beta in ((None, None), (0.01, None), (0.05, 1e-2)):
        p = cfg.model_for(nu, beta)
        wild = steady_states(p).wild
        assert wild.males == pytest.approx(5106.0, rel=1e-9)
    assert cfg.model_for(0.01).egg_maturation_rate == 0.01
    # Distinct cells get distinct capacities.
    assert cfg.model_for(0.01).capacity != cfg.model_for(0.02).capacity


def test_onetahi_preset_schedule_and_sweep():
    cfg = load_config("onetahi")
    sched = cfg.schedule.build()
    assert isinstance(sched, ImpulsiveRelease)
    assert (sched.amount, sched.period, sched.count) == (40848.0, 7.0, None)
    spec = cfg.sweep
    assert spec.table_id == "case_study_time"
    assert spec.pulse_multiples == (4.0, 6.0, 8.0)
    assert len(spec.nu_E_values) == 6 and len(spec.beta_values) == 5


def test_config_error_cases(tmp_path):
    cases = {
        "empty.cfg": "",
        "no-capacity.cfg": "[model]\nb=10\nr=0.49\nnu_E=0.005\nmu_E=0.03\n"
        "mu_M=0.1\nmu_F=0.04\nbeta=1e-4\nmu_i=0.12\n",
        "bad-float.cfg": TINY_CFG.format(nu_E="abc", beta=1e-4),
        "bad-kind.cfg": TINY_CFG.format(nu_E=0.005, beta=1e-4)
        + "\n[schedule]\nkind = weekly\n",
        "bad-count.cfg": TINY_CFG.format(nu_E=0.005, beta=1e-4)
        + "\n[schedule]\nkind = impulsive\nT = 7\nLambda = 10\nN_r = often\n",
        "bad-schedule.cfg": TINY_CFG.format(nu_E=0.005, beta=1e-4)
        + "\n[schedule]\nkind = impulsive\nT = -7\nLambda = 10\n",
        "no-table.cfg": TINY_CFG.format(nu_E=0.005, beta=1e-4)
        + "\n[sweep]\nnu_E = 0.005\nbeta = 1e-4\n",
    }
    for name, text in cases.items():
        path = tmp_path / name
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_schedule_config_builds_every_kind():
    assert isinstance(
        ScheduleConfig(kind="constant", rate=3.0).build(), ConstantRelease
    )
    periodic = ScheduleConfig(kind="periodic", rate=3.0, period=7.0).build()
    assert isinstance(periodic, PeriodicRelease)
    assert periodic.profile(2.5) == 3.0
    pulsed = ScheduleConfig(kind="impulsive", amount=9.0, period=7.0, count=4)
    assert isinstance(pulsed.build(), ImpulsiveRelease)
    with pytest.raises(ConfigError):
        ScheduleConfig(kind="weekly").build()


# ══════════════════════════════════════════════════════════════════════
# Sweep tables
# ══════════════════════════════════════════════════════════════════════


def _tiny_run_config(**numerics):
    template = preset_model(0.005, 1e-4, target_males=None, capacity=1.0)
    return RunConfig(
        model_template=template,
        m_target=5106.0,
        numerics=NumericsConfig(mesh_n=8, **numerics),
    )


def test_sweep_tau_lower_matches_direct_evaluation():
    cfg = _tiny_run_config()
    spec = SweepSpec(
        table_id="tau_lower",
        nu_E_values=(0.005, 0.05),
        beta_values=(1e-4, 1e-3),
    )
    header, rows = sweep_table(cfg, spec)
    assert header == ["nu_E", "beta=0.0001", "beta=0.001"]
    assert len(rows) == 2
    for row, nu in zip(rows, spec.nu_E_values):
        assert row[0] == format(nu, ".6g")
        for cell, beta in zip(row[1:], spec.beta_values):
            expected = entry_time_floor(cfg.model_for(nu, beta))
            assert cell == format(expected, ".6g")


def test_sweep_parallel_jobs_give_identical_rows():
    cfg = _tiny_run_config()
    spec = SweepSpec(
        table_id="effort_ratio",
        nu_E_values=(0.005, 0.02),
        beta_values=(1e-4, 1.0),
    )
    _, serial = sweep_table(cfg, spec, jobs=1)
    _, parallel = sweep_table(cfg, spec, jobs=2)
    assert serial == parallel


def test_sweep_missing_grid_raises():
    cfg = _tiny_run_config()
    spec = SweepSpec(
        table_id="tau_upper", nu_E_values=(0.005,), beta_values=(1e-4,)
    )
    with pytest.raises(ConfigError):
        sweep_table(cfg, spec)


def test_run_sweep_writes_stable_csv(tmp_path):
    cfg = _tiny_run_config()
    spec = SweepSpec(
        table_id="tau_lower",
        nu_E_values=(0.005, 0.01),
        beta_values=(1e-4,),
        out="floors.csv",
    )
    first = run_sweep(cfg, spec, out_dir=tmp_path)
    assert first == tmp_path / "floors.csv"
    content = first.read_bytes()
    again = run_sweep(cfg, spec, out_dir=tmp_path)
    assert again.read_bytes() == content
    lines = content.decode().splitlines()
    assert lines[0] == "nu_E,beta=0.0001"
    assert len(lines) == 3


def test_case_study_cell_matches_direct_report(tmp_path):
    # One pulsed-programme cell, cross-checked against the direct
    # entrance computation at the same mesh.
    cfg = _tiny_run_config()
    spec = SweepSpec(
        table_id="case_study_time",
        nu_E_values=(0.005,),
        beta_values=(1e-4,),
        pulse_multiples=(8.0,),
        period_values=(7.0,),
    )
    header, rows = sweep_table(cfg, spec)
    assert header == ["p", "nu_E", "beta=0.0001"]
    assert rows == [["8", "0.005", "258.7"]]
    ratio_spec = dataclasses.replace(spec, table_id="case_study_female_ratio")
    _, ratio_rows = sweep_table(cfg, ratio_spec)
    assert ratio_rows == [["8", "0.005", "0.208449"]]


def test_case_study_never_entering_cell_is_na():
    # Four-fold pulses cannot push this slow-maturation population into
    # the basin: the cell reports N/A rather than a number.
    cfg = _tiny_run_config(max_steps=40_000)
    spec = SweepSpec(
        table_id="case_study_time",
        nu_E_values=(0.008,),
        beta_values=(1e-3,),
        pulse_multiples=(4.0,),
        period_values=(7.0,),
    )
    _, rows = sweep_table(cfg, spec)
    assert rows == [["4", "0.008", "N/A"]]


# ══════════════════════════════════════════════════════════════════════
# Command line
# ══════════════════════════════════════════════════════════════════════


def test_cli_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("sitdyn ")


def test_cli_unknown_option_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["equilibria", "--bogus"])
    assert exc.value.code == 2


def test_cli_equilibria(tiny_cfg_path, capsys):
    assert main(["equilibria", "--config", str(tiny_cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "offspring number: 17.5" in out
    assert "wild state: eggs=200235 males=5106 females=4904.1 [stable]" in out
    assert "critical released level: 20695.4" in out


def test_cli_threshold(tiny_cfg_path, capsys):
    assert main(["threshold", "--config", str(tiny_cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "critical released level: 20695.4" in out
    assert "sufficiency scale: 23169.8" in out


def test_cli_threshold_schedule_verdict(tmp_path, capsys):
    path = tmp_path / "strong.cfg"
    path.write_text(
        TINY_CFG.format(nu_E=0.005, beta=1e-4)
        + "\n[schedule]\nkind = impulsive\nT = 7\nLambda = 40848\nN_r = inf\n"
    )
    assert main(["threshold", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "released-male band: [31030.9, 71878.9]" in out
    assert "verdict: zero-globally-stable" in out


def test_cli_simulate_writes_trajectory(tiny_cfg_path, tmp_path, capsys):
    out_dir = tmp_path / "artefacts"
    assert (
        main(
            [
                "simulate",
                "--config",
                str(tiny_cfg_path),
                "--out",
                str(out_dir),
                "--horizon",
                "5",
            ]
        )
        == 0
    )
    csv_path = out_dir / "trajectory.csv"
    assert csv_path.is_file()
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert data.shape == (51, 6)
    # Without releases the persistence state holds still.
    np.testing.assert_allclose(data[-1, 1:4], data[0, 1:4], rtol=1e-6)
    assert "wrote" in capsys.readouterr().out


def test_cli_separatrix_build_and_query(tiny_cfg_path, tmp_path, capsys):
    out_dir = tmp_path / "sep"
    assert (
        main(
            [
                "separatrix",
                "build",
                "--config",
                str(tiny_cfg_path),
                "--out",
                str(out_dir),
            ]
        )
        == 0
    )
    cloud_file = out_dir / "separatrix-cloud.txt"
    assert cloud_file.is_file()
    capsys.readouterr()

    assert (
        main(
            [
                "separatrix",
                "query",
                "--config",
                str(tiny_cfg_path),
                "--cloud",
                str(cloud_file),
                "--state",
                "1,1,1",
            ]
        )
        == 0
    )
    assert capsys.readouterr().out.strip() == "inside"
    assert (
        main(
            [
                "separatrix",
                "query",
                "--config",
                str(tiny_cfg_path),
                "--cloud",
                str(cloud_file),
                "--state",
                "200235,5106,4904",
            ]
        )
        == 0
    )
    assert capsys.readouterr().out.strip() == "outside"


def test_cli_separatrix_query_needs_state(tiny_cfg_path):
    with pytest.raises(SystemExit) as exc:
        main(["separatrix", "query", "--config", str(tiny_cfg_path)])
    assert exc.value.code == 2


def test_cli_tau(tiny_cfg_path, capsys):
    assert (
        main(["tau", "--config", str(tiny_cfg_path), "--phi", "2"]) == 0
    )
    out = capsys.readouterr().out
    assert "analytic floor: 63.1894 days" in out
    assert "simulated 281.9 days" in out


def test_cli_entrance(tmp_path, capsys):
    path = tmp_path / "pulsed.cfg"
    path.write_text(
        TINY_CFG.format(nu_E=0.005, beta=1e-4)
        + "\n[schedule]\nkind = impulsive\nT = 7\nLambda = 40848\nN_r = inf\n"
    )
    assert main(["entrance", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "entrance time: 258.7 days" in out
    assert "releases made: 36" in out


def test_cli_sweep_writes_table(tmp_path, capsys):
    path = tmp_path / "sweep.cfg"
    path.write_text(
        TINY_CFG.format(nu_E=0.005, beta=1e-4)
        + "\n[sweep]\ntable = tau_lower\nnu_E = 0.005, 0.01\nbeta = 1e-4\n"
    )
    out_dir = tmp_path / "tables"
    assert (
        main(["sweep", "--config", str(path), "--out", str(out_dir)]) == 0
    )
    assert (out_dir / "tau_lower.csv").is_file()
    capsys.readouterr()
    # --table overrides the configured table id.
    assert (
        main(
            [
                "sweep",
                "--config",
                str(path),
                "--out",
                str(out_dir),
                "--table",
                "effort_ratio",
            ]
        )
        == 0
    )
    assert (out_dir / "effort_ratio.csv").is_file()


def test_cli_config_error_exits_2(tmp_path, capsys):
    assert main(["equilibria", "--config", "no-such-preset"]) == 2
    assert "configuration error" in capsys.readouterr().err
    path = tmp_path / "sweepless.cfg"
    path.write_text(TINY_CFG.format(nu_E=0.005, beta=1e-4))
    assert main(["sweep", "--config", str(path)]) == 2


def test_cli_numeric_error_exits_3(tmp_path, capsys):
    # An encounter rate this low cannot sustain 5106 males at any
    # capacity: the calibration fails as a numeric error.
    path = tmp_path / "impossible.cfg"
    path.write_text(TINY_CFG.format(nu_E=0.005, beta=1e-9))
    assert main(["equilibria", "--config", str(path)]) == 3
    assert "computation failed" in capsys.readouterr().err
