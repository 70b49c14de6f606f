"""Shared test fixtures: preset model builder, cloud cache, acceptance log.

The acceptance-criteria tests record one verdict each through the
``acceptance`` fixture; a terminal-summary hook prints a single
pass/fail line per recorded criterion at the end of the run so the
verdicts are visible even among many test outcomes.
"""

from __future__ import annotations

import os

import pytest

from sitdyn import ModelParams, calibrate_capacity
from sitdyn.separatrix import CACHE_DIR_ENV

# Male steady-state size the shipped presets calibrate the capacity to.
DEFAULT_TARGET_MALES = 5106.0


def preset_model(
    nu_E: float = 0.005,
    beta: float = 1e-4,
    *,
    target_males: float | None = DEFAULT_TARGET_MALES,
    **overrides,
) -> ModelParams:
    """The shipped default rates at one (nu_E, beta) grid point.

    Mirrors ``presets/defaults.cfg``: all other rates pinned, and the
    carrying capacity calibrated so a male steady state sits at
    ``target_males`` (skipped when ``target_males`` is None, leaving
    the placeholder capacity 1.0 or an override).
    """
    kwargs = dict(
        egg_lay_rate=10.0,
        capacity=1.0,
        egg_maturation_rate=nu_E,
        egg_death_rate=0.03,
        male_death_rate=0.1,
        female_death_rate=0.04,
        sterile_death_rate=0.12,
        female_fraction=0.49,
        mate_encounter_rate=beta,
        sterile_competitiveness=1.0,
    )
    kwargs.update(overrides)
    p = ModelParams(**kwargs)
    if target_males is None:
        return p
    return p.with_capacity(calibrate_capacity(p, target_males))


@pytest.fixture(scope="session", autouse=True)
def cloud_cache_dir(tmp_path_factory):
    """Redirect the separatrix cloud cache to a session-scoped directory."""
    directory = tmp_path_factory.mktemp("cloud-cache")
    previous = os.environ.get(CACHE_DIR_ENV)
    os.environ[CACHE_DIR_ENV] = str(directory)
    yield directory
    if previous is None:
        os.environ.pop(CACHE_DIR_ENV, None)
    else:
        os.environ[CACHE_DIR_ENV] = previous


# ══════════════════════════════════════════════════════════════════════
# Acceptance-criteria log
# ══════════════════════════════════════════════════════════════════════

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class AcceptanceLog:
    """Recorder handed to the acceptance tests."""

    @staticmethod
    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE[number] = (title, bool(passed), detail)


@pytest.fixture
def acceptance() -> AcceptanceLog:
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}"
        if detail:
            line += f" — {detail}"
        terminalreporter.write_line(line)
