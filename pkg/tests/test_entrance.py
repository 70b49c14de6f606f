"""Entrance-time bounds, simulated basin entry, effort accounting."""

from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import preset_model

from sitdyn import (
    BoundNotApplicableError,
    ConstantRelease,
    ImpulsiveRelease,
    InvalidParameterError,
    NeverEnteredError,
    NoPositiveEquilibriumError,
    build_cloud,
    critical_release_level,
    entrance_time_controlled,
    entry_time_ceiling,
    entry_time_floor,
    entry_time_simulated,
    nsfd_scheme,
)
from sitdyn.entrance import (
    bound_components,
    bound_context,
    two_step_feasible,
)

# ══════════════════════════════════════════════════════════════════════
# Closed-form floor
# ══════════════════════════════════════════════════════════════════════


def test_entry_time_floor_frozen_values():
    assert entry_time_floor(preset_model(0.005, 1e-4)) == pytest.approx(
        63.18943612012646, rel=1e-12
    )
    assert entry_time_floor(preset_model(0.05, 1e-4)) == pytest.approx(
        141.2594621936726, rel=1e-12
    )
    assert entry_time_floor(preset_model(0.25, 1e-4)) == pytest.approx(
        159.51214812189022, rel=1e-12
    )


def test_entry_time_floor_monotone_in_encounter_rate():
    # Denser mating (larger encounter rate at fixed target population)
    # pushes the floor up: the population is harder to drive down.
    times = [
        entry_time_floor(preset_model(0.005, beta))
        for beta in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    ]
    assert all(a < b for a, b in zip(times, times[1:]))


def test_entry_time_floor_needs_two_steady_states():
    with pytest.raises(NoPositiveEquilibriumError):
        entry_time_floor(preset_model(0.0004, 1e-4, target_males=None))


# ══════════════════════════════════════════════════════════════════════
# Closed-form ceiling and its audit decomposition
# ══════════════════════════════════════════════════════════════════════


def test_entry_time_ceiling_frozen_values():
    p = preset_model(0.01, 1e-4)
    level = 8.0 * critical_release_level(p).level
    ceiling = entry_time_ceiling(p, level)
    assert ceiling.applicable
    assert ceiling.failed_conditions == ()
    assert ceiling.value == pytest.approx(585.9235295703062, rel=1e-12)
    q = preset_model(0.005, 1e-3)
    level_q = 8.0 * critical_release_level(q).level
    assert entry_time_ceiling(q, level_q).value == pytest.approx(
        753.8187570637283, rel=1e-12
    )


def test_entry_time_ceiling_reports_failed_conditions():
    # At a fast maturation rate the margin-positivity condition breaks:
    # the bound honestly declines to apply.
    p = preset_model(0.05, 1e-4)
    level = 8.0 * critical_release_level(p).level
    ceiling = entry_time_ceiling(p, level)
    assert not ceiling.applicable
    assert ceiling.value is None
    assert "margin-positivity" in ceiling.failed_conditions
    with pytest.raises(BoundNotApplicableError):
        bound_components(bound_context(p, level))


def test_bound_context_handles_degenerate_equal_rates():
    # Maturation 0.01 makes the egg loss rate equal the male death gap
    # combination: the raw coupling factor blows up but every bound
    # formula uses only stable combinations.
    p = preset_model(0.01, 1e-4)
    level = 8.0 * critical_release_level(p).level
    ctx = bound_context(p, level)
    assert ctx.rate_gap_sign == 0.0
    assert math.isinf(ctx.coupling_factor)
    comps = bound_components(ctx)
    assert all(math.isfinite(c) for c in comps)


def test_ceiling_equals_worst_component():
    for nu, beta in ((0.01, 1e-4), (0.005, 1e-3)):
        p = preset_model(nu, beta)
        level = 8.0 * critical_release_level(p).level
        ceiling = entry_time_ceiling(p, level)
        comps = bound_components(bound_context(p, level))
        assert max(comps) == pytest.approx(ceiling.value, rel=1e-12)


def test_bound_components_frozen_values():
    p = preset_model(0.01, 1e-4)
    level = 8.0 * critical_release_level(p).level
    comps = bound_components(bound_context(p, level))
    assert comps == (
        pytest.approx(493.3156251601983, rel=1e-12),
        pytest.approx(519.5851456556596, rel=1e-12),
        pytest.approx(585.9235295703061, rel=1e-12),
    )


def test_floor_stays_below_applicable_ceiling():
    for nu in (0.005, 0.01, 0.02, 0.03):
        for beta in (1e-4, 1e-3):
            p = preset_model(nu, beta)
            level = 8.0 * critical_release_level(p).level
            ceiling = entry_time_ceiling(p, level)
            if ceiling.applicable:
                assert entry_time_floor(p) < ceiling.value


# ══════════════════════════════════════════════════════════════════════
# Simulated entrance at a frozen level
# ══════════════════════════════════════════════════════════════════════


@pytest.fixture(scope="module")
def base_cloud():
    p = preset_model(0.005, 1e-4)
    return p, build_cloud(p, mesh_n=16, eps=1e-2)


def test_entry_time_simulated_frozen_value(base_cloud):
    p, cloud = base_cloud
    level = 2.0 * critical_release_level(p).level
    assert entry_time_simulated(p, level, cloud) == pytest.approx(281.9, abs=1e-9)


def test_entry_time_is_mesh_independent(base_cloud):
    # The cloud only supplies a stopping bound; the refined entry step is
    # certified directly, so a coarser cloud yields the same time.
    p, cloud = base_cloud
    coarse = build_cloud(p, mesh_n=8, eps=1e-2)
    level = 2.0 * critical_release_level(p).level
    assert entry_time_simulated(p, level, coarse) == entry_time_simulated(
        p, level, cloud
    )


def test_entry_time_decreases_with_level(base_cloud):
    p, cloud = base_cloud
    crit = critical_release_level(p).level
    times = [
        entry_time_simulated(p, m * crit, cloud) for m in (1.5, 2.0, 4.0, 8.0)
    ]
    assert all(a > b for a, b in zip(times, times[1:]))


def test_entry_time_simulated_brackets(base_cloud):
    p, cloud = base_cloud
    level = 8.0 * critical_release_level(p).level
    t = entry_time_simulated(p, level, cloud)
    assert entry_time_floor(p) <= t
    ceiling = entry_time_ceiling(p, level)
    assert ceiling.applicable and t <= ceiling.value


def test_entry_never_happens_below_critical_level(base_cloud):
    p, cloud = base_cloud
    level = 0.5 * critical_release_level(p).level
    short = nsfd_scheme(p, dt=0.1, max_steps=20_000, dynamic_release_pool=False)
    with pytest.raises(NeverEnteredError):
        entry_time_simulated(p, level, cloud, scheme=short)


def test_entry_rejects_cloud_at_wrong_level(base_cloud):
    p, _ = base_cloud
    lifted = build_cloud(p, level=100.0, mesh_n=4)
    with pytest.raises(InvalidParameterError):
        entry_time_simulated(p, 2.0 * critical_release_level(p).level, lifted)


# ══════════════════════════════════════════════════════════════════════
# Entrance under live schedules
# ══════════════════════════════════════════════════════════════════════


def test_entrance_pulsed_program_frozen_report(base_cloud):
    p, cloud = base_cloud
    target = 5106.0
    report = entrance_time_controlled(
        ImpulsiveRelease(amount=8.0 * target, period=7.0), p, cloud
    )
    assert report.entry_time == pytest.approx(258.7, abs=1e-9)
    assert report.releases_made == 36  # floor(258.7 / 7)
    assert report.effort_ratio == pytest.approx(288.0, rel=1e-12)
    assert report.female_ratio == pytest.approx(0.208449, abs=1e-6)


def test_entrance_constant_rate_frozen_report(base_cloud):
    p, cloud = base_cloud
    crit = critical_release_level(p).level
    rate = 3.0 * crit * p.sterile_death_rate
    report = entrance_time_controlled(ConstantRelease(rate=rate), p, cloud)
    assert report.entry_time == pytest.approx(211.8, abs=1e-9)
    assert report.releases_made == 0
    assert report.effort_ratio == pytest.approx(
        rate * report.entry_time / 5106.0, rel=1e-9
    )
    assert report.effort_ratio == pytest.approx(309.045, abs=1e-3)
    assert report.female_ratio == pytest.approx(0.224683, abs=1e-6)


def test_entrance_without_diagnostic_reports_nan(base_cloud):
    p, cloud = base_cloud
    report = entrance_time_controlled(
        ImpulsiveRelease(amount=8.0 * 5106.0, period=7.0),
        p,
        cloud,
        with_diagnostic=False,
    )
    assert report.entry_time == pytest.approx(258.7, abs=1e-9)
    assert math.isnan(report.female_ratio)


def test_entrance_weak_program_never_enters(base_cloud):
    p, cloud = base_cloud
    scheme = nsfd_scheme(p, dt=0.1, max_steps=20_000)
    with pytest.raises(NeverEnteredError):
        entrance_time_controlled(
            ImpulsiveRelease(amount=0.5 * 5106.0, period=7.0),
            p,
            cloud,
            scheme=scheme,
        )


# ══════════════════════════════════════════════════════════════════════
# Two-stage feasibility predicate
# ══════════════════════════════════════════════════════════════════════


def test_two_step_feasible_monotone_in_level():
    p = preset_model(0.005, 1e-4)
    crit = critical_release_level(p).level
    seen_true = False
    for level in (1.0, 10.0, 100.0, 1e3, 0.5 * crit, crit, 10.0 * crit):
        flag = two_step_feasible(p, level)
        if seen_true:
            assert flag  # once feasible, stays feasible as level grows
        seen_true = seen_true or flag
    assert not two_step_feasible(p, 1.0)
    assert two_step_feasible(p, 0.5 * crit)
