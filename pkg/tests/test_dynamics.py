"""Difference scheme, right-hand sides, simulation driver, backends."""

from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import preset_model

from sitdyn import (
    COMPILED,
    ConstantRelease,
    ImpulsiveRelease,
    InvalidParameterError,
    StopReason,
    nsfd_scheme,
    simulate,
    steady_states,
)
from sitdyn.dynamics import (
    nsfd_step,
    pack_params,
    reference_integrate,
    rhs_controlled,
    rhs_reduced,
    rhs_tracked,
)

# ══════════════════════════════════════════════════════════════════════
# Parameter packing and scheme construction
# ══════════════════════════════════════════════════════════════════════


def test_pack_params_frozen_layout():
    p = preset_model(0.005, 1e-4)
    v = pack_params(p)
    expected = np.array(
        [
            p.egg_lay_rate,
            p.capacity,
            p.female_fraction,
            p.egg_maturation_rate,
            p.egg_death_rate,
            p.male_death_rate,
            p.female_death_rate,
            p.mate_encounter_rate,
            p.sterile_competitiveness,
            p.sterile_death_rate,
        ]
    )
    assert v.dtype == np.float64
    np.testing.assert_array_equal(v, expected)


def test_scheme_weight_frozen_values():
    p = preset_model(0.005, 1e-4)
    dyn = nsfd_scheme(p, dt=0.1)
    assert dyn.max_loss_rate == pytest.approx(0.12, abs=0.0)
    assert dyn.step_weight == pytest.approx(0.0994023928172455, rel=1e-14)
    pinned = nsfd_scheme(p, dt=0.1, dynamic_release_pool=False)
    assert pinned.max_loss_rate == pytest.approx(0.1, abs=0.0)
    assert pinned.step_weight == pytest.approx(0.09950166250831949, rel=1e-14)
    # Closed form: (1 − e^{−q·dt}) / q, strictly below both dt and 1/q.
    for s in (dyn, pinned):
        assert s.step_weight == pytest.approx(
            -math.expm1(-s.max_loss_rate * s.dt) / s.max_loss_rate, rel=1e-15
        )
        assert 0.0 < s.step_weight < min(s.dt, 1.0 / s.max_loss_rate)


def test_scheme_rejects_nonpositive_step():
    with pytest.raises(InvalidParameterError):
        nsfd_scheme(preset_model(), dt=0.0)


# ══════════════════════════════════════════════════════════════════════
# Right-hand sides
# ══════════════════════════════════════════════════════════════════════


def test_rhs_vanishes_at_steady_states():
    p = preset_model(0.005, 1e-4)
    ss = steady_states(p)
    for st in (ss.threshold, ss.wild):
        s = (st.eggs, st.males, st.females)
        np.testing.assert_allclose(
            rhs_reduced(s, 0.0, p), 0.0, atol=1e-9
        )


def test_rhs_controlled_balances_maintained_pool():
    # Holding the released pool at level L with inflow u = μ_i·L leaves
    # that compartment stationary; the other three then match the
    # pinned-pool right-hand side.
    p = preset_model(0.005, 1e-4)
    level = 5000.0
    u = p.sterile_death_rate * level
    s4 = (1e5, 3000.0, level, 2000.0)
    d4 = rhs_controlled(s4, u, p)
    assert d4[2] == pytest.approx(0.0, abs=1e-12)
    d3 = rhs_reduced((s4[0], s4[1], s4[3]), level, p)
    np.testing.assert_allclose(d4[[0, 1, 3]], d3, rtol=1e-12)


def test_rhs_tracked_extends_controlled():
    p = preset_model(0.005, 1e-4)
    s5 = (1e5, 3000.0, 4000.0, 2000.0, 500.0)
    d5 = rhs_tracked(s5, 7.0, p)
    d4 = rhs_controlled(s5[:4], 7.0, p)
    np.testing.assert_allclose(d5[:4], d4, rtol=1e-14)
    # The diagnostic compartment gathers the matings lost to sterile
    # males: total female recruitment splits between the two pools.
    total = p.female_fraction * p.egg_maturation_rate * s5[0]
    assert d5[3] + d5[4] == pytest.approx(
        total - p.female_death_rate * (s5[3] + s5[4]), rel=1e-12
    )


# ══════════════════════════════════════════════════════════════════════
# Scheme step: positivity, monotonicity, consistency
# ══════════════════════════════════════════════════════════════════════


def _random_states(rng, n):
    p = preset_model(0.005, 1e-4)
    states = np.empty((n, 4))
    states[:, 0] = rng.uniform(0.0, p.capacity, n)
    states[:, 1] = rng.uniform(0.0, 2e4, n)
    states[:, 2] = rng.uniform(0.0, 2e4, n)
    states[:, 3] = rng.uniform(0.0, 2e4, n)
    return p, states


def test_step_preserves_positivity_and_egg_cap():
    rng = np.random.default_rng(42)
    p, states = _random_states(rng, 60)
    for dt in (0.1, 1.0, 10.0):
        scheme = nsfd_scheme(p, dt=dt)
        for s in states:
            out = nsfd_step(s, 12.0, scheme, p)
            assert np.all(out >= 0.0)
            assert out[0] <= p.capacity * (1.0 + 1e-12)


def test_step_preserves_componentwise_order():
    rng = np.random.default_rng(43)
    p, lower = _random_states(rng, 40)
    upper = lower + rng.uniform(0.0, 1e3, lower.shape)
    upper[:, 0] = np.minimum(upper[:, 0], p.capacity)
    scheme = nsfd_scheme(p, dt=1.0)
    for a, b in zip(lower, upper):
        # Order preservation holds within the three wild compartments at
        # a shared released-male level.
        a2, b2 = a.copy(), b.copy()
        b2[2] = a2[2]
        out_a = nsfd_step(a2, 0.0, scheme, p, freeze_release_pool=True)
        out_b = nsfd_step(b2, 0.0, scheme, p, freeze_release_pool=True)
        assert np.all(out_a <= out_b * (1.0 + 1e-12))


def test_step_fixed_points_are_steady_states():
    p = preset_model(0.005, 1e-4)
    ss = steady_states(p)
    scheme = nsfd_scheme(p, dt=0.1, dynamic_release_pool=False)
    for st in (ss.threshold, ss.wild):
        s = np.array([st.eggs, st.males, 0.0, st.females])
        out = nsfd_step(s, 0.0, scheme, p, freeze_release_pool=True)
        np.testing.assert_allclose(out, s, rtol=1e-9)


def test_step_matches_reference_integrator_at_small_dt():
    p = preset_model(0.005, 1e-4)
    u = 50.0
    s0 = np.array([1e5, 3000.0, 1000.0, 2500.0])
    horizon = 100.0
    dt = 1e-3
    scheme = nsfd_scheme(p, dt=dt)
    x = s0.copy()
    for _ in range(round(horizon / dt)):
        x = nsfd_step(x, u, scheme, p)
    ref = reference_integrate(
        lambda s, t: rhs_controlled(s, u, p), s0, horizon, tol=1e-10
    )
    np.testing.assert_allclose(x, ref.final_state, rtol=1e-3)


def test_step_rejects_bad_state_length():
    p = preset_model()
    scheme = nsfd_scheme(p)
    with pytest.raises(ValueError):
        nsfd_step((1.0, 2.0, 3.0), 0.0, scheme, p)


# ══════════════════════════════════════════════════════════════════════
# Simulation driver
# ══════════════════════════════════════════════════════════════════════


def test_simulate_records_pulse_before_sampling():
    p = preset_model(0.005, 1e-4)
    scheme = nsfd_scheme(p, dt=0.1)
    sched = ImpulsiveRelease(amount=1234.0, period=7.0, count=2)
    traj = simulate((1e5, 3000.0, 0.0, 2500.0), sched, scheme, p, horizon=10.0)
    # The first pulse fires at t = 0 and is visible in the first sample.
    assert traj.states[0, 2] == pytest.approx(1234.0)
    # The second pulse lands at t = 7: the pool jumps relative to the
    # preceding sample instead of continuing its decay.
    i = int(np.searchsorted(traj.times, 7.0))
    assert traj.times[i] == pytest.approx(7.0)
    assert traj.states[i, 2] > traj.states[i - 1, 2]
    pulse_times = [t for t, kind in traj.events if kind == "release-pulse"]
    assert pulse_times == [pytest.approx(0.0), pytest.approx(7.0)]


def test_simulate_stop_condition_and_reasons():
    p = preset_model(0.005, 1e-4)
    scheme = nsfd_scheme(p, dt=0.1)
    run = simulate((1e5, 3000.0, 0.0, 2500.0), None, scheme, p, horizon=5.0)
    assert run.reason is StopReason.HORIZON
    assert run.times[-1] == pytest.approx(5.0)

    stopped = simulate(
        (1e5, 3000.0, 0.0, 2500.0),
        ConstantRelease(rate=0.0),
        scheme,
        p,
        horizon=5.0,
        stop=lambda t, s: t >= 1.0,
    )
    assert stopped.reason is StopReason.CONDITION
    assert stopped.times[-1] == pytest.approx(1.0)

    short = nsfd_scheme(p, dt=0.1, max_steps=7)
    capped = simulate((1e5, 3000.0, 0.0, 2500.0), None, short, p)
    assert capped.reason is StopReason.MAX_STEPS
    assert len(capped.times) == 8  # initial sample plus the step budget


def test_simulate_record_every_keeps_endpoints():
    p = preset_model(0.005, 1e-4)
    scheme = nsfd_scheme(p, dt=0.1)
    traj = simulate(
        (1e5, 3000.0, 0.0, 2500.0), None, scheme, p,
        horizon=1.05, record_every=4,
    )
    assert traj.times[0] == 0.0
    # 1.05 days at dt = 0.1 rounds to 10 steps; the final step is kept
    # even though it is not a multiple of the thinning factor.
    assert traj.times[-1] == pytest.approx(1.0)
    assert np.all(np.diff(traj.times) > 0.0)


def test_simulate_freeze_rejects_active_schedule():
    p = preset_model()
    scheme = nsfd_scheme(p, dynamic_release_pool=False)
    with pytest.raises(ValueError):
        simulate(
            (1.0, 1.0, 1.0, 1.0),
            ImpulsiveRelease(amount=1.0, period=7.0),
            scheme,
            p,
            horizon=1.0,
            freeze_release_pool=True,
        )
    # A zero-rate constant schedule is equivalent to no schedule.
    ok = simulate(
        (1.0, 1.0, 5.0, 1.0),
        ConstantRelease(rate=0.0),
        scheme,
        p,
        horizon=1.0,
        freeze_release_pool=True,
    )
    np.testing.assert_array_equal(ok.states[:, 2], 5.0)


def test_simulate_rejects_negative_initial_state():
    p = preset_model()
    with pytest.raises(InvalidParameterError):
        simulate((-1.0, 0.0, 0.0, 0.0), None, nsfd_scheme(p), p, horizon=1.0)


def test_trajectory_csv_roundtrip(tmp_path):
    p = preset_model(0.005, 1e-4)
    scheme = nsfd_scheme(p, dt=0.1)
    traj = simulate((1e5, 3000.0, 0.0, 2500.0), None, scheme, p, horizon=2.0)
    out = tmp_path / "run.csv"
    traj.to_csv(out)
    header = out.read_text().splitlines()[0]
    assert header == "t," + ",".join(traj.columns)
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 0], traj.times, rtol=1e-9)
    np.testing.assert_allclose(data[:, 1:], traj.states, rtol=1e-9)


# ══════════════════════════════════════════════════════════════════════
# Backend parity
# ══════════════════════════════════════════════════════════════════════


@pytest.mark.skipif(not COMPILED, reason="compiled backend not built")
def test_compiled_and_fallback_backends_agree():
    from sitdyn import _backend, _fallback

    assert _backend is not _fallback
    p = preset_model(0.005, 1e-4)
    pv = pack_params(p)
    scheme = nsfd_scheme(p, dt=0.1)
    rng = np.random.default_rng(7)
    for _ in range(25):
        s = np.abs(rng.normal(1e4, 5e3, 5))
        s[0] = min(s[0], p.capacity)
        for mi_dynamic in (True, False):
            a = s.copy()
            b = s.copy()
            _backend.run_steps(a, 50, 12.0, scheme.step_weight, pv, mi_dynamic)
            _fallback.run_steps(b, 50, 12.0, scheme.step_weight, pv, mi_dynamic)
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
