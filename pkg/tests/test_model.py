import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jerkseg import JerkProfile, StateVector, SystemParams, derive_params
from jerkseg.errors import GridTooLarge, NonPositiveParameter, NotUnderdamped, ValidationError
from jerkseg.model import (
    KinematicLimits,
    base_response,
    sample_trajectory,
    slider_response,
    state_derivative,
    state_matrices,
    step_response,
    time_grid,
)
from jerkseg.verify import rk4_integrate


def test_derived_table1(table1):
    dp = derive_params(table1)
    assert dp.delta == pytest.approx(5e3 / (2 * 525))
    assert dp.omega_d == pytest.approx(168.96, abs=0.01)
    assert dp.p1 == pytest.approx(0.02818, abs=1e-5)
    assert dp.fd == pytest.approx(26.8914, abs=1e-3)


@pytest.mark.parametrize("kw", [dict(m_s=0), dict(m_b=-1), dict(k=0), dict(d=-1), dict(k=math.nan)])
def test_non_positive_rejected(kw):
    base = dict(m_s=25.0, m_b=500.0, k=15e6, d=5e3)
    base.update(kw)
    with pytest.raises(NonPositiveParameter):
        SystemParams(**base)


def test_overdamped_rejected():
    with pytest.raises(NotUnderdamped):
        SystemParams(1.0, 1.0, 1.0, 10.0)
    # exactly critical is not underdamped either
    with pytest.raises(NotUnderdamped):
        SystemParams(1.0, 1.0, 1.0, 2.0 * math.sqrt(2.0))


def test_limits_validation():
    KinematicLimits(1.5, 20, 800)
    with pytest.raises(ValidationError):
        KinematicLimits(1.5, 0, 800)


def test_profile_validation():
    with pytest.raises(ValidationError):
        JerkProfile((0.0, 0.0), (1.0, -1.0))
    with pytest.raises(ValidationError):
        JerkProfile((-1.0,), (1.0,))
    with pytest.raises(ValidationError):
        JerkProfile((0.0, 1.0), (1.0,))
    with pytest.raises(ValidationError):
        JerkProfile((0.0, 1.0), (900.0, -900.0), j_lim=800.0)
    assert JerkProfile((0.0, 1.0), (800.0, -800.0), j_lim=800.0).closed


def test_slider_single_step():
    prof = JerkProfile((0.5,), (2.0,))
    z, zd, zdd = slider_response(prof, 1.5)
    assert (z, zd, zdd) == pytest.approx((2.0 / 6.0, 1.0, 2.0))
    # before the step nothing moves, and the step instant itself counts
    assert slider_response(prof, 0.25) == (0.0, 0.0, 0.0)
    assert slider_response(prof, 0.5) == (0.0, 0.0, 0.0)
    assert prof.jerk_at(0.5) == 2.0


def test_slider_initial_conditions():
    prof = JerkProfile((), (), z0=1.0, z_dot0=2.0, z_ddot0=3.0)
    assert slider_response(prof, 2.0) == pytest.approx((1 + 4 + 6, 2 + 6, 3))


def test_zero_input_gives_zero_state(table1):
    dp = derive_params(table1)
    traj = rk4_integrate(dp, JerkProfile((), ()), 1e-3, 0.05)
    assert np.all(traj.states == 0.0)


def test_static_deflection_sign(table1):
    dp = derive_params(table1)
    assert dp.static_deflection(20.0) == pytest.approx(-20.0 * 25.0 / 15e6)


def test_step_response_derivatives(table1):
    # central differences of each closed form match the next derivative
    dp = derive_params(table1)
    tau = np.linspace(0.001, 0.1, 50)
    h = 1e-7
    up = step_response(tau + h, dp)
    dn = step_response(tau - h, dp)
    mid = step_response(tau, dp)
    for k in range(3):
        fd = (up[k] - dn[k]) / (2 * h)
        assert np.allclose(fd, mid[k + 1], rtol=1e-5, atol=1e-6 * np.max(np.abs(mid[k + 1])))


def test_step_response_at_zero(table1):
    dp = derive_params(table1)
    x, xd, xdd, xddd = step_response(0.0, dp)
    assert abs(x) < 1e-20 and abs(xd) < 1e-18 and abs(xdd) == 0.0
    # first nonzero derivative: x''' = -m_s/m_g times the jerk step
    assert xddd == pytest.approx(-dp.m_ratio)


def test_state_derivative_matches_matrices(table1):
    dp = derive_params(table1)
    A, b = state_matrices(dp)
    s = StateVector(1e-5, 2e-3, 0.1, 0.2, 3.0)
    d = state_derivative(s, 7.0, dp)
    assert np.allclose(d.as_array(), A @ s.as_array() + b * 7.0)


def test_base_response_rejects_initial_accel(table1):
    with pytest.raises(ValidationError):
        base_response(JerkProfile((), (), z_ddot0=1.0), 0.1, derive_params(table1))


def test_time_grid():
    t = time_grid(0.1, 0.35)
    assert t[0] == 0.0 and t[-1] == 0.35 and len(t) == 5
    assert len(time_grid(0.1, 0.0)) == 1
    with pytest.raises(GridTooLarge):
        time_grid(1e-9, 1.0, max_rows=1000)
    with pytest.raises(ValidationError):
        time_grid(0.0, 1.0)


profiles = st.lists(
    st.tuples(st.floats(0.0, 0.04), st.sampled_from([-800.0, -400.0, 400.0, 800.0])),
    min_size=1,
    max_size=6,
    unique_by=lambda s: round(s[0], 9),
)


@settings(max_examples=40, deadline=None)
@given(steps=profiles, c=st.floats(0.5, 2.0))
def test_linearity(steps, c, table1):
    dp = derive_params(table1)
    prof = JerkProfile.from_steps(sorted(steps))
    t = np.linspace(0.0, 0.06, 31)
    a = np.array(base_response(prof, t, dp))
    b = np.array(base_response(prof.scaled(c), t, dp))
    assert np.allclose(b, c * a, rtol=1e-12, atol=1e-22)
    za = np.array(slider_response(prof, t))
    zb = np.array(slider_response(prof.scaled(c), t))
    assert np.allclose(zb, c * za, rtol=1e-12, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(steps=profiles)
def test_rk4_agrees_with_closed_form(steps, table1):
    dp = derive_params(table1)
    prof = JerkProfile.from_steps(sorted(steps))
    rk = rk4_integrate(dp, prof, 1e-5, 0.05)
    ref = sample_trajectory(prof, 1e-5, 0.05, dp)
    scale = np.maximum(np.max(np.abs(ref.states), axis=0), 1e-300)
    err = np.max(np.abs(rk.states - ref.states), axis=0) / scale
    assert np.all(err < 1e-6)


def test_sampled_trajectory_columns(table1):
    dp = derive_params(table1)
    prof = JerkProfile((0.0, 0.01), (800.0, -800.0))
    tr = sample_trajectory(prof, 1e-3, 0.02, dp)
    assert len(tr) == 21
    assert np.allclose(tr.column("z_ddot"), tr.states[:, 4])
    assert tr.rows[-1].z_ddot == pytest.approx(8.0)
