import cmath
import math

import numpy as np
import pytest

from jerkseg import JerkProfile, derive_params, plan_segment, verify_segment
from jerkseg.errors import DegenerateVector, PlanningFailed, ValidationError
from jerkseg.planner import (
    closure_tolerance,
    coefficients,
    detect_overshoot,
    ell_m1,
    ell_m2_bar,
    evaluate,
    length_error,
    line_search,
    match_angle,
    wrap_below,
)
from jerkseg.switching import SwitchingStructure

J = 800.0


def test_coefficients():
    assert coefficients(1) == (1, -2, 2, -1)
    assert coefficients(2) == (1, -2, 2, -2, 2, -1)
    assert sum(coefficients(3)) == 0


def test_ell_m1_examples():
    assert abs(ell_m1(2 * math.pi, 0.0)) < 1e-15
    assert ell_m1(math.pi, 0.0) == pytest.approx(2.0)


def test_ell_m2_bar_examples():
    s = SwitchingStructure(1, 0.5, (0.0, 0.0), 0.0)
    assert ell_m2_bar(1.0, s, 0.0) == 0
    s = SwitchingStructure(1, 0.5, (math.pi, 0.0), 0.0)
    assert ell_m2_bar(4.0, s, 0.0) == pytest.approx(-4.0)


def test_wrap_below():
    assert wrap_below(3.0, 3.0) == 3.0
    assert wrap_below(3.1, 3.0) == pytest.approx(3.1 - 2 * math.pi)
    for psi in np.linspace(-20, 20, 41):
        w = wrap_below(float(psi), 3.0)
        assert 3.0 - 2 * math.pi < w <= 3.0


def test_match_angle_degenerate():
    s = SwitchingStructure(1, 0.5, (0.0, 0.0), 0.0)
    with pytest.raises(DegenerateVector):
        match_angle(1.0, s, 0.0)


def test_table1_segment(table1):
    dp = derive_params(table1)
    seg = plan_segment(table1, 20.0, J)
    assert 0.025 <= seg.t_f < 0.025 + math.pi / dp.omega_d
    assert seg.n == 4 and seg.n_el == 1
    assert seg.coeffs == (1, -2, 2, -1)
    assert seg.times[0] == 0.0 and seg.times[-1] == seg.t_f
    assert all(b > a for a, b in zip(seg.times, seg.times[1:]))
    assert seg.closure_residual() < 1e-8
    # j t_f - 2 j dt_abs = a_max
    dt_abs = seg.structure.delta_phi_abs / dp.omega_d
    assert J * seg.t_f - 2 * J * dt_abs == pytest.approx(20.0, abs=1e-9)
    assert verify_segment(seg, table1).passed


def test_polygon_lengths_match(table1):
    dp = derive_params(table1)
    seg = plan_segment(table1, 20.0, J)
    m1 = ell_m1(seg.phi_f, dp.p1)
    m2 = ell_m2_bar(seg.phi_f, seg.structure, dp.p1)
    psi = match_angle(seg.phi_f, seg.structure, dp.p1)
    assert abs(m1) == pytest.approx(abs(cmath.exp(complex(dp.p1, 1) * psi) * m2), abs=1e-9)
    assert abs(length_error(seg.phi_f, dp.omega_d * 20 / J, dp.p1)) < 1e-9


def test_last_switch_is_switching_zero(table1):
    dp = derive_params(table1)
    seg = plan_segment(table1, 20.0, J)
    rep = verify_segment(seg, table1)
    phi = seg.angles[-2] + rep.shift
    assert abs(math.exp(dp.p1 * phi) * math.sin(phi) - rep.C1) < 1e-12


def test_distinct_roots(table1):
    dp = derive_params(table1)
    s20 = plan_segment(table1, 20.0, J)
    s40 = plan_segment(table1, 40.0, J)
    assert s20.phi_f != s40.phi_f
    for a, s in ((20, s20), (40, s40)):
        assert a / J <= s.t_f < a / J + math.pi / dp.omega_d


def test_small_acceleration_limit(table1):
    prev = math.inf
    for a in (1e-2, 1e-4, 1e-6, 1e-8):
        seg = plan_segment(table1, a, J)
        assert seg.t_f < prev
        assert verify_segment(seg, table1).terminal_ok
        prev = seg.t_f
    assert prev < 1e-4


def test_invalid_inputs(table1):
    with pytest.raises(ValidationError):
        plan_segment(table1, 0.0, J)
    with pytest.raises(ValidationError):
        plan_segment(table1, 20.0, -1.0)
    with pytest.raises(ValidationError):
        plan_segment(table1, 20.0, J, 0)


@pytest.mark.parametrize("n_iter", [1, 7, 18, 30, 48, 60])
def test_exact_evaluation_count(table1, n_iter, monkeypatch):
    import jerkseg.planner as planner

    calls = []
    real = planner.evaluate
    monkeypatch.setattr(planner, "evaluate", lambda *a, **k: calls.append(1) or real(*a, **k))
    seg = plan_segment(table1, 20.0, J, n_iter)
    assert len(calls) == n_iter == seg.n_evaluations


def test_bit_identical(table1):
    a = plan_segment(table1, 17.3, J)
    b = plan_segment(table1, 17.3, J)
    assert a.times == b.times and a.t_f == b.t_f and a.history == b.history


def test_single_precision_history(table1):
    dp = derive_params(table1)
    _, hist, count = line_search(dp.omega_d * 20 / J, dp.p1, 40, single_precision=True)
    assert count == 40
    assert all(float(np.float32(h)) == h for h in hist)
    # a float32 angle near 5 rad cannot move by less than half an ulp
    assert hist[-1] == hist[30]
    seg = plan_segment(table1, 20.0, J, 18, single_precision=True)
    assert seg.closure_residual() < closure_tolerance(seg.phi_f, 18, True)


def test_short_search_is_coarse_but_valid(table1):
    seg = plan_segment(table1, 20.0, J, 18)
    ref = plan_segment(table1, 20.0, J)
    assert abs(seg.t_f - ref.t_f) < math.pi * 2.0**-17 / derive_params(table1).omega_d


def test_force_single(table1):
    plant = table1.with_damping(0.0)
    multi = plan_segment(plant, 36.0, J)
    single = plan_segment(plant, 36.0, J, force_single=True)
    assert multi.n_el == 2 and single.n_el == 1
    assert single.t_f >= multi.t_f
    rep = verify_segment(single, plant)
    # feasible, but not extremal: the switching law calls for a second section
    assert rep.terminal_ok and not rep.sign_pattern_ok


def test_precompute_matches(table1):
    plant = table1.with_damping(250.0)
    for a in (10.0, 36.0):
        exact = plan_segment(plant, a, J)
        fast = plan_segment(plant, a, J, precompute=True)
        assert fast.n_el == exact.n_el
        assert fast.t_f == pytest.approx(exact.t_f, rel=1e-6)
        assert verify_segment(fast, plant).terminal_ok


def test_multi_section_segments_verify(table1):
    for d in (922.0, 500.0, 0.0):
        plant = table1.with_damping(d)
        seg = plan_segment(plant, 30.0, J)
        rep = verify_segment(seg, plant)
        assert seg.n_el == 2 and rep.passed
        assert seg.n == 2 * seg.n_el + 2


def test_planning_near_section_flip(table1):
    # the count flips here; the planner must still close the polygon
    plant = table1.with_damping(922.1678972244263)
    seg = plan_segment(plant, 30.0, J)
    assert seg.closure_residual() < 1e-8
    assert verify_segment(seg, plant).passed


def test_verify_detects_open_polygon(table1):
    seg = plan_segment(table1, 20.0, J)
    broken = JerkProfile(seg.times, (J, -2 * J, 2.5 * J, -J))
    rep = verify_segment(seg, table1, profile=broken)
    assert not rep.terminal_ok


def test_sign_pattern_table1(table1):
    seg = plan_segment(table1, 20.0, J)
    prof = seg.profile()
    t = seg.times
    mids = [(t[i] + t[i + 1]) / 2 for i in range(3)]
    assert list(np.sign(prof.jerk_at(np.array(mids)))) == [1, -1, 1]
    assert verify_segment(seg, table1).sign_pattern_ok


def test_overshoot(table1):
    assert not plan_segment(table1, 40.0, J).overshoot.exceeds
    flagged = plan_segment(table1, 32.0, J).overshoot
    assert flagged.exceeds and flagged.max_accel > 32.0
    rep = detect_overshoot(plan_segment(table1, 20.0, J), table1)
    assert rep.max_accel >= 20.0 - 1e-9
    assert rep.argmax_t == pytest.approx(plan_segment(table1, 20.0, J).t_f)


def test_planning_failed_on_missing_root(table1, monkeypatch):
    import jerkseg.planner as planner
    from jerkseg.planner import Evaluation

    def no_root(phi, *args, **kwargs):
        ev = evaluate(phi, *args, **kwargs)
        return Evaluation(ev.phi_f, ev.structure, ev.phi_last, 1.0)

    monkeypatch.setattr(planner, "evaluate", no_root)
    with pytest.raises(PlanningFailed):
        plan_segment(table1, 20.0, J)
