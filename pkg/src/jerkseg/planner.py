"""Time-optimal jerk segments via a bounded line search on the terminal angle.

For a trial terminal angle the switching structure fixes every interior
switch up to one common shift.  The shift is chosen so that the two sides of
the closure polygon are parallel, and the remaining squared-length mismatch
drives a fixed-count bisection on ``[a*_max, a*_max + pi]``.

Segments start and end with positive jerk: normalized amplitudes are
``+1, -2, +2, ..., -2, +2, -1``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateVector, PlanningFailed, ValidationError
from .model import (
    DerivedParams,
    JerkProfile,
    SystemParams,
    base_response,
    derive_params,
    slider_response,
)
from .switching import (
    StructureTable,
    SwitchingStructure,
    solve_structure,
)

DEFAULT_N_ITER = 48
SINGLE_PRECISION_N_ITER = 18
CLOSURE_TOL = 1e-8
TERMINAL_TOL = 1e-9
OVERSHOOT_REL = 1e-12
MIN_VECTOR = 1e-14


def coefficients(n_el: int) -> tuple[float, ...]:
    interior = []
    for i in range(2, 2 * n_el + 2):
        interior.append(-2.0 if i % 2 == 0 else 2.0)
    return (1.0, *interior, -1.0)


def ell_m1(phi_f: float, p1: float) -> complex:
    return 1.0 - cmath.exp(complex(p1, 1.0) * phi_f)


def ell_m2_bar(phi_f: float, s: SwitchingStructure, p1: float) -> complex:
    coeffs = coefficients(s.n_el)[1:-1]
    w = complex(p1, 1.0)
    return -sum(a * cmath.exp(-w * d) for a, d in zip(coeffs, s.delta_phi))


def wrap_below(psi_bar: float, phi_f: float) -> float:
    """Largest representative of ``psi_bar`` modulo 2 pi not exceeding ``phi_f``."""
    two_pi = 2.0 * math.pi
    return psi_bar + two_pi * math.floor((phi_f - psi_bar) / two_pi)


def match_angle(phi_f: float, s: SwitchingStructure, p1: float) -> float:
    l1 = ell_m1(phi_f, p1)
    l2 = ell_m2_bar(phi_f, s, p1)
    if abs(l1) < MIN_VECTOR or abs(l2) < MIN_VECTOR:
        raise DegenerateVector(f"|l_m1|={abs(l1)!r}, |l_m2_bar|={abs(l2)!r}")
    return wrap_below(cmath.phase(l1) - cmath.phase(l2), phi_f)


@dataclass(frozen=True)
class Evaluation:
    """Everything computed for one trial terminal angle."""

    phi_f: float
    structure: SwitchingStructure
    phi_last: float
    error: float


def evaluate(
    phi_f: float,
    a_max_star: float,
    p1: float,
    structure_fn: Callable[[float], SwitchingStructure] | None = None,
    max_sections: int | None = None,
) -> Evaluation:
    if structure_fn is None:
        s = solve_structure(phi_f, a_max_star, p1, max_sections=max_sections)
    else:
        s = structure_fn(phi_f)
    l1 = ell_m1(phi_f, p1)
    l2 = ell_m2_bar(phi_f, s, p1)
    if abs(l2) < MIN_VECTOR:
        # coincident interior switches: nothing to match, the triangle side wins
        return Evaluation(phi_f, s, phi_f, abs(l1) ** 2)
    if abs(l1) < MIN_VECTOR:
        return Evaluation(phi_f, s, phi_f, -abs(l2) ** 2 * math.exp(2.0 * p1 * phi_f))
    psi = wrap_below(cmath.phase(l1) - cmath.phase(l2), phi_f)
    err = abs(l1) ** 2 - math.exp(2.0 * p1 * psi) * abs(l2) ** 2
    return Evaluation(phi_f, s, psi, err)


def length_error(phi_f: float, a_max_star: float, p1: float, **kwargs) -> float:
    return evaluate(phi_f, a_max_star, p1, **kwargs).error


@dataclass(frozen=True)
class OvershootReport:
    max_accel: float
    exceeds: bool
    argmax_t: float


@dataclass(frozen=True)
class JerkSegment:
    a_max: float
    j_max: float
    t_f: float
    phi_f: float
    times: tuple[float, ...]
    coeffs: tuple[float, ...]
    structure: SwitchingStructure
    overshoot: OvershootReport
    omega_d: float
    p1: float
    n_evaluations: int = 0
    history: tuple[float, ...] = field(default=(), repr=False)
    orientation: str = "decrease-on-negative"

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def n_el(self) -> int:
        return self.structure.n_el

    @property
    def angles(self) -> tuple[float, ...]:
        return tuple(t * self.omega_d for t in self.times)

    def profile(self) -> JerkProfile:
        """Jerk steps with coincident switch instants merged."""
        merged: list[list[float]] = []
        for t, a in zip(self.times, self.coeffs):
            if merged and t <= merged[-1][0]:
                merged[-1][1] += a * self.j_max
            else:
                merged.append([t, a * self.j_max])
        steps = [(t, a) for t, a in merged if a != 0.0]
        return JerkProfile.from_steps(steps)

    def closure_residual(self) -> float:
        w = complex(self.p1, 1.0)
        return abs(sum(a * cmath.exp(w * phi) for a, phi in zip(self.coeffs, self.angles)))


def _f32(x) -> float:
    return float(np.float32(x))


def line_search(
    a_max_star: float,
    p1: float,
    n_iter: int,
    single_precision: bool = False,
    structure_fn: Callable[[float], SwitchingStructure] | None = None,
    max_sections: int | None = None,
) -> tuple[Evaluation, list[float], int]:
    """Fixed-count bisection on the terminal angle.

    Returns the last evaluation, the trial angle after every update and the
    number of error evaluations (always ``n_iter``).
    """
    if n_iter < 1:
        raise ValidationError("n_iter must be at least 1")
    span = math.pi
    if single_precision:
        phi_min = _f32(a_max_star)
        span = _f32(span)
        phi_try = _f32(phi_min + _f32(0.5 * span))
    else:
        phi_min = a_max_star
        phi_try = phi_min + 0.5 * span
    history = [phi_try]
    last: Evaluation | None = None
    count = 0
    for it in range(2, n_iter + 2):
        last = evaluate(phi_try, a_max_star, p1, structure_fn, max_sections)
        count += 1
        step = 0.5**it * span
        if single_precision:
            step = _f32(step)
            phi_try = _f32(phi_try - step if last.error < 0.0 else phi_try + step)
        else:
            phi_try = phi_try - step if last.error < 0.0 else phi_try + step
        history.append(phi_try)
    assert last is not None
    return last, history, count


def closure_tolerance(
    phi_f: float, n_iter: int, single_precision: bool = False, closure_tol: float = CLOSURE_TOL
) -> float:
    """Closure residual accepted after ``n_iter`` halvings of the angle interval.

    A short search cannot close the polygon better than its final step, and
    float32 angles cannot resolve ``phi_f`` better than a few ulps.
    """
    tol = max(closure_tol, 4.0 * math.pi * 0.5**n_iter)
    if single_precision:
        tol = max(tol, 8.0 * abs(phi_f) * float(np.finfo(np.float32).eps))
    return tol


def plan_segment(
    sys: SystemParams | DerivedParams,
    a_max: float,
    j_max: float,
    n_iter: int = DEFAULT_N_ITER,
    *,
    single_precision: bool = False,
    precompute: bool = False,
    force_single: bool = False,
    closure_tol: float = CLOSURE_TOL,
) -> JerkSegment:
    """Plan the time-optimal segment that reaches ``a_max`` with the base at rest.

    The returned geometry is the one computed at the last trial angle, so the
    search performs exactly ``n_iter`` error evaluations.
    """
    if not (a_max > 0.0 and j_max > 0.0):
        raise ValidationError("a_max and j_max must be positive")
    dp = sys if isinstance(sys, DerivedParams) else derive_params(sys)
    a_star = dp.omega_d * a_max / j_max
    max_sections = 1 if force_single else None
    structure_fn = None
    if precompute and not force_single:
        structure_fn = StructureTable(a_star, dp.p1)
    ev, history, count = line_search(
        a_star, dp.p1, n_iter, single_precision, structure_fn, max_sections
    )
    seg = _assemble(dp, a_max, j_max, ev, history, count)
    residual = seg.closure_residual()
    tol = closure_tolerance(seg.phi_f, n_iter, single_precision, closure_tol)
    if not residual < tol * max(1.0, math.exp(dp.p1 * seg.phi_f)):
        raise PlanningFailed(
            f"no sign change of the length error: closure residual {residual!r} "
            f"at phi_f={seg.phi_f!r} (a*_max={a_star!r})"
        )
    if seg.times[1] < 0.0:
        raise PlanningFailed(f"first switch falls before t=0 (t2={seg.times[1]!r})")
    return seg


def _assemble(
    dp: DerivedParams,
    a_max: float,
    j_max: float,
    ev: Evaluation,
    history: list[float],
    count: int,
) -> JerkSegment:
    s = ev.structure
    interior = [ev.phi_last - d for d in s.delta_phi]
    angles = [0.0, *interior, ev.phi_f]
    times = tuple(phi / dp.omega_d for phi in angles)
    coeffs = coefficients(s.n_el)
    report = _overshoot(times, coeffs, a_max, j_max)
    return JerkSegment(
        a_max=a_max,
        j_max=j_max,
        t_f=times[-1],
        phi_f=ev.phi_f,
        times=times,
        coeffs=coeffs,
        structure=s,
        overshoot=report,
        omega_d=dp.omega_d,
        p1=dp.p1,
        n_evaluations=count,
        history=tuple(history),
    )


def _overshoot(times, coeffs, a_max: float, j_max: float) -> OvershootReport:
    # acceleration is piecewise linear, so its maximum sits on a switch instant
    t = np.asarray(times)
    acc = np.zeros_like(t)
    for ti, ai in zip(times, coeffs):
        acc += ai * j_max * np.clip(t - ti, 0.0, None)
    i = int(np.argmax(acc))
    peak = float(acc[i])
    return OvershootReport(
        max_accel=peak,
        exceeds=peak > a_max * (1.0 + OVERSHOOT_REL),
        argmax_t=float(t[i]),
    )


def detect_overshoot(seg: JerkSegment, sys=None) -> OvershootReport:
    """Maximum slider acceleration on ``[0, t_f]``, evaluated at every switch."""
    prof = seg.profile()
    candidates = np.array(sorted({0.0, *seg.times}))
    _, _, acc = slider_response(prof, candidates)
    i = int(np.argmax(acc))
    peak = float(acc[i])
    return OvershootReport(
        max_accel=peak,
        exceeds=peak > seg.a_max * (1.0 + OVERSHOOT_REL),
        argmax_t=float(candidates[i]),
    )


@dataclass(frozen=True)
class VerificationReport:
    x_residual: float
    x_dot_residual: float
    z_ddot_residual: float
    terminal_ok: bool
    C1: float | None
    shift: float | None
    max_switch_residual: float | None
    sign_pattern_ok: bool
    switching_ok: bool
    max_jerk: float
    jerk_ok: bool

    @property
    def passed(self) -> bool:
        return self.terminal_ok and self.switching_ok and self.jerk_ok


def fit_switching_law(angles, coeffs, p1: float, samples: int = 64):
    """Find ``C1`` and a shift making every interior angle a switching zero.

    The last two interior angles fix the shift in closed form; the rest are
    checked.  The shift is chosen so that the last interior switch lies on the
    falling flank of the maximum with index 0.  Returns
    ``(C1, shift, max |lambda| at interior angles, sign pattern ok)``.
    """
    interior = list(angles[1:-1])
    if len(interior) < 2:
        return None, None, None, False
    a, b = interior[-2], interior[-1]
    r = math.exp(p1 * (b - a))
    shift = math.atan2(-(math.sin(a) - r * math.sin(b)), math.cos(a) - r * math.cos(b))
    theta = math.atan2(1.0, p1)
    phi_m = math.pi - theta
    # candidate shifts differ by pi; pick the one placing b + shift in (phi_m, phi_m + pi)
    for cand in (shift, shift + math.pi):
        off = cand + b
        off = off - 2.0 * math.pi * math.floor((off - phi_m) / (2.0 * math.pi))
        if phi_m <= off < phi_m + math.pi:
            shift = off - b
            break
    C1 = math.exp(p1 * (a + shift)) * math.sin(a + shift)
    lam = [math.exp(p1 * (phi + shift)) * math.sin(phi + shift) - C1 for phi in interior]
    max_res = max(abs(v) for v in lam)
    # jerk sign must be opposite to lambda strictly inside every interval
    ok = C1 > 0.0
    running = 0.0
    for i in range(len(angles) - 1):
        running += coeffs[i]
        lo, hi = angles[i], angles[i + 1]
        if hi - lo <= 0.0:
            continue
        grid = np.linspace(lo, hi, samples + 2)[1:-1] + shift
        vals = np.exp(p1 * grid) * np.sin(grid) - C1
        # values within rounding of zero near a tangency carry no sign information
        vals = vals[np.abs(vals) > 1e-9 * max(1.0, abs(C1))]
        if running > 0 and np.any(vals > 0.0):
            ok = False
        if running < 0 and np.any(vals < 0.0):
            ok = False
    return C1, shift, max_res, ok


def verify_segment(
    seg: JerkSegment,
    sys: SystemParams | DerivedParams,
    tol: float = TERMINAL_TOL,
    switch_tol: float = CLOSURE_TOL,
    profile: JerkProfile | None = None,
) -> VerificationReport:
    dp = sys if isinstance(sys, DerivedParams) else derive_params(sys)
    prof = profile if profile is not None else seg.profile()
    x, xd, _, _ = base_response(prof, seg.t_f, dp)
    _, _, zdd = slider_response(prof, seg.t_f)
    rx = abs(x - dp.static_deflection(seg.a_max))
    rxd = abs(xd)
    rz = abs(zdd - seg.a_max)
    terminal_ok = rx < tol and rxd < tol and rz < tol
    C1, shift, max_res, sign_ok = fit_switching_law(seg.angles, seg.coeffs, dp.p1)
    if C1 is None:
        # no interior switches: pure ramp, the law holds trivially
        switching_ok = True
        sign_ok = True
    else:
        switching_ok = sign_ok and max_res < switch_tol
    running = np.cumsum(prof.amps) if prof.amps else np.zeros(1)
    max_jerk = float(np.max(np.abs(running)))
    jerk_ok = max_jerk <= seg.j_max * (1.0 + 1e-12)
    return VerificationReport(
        x_residual=rx,
        x_dot_residual=rxd,
        z_ddot_residual=rz,
        terminal_ok=terminal_ok,
        C1=C1,
        shift=shift,
        max_switch_residual=max_res,
        sign_pattern_ok=sign_ok,
        switching_ok=switching_ok,
        max_jerk=max_jerk,
        jerk_ok=jerk_ok,
    )
