"""Baselines, parameter sweeps and residual-oscillation fitting."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import FitDiverged, JerkSegError, NeverMultiple, ValidationError
from .model import DerivedParams, JerkProfile, SystemParams, derive_params
from .planner import DEFAULT_N_ITER, evaluate, plan_segment

METHODS = ("ocp", "zv", "scurve")


def _dp(sys) -> DerivedParams:
    return sys if isinstance(sys, DerivedParams) else derive_params(sys)


def scurve_segment(a_max: float, j_max: float) -> JerkProfile:
    """Single jerk pulse reaching ``a_max``; ignores the base entirely."""
    if not (a_max > 0.0 and j_max > 0.0):
        raise ValidationError("a_max and j_max must be positive")
    return JerkProfile((0.0, a_max / j_max), (j_max, -j_max))


def zv_weights(dp: DerivedParams) -> tuple[float, float]:
    K = math.exp(-dp.delta * math.pi / dp.omega_d)
    return 1.0 / (1.0 + K), K / (1.0 + K)


def zv_segment(sys, a_max: float, j_max: float) -> JerkProfile:
    """S-curve jerk pulse convolved with a two-impulse zero-vibration shaper.

    Ends at ``a_max / j_max + pi / omega_d``.
    """
    dp = _dp(sys)
    pulse = scurve_segment(a_max, j_max)
    w1, w2 = zv_weights(dp)
    delay = math.pi / dp.omega_d
    steps: dict[float, float] = {}
    for t, a in pulse.steps:
        steps[t] = steps.get(t, 0.0) + w1 * a
        steps[t + delay] = steps.get(t + delay, 0.0) + w2 * a
    ordered = sorted((t, a) for t, a in steps.items() if a != 0.0)
    return JerkProfile.from_steps(ordered)


def zv_duration(sys, a_max: float, j_max: float) -> float:
    return a_max / j_max + math.pi / _dp(sys).omega_d


def default_jerk_limit(a_max: float, omega_d: float) -> float:
    """Jerk that reaches ``a_max`` in one period of the base oscillation."""
    return a_max * omega_d / (2.0 * math.pi)


@dataclass(frozen=True)
class SweepRow:
    a_max: float
    method: str
    t_f: float
    ok: bool = True
    message: str = ""


def segment_duration(sys, a_max: float, j_max: float, method: str, **plan_kwargs) -> float:
    if method == "ocp":
        return plan_segment(sys, a_max, j_max, **plan_kwargs).t_f
    if method == "zv":
        return zv_duration(sys, a_max, j_max)
    if method == "scurve":
        return a_max / j_max
    raise ValidationError(f"unknown method {method!r}")


def sweep(
    sys,
    a_values: Iterable[float],
    j_max: float,
    methods: Sequence[str] = METHODS,
    **plan_kwargs,
) -> list[SweepRow]:
    """Durations per method over a list of target accelerations.

    Failures are recorded in the row rather than raised.
    """
    dp = _dp(sys)
    rows = []
    for a in a_values:
        for m in methods:
            try:
                rows.append(SweepRow(float(a), m, segment_duration(dp, a, j_max, m, **plan_kwargs)))
            except JerkSegError as exc:
                rows.append(SweepRow(float(a), m, math.nan, False, str(exc)))
    return rows


def accel_grid(a_lo: float, a_hi: float, n: int = 64, log: bool = False) -> np.ndarray:
    if n <= 0:
        return np.zeros(0)
    if n == 1:
        return np.array([a_lo])
    if log:
        return np.geomspace(a_lo, a_hi, n)
    return np.linspace(a_lo, a_hi, n)


def sections_needed(sys: SystemParams, a_max: float, j_max: float, **plan_kwargs) -> int:
    return plan_segment(sys, a_max, j_max, **plan_kwargs).n_el


def critical_damping(
    sys_template: SystemParams,
    a_max: float,
    j_max: float,
    rel_tol: float = 1e-6,
    **plan_kwargs,
) -> float:
    """Damping at which the optimal segment switches from two sections to one.

    Bisects between ``d = 0`` and the template damping; if the template itself
    still needs several sections the upper end is doubled until it does not.
    """
    if sections_needed(sys_template.with_damping(0.0), a_max, j_max, **plan_kwargs) < 2:
        raise NeverMultiple(f"a_max={a_max!r} needs one section even without damping")
    lo = 0.0
    hi = sys_template.d
    d_limit = 2.0 * math.sqrt(sys_template.k * (sys_template.m_s + sys_template.m_b))
    if hi <= 0.0:
        hi = 1e-3 * d_limit
    while sections_needed(sys_template.with_damping(hi), a_max, j_max, **plan_kwargs) >= 2:
        lo = hi
        hi = min(2.0 * hi, 0.5 * (hi + d_limit))
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if sections_needed(sys_template.with_damping(mid), a_max, j_max, **plan_kwargs) >= 2:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class AdvantageRow:
    d: float
    a_max: float
    t_opt: float
    n_el: int
    t_single: float
    abs_gain: float
    rel_gain: float
    abs_gain_4: float
    rel_gain_4: float


def time_advantage(
    sys: SystemParams,
    a_values: Iterable[float],
    d_values: Iterable[float],
    j_max: float,
    **plan_kwargs,
) -> list[AdvantageRow]:
    """Time saved by the optimal structure over a forced single negative section.

    The ``_4`` columns compare four concatenated segments, a rough stand-in
    for a point-to-point move built from four primitives.
    """
    rows = []
    for d in d_values:
        plant = sys.with_damping(d)
        for a in a_values:
            opt = plan_segment(plant, a, j_max, **plan_kwargs)
            single = plan_segment(plant, a, j_max, force_single=True, **plan_kwargs)
            gain = single.t_f - opt.t_f
            rows.append(
                AdvantageRow(
                    d=float(d),
                    a_max=float(a),
                    t_opt=opt.t_f,
                    n_el=opt.n_el,
                    t_single=single.t_f,
                    abs_gain=gain,
                    rel_gain=gain / opt.t_f,
                    abs_gain_4=4.0 * gain,
                    rel_gain_4=(4.0 * gain) / (4.0 * opt.t_f),
                )
            )
    return rows


@dataclass(frozen=True)
class ErrorCurve:
    a_max: float
    phi_f: np.ndarray
    error: np.ndarray
    n_el: np.ndarray
    phi_root: float
    omega_d: float

    @property
    def t_f(self) -> np.ndarray:
        return self.phi_f / self.omega_d

    def sign_changes(self) -> int:
        s = np.sign(self.error)
        return int(np.count_nonzero(s[:-1] != s[1:]))


def error_curve(
    sys,
    a_values: Iterable[float],
    j_max: float,
    n_points: int = 64,
    n_iter: int = DEFAULT_N_ITER,
) -> list[ErrorCurve]:
    """Length error sampled over the admissible terminal-angle interval."""
    if n_points < 2:
        raise ValidationError("n_points must be at least 2")
    dp = _dp(sys)
    curves = []
    for a in a_values:
        a_star = dp.omega_d * a / j_max
        phis = a_star + math.pi * np.arange(n_points) / n_points
        evs = [evaluate(float(p), a_star, dp.p1) for p in phis]
        seg = plan_segment(dp, a, j_max, n_iter=n_iter)
        curve = ErrorCurve(
            a_max=float(a),
            phi_f=phis,
            error=np.array([e.error for e in evs]),
            n_el=np.array([e.structure.n_el for e in evs]),
            phi_root=seg.phi_f,
            omega_d=dp.omega_d,
        )
        curves.append(curve)
    return curves


@dataclass(frozen=True)
class ResidualFit:
    a0: float
    delta: float
    omega_d: float
    phi0: float
    rms: float = 0.0
    iterations: int = 0


def _damped_sine(theta, tau):
    a0, delta, omega, phi0 = theta
    env = np.exp(-delta * tau)
    return a0 * env * np.sin(omega * tau + phi0)


def _jacobian(theta, tau):
    a0, delta, omega, phi0 = theta
    env = np.exp(-delta * tau)
    s = np.sin(omega * tau + phi0)
    c = np.cos(omega * tau + phi0)
    return np.column_stack([env * s, -tau * a0 * env * s, tau * a0 * env * c, a0 * env * c])


def _linear_start(tau, x, delta, omega):
    env = np.exp(-delta * tau)
    basis = np.column_stack([env * np.sin(omega * tau), env * np.cos(omega * tau)])
    (p, q), *_ = np.linalg.lstsq(basis, x, rcond=None)
    # p sin + q cos = hypot(p, q) sin(. + atan2(q, p))
    return math.hypot(p, q), math.atan2(q, p)


def _canonical(a0, delta, omega, phi0):
    if omega < 0.0:
        omega, phi0, a0 = -omega, -phi0, -a0
    if a0 < 0.0:
        a0, phi0 = -a0, phi0 + math.pi
    phi0 = math.remainder(phi0, 2.0 * math.pi)
    return a0, delta, omega, phi0


def fit_residual(
    t: Sequence[float],
    x: Sequence[float],
    t_start: float,
    delta0: float,
    omega0: float,
    offset: float = 0.0,
    max_iter: int = 200,
    step_tol: float = 1e-12,
) -> ResidualFit:
    """Least-squares fit of ``a0 exp(-delta tau) sin(omega tau + phi0)``.

    ``tau = t - t_start``; only samples with ``t >= t_start`` are used and
    ``offset`` is subtracted first.  Starts from the given damping and
    frequency with amplitude and phase from a linear solve, then refines all
    four parameters with Levenberg-Marquardt.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float) - offset
    mask = t >= t_start
    tau, y = t[mask] - t_start, x[mask]
    if tau.size < 8:
        raise ValidationError(f"need at least 8 samples after t_start, got {tau.size}")
    scale = float(np.max(np.abs(y)))
    if scale == 0.0:
        return ResidualFit(0.0, delta0, omega0, 0.0, 0.0, 0)

    a0, phi0 = _linear_start(tau, y, delta0, omega0)
    # work on the normalized signal so the damping term is scale-free
    yn = y / scale
    theta = np.array([a0 / scale, delta0, omega0, phi0])
    r = yn - _damped_sine(theta, tau)
    cost = float(r @ r)
    lam = 1e-3
    it = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(theta, tau)
        g = J.T @ r
        H = J.T @ J
        diag = np.diag(H).copy()
        diag[diag == 0.0] = 1.0
        improved = False
        for _ in range(30):
            try:
                step = np.linalg.solve(H + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta + step
            r_trial = yn - _damped_sine(trial, tau)
            cost_trial = float(r_trial @ r_trial)
            if cost_trial <= cost:
                theta, r, cost = trial, r_trial, cost_trial
                lam = max(lam / 10.0, 1e-15)
                improved = True
                break
            lam *= 10.0
        rel_step = np.max(np.abs(step) / np.maximum(np.abs(theta), 1e-300)) if improved else 0.0
        if not improved or rel_step < step_tol or cost == 0.0:
            break
    rms = math.sqrt(cost / tau.size) * scale
    a0, delta, omega, phi0 = _canonical(theta[0] * scale, theta[1], theta[2], theta[3])
    if not math.isfinite(rms) or rms > scale:
        raise FitDiverged(f"rms {rms!r} exceeds the signal amplitude {scale!r}")
    return ResidualFit(a0, delta, omega, phi0, rms, it)
