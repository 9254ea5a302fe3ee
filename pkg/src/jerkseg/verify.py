"""Independent oracles for the closed forms and for time-optimality."""
from __future__ import annotations

import math

import numpy as np

from .errors import NoFeasible, ValidationError
from .model import (
    MAX_ROWS,
    DerivedParams,
    JerkProfile,
    SampledTrajectory,
    SystemParams,
    derive_params,
    state_matrices,
    step_response,
    time_grid,
)

__all__ = ["SampledTrajectory", "rk4_integrate", "brute_force_n4", "BruteForceResult"]


def _dp(sys) -> DerivedParams:
    return sys if isinstance(sys, DerivedParams) else derive_params(sys)


def rk4_integrate(
    sys: SystemParams | DerivedParams,
    profile: JerkProfile,
    dt: float,
    t_end: float,
    max_rows: int = MAX_ROWS,
) -> SampledTrajectory:
    """Classical RK4 on the state-space model with the jerk as input.

    A grid step that contains jerk switches is split at each switch so that
    the input is constant on every sub-step.  Because the model is linear,
    the four stages are applied as the equivalent fourth-order matrix
    polynomial, cached per step length.
    """
    dp = _dp(sys)
    A, b = state_matrices(dp)
    t = time_grid(dt, t_end, max_rows)
    switches = np.asarray(profile.times, dtype=float)
    state = np.array([0.0, 0.0, profile.z0, profile.z_dot0, profile.z_ddot0])
    if profile.z_ddot0 != 0.0:
        raise ValidationError("the base must start at rest")
    states = np.empty((len(t), 5))
    states[0] = state
    running = np.concatenate([[0.0], np.cumsum(profile.amps)])

    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def step(h: float) -> tuple[np.ndarray, np.ndarray]:
        # the four RK4 stages collapse to a matrix polynomial for x' = Ax + bu
        if h not in cache:
            hA = h * A
            hA2 = hA @ hA
            hA3 = hA2 @ hA
            eye = np.eye(5)
            M = eye + hA + hA2 / 2.0 + hA3 / 6.0 + (hA3 @ hA) / 24.0
            N = h * (eye + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ b
            cache[h] = (M, N)
        return cache[h]

    for i in range(len(t) - 1):
        t0, t1 = t[i], t[i + 1]
        inner = switches[(switches > t0) & (switches < t1)]
        edges = [t0, *inner.tolist(), t1]
        for lo, hi in zip(edges, edges[1:]):
            u = float(running[np.searchsorted(switches, lo, side="right")])
            M, N = step(hi - lo)
            state = M @ state + N * u
        states[i + 1] = state
    x_ddot = (A @ states.T)[1]
    return SampledTrajectory(t=t, states=states, jerk=profile.jerk_at(t), x_ddot=x_ddot)


class BruteForceResult(tuple):
    """``(t2, t3, t_f, feasible_min)`` with the search statistics attached."""

    def __new__(cls, t2, t3, t_f, feasible_min, n_candidates, n_feasible, tolerance):
        obj = super().__new__(cls, (t2, t3, t_f, feasible_min))
        obj.n_candidates = n_candidates
        obj.n_feasible = n_feasible
        obj.tolerance = tolerance
        return obj

    t2 = property(lambda self: self[0])
    t3 = property(lambda self: self[1])
    t_f = property(lambda self: self[2])
    feasible_min = property(lambda self: self[3])


def brute_force_n4(
    sys: SystemParams | DerivedParams,
    a_max: float,
    j_max: float,
    grid_res: float,
    tol_factor: float = 0.5,
) -> BruteForceResult:
    """Exhaustive search for the fastest feasible +j/-j/+j jerk pulse.

    ``t_f`` runs over a uniform grid covering ``[a/j, a/j + pi/omega_d)``
    and ``t2`` over the same grid step.  The terminal-acceleration condition
    fixes ``t3 = t2 + (j t_f - a) / (2 j)``; base position and velocity at
    ``t_f`` are then evaluated with the closed forms.  A candidate counts as
    feasible when both residuals stay below the change a half-cell shift of
    each free coordinate could produce (``tol_factor * grid_res`` times the summed
    first-order sensitivities).
    """
    dp = _dp(sys)
    if grid_res <= 0.0:
        raise ValidationError("grid_res must be positive")
    t_lo = a_max / j_max
    t_hi = t_lo + math.pi / dp.omega_d
    n_tf = int(math.ceil((t_hi - t_lo) / grid_res))
    t_f = t_lo + grid_res * np.arange(n_tf)
    t_f = t_f[t_f < t_hi]
    x_target = dp.static_deflection(a_max)

    best = None
    n_candidates = 0
    n_feasible = 0
    for tf in t_f:
        dt_abs = (j_max * tf - a_max) / (2.0 * j_max)
        t2 = grid_res * np.arange(1, int(tf / grid_res) + 1)
        t3 = t2 + dt_abs
        keep = t3 <= tf
        t2, t3 = t2[keep], t3[keep]
        if t2.size == 0:
            # no negative section: pure ramp
            t2 = np.array([tf])
            t3 = np.array([tf])
        n_candidates += t2.size
        a1, a2, a3, a4 = j_max, -2.0 * j_max, 2.0 * j_max, -j_max
        x = np.zeros_like(t2)
        xd = np.zeros_like(t2)
        terms = []
        for a, tau in ((a1, np.full_like(t2, tf)), (a2, tf - t2), (a3, tf - t3), (a4, np.zeros_like(t2))):
            rx, rxd, rxdd, _ = step_response(tau, dp)
            x += a * rx
            xd += a * rxd
            terms.append((a * rxd, a * rxdd))
        # sensitivities of the reduced map (t2, t_f) -> residual; t3 moves with
        # t2 one-to-one and with t_f at half rate
        (v1, w1), (v2, w2), (v3, w3), (v4, w4) = terms
        sx = np.abs(-v2 - v3) + np.abs(v1 + v2 + 0.5 * v3 + v4)
        sxd = np.abs(-w2 - w3) + np.abs(w1 + w2 + 0.5 * w3 + w4)
        tol_x = tol_factor * grid_res * sx
        tol_xd = tol_factor * grid_res * sxd
        res_x = np.abs(x - x_target)
        res_xd = np.abs(xd)
        ok = (res_x <= tol_x) & (res_xd <= tol_xd)
        if np.any(ok):
            n_feasible += int(np.count_nonzero(ok))
            if best is None:
                score = res_x / np.maximum(tol_x, 1e-300) + res_xd / np.maximum(tol_xd, 1e-300)
                score = np.where(ok, score, np.inf)
                i = int(np.argmin(score))
                best = (float(t2[i]), float(t3[i]), float(tf))
    if best is None:
        raise NoFeasible("no grid candidate meets the terminal conditions")
    return BruteForceResult(
        best[0], best[1], best[2], True, n_candidates, n_feasible, tol_factor * grid_res
    )
