"""Two-mass plant: parameters, state-space model and closed-form responses.

The slider (mass ``m_s``) is driven by a piecewise-constant jerk and sits on
an elastically mounted base (mass ``m_b``, stiffness ``k``, viscous damping
``d``).  All responses below assume the base starts at rest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GridTooLarge, NonPositiveParameter, NotUnderdamped, ValidationError

DEFAULT_DT = 1e-4
MAX_ROWS = 5_000_000


@dataclass(frozen=True)
class SystemParams:
    """Physical plant constants in SI units."""

    m_s: float
    m_b: float
    k: float
    d: float

    def __post_init__(self) -> None:
        for name in ("m_s", "m_b", "k"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise NonPositiveParameter(f"{name} must be positive, got {value!r}")
        if not (math.isfinite(self.d) and self.d >= 0.0):
            raise NonPositiveParameter(f"d must be non-negative, got {self.d!r}")
        m_g = self.m_s + self.m_b
        if self.d * self.d >= 4.0 * self.k * m_g:
            raise NotUnderdamped(
                f"d={self.d!r} gives d^2 >= 4 k m_g = {4.0 * self.k * m_g!r}"
            )

    def with_damping(self, d: float) -> "SystemParams":
        return SystemParams(self.m_s, self.m_b, self.k, d)


@dataclass(frozen=True)
class DerivedParams:
    """Modal quantities of the plant.

    ``m_ratio`` is ``m_s / m_g``; it is carried along because every base
    response scales with it.
    """

    m_g: float
    delta: float
    omega0: float
    omega_d: float
    p1: float
    m_ratio: float

    @property
    def f0(self) -> float:
        return self.omega0 / (2.0 * math.pi)

    @property
    def fd(self) -> float:
        return self.omega_d / (2.0 * math.pi)

    @property
    def k_star(self) -> float:
        return self.omega0 * self.omega0

    @property
    def d_star(self) -> float:
        return 2.0 * self.delta

    def static_deflection(self, accel: float) -> float:
        """Base displacement in equilibrium with a constant slider acceleration."""
        return -accel * self.m_ratio / self.k_star


def derive_params(p: SystemParams) -> DerivedParams:
    # SystemParams already validated itself; re-check in case of duck-typed input
    if not isinstance(p, SystemParams):
        p = SystemParams(p.m_s, p.m_b, p.k, p.d)
    m_g = p.m_s + p.m_b
    delta = p.d / (2.0 * m_g)
    omega0_sq = p.k / m_g
    omega_d_sq = omega0_sq - delta * delta
    if omega_d_sq <= 0.0:
        raise NotUnderdamped("damped frequency is not positive")
    omega_d = math.sqrt(omega_d_sq)
    return DerivedParams(
        m_g=m_g,
        delta=delta,
        omega0=math.sqrt(omega0_sq),
        omega_d=omega_d,
        p1=delta / omega_d,
        m_ratio=p.m_s / m_g,
    )


@dataclass(frozen=True)
class KinematicLimits:
    v_lim: float
    a_lim: float
    j_lim: float

    def __post_init__(self) -> None:
        for name in ("v_lim", "a_lim", "j_lim"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise NonPositiveParameter(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class StateVector:
    x: float = 0.0
    x_dot: float = 0.0
    z: float = 0.0
    z_dot: float = 0.0
    z_ddot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.z, self.z_dot, self.z_ddot])

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "StateVector":
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class JerkProfile:
    """Piecewise-constant jerk written as a sum of steps.

    The jerk at time ``t`` is the sum of all amplitudes whose step time is
    ``<= t``.  Initial slider values default to rest.
    """

    times: tuple[float, ...]
    amps: tuple[float, ...]
    z0: float = 0.0
    z_dot0: float = 0.0
    z_ddot0: float = 0.0
    j_lim: float | None = None

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        amps = tuple(float(a) for a in self.amps)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "amps", amps)
        if len(times) != len(amps):
            raise ValidationError("times and amps must have equal length")
        if times and times[0] < 0.0:
            raise ValidationError("first step time must be >= 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("step times must be strictly increasing")
        if self.j_lim is not None:
            running = np.cumsum(amps) if amps else np.zeros(0)
            # relative slack absorbs the rounding of the running sum
            if np.any(np.abs(running) > self.j_lim * (1.0 + 1e-12)):
                raise ValidationError(
                    f"running jerk exceeds j_lim={self.j_lim!r}: max {np.max(np.abs(running))!r}"
                )

    @classmethod
    def from_steps(cls, steps: Iterable[tuple[float, float]], **kwargs) -> "JerkProfile":
        steps = list(steps)
        return cls(tuple(t for t, _ in steps), tuple(a for _, a in steps), **kwargs)

    @property
    def steps(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.amps))

    @property
    def closed(self) -> bool:
        scale = max((abs(a) for a in self.amps), default=0.0)
        return abs(math.fsum(self.amps)) <= 1e-12 * max(scale, 1.0)

    @property
    def t_end(self) -> float:
        return self.times[-1] if self.times else 0.0

    def jerk_at(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for ti, ai in zip(self.times, self.amps):
            out = out + np.where(t >= ti, ai, 0.0)
        return out

    def scaled(self, c: float) -> "JerkProfile":
        return JerkProfile(
            self.times,
            tuple(c * a for a in self.amps),
            c * self.z0,
            c * self.z_dot0,
            c * self.z_ddot0,
        )


def slider_response(profile: JerkProfile, t):
    """Slider acceleration, velocity and position at time(s) ``t``.

    Returns ``(z, z_dot, z_ddot)``; array-valued when ``t`` is an array.
    """
    t_arr = np.asarray(t, dtype=float)
    z_ddot = profile.z_ddot0 + np.zeros_like(t_arr)
    z_dot = profile.z_dot0 + profile.z_ddot0 * t_arr
    z = profile.z0 + profile.z_dot0 * t_arr + 0.5 * profile.z_ddot0 * t_arr**2
    for ti, ai in zip(profile.times, profile.amps):
        tau = np.where(t_arr >= ti, t_arr - ti, 0.0)
        z_ddot = z_ddot + ai * tau
        z_dot = z_dot + 0.5 * ai * tau**2
        z = z + ai * tau**3 / 6.0
    if t_arr.ndim == 0:
        return float(z), float(z_dot), float(z_ddot)
    return z, z_dot, z_ddot


def step_response(tau, dp: DerivedParams):
    """Base response to a unit jerk step, ``tau`` seconds after the step.

    No gating is applied; callers pass ``tau >= 0``.
    """
    tau = np.asarray(tau, dtype=float)
    delta, wd, w0sq = dp.delta, dp.omega_d, dp.k_star
    c2 = dp.m_ratio / wd
    c1 = c2 / w0sq
    c0 = c1 / w0sq
    env = np.exp(-delta * tau)
    s = np.sin(wd * tau)
    c = np.cos(wd * tau)
    x = c0 * (
        env * ((wd * wd - delta * delta) * s - 2.0 * wd * delta * c)
        - wd * w0sq * tau
        + 2.0 * delta * wd
    )
    xd = c1 * (env * (wd * c + delta * s) - wd)
    xdd = -c2 * env * s
    xddd = -c2 * env * (wd * c - delta * s)
    return x, xd, xdd, xddd


def base_response(profile: JerkProfile, t, dp: DerivedParams):
    """Base displacement and its first three derivatives at time(s) ``t``.

    Each jerk step contributes a damped-sinusoid impulse response gated at its
    own step time (a term is included from its step time on).  Returns
    ``(x, x_dot, x_ddot, x_dddot)``.
    """
    if profile.z_ddot0 != 0.0:
        # constant initial acceleration would need a non-quiescent base
        raise ValidationError("base response requires zero initial slider acceleration")
    t_arr = np.asarray(t, dtype=float)
    out = [np.zeros_like(t_arr) for _ in range(4)]
    for ti, ai in zip(profile.times, profile.amps):
        gate = t_arr >= ti
        tau = np.where(gate, t_arr - ti, 0.0)
        for acc, term in zip(out, step_response(tau, dp)):
            acc += np.where(gate, ai * term, 0.0)
    if t_arr.ndim == 0:
        return tuple(float(v) for v in out)
    return tuple(out)


def state_matrices(dp: DerivedParams) -> tuple[np.ndarray, np.ndarray]:
    A = np.zeros((5, 5))
    A[0, 1] = 1.0
    A[1, 0] = -dp.k_star
    A[1, 1] = -dp.d_star
    A[1, 4] = -dp.m_ratio
    A[2, 3] = 1.0
    A[3, 4] = 1.0
    b = np.zeros(5)
    b[4] = 1.0
    return A, b


def state_derivative(s: StateVector, u: float, dp: DerivedParams) -> StateVector:
    x, xd, z, zd, zdd = s.x, s.x_dot, s.z, s.z_dot, s.z_ddot
    return StateVector(
        x=xd,
        x_dot=-dp.k_star * x - dp.d_star * xd - dp.m_ratio * zdd,
        z=zd,
        z_dot=zdd,
        z_ddot=u,
    )


@dataclass(frozen=True)
class SampledTrajectory:
    """States on a uniform time grid.

    ``states`` has one row per grid point with columns
    ``x, x_dot, z, z_dot, z_ddot``.
    """

    t: np.ndarray
    states: np.ndarray
    jerk: np.ndarray
    x_ddot: np.ndarray | None = field(default=None)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def rows(self) -> list[StateVector]:
        return [StateVector.from_array(r) for r in self.states]

    def column(self, name: str) -> np.ndarray:
        idx = ("x", "x_dot", "z", "z_dot", "z_ddot").index(name)
        return self.states[:, idx]


def time_grid(dt: float, t_end: float, max_rows: int = MAX_ROWS) -> np.ndarray:
    """Uniform grid from 0 that always contains ``t_end`` as its last point."""
    if not dt > 0.0:
        raise ValidationError("dt must be positive")
    if not t_end >= 0.0:
        raise ValidationError("t_end must be non-negative")
    n_steps = math.ceil(t_end / dt - 1e-9)
    if n_steps + 1 > max_rows:
        raise GridTooLarge(f"{n_steps + 1} rows exceed the cap of {max_rows}")
    t = np.arange(n_steps + 1, dtype=float) * dt
    if n_steps > 0:
        t[-1] = t_end
    return t


def sample_trajectory(
    profile: JerkProfile,
    dt: float,
    t_end: float,
    dp: DerivedParams,
    max_rows: int = MAX_ROWS,
) -> SampledTrajectory:
    t = time_grid(dt, t_end, max_rows)
    z, zd, zdd = slider_response(profile, t)
    x, xd, xdd, _ = base_response(profile, t, dp)
    states = np.column_stack([x, xd, z, zd, zdd])
    return SampledTrajectory(t=t, states=states, jerk=profile.jerk_at(t), x_ddot=xdd)
