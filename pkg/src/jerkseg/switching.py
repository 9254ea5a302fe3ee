"""Switching structure of the bang-bang jerk input.

The normalized switching function is ``lam(phi) = exp(p1*phi)*sin(phi) - C1``.
Negative-jerk sections are the intervals where ``lam > 0``; each one sits
around a local maximum of ``exp(p1*phi)*sin(phi)``.  Angles are returned
relative to the last interior switch, so the common phase shift is left for
the planner to fix.

Maxima are indexed so that the last negative section always belongs to the
maximum with ``k = 0``; earlier sections use ``k = -1, -2, ...``.  Shifting
the index by one only rescales ``C1`` by ``exp(2*pi*p1)``, so this loses no
generality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoZero, NotBracketed, OutOfRange, UnsupportedStructure

ZERO_DAMPING_P1 = 1e-9
EDGE_EPS = 1e-12
C1_MAX_ITER = 60
WIDTH_TOL = 1e-13
TABLE_POINTS = 64


@dataclass(frozen=True)
class SwitchingStructure:
    """Relative switching angles for one terminal angle.

    ``delta_phi[j]`` is the distance of switch ``j + 2`` from the last
    interior switch, so the final entry is always 0.
    """

    n_el: int
    C1: float
    delta_phi: tuple[float, ...]
    delta_phi_abs: float

    @property
    def n(self) -> int:
        return 2 * self.n_el + 2

    @property
    def widths(self) -> tuple[float, ...]:
        d = self.delta_phi
        return tuple(d[2 * i] - d[2 * i + 1] for i in range(self.n_el))


def switching_fn(phi, C1: float, p1: float):
    return np.exp(p1 * np.asarray(phi, dtype=float)) * np.sin(phi) - C1


def _theta(p1: float) -> float:
    # arccos(p1 / sqrt(p1^2 + 1)) without the cancellation for large p1
    return math.atan2(1.0, p1)


def maxima_angles(p1: float, k_range) -> list[float]:
    if p1 < 0.0:
        raise OutOfRange("p1 must be non-negative")
    theta = _theta(p1)
    return [(2 * k + 1) * math.pi - theta for k in k_range]


def peak_value(p1: float, k: int) -> float:
    phi_m = maxima_angles(p1, [k])[0]
    return math.exp(p1 * phi_m) * math.sin(phi_m)


def _clearance_gap(u: float, p1: float) -> float:
    """``1 - lam_peak_normalized(phi_m + u)``, free of cancellation near u = 0.

    Around a maximum ``exp(p1 phi) sin(phi) = P * exp(p1 u) (cos u - p1 sin u)``
    with ``P`` the peak value, so a zero with clearance ``eps = 1 - C1/P``
    solves ``gap(u) = eps``.
    """
    return (
        2.0 * math.sin(0.5 * u) ** 2
        + p1 * math.sin(u)
        - math.expm1(p1 * u) * (math.cos(u) - p1 * math.sin(u))
    )


def _solve_gap(eps: float, p1: float, sign: float) -> float:
    """Offset ``u`` (same sign as ``sign``) with ``gap(u) = eps``.

    ``gap`` is strictly monotone in ``|u|`` on ``(0, pi)``; Newton steps are
    kept inside a shrinking bracket.
    """
    if eps <= 0.0:
        return 0.0
    lo, hi = 0.0, math.pi - EDGE_EPS
    scale = 1.0 + p1 * p1
    # quadratic model near the peak as first guess
    x = min(math.sqrt(2.0 * eps / scale), 0.5 * hi)
    for _ in range(100):
        u = sign * x
        f = _clearance_gap(u, p1) - eps
        if f > 0.0:
            hi = x
        else:
            lo = x
        dfdx = scale * math.exp(p1 * u) * math.sin(u) * sign
        nxt = x - f / dfdx if dfdx > 0.0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 4e-16 * max(x, 1e-300) or hi - lo <= 4e-16 * hi:
            x = nxt
            break
        x = nxt
    return sign * x


def _zeros_from_clearance(eps: float, p1: float, k: int) -> tuple[float, float]:
    phi_m = maxima_angles(p1, [k])[0]
    return phi_m + _solve_gap(eps, p1, -1.0), phi_m + _solve_gap(eps, p1, 1.0)


def zeros_near_maximum(C1: float, p1: float, k: int) -> tuple[float, float]:
    """The two zeros of the switching function that bracket maximum ``k``."""
    peak = peak_value(p1, k)
    if peak < C1:
        raise NoZero(f"maximum {k} ({peak!r}) lies below C1={C1!r}")
    return _zeros_from_clearance(1.0 - C1 / peak, p1, k)


def _zeros(C1: float, n_el: int, p1: float, eps_first: float | None = None) -> list[float]:
    """Zeros around maxima ``-(n_el-1) .. 0``.

    ``eps_first`` overrides the clearance of the earliest (lowest) maximum so
    that it stays accurate when that section is nearly tangent.
    """
    phis: list[float] = []
    for k in range(-(n_el - 1), 1):
        if k == -(n_el - 1) and eps_first is not None:
            phis.extend(_zeros_from_clearance(eps_first, p1, k))
        else:
            phis.extend(zeros_near_maximum(C1, p1, k))
    return phis


def relative_angles_general(C1: float, n_el: int, p1: float) -> SwitchingStructure:
    if n_el < 1:
        raise UnsupportedStructure("at least one negative section is required")
    phis = _zeros(C1, n_el, p1)
    last = phis[-1]
    delta = tuple(last - phi for phi in phis)
    width = math.fsum(phis[2 * i + 1] - phis[2 * i] for i in range(n_el))
    return SwitchingStructure(n_el=n_el, C1=C1, delta_phi=delta, delta_phi_abs=width)


def total_negative_width(C1: float, n_el: int, p1: float) -> float:
    phis = _zeros(C1, n_el, p1)
    return math.fsum(phis[2 * i + 1] - phis[2 * i] for i in range(n_el))


def count_segments(C1: float, phi_f: float, p1: float) -> int:
    """Largest number of negative sections whose earliest switch still fits."""
    if not zeros_fit(C1, 1, p1, phi_f):
        raise NoZero("no maximum clears C1 inside the terminal angle")
    n_el = 1
    while zeros_fit(C1, n_el + 1, p1, phi_f):
        n_el += 1
    return n_el


def zeros_fit(C1: float, n_el: int, p1: float, phi_f: float) -> bool:
    if peak_value(p1, -(n_el - 1)) < C1:
        return False
    phis = _zeros(C1, n_el, p1)
    return phis[0] - phis[-1] + phi_f > 0.0


def delta_phi_abs(phi_f: float, a_max_star: float) -> float:
    """Total angular width of the negative sections for a terminal angle."""
    value = 0.5 * (phi_f - a_max_star)
    if value < 0.0:
        raise OutOfRange(f"phi_f={phi_f!r} is below a*_max={a_max_star!r}")
    if value >= 0.5 * math.pi:
        raise OutOfRange(f"negative width {value!r} must stay below pi/2")
    return value


def _width_at(s_first: float, n_el: int, p1: float) -> tuple[float, float, list[float]]:
    """Total width when the earliest maximum has clearance ``s_first**2``."""
    eps = s_first * s_first
    C1 = peak_value(p1, -(n_el - 1)) * (1.0 - eps)
    phis = _zeros(C1, n_el, p1, eps_first=eps)
    width = math.fsum(phis[2 * i + 1] - phis[2 * i] for i in range(n_el))
    return width, C1, phis


def _solve_sections(width: float, n_el: int, p1: float) -> tuple[float, list[float]]:
    """``C1`` and zeros for ``n_el`` sections of total width ``width``.

    Bisects on the square root of the earliest maximum's clearance, which is
    proportional to that section's width near tangency and keeps the
    appearance of a new section continuous.  Width shrinks as ``C1`` grows.
    """
    w_tan, C1, phis = _width_at(0.0, n_el, p1)
    if w_tan > width:
        raise NotBracketed(
            f"{n_el} sections need at least {w_tan!r} rad, requested {width!r}"
        )
    if w_tan == width:
        return C1, phis
    lo, hi = 0.0, 1.0
    # at C1 = 0 the width is n_el*pi > pi/2, so the bracket is valid
    for _ in range(C1_MAX_ITER):
        mid = 0.5 * (lo + hi)
        w, C1, phis = _width_at(mid, n_el, p1)
        if abs(w - width) < WIDTH_TOL:
            break
        if w < width:
            lo = mid
        else:
            hi = mid
    return C1, phis


def solve_c1(width: float, n_el: int, p1: float) -> float:
    """Offset ``C1`` for which ``n_el`` sections have total width ``width``."""
    return _solve_sections(width, n_el, p1)[0]


def _zero_damping_structure(phi_f: float, width: float) -> SwitchingStructure:
    n_el = _zero_damping_count(phi_f, width)
    w = width / n_el
    delta: list[float] = []
    for k in range(1, n_el + 1):
        delta.append(2.0 * math.pi * (n_el - k) + w)
        delta.append(2.0 * math.pi * (n_el - k))
    # zeros of sin(phi) - C1 sit symmetrically around pi/2
    return SwitchingStructure(
        n_el=n_el, C1=math.cos(0.5 * w), delta_phi=tuple(delta), delta_phi_abs=width
    )


def _zero_damping_count(phi_f: float, width: float) -> int:
    n_el = max(1, math.ceil(phi_f / (2.0 * math.pi)))
    # the earliest switch must remain after t=0
    while n_el > 1 and 2.0 * math.pi * (n_el - 1) + width / n_el >= phi_f:
        n_el -= 1
    return n_el


def single_section(width: float, p1: float) -> SwitchingStructure:
    """One negative section: the relative angles follow from the width alone."""
    if p1 < ZERO_DAMPING_P1:
        C1 = math.cos(0.5 * width)
    else:
        C1 = solve_c1(width, 1, p1)
    return SwitchingStructure(n_el=1, C1=C1, delta_phi=(width, 0.0), delta_phi_abs=width)


def solve_structure(
    phi_f: float, a_max_star: float, p1: float, max_sections: int | None = None
) -> SwitchingStructure:
    """Switching structure consistent with the terminal angle ``phi_f``.

    ``max_sections=1`` forces a single negative section regardless of how
    many would fit.
    """
    width = delta_phi_abs(phi_f, a_max_star)
    if p1 < ZERO_DAMPING_P1:
        s = _zero_damping_structure(phi_f, width)
        if max_sections is not None and s.n_el > max_sections:
            return single_section(width, p1)
        return s
    upper = int(phi_f // (2.0 * math.pi)) + 1
    if max_sections is not None:
        upper = min(upper, max_sections)
    for n_el in range(upper, 1, -1):
        try:
            C1, phis = _solve_sections(width, n_el, p1)
        except NotBracketed:
            continue
        delta = tuple(phis[-1] - phi for phi in phis)
        if delta[0] < phi_f:
            return SwitchingStructure(n_el, C1, delta, width)
    return single_section(width, p1)


class StructureTable:
    """Precomputed structures over the whole terminal-angle interval.

    Queries between two nodes with the same section count are linearly
    interpolated; anything else falls back to an exact solve.
    """

    def __init__(self, a_max_star: float, p1: float, n_points: int = TABLE_POINTS):
        self.a_max_star = a_max_star
        self.p1 = p1
        # stay strictly inside the open upper bound
        top = a_max_star + math.pi * (1.0 - 1e-9)
        self.phi = np.linspace(a_max_star, top, n_points)
        self.nodes = [solve_structure(float(p), a_max_star, p1) for p in self.phi]

    def __call__(self, phi_f: float) -> SwitchingStructure:
        i = int(np.searchsorted(self.phi, phi_f, side="right")) - 1
        if i < 0 or i >= len(self.phi) - 1:
            return solve_structure(phi_f, self.a_max_star, self.p1)
        left, right = self.nodes[i], self.nodes[i + 1]
        if left.n_el != right.n_el:
            return solve_structure(phi_f, self.a_max_star, self.p1)
        w = (phi_f - self.phi[i]) / (self.phi[i + 1] - self.phi[i])
        delta = tuple(
            (1.0 - w) * a + w * b for a, b in zip(left.delta_phi, right.delta_phi)
        )
        C1 = (1.0 - w) * left.C1 + w * right.C1
        return SwitchingStructure(
            left.n_el, C1, delta, delta_phi_abs(phi_f, self.a_max_star)
        )
