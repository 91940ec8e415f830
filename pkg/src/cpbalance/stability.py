"""
Closed-loop pole algebra for the feedback p = p_ref + K (x - x_ref), K = k [1, lambda].

Jury's simplified criterion for a second order characteristic polynomial
z^2 - tr z + det gives stability iff

    1 - det > 0,   det - tr + 1 > 0,   det + tr + 1 > 0

which for this plant is equivalent to

    lambda > (cosh - 1) / (omega sinh),   k > 1,   k lambda < (cosh + 1) / (omega sinh)

i.e. a triangle in the (lambda, 1/k) plane.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core_model import StateMatrices, SystemParams, discretize
from .errors import DegenerateRegionError

REAL_TOL = 1e-9


@dataclass(frozen=True)
class Gains:
    """Structured feedback gain ``K = k * [1, lam]`` (``lam`` in seconds)."""

    k: float
    lam: float

    @classmethod
    def cp_line(cls, k: float, omega: float) -> "Gains":
        """Capture-point feedback: ``lam = 1/omega`` so that ``K x = k * xi``."""
        return cls(k, 1.0 / omega)

    def as_row(self) -> np.ndarray:
        return np.array([self.k, self.k * self.lam])

    def on_cp_line(self, omega: float, rel_tol: float = 1e-12) -> bool:
        return math.isclose(self.lam * omega, 1.0, rel_tol=rel_tol, abs_tol=0.0)


class PolePair(NamedTuple):
    q1: complex
    q2: complex

    @property
    def real(self) -> bool:
        return all(abs(q.imag) <= REAL_TOL * (1.0 + abs(q.real)) for q in self)

    @property
    def spectral_radius(self) -> float:
        return max(abs(self.q1), abs(self.q2))


@dataclass(frozen=True)
class StabilityReport:
    """Jury test outcome; residuals are the signed slack of each strict inequality."""

    stable: bool
    det_residual: float      # 1 - q1 q2
    plus_one_residual: float  # (q1 - 1)(q2 - 1)
    minus_one_residual: float  # (q1 + 1)(q2 + 1)

    def __bool__(self):
        return self.stable

    @property
    def min_residual(self) -> float:
        return min(self.det_residual, self.plus_one_residual, self.minus_one_residual)


@dataclass(frozen=True)
class StabilityRegion:
    lambda_min: float
    lambda_max: float
    k_inv_min: float
    k_inv_max: float
    # upper bound on k * lambda; equals lambda_max
    k_lambda_max: float

    def contains(self, g: Gains) -> bool:
        return g.lam > self.lambda_min and g.k > 1.0 and g.k * g.lam < self.k_lambda_max

    def residuals(self, g: Gains) -> tuple[float, float, float]:
        return (g.lam - self.lambda_min, g.k - 1.0, self.k_lambda_max - g.k * g.lam)

    def vertices(self) -> list[tuple[float, float]]:
        """Triangle corners as (lambda, 1/k)."""
        return [
            (self.lambda_min, self.k_inv_min),
            (self.lambda_min, self.k_inv_max),
            (self.lambda_max, self.k_inv_max),
        ]


def closed_loop(m: StateMatrices, g: Gains) -> np.ndarray:
    return m.a + np.outer(m.b, g.as_row())


def _trace_det(m: StateMatrices, g: Gains) -> tuple[float, float]:
    cl = closed_loop(m, g)
    tr = cl[0, 0] + cl[1, 1]
    det = cl[0, 0] * cl[1, 1] - cl[0, 1] * cl[1, 0]
    return float(tr), float(det)


def _quadratic_roots(tr: float, det: float) -> PolePair:
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        s = math.sqrt(disc)
        # avoid cancellation: compute the larger magnitude root first
        big = 0.5 * (tr + math.copysign(s, tr)) if tr != 0.0 else 0.5 * s
        small = det / big if big != 0.0 else -big
        lo, hi = sorted((small, big))
        return PolePair(complex(lo, 0.0), complex(hi, 0.0))
    s = cmath.sqrt(disc)
    a, b = 0.5 * (tr - s), 0.5 * (tr + s)
    lo, hi = sorted((a, b), key=lambda z: (z.real, z.imag))
    return PolePair(lo, hi)


def poles(m: StateMatrices, g: Gains) -> PolePair:
    """Roots of ``z^2 - tr z + det``, ordered by real then imaginary part."""
    return _quadratic_roots(*_trace_det(m, g))


def is_stable(g: Gains, params: SystemParams) -> StabilityReport:
    tr, det = _trace_det(discretize(params), g)
    r1 = 1.0 - det
    r2 = det - tr + 1.0
    r3 = det + tr + 1.0
    return StabilityReport(r1 > 0.0 and r2 > 0.0 and r3 > 0.0, r1, r2, r3)


def stability_region(params: SystemParams) -> StabilityRegion:
    wt = params.omega_tau
    if wt == 0.0:
        raise DegenerateRegionError("tau = 0: sinh(omega tau) = 0, the region is degenerate")
    ch, sh = math.cosh(wt), math.sinh(wt)
    w = params.omega
    lam_max = (ch + 1.0) / (w * sh)
    return StabilityRegion(
        lambda_min=(ch - 1.0) / (w * sh),
        lambda_max=lam_max,
        k_inv_min=(ch - 1.0) / (ch + 1.0),
        k_inv_max=1.0,
        k_lambda_max=lam_max,
    )


def in_gray_region(g: Gains, params: SystemParams) -> bool:
    """Both poles real and nonnegative, and at least one >= e^{-omega tau}."""
    q = poles(discretize(params), g)
    if not q.real:
        return False
    q1, q2 = q.q1.real, q.q2.real
    return q1 >= 0.0 and q2 >= 0.0 and max(q1, q2) >= math.exp(-params.omega_tau)


def region_raster(params: SystemParams, lambdas, k_invs) -> list[tuple[float, float, int, int]]:
    """Rasterize stability and gray-region membership over a (lambda, 1/k) grid.

    Rows are ordered lambda-major, matching the order of the input sequences.
    """
    m = discretize(params)
    e_neg = math.exp(-params.omega_tau)
    rows = []
    for lam in lambdas:
        for kinv in k_invs:
            if kinv == 0.0:
                rows.append((float(lam), float(kinv), 0, 0))
                continue
            g = Gains(1.0 / kinv, float(lam))
            tr, det = _trace_det(m, g)
            stable = (1.0 - det) > 0.0 and (det - tr + 1.0) > 0.0 and (det + tr + 1.0) > 0.0
            q = _quadratic_roots(tr, det)
            gray = (
                q.real and q.q1.real >= 0.0 and q.q2.real >= 0.0
                and max(q.q1.real, q.q2.real) >= e_neg
            )
            rows.append((float(lam), float(kinv), int(stable), int(gray)))
    return rows


def default_plot_window(params: SystemParams) -> tuple[tuple[float, float], tuple[float, float]]:
    """Lambda and 1/k ranges that frame the stability triangle with some margin."""
    reg = stability_region(params)
    return (0.0, 1.15 * reg.lambda_max), (0.0, 1.1)


def reference_curves(params: SystemParams, num: int = 200) -> dict[str, list[tuple[float, float]]]:
    """Descriptive curves in the (lambda, 1/k) plane: equal poles, a pole at zero,
    and the capture-point line lambda = 1/omega.

    Obtained from the pole formulas: with C = cosh, S = sinh,
    det = 1 - k + k C - k lam w S and tr = k + (2 - k) C - k lam w S.
    """
    reg = stability_region(params)
    wt = params.omega_tau
    ch, sh = math.cosh(wt), math.sinh(wt)
    w = params.omega
    lams = np.linspace(reg.lambda_min, reg.lambda_max, num)
    zero_pole = []
    for lam in lams:
        # det = 0  ->  1 + k (C - 1 - lam w S) = 0
        denom = 1.0 + lam * w * sh - ch
        if denom > 0.0:
            zero_pole.append((float(lam), float(denom)))
    equal = []
    for lam in lams:
        # tr^2 - 4 det = 0 is quadratic in k: (a k + c0)^2 - 4 (1 + b k) = 0
        a = 1.0 - ch - lam * w * sh
        c0 = 2.0 * ch
        b = ch - 1.0 - lam * w * sh
        # a^2 k^2 + (2 a c0 - 4 b) k + c0^2 - 4 = 0
        qa, qb, qc = a * a, 2.0 * a * c0 - 4.0 * b, c0 * c0 - 4.0
        disc = qb * qb - 4.0 * qa * qc
        if qa == 0.0 or disc < 0.0:
            continue
        for sgn in (-1.0, 1.0):
            k = (-qb + sgn * math.sqrt(disc)) / (2.0 * qa)
            if k > 0.0 and 1.0 / k <= 1.1:
                equal.append((float(lam), 1.0 / k))
    return {
        "cp_line": [(1.0 / w, 0.0), (1.0 / w, 1.1)],
        "zero_pole": zero_pole,
        "equal_poles": sorted(equal),
    }
