"""
Robust positive invariant tube and CoP tracking-error bounds.

With a bounded CoP disturbance v in W the tracking error obeys

    x~+ = (A + BK) x~ + B v,        p~ = K x~ + v

and converges to Z = sum_{i>=0} (A+BK)^i B W (Minkowski sum).  For an
interval W the CoP error span is amplified by

    r = sum_i |K (A+BK)^i B| + 1.

All infinite sums are truncated with a rigorous remainder bound: if
||M^J|| <= 1/2 then sum_j ||M^j|| <= 2 * sum_{j<J} ||M^j||, so the tail
after N terms is at most ||K|| * that constant * ||M^N B||.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core_model import SystemParams, discretize
from .errors import (
    InvalidParameterError,
    SingularSystemError,
    UnstableGainsError,
    UnsupportedGainStructureError,
)
from .intervals import Interval, IntervalLike, minkowski_sum, pontryagin_diff
from .stability import Gains, closed_loop, is_stable, poles

DEFAULT_EPS = 1e-12
MAX_TERMS = 5_000_000
_THETA = 0.5


def _norm2(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def power_sum_bound(m: np.ndarray, max_power: int = 1_000_000) -> float:
    """Upper bound on ``sum_{j>=0} ||m^j||_2`` for a Schur-stable 2x2 matrix."""
    p = np.eye(2)
    total = 0.0
    for j in range(max_power):
        n = _norm2(p)
        if j > 0 and n <= _THETA:
            return total / (1.0 - _THETA)
        total += n
        p = p @ m
    raise UnstableGainsError("matrix powers do not contract; closed loop at or beyond the stability boundary")


def _require_stable(params: SystemParams, gains: Gains) -> None:
    rep = is_stable(gains, params)
    if not rep.stable:
        raise UnstableGainsError(
            f"closed loop unstable for k={gains.k}, lambda={gains.lam}, omega*tau={params.omega_tau} "
            f"(Jury residuals {rep.det_residual:.3g}, {rep.plus_one_residual:.3g}, {rep.minus_one_residual:.3g})"
        )


@dataclass(frozen=True)
class SeriesSums:
    """Truncated sums of the impulse coefficients c_i = K (A+BK)^i B."""

    total: float       # sum c_i
    total_abs: float   # sum |c_i|
    tail: float        # bound on sum_{i>=terms} |c_i|
    terms: int


def impulse_coefficients(params: SystemParams, gains: Gains, n: int) -> np.ndarray:
    """First ``n`` coefficients ``K (A+BK)^i B`` (no stability requirement)."""
    m = discretize(params)
    cl = closed_loop(m, gains)
    a00, a01, a10, a11 = (float(v) for v in cl.ravel())
    k0, k1 = (float(v) for v in gains.as_row())
    y0, y1 = float(m.b[0]), float(m.b[1])
    out = np.empty(n)
    for i in range(n):
        out[i] = k0 * y0 + k1 * y1
        y0, y1 = a00 * y0 + a01 * y1, a10 * y0 + a11 * y1
    return out


def coefficient_sums(params: SystemParams, gains: Gains, eps: float = DEFAULT_EPS) -> SeriesSums:
    if not eps > 0.0:
        raise InvalidParameterError("eps must be > 0")
    _require_stable(params, gains)
    m = discretize(params)
    cl = closed_loop(m, gains)
    factor = math.hypot(*gains.as_row()) * power_sum_bound(cl)
    a00, a01, a10, a11 = (float(v) for v in cl.ravel())
    k0, k1 = (float(v) for v in gains.as_row())
    y0, y1 = float(m.b[0]), float(m.b[1])
    total = total_abs = 0.0
    for i in range(MAX_TERMS):
        tail = factor * math.hypot(y0, y1)
        if tail <= eps:
            return SeriesSums(total, total_abs, tail, i)
        c = k0 * y0 + k1 * y1
        total += c
        total_abs += abs(c)
        y0, y1 = a00 * y0 + a01 * y1, a10 * y0 + a11 * y1
    raise UnstableGainsError("series did not reach the requested tolerance")


def ratio_series(params: SystemParams, gains: Gains, eps: float = DEFAULT_EPS) -> float:
    """Amplification ratio ``sum |K (A+BK)^i B| + 1`` with remainder <= eps."""
    return coefficient_sums(params, gains, eps).total_abs + 1.0


def ratio_closed_form(params: SystemParams, gains: Gains) -> float | None:
    """Piecewise ratio on the capture-point line ``lam = 1/omega``.

    Returns ``None`` where the closed loop is unstable and the ratio is undefined.
    """
    if not gains.on_cp_line(params.omega):
        raise UnsupportedGainStructureError(
            f"closed form requires lambda = 1/omega = {1.0 / params.omega!r}, got {gains.lam!r}"
        )
    k = gains.k
    e = math.expm1(params.omega_tau)
    if k <= 1.0 or e == 0.0:
        return None
    ke = (k - 1.0) * e
    if ke >= 2.0:
        return None
    if ke <= 1.0:
        return 1.0 / (k - 1.0) + 2.0
    return (2.0 + e) / (2.0 - ke)


def gray_region_ratio(gains: Gains) -> float:
    """Ratio inside the gray region; independent of lambda, omega and tau."""
    if not gains.k > 1.0:
        raise InvalidParameterError(f"gray-region ratio needs k > 1, got {gains.k}")
    return 1.0 / (gains.k - 1.0) + 2.0


def h_vector(params: SystemParams, gains: Gains) -> np.ndarray:
    """Solve ``h = (A+BK) h + B`` (the sum of ``(A+BK)^i B`` when stable)."""
    m = discretize(params)
    lhs = np.eye(2) - closed_loop(m, gains)
    det = lhs[0, 0] * lhs[1, 1] - lhs[0, 1] * lhs[1, 0]
    if abs(det) <= 1e-14 * max(1.0, float(np.abs(lhs).max()) ** 2):
        raise SingularSystemError(f"I - A - BK is singular (k={gains.k}, omega*tau={params.omega_tau})")
    return np.linalg.solve(lhs, m.b)


@dataclass(frozen=True)
class AlphaCoeffs:
    """Modal weights: ``K (A+BK)^i B = alpha1 q1^i + alpha2 q2^i``."""

    alpha1: float
    alpha2: float
    q1: float
    q2: float

    def term(self, i: int) -> float:
        return self.alpha1 * self.q1 ** i + self.alpha2 * self.q2 ** i


def alpha_coeffs(params: SystemParams, gains: Gains, distinct_tol: float = 1e-9) -> AlphaCoeffs:
    q = poles(discretize(params), gains)
    if not q.real:
        raise UnsupportedGainStructureError(f"complex poles {q.q1:.6g}, {q.q2:.6g}: modal coefficients are not real")
    q1, q2 = q.q1.real, q.q2.real
    if abs(q1 - q2) <= distinct_tol * (1.0 + abs(q2)):
        raise UnsupportedGainStructureError(f"repeated pole {q1:.6g}: closed loop is not diagonalizable")
    k = gains.k
    if k == 1.0:
        raise SingularSystemError("k = 1 makes the modal coefficients singular")
    prod = q1 * q2
    a1 = (1.0 - q1) / ((k - 1.0) * (q1 - q2)) * (prod - 1.0 + k * (1.0 - q1))
    a2 = (1.0 - q2) / ((k - 1.0) * (q2 - q1)) * (prod - 1.0 + k * (1.0 - q2))
    return AlphaCoeffs(a1, a2, q1, q2)


@dataclass(frozen=True)
class Zonotope2D:
    """``center + sum_i beta_i g_i`` with ``|beta_i| <= 1``, plus a ball of radius
    ``tail_bound`` that covers everything dropped by the truncation."""

    center: np.ndarray
    generators: np.ndarray  # shape (n, 2)
    truncation_count: int
    tail_bound: float

    def support(self, d) -> float:
        return support(self, d)

    def vertices(self) -> np.ndarray:
        """Vertices of the truncated part (counter-clockwise)."""
        g = self.generators
        g = g[np.hypot(g[:, 0], g[:, 1]) > 0.0] if len(g) else g
        if len(g) == 0:
            return self.center.reshape(1, 2).copy()
        # flip into the upper half plane so that angles lie in [0, pi)
        flip = (g[:, 1] < 0.0) | ((g[:, 1] == 0.0) & (g[:, 0] < 0.0))
        g = np.where(flip[:, None], -g, g)
        g = g[np.argsort(np.arctan2(g[:, 1], g[:, 0]), kind="stable")]
        start = self.center - g.sum(axis=0)
        verts = [start]
        for gi in g:
            verts.append(verts[-1] + 2.0 * gi)
        for gi in g:
            verts.append(verts[-1] - 2.0 * gi)
        return np.array(verts[:-1])

    def distance(self, point) -> float:
        """Euclidean distance from ``point`` to the truncated zonotope."""
        x = np.asarray(point, dtype=float)
        v = self.vertices()
        if len(v) == 1:
            return float(np.hypot(*(x - v[0])))
        edges = np.roll(v, -1, axis=0) - v
        rel = x - v
        cross = edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0]
        area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area2 > 0.0 and np.all(cross >= 0.0):
            return 0.0
        seg_len2 = np.einsum("ij,ij->i", edges, edges)
        t = np.clip(np.einsum("ij,ij->i", rel, edges) / np.where(seg_len2 > 0, seg_len2, 1.0), 0.0, 1.0)
        closest = v + t[:, None] * edges
        return float(np.min(np.hypot(*(x - closest).T)))

    def contains(self, point, inflate: float = 0.0, tol: float = 1e-12) -> bool:
        return self.distance(point) <= inflate + tol

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Points of the truncated zonotope (uniform in the generator coefficients)."""
        beta = rng.uniform(-1.0, 1.0, size=(n, len(self.generators)))
        return self.center + beta @ self.generators if len(self.generators) else np.tile(self.center, (n, 1))

    def scale(self, s: float) -> "Zonotope2D":
        return Zonotope2D(s * self.center, s * self.generators, self.truncation_count, abs(s) * self.tail_bound)


def invariant_tube(params: SystemParams, gains: Gains, w: Interval, eps: float = 1e-9) -> Zonotope2D:
    """Truncated ``Z = sum_i (A+BK)^i B W`` with ``tail_bound <= eps``."""
    if not eps > 0.0:
        raise InvalidParameterError("eps must be > 0")
    _require_stable(params, gains)
    m = discretize(params)
    cl = closed_loop(m, gains)
    factor = power_sum_bound(cl)
    scale = abs(w.center) + w.half_width
    y = np.array(m.b, dtype=float)
    center = np.zeros(2)
    gens = []
    for i in range(MAX_TERMS):
        tail = factor * float(np.hypot(*y)) * scale
        if tail <= eps:
            g = np.array(gens).reshape(-1, 2)
            return Zonotope2D(center, g, i, tail)
        center = center + y * w.center
        gens.append(y * w.half_width)
        y = cl @ y
    raise UnstableGainsError("tube truncation did not converge")


def support(z: Zonotope2D, d) -> float:
    """Conservative support function ``max_{x in Z} d.x``."""
    d = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d)) or not np.any(d):
        raise InvalidParameterError("direction must be finite and nonzero")
    val = float(d @ z.center)
    if len(z.generators):
        val += float(np.abs(z.generators @ d).sum())
    return val + z.tail_bound * float(np.hypot(*d))


def k_times_tube_interval(params: SystemParams, gains: Gains, w: Interval, eps: float = DEFAULT_EPS) -> Interval:
    """The set ``K Z`` as an interval, summed directly in one dimension."""
    s = coefficient_sums(params, gains, eps)
    half = (s.total_abs + s.tail) * w.half_width
    c = s.total * w.center
    return Interval(c - half, c + half)


def cop_error_interval(params: SystemParams, gains: Gains, w: Interval, eps: float = DEFAULT_EPS) -> Interval:
    """Bound ``K Z ⊕ W`` on the CoP tracking error ``p~ = K x~ + v``."""
    return minkowski_sum(k_times_tube_interval(params, gains, w, eps), w)


def cop_error(params: SystemParams, gains: Gains, v_seq):
    """CoP error ``K x~ + v`` at the last tick of ``v_seq``, starting from ``x~ = 0``.

    ``v_seq`` may carry leading batch dimensions (time is the last axis); the
    arithmetic is elementwise so a batch row gives bitwise the same result as
    the row evaluated on its own.
    """
    v_seq = np.asarray(v_seq, dtype=float)
    m = discretize(params)
    cl = closed_loop(m, gains)
    a00, a01, a10, a11 = (float(v) for v in cl.ravel())
    b0, b1 = float(m.b[0]), float(m.b[1])
    k0, k1 = (float(v) for v in gains.as_row())
    x0 = np.zeros(v_seq.shape[:-1])
    x1 = np.zeros(v_seq.shape[:-1])
    for i in range(v_seq.shape[-1] - 1):
        v = v_seq[..., i]
        x0, x1 = a00 * x0 + a01 * x1 + b0 * v, a10 * x0 + a11 * x1 + b1 * v
    return k0 * x0 + k1 * x1 + v_seq[..., -1]


def worst_case_sequence(params: SystemParams, gains: Gains, w: Interval, horizon: int, maximize: bool = True) -> np.ndarray:
    """Extreme disturbance sequence driving ``p~`` to its max (or min) at tick ``horizon-1``.

    The input applied ``j`` ticks before the end reaches the CoP error with
    weight ``K (A+BK)^{j-1} B`` (weight 1 for the last tick), so each entry is
    the bound of W matching the sign of its weight.
    """
    if horizon < 1:
        raise InvalidParameterError("horizon must be >= 1")
    weights = np.concatenate([[1.0], impulse_coefficients(params, gains, horizon - 1)])[::-1]
    sign = weights >= 0.0 if maximize else weights < 0.0
    return np.where(sign, w.hi, w.lo)


def brute_force_max_cop_error(params: SystemParams, gains: Gains, w: Interval, horizon: int) -> tuple[float, np.ndarray]:
    """Exhaustive search of ``max |p~|`` over all ``2**horizon`` extreme sequences."""
    if horizon > 22:
        raise InvalidParameterError("horizon too large for exhaustive search")
    bits = np.array(list(itertools.product((0, 1), repeat=horizon)), dtype=bool)
    seqs = np.where(bits, w.hi, w.lo)
    vals = np.abs(cop_error(params, gains, seqs))
    i = int(np.argmax(vals))
    return float(vals[i]), seqs[i]


@dataclass(frozen=True)
class FeasibilityReport:
    tightened: IntervalLike       # P ⊖ N ⊖ KZ ⊖ W
    tightened_bounds: tuple[float, float]  # raw (lo, hi); lo > hi when empty
    kz: Interval
    cop_error: Interval           # KZ ⊕ W
    cop_margin: float             # signed margin of p_ref_range inside ``tightened``
    com_margin: float | None      # signed margin of the CoM reference box inside X ⊖ Z
    feasible: bool


def _box_margin(inner: Interval, outer_lo: float, outer_hi: float) -> float:
    m = min(inner.lo - outer_lo, outer_hi - inner.hi)
    if outer_lo > outer_hi:
        m = min(m, 0.5 * (outer_hi - outer_lo))
    return m


def feasibility_check(
    p_ref_range: Interval,
    support_polygon: Interval,
    n_set: Interval,
    params: SystemParams,
    gains: Gains,
    w: Interval,
    x_ref_box: tuple[Interval, Interval] | None = None,
    state_box: tuple[Interval, Interval] | None = None,
    eps: float = 1e-10,
    tol: float = 1e-9,
) -> FeasibilityReport:
    """Constraint tightening for the CoP (and optionally the CoM state).

    The CoP-side set is ``P ⊖ N ⊖ KZ ⊖ W``.  ``KZ`` is the one-dimensional
    image of the tube, computed from the series directly rather than from the
    2-D zonotope; ``W`` is then removed separately, so ``KZ ⊕ W`` equals
    ``cop_error_interval``.  The CoM side checks ``x_ref_box`` against
    ``state_box ⊖ Z`` through the support function of Z along the four axis
    directions.  Margins above ``-tol`` count as feasible.
    """
    kz = k_times_tube_interval(params, gains, w, eps)
    err = minkowski_sum(kz, w)
    lo = support_polygon.lo - n_set.lo - kz.lo - w.lo
    hi = support_polygon.hi - n_set.hi - kz.hi - w.hi
    tightened = pontryagin_diff(pontryagin_diff(pontryagin_diff(support_polygon, n_set), kz), w)
    margin = _box_margin(p_ref_range, lo, hi)
    com_margin = None
    if state_box is not None:
        if x_ref_box is None:
            raise InvalidParameterError("state_box given without x_ref_box")
        z = invariant_tube(params, gains, w, eps)
        margins = []
        for axis in (0, 1):
            d = np.zeros(2)
            d[axis] = 1.0
            up = support(z, d)
            down = support(z, -d)
            margins.append(_box_margin(x_ref_box[axis], state_box[axis].lo + down, state_box[axis].hi - up))
        com_margin = min(margins)
    feasible = margin >= -tol and (com_margin is None or com_margin >= -tol)
    return FeasibilityReport(tightened, (lo, hi), kz, err, margin, com_margin, feasible)
