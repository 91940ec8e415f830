"""Oracle cross-checks run by ``cpbalance verify``.

Each check returns a :class:`CheckResult` with the worst residual seen.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core_model import SystemParams, discretize
from .gain_design import UncertaintyBudget, numerical_optimal_gain, optimal_gain, sweep_tau, tau_threshold
from .intervals import Interval
from .robust_tube import (
    alpha_coeffs,
    brute_force_max_cop_error,
    cop_error,
    gray_region_ratio,
    h_vector,
    invariant_tube,
    ratio_closed_form,
    ratio_series,
    worst_case_sequence,
)
from .stability import Gains, closed_loop, in_gray_region, is_stable, poles, stability_region


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name:<22} residual={self.residual:.3e}  {self.detail}  ({self.seconds:.2f}s)"


def sample_triangle(rng: np.random.Generator, params: SystemParams) -> Gains:
    """Uniform sample of the open stability triangle in the (lambda, 1/k) plane."""
    reg = stability_region(params)
    (l0, kmin), (_, kmax), (l1, _) = reg.vertices()
    while True:
        lam = rng.uniform(l0, l1)
        kinv = rng.uniform(kmin, kmax)
        g = Gains(1.0 / kinv, lam)
        if reg.contains(g):
            return g


def sample_gray(rng: np.random.Generator, n: int, k: float | None = None,
                omega_range=(1.0, 10.0), wt_range=(0.02, 1.0),
                max_radius: float = 0.995) -> list[tuple[SystemParams, Gains]]:
    """Stable gray-region samples; with ``k`` fixed only lambda, omega and tau vary.

    Points whose slowest pole exceeds ``max_radius`` are rejected, which keeps
    the series short (a pole at 0.995 still needs several thousand terms).
    """
    out = []
    while len(out) < n:
        w = rng.uniform(*omega_range)
        params = SystemParams(w, rng.uniform(*wt_range) / w)
        if k is None:
            g = sample_triangle(rng, params)
        else:
            reg = stability_region(params)
            if reg.k_lambda_max / k <= reg.lambda_min:
                continue
            g = Gains(k, rng.uniform(reg.lambda_min, reg.k_lambda_max / k))
        if (is_stable(g, params) and in_gray_region(g, params)
                and poles(discretize(params), g).spectral_radius <= max_radius):
            out.append((params, g))
    return out


def check_series_vs_closed_form(n: int = 100, **_) -> CheckResult:
    worst = 0.0
    w = 3.2
    for wt in np.linspace(0.0, math.log(3.0), n + 2)[1:-1]:
        e = math.expm1(wt)
        params = SystemParams(w, wt / w)
        for k in np.linspace(1.0, 1.0 + 2.0 / e, n + 2)[1:-1]:
            g = Gains.cp_line(float(k), w)
            worst = max(worst, abs(ratio_closed_form(params, g) - ratio_series(params, g, 1e-10)))
    return CheckResult("series_vs_closed_form", worst <= 1e-7, worst, f"{n}x{n} grid over (k, omega*tau)")


def check_gray_ratio(samples: int = 500, seed: int = 0, **_) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for params, g in sample_gray(rng, samples):
        worst = max(worst, abs(ratio_series(params, g, 1e-10) - gray_region_ratio(g)))
    return CheckResult("gray_region_ratio", worst <= 1e-7, worst, f"{samples} gray-region samples, lambda free")


def check_modal(samples: int = 500, seed: int = 1, **_) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_h = worst_a = worst_eig = 0.0
    signs_ok = True
    literal = 0
    for params, g in sample_gray(rng, samples):
        worst_h = max(worst_h, float(np.max(np.abs(h_vector(params, g) - [1.0 / (1.0 - g.k), 0.0]))))
        m = discretize(params)
        al = alpha_coeffs(params, g)
        kb = float(g.as_row() @ m.b)
        worst_a = max(worst_a, abs(al.alpha1 + al.alpha2 - kb))
        # the sign argument: K B = alpha1 + alpha2 < 0 and the weight of the slower pole is <= 0
        slow = al.alpha2 if al.q2 >= al.q1 else al.alpha1
        signs_ok &= al.alpha1 + al.alpha2 < 0.0 and slow <= 1e-12
        literal += al.alpha1 < 0.0 and al.alpha2 < 0.0
        q, vecs = np.linalg.eig(closed_loop(m, g))
        left, right = g.as_row() @ vecs, np.linalg.solve(vecs, m.b)
        for i in range(21):
            direct = float(np.real(np.sum(left * q ** i * right)))
            worst_eig = max(worst_eig, abs(direct - al.term(i)))
    ok = worst_h <= 1e-9 and worst_a <= 1e-9 and worst_eig <= 1e-8 and signs_ok
    return CheckResult("modal_identities", ok, max(worst_h, worst_a, worst_eig),
                       f"h, alpha1+alpha2=KB, modal reconstruction; KB<0 and slow-pole alpha<=0: {signs_ok} "
                       f"(both alpha<0 on {literal}/{samples})")


def check_invariance(samples: int = 10_000, seed: int = 2, **_) -> CheckResult:
    rng = np.random.default_rng(seed)
    params = SystemParams(3.2, 0.1)
    g = Gains.cp_line(2.0, 3.2)
    w = Interval(-0.015, 0.015)
    z = invariant_tube(params, g, w, 1e-9)
    m = discretize(params)
    cl = closed_loop(m, g)
    pts = z.sample(rng, samples)
    vs = rng.uniform(w.lo, w.hi, samples)
    succ = pts @ cl.T + np.outer(vs, m.b)
    dist = max(z.distance(s) for s in succ)
    bad = sum(not z.contains(s, inflate=z.tail_bound) for s in succ)
    return CheckResult("invariance", bad == 0, dist, f"{samples} successors, {bad} outside tube + tail {z.tail_bound:.1e}")


def check_brute_force(horizon: int = 14, **_) -> CheckResult:
    w_ = 3.2
    params = SystemParams(w_, 0.3 / w_)
    g = Gains.cp_line(2.0, w_)
    w = Interval(-0.015, 0.015)
    best, _ = brute_force_max_cop_error(params, g, w, horizon)
    constructed = abs(float(cop_error(params, g, worst_case_sequence(params, g, w, horizon))))
    bound = ratio_series(params, g) * w.span
    frac = 2.0 * best / bound
    ok = best == constructed and frac >= 0.95
    return CheckResult("brute_force_horizon", ok, abs(best - constructed),
                       f"L={horizon}: exhaustive max equals sign construction; span reaches {100 * frac:.2f}% of r*v_span")


def check_jury_region(n: int = 200, **_) -> CheckResult:
    disagreements = 0
    for wt in (0.1, 0.32, 0.6, 1.0):
        params = SystemParams(3.2, wt / 3.2)
        reg = stability_region(params)
        m = discretize(params)
        for lam in np.linspace(1e-3, 1.15 * reg.lambda_max, n):
            for kinv in np.linspace(1e-3, 1.1, n):
                g = Gains(1.0 / kinv, float(lam))
                if min(abs(r) for r in reg.residuals(g)) <= 1e-6:
                    continue
                by_modulus = poles(m, g).spectral_radius < 1.0
                disagreements += (reg.contains(g) != by_modulus) + (bool(is_stable(g, params)) != by_modulus)
    return CheckResult("jury_region", disagreements == 0, float(disagreements), f"{n}x{n} grid at 4 values of omega*tau")


def check_plateau(**_) -> CheckResult:
    b = UncertaintyBudget(0.01, 0.01)
    w, k = 3.2, 2.0
    tau0 = tau_threshold(k) / w
    taus = np.linspace(0.001, 0.999 * math.log(3.0) / w, 1000)
    pts = sweep_tau(b, k, taus, w)
    plateau = [d.p_span for d in pts if d.tau <= tau0]
    beyond = [d.p_span for d in pts if d.tau > tau0]
    flat = max(plateau) - min(plateau)
    increasing = all(y > x for x, y in zip(beyond, beyond[1:])) and beyond[0] > plateau[-1]
    bad_tail = sweep_tau(b, k, [math.log(3.0) / w + 1e-9], w)[0].feasible
    ok = flat <= 1e-9 and increasing and abs(plateau[0] - 0.09) <= 1e-9 and not bad_tail
    return CheckResult("tau_plateau", ok, flat, f"tau0 = {1000 * tau0:.2f} ms, plateau {100 * plateau[0]:.4f} cm")


def check_optimal_gain(samples: int = 200, seed: int = 3, **_) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        b = UncertaintyBudget(rng.uniform(0.001, 0.05), rng.uniform(0.0, 0.05))
        k_star, p_star = optimal_gain(b)
        params = SystemParams(3.2, 0.5 * tau_threshold(k_star) / 3.2)
        k_num, p_num = numerical_optimal_gain(b, params)
        worst = max(worst, abs(p_num - p_star) / p_star)
    return CheckResult("optimal_gain", worst <= 1e-6, worst, f"{samples} budgets vs golden-section search")


def check_minimum_ratio(n: int = 40, **_) -> CheckResult:
    worst = math.inf
    for wt in (0.1, 0.32, 0.6):
        params = SystemParams(3.2, wt / 3.2)
        reg = stability_region(params)
        (l0, kmin), _, (l1, _) = reg.vertices()
        for lam in np.linspace(l0, l1, n + 2)[1:-1]:
            for kinv in np.linspace(kmin, 1.0, n + 2)[1:-1]:
                g = Gains(1.0 / kinv, float(lam))
                if not reg.contains(g) or min(reg.residuals(g)) < 1e-3:
                    continue
                worst = min(worst, ratio_series(params, g, 1e-9) - gray_region_ratio(g))
    return CheckResult("minimum_ratio", worst >= -1e-6, worst, "min over triangle of r - (1/(k-1)+2)")


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "series_vs_closed_form": check_series_vs_closed_form,
    "gray_region_ratio": check_gray_ratio,
    "modal_identities": check_modal,
    "invariance": check_invariance,
    "brute_force_horizon": check_brute_force,
    "jury_region": check_jury_region,
    "tau_plateau": check_plateau,
    "optimal_gain": check_optimal_gain,
    "minimum_ratio": check_minimum_ratio,
}


def run_checks(names=None, **kw) -> list[CheckResult]:
    results = []
    for name in names or CHECKS:
        t0 = time.perf_counter()
        r = CHECKS[name](**kw)
        results.append(CheckResult(r.name, r.passed, r.residual, r.detail, time.perf_counter() - t0))
    return results
