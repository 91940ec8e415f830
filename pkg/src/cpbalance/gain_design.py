"""
Gain selection for capture-point feedback ``p = p_ref + k (xi + xi_hat - xi_ref) + n_hat``.

The CoP disturbance is ``v = k xi_hat + n_hat``, so for spans ``s_xi`` and
``s_n`` the CoP tracking-error span is ``r k s_xi + r s_n``.  On the plateau
(``r = 1/(k-1) + 2``) this is minimized by

    k* = 1 + sqrt((s_xi + s_n) / (2 s_xi)),
    p*_span = (sqrt(s_xi) + sqrt(2 (s_xi + s_n)))^2,

and ``r`` stays on the plateau for ``omega tau <= ln(1/(k-1) + 1)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import optimize

from .core_model import SystemParams
from .errors import InvalidParameterError
from .robust_tube import ratio_closed_form
from .stability import Gains


@dataclass(frozen=True)
class UncertaintyBudget:
    """Spans [m] of the CP estimation error and of the model error."""

    xi_hat_span: float
    n_hat_span: float

    def __post_init__(self):
        for name in ("xi_hat_span", "n_hat_span"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v!r}")

    def disturbance_span(self, k: float) -> float:
        """Span of ``v = k xi_hat + n_hat`` under worst-case alignment."""
        return k * self.xi_hat_span + self.n_hat_span


@dataclass(frozen=True)
class DesignPoint:
    k: float
    tau: float
    omega: float
    r: float | None
    p_span: float | None
    feasible: bool

    @property
    def omega_tau(self) -> float:
        return self.omega * self.tau

    @property
    def rk(self) -> float | None:
        return None if self.r is None else self.r * self.k


class PlateauWarning(UserWarning):
    """The sampling period is beyond the plateau where the closed-form optimum holds."""


def combined_span(budget: UncertaintyBudget, params: SystemParams, k: float) -> float | None:
    """Worst-case CoP tracking-error span for gain ``k`` on the capture-point line."""
    r = ratio_closed_form(params, Gains.cp_line(k, params.omega))
    if r is None:
        return None
    return r * k * budget.xi_hat_span + r * budget.n_hat_span


def optimal_gain(budget: UncertaintyBudget) -> tuple[float, float]:
    """Closed-form ``(k*, p*_span)`` on the plateau."""
    xs, ns = budget.xi_hat_span, budget.n_hat_span
    if xs <= 0.0:
        raise InvalidParameterError("xi_hat_span must be > 0: without CP estimation error the optimal gain is unbounded")
    k_star = 1.0 + math.sqrt((xs + ns) / (2.0 * xs))
    p_star = (math.sqrt(xs) + math.sqrt(2.0 * (xs + ns))) ** 2
    return k_star, p_star


def tau_threshold(k: float) -> float:
    """End of the plateau as ``omega * tau0 = ln(1/(k-1) + 1)``."""
    if not k > 1.0:
        raise InvalidParameterError(f"threshold needs k > 1, got {k}")
    return math.log(1.0 / (k - 1.0) + 1.0)


def tau_threshold_seconds(k: float, omega: float) -> float:
    if not omega > 0.0:
        raise InvalidParameterError("omega must be > 0")
    return tau_threshold(k) / omega


def instability_tau(k: float, omega: float) -> float:
    """Smallest sampling period [s] at which the capture-point loop goes unstable."""
    if not k > 1.0:
        raise InvalidParameterError(f"needs k > 1, got {k}")
    return math.log(2.0 / (k - 1.0) + 1.0) / omega


def design_point(budget: UncertaintyBudget, params: SystemParams, k: float) -> DesignPoint:
    r = ratio_closed_form(params, Gains.cp_line(k, params.omega))
    if r is None:
        return DesignPoint(k, params.tau, params.omega, None, None, False)
    return DesignPoint(k, params.tau, params.omega, r, r * budget.disturbance_span(k), True)


def optimal_design(budget: UncertaintyBudget, params: SystemParams) -> DesignPoint:
    """Closed-form optimum evaluated at ``params.tau``; warns off the plateau."""
    k_star, _ = optimal_gain(budget)
    tau0 = tau_threshold_seconds(k_star, params.omega)
    if params.tau > tau0:
        warnings.warn(
            f"tau={params.tau:.4g} s exceeds the plateau threshold {tau0:.4g} s for k*={k_star:.4g}; "
            "the closed-form optimum does not apply",
            PlateauWarning,
            stacklevel=2,
        )
    return design_point(budget, params, k_star)


def numerical_optimal_gain(budget: UncertaintyBudget, params: SystemParams, tol: float = 1e-9) -> tuple[float, float]:
    """Golden-section minimization of ``combined_span`` over the stable k range.

    Independent check of :func:`optimal_gain`; ``params.tau`` must be > 0.
    """
    e = math.expm1(params.omega_tau)
    if e <= 0.0:
        raise InvalidParameterError("tau must be > 0 for a bounded gain range")
    lo, hi = 1.0 + 1e-6, 1.0 + 2.0 / e - 1e-6

    def f(k):
        s = combined_span(budget, params, k)
        return math.inf if s is None else s

    # golden needs an interior point below both ends; scan a coarse grid for one
    grid = np.linspace(lo, hi, 257)
    vals = [f(k) for k in grid]
    j = int(np.clip(np.argmin(vals), 1, len(grid) - 2))
    k_opt = optimize.golden(f, brack=(grid[j - 1], grid[j], grid[j + 1]), tol=tol)
    return float(k_opt), float(f(k_opt))


def sweep_tau(budget: UncertaintyBudget, k: float, tau_grid: Iterable[float], omega: float) -> list[DesignPoint]:
    taus = [float(t) for t in tau_grid]
    if any(t <= 0.0 for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
        raise InvalidParameterError("tau grid must be positive and strictly increasing")
    return [design_point(budget, SystemParams(omega, t), k) for t in taus]
