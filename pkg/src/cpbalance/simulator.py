"""
Closed-loop rollouts of capture-point feedback on the point-mass pendulum.

Two clocks: the plant and the reference live on a fine base tick (1 ms by
default); the controller samples every ``tau`` seconds, a whole number of
base ticks, and holds its CoP command in between.  The realized command is

    p = p_ref + K (x - x_ref) + k xi_hat + n_hat

with the plant's true nonlinearity set to zero, so ``n_hat`` is the net model
error and the CoP disturbance is ``v = k xi_hat + n_hat``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core_model import StateVec, SystemParams, discretize
from .errors import InvalidParameterError
from .gain_design import UncertaintyBudget
from .intervals import Interval
from .robust_tube import coefficient_sums, ratio_series, worst_case_sequence
from .stability import Gains, is_stable

DEFAULT_BASE_TICK = 1e-3
DISTURBANCE_KINDS = ("none", "worst_case_sign", "uniform_random", "constant", "sinusoidal")


def _ticks(duration: float, base_tick: float) -> int:
    n = round(duration / base_tick)
    if n < 1 or abs(n * base_tick - duration) > 1e-9 * max(1.0, duration):
        raise InvalidParameterError(f"duration {duration!r} s is not a positive multiple of the base tick {base_tick!r} s")
    return n


@dataclass(frozen=True)
class FootstepPlan:
    """Piecewise-constant CoP reference: ``(cop_position [m], duration [s])`` pairs."""

    steps: tuple[tuple[float, float], ...]
    axis: str = "lateral"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple((float(p), float(d)) for p, d in self.steps))
        for p, d in self.steps:
            if not (math.isfinite(p) and math.isfinite(d) and d > 0.0):
                raise InvalidParameterError(f"invalid footstep ({p}, {d})")
        if self.axis not in ("lateral", "sagittal"):
            raise InvalidParameterError(f"axis must be 'lateral' or 'sagittal', got {self.axis!r}")

    @property
    def duration(self) -> float:
        return sum(d for _, d in self.steps)

    @classmethod
    def standing(cls, duration: float, position: float = 0.0) -> "FootstepPlan":
        return cls(((position, duration),))

    @classmethod
    def alternating(cls, n_steps: int = 6, width: float = 0.09, step_time: float = 0.8,
                    settle: float = 1.6) -> "FootstepPlan":
        """Standing start, ``n_steps`` lateral steps at +/- ``width``, centered stance at the end."""
        steps = [(0.0, settle)]
        steps += [((-1) ** i * width, step_time) for i in range(n_steps)]
        steps.append((0.0, settle))
        return cls(tuple(steps))


@dataclass(frozen=True)
class ReferenceTrajectory:
    base_tick: float
    omega: float
    p_ref: np.ndarray   # (N,) CoP held over [t, t+1)
    xi_ref: np.ndarray  # (N+1,)
    x_ref: np.ndarray   # (N+1, 2)

    @property
    def n_ticks(self) -> int:
        return len(self.p_ref)

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_ticks + 1) * self.base_tick

    def consistency_residual(self) -> float:
        """max |x_ref(t+1) - A x_ref(t) - B p_ref(t)| over all ticks."""
        m = discretize(SystemParams(self.omega, self.base_tick))
        pred = self.x_ref[:-1] @ m.a.T + np.outer(self.p_ref, m.b)
        return float(np.max(np.abs(self.x_ref[1:] - pred)))


def generate_reference(plan: FootstepPlan, params: SystemParams, base_tick: float = DEFAULT_BASE_TICK) -> ReferenceTrajectory:
    """Capture-point reference by backward recursion from the final footstep.

    Only ``params.omega`` is used; the reference lives on the base tick.
    """
    if not plan.steps:
        raise InvalidParameterError("footstep plan is empty")
    if plan.steps[-1][1] < 3.0 / params.omega:
        raise InvalidParameterError(
            f"final footstep lasts {plan.steps[-1][1]} s; at least 3/omega = {3.0 / params.omega:.3f} s is needed"
        )
    p_ref = np.concatenate([np.full(_ticks(d, base_tick), p) for p, d in plan.steps])
    n = len(p_ref)
    decay = math.exp(-params.omega * base_tick)
    xi = np.empty(n + 1)
    xi[n] = plan.steps[-1][0]
    for t in range(n - 1, -1, -1):
        xi[t] = p_ref[t] + decay * (xi[t + 1] - p_ref[t])

    m = discretize(SystemParams(params.omega, base_tick))
    a00, a01, b0 = float(m.a[0, 0]), float(m.a[0, 1]), float(m.b[0])
    w = params.omega
    x = np.empty((n + 1, 2))
    c = float(p_ref[0])
    x[0] = (c, w * (xi[0] - c))
    for t in range(n):
        c = a00 * x[t, 0] + a01 * x[t, 1] + b0 * p_ref[t]
        x[t + 1] = (c, w * (xi[t + 1] - c))
    return ReferenceTrajectory(base_tick, params.omega, p_ref, xi, x)


@dataclass(frozen=True)
class DisturbanceModel:
    """Estimation error ``xi_hat`` and model error ``n_hat`` drawn once per control update.

    Realized values always stay inside ``[-span/2, span/2]``.
    """

    kind: str = "none"
    xi_hat_span: float = 0.0
    n_hat_span: float = 0.0
    seed: int = 0
    freq: float = 0.5        # Hz, sinusoidal only
    level: float = 1.0       # fraction of the half span, constant only
    horizon: int | None = None  # control ticks per worst-case block; None picks one from the series tail

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise InvalidParameterError(f"unknown disturbance kind {self.kind!r}")
        UncertaintyBudget(self.xi_hat_span, self.n_hat_span)
        if not -1.0 <= self.level <= 1.0:
            raise InvalidParameterError("level must lie in [-1, 1]")

    @classmethod
    def from_budget(cls, kind: str, budget: UncertaintyBudget, **kw) -> "DisturbanceModel":
        return cls(kind, budget.xi_hat_span, budget.n_hat_span, **kw)

    def realize(self, n_updates: int, params: SystemParams, gains: Gains) -> tuple[np.ndarray, np.ndarray]:
        """Per-update ``(xi_hat, n_hat)`` for a controller running at ``params.tau``."""
        hx, hn = 0.5 * self.xi_hat_span, 0.5 * self.n_hat_span
        if self.kind == "none":
            s = np.zeros(n_updates)
            return s, s.copy()
        if self.kind == "constant":
            return np.full(n_updates, self.level * hx), np.full(n_updates, self.level * hn)
        if self.kind == "sinusoidal":
            s = np.sin(2.0 * np.pi * self.freq * params.tau * np.arange(n_updates))
            return hx * s, hn * s
        if self.kind == "uniform_random":
            rng = np.random.default_rng(self.seed)
            return rng.uniform(-hx, hx, n_updates), rng.uniform(-hn, hn, n_updates)
        s = worst_case_signs(params, gains, n_updates, self.horizon)
        return hx * s, hn * s


def worst_case_horizon(params: SystemParams, gains: Gains, rel_tail: float = 1e-4, cap: int = 400) -> int:
    """Control ticks after which the remaining coefficient mass is below ``rel_tail`` of the ratio."""
    if not is_stable(gains, params):
        return cap
    r = ratio_series(params, gains, 1e-9)
    return min(cap, max(2, coefficient_sums(params, gains, rel_tail * r).terms + 1))


def worst_case_signs(params: SystemParams, gains: Gains, n_updates: int, horizon: int | None = None) -> np.ndarray:
    """+/-1 pattern alternately driving p~ to its maximum and minimum.

    Each block of ``horizon`` updates uses the signs of the horizon-reversed
    coefficients ``K (A+BK)^{j} B``; the block's last update carries weight 1.
    """
    h = horizon or worst_case_horizon(params, gains)
    block = worst_case_sequence(params, gains, Interval(-1.0, 1.0), h)
    out = np.empty(n_updates)
    for start in range(0, n_updates, h):
        sgn = 1.0 if (start // h) % 2 == 0 else -1.0
        seg = sgn * block[: n_updates - start]
        out[start:start + len(seg)] = seg
    return out


@dataclass
class SimulationTrace:
    time: np.ndarray
    x: np.ndarray          # (N, 2) state at the start of each tick
    xi: np.ndarray
    p: np.ndarray          # CoP applied during the tick
    x_ref: np.ndarray
    xi_ref: np.ndarray
    p_ref: np.ndarray
    v: np.ndarray          # CoP disturbance held during the tick
    n_hat: np.ndarray
    xi_hat: np.ndarray
    control_tick: np.ndarray  # bool, True where the controller updated
    p_tilde: np.ndarray
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def recompute_p_tilde(self) -> np.ndarray:
        return self.p - self.p_ref

    @property
    def xi_tilde(self) -> np.ndarray:
        return self.xi - self.xi_ref

    @property
    def x_tilde(self) -> np.ndarray:
        return self.x - self.x_ref

    @property
    def max_abs_p_tilde(self) -> float:
        return float(np.max(np.abs(self.p_tilde)))

    @property
    def max_abs_xi_tilde(self) -> float:
        return float(np.max(np.abs(self.xi_tilde)))

    @property
    def p_tilde_span(self) -> float:
        return float(np.max(self.p_tilde) - np.min(self.p_tilde))

    @property
    def p_tilde_span_at_updates(self) -> float:
        """Span of ``p~`` sampled right after each controller update.

        Unlike :attr:`p_tilde_span` this excludes reference CoP jumps that
        happen while the command is held.
        """
        pt = self.p_tilde[self.control_tick]
        return float(np.max(pt) - np.min(pt))

    def summary(self) -> dict:
        return {
            "max_abs_p_tilde": self.max_abs_p_tilde,
            "max_abs_xi_tilde": self.max_abs_xi_tilde,
            "p_tilde_span": self.p_tilde_span,
            "p_tilde_span_at_updates": self.p_tilde_span_at_updates,
            "diverged": self.diverged,
        }


def rollout(
    params: SystemParams,
    gains: Gains,
    reference: ReferenceTrajectory,
    disturbance: DisturbanceModel | None = None,
    initial_error: StateVec = StateVec(0.0, 0.0),
    divergence_limit: float = 1.0,
) -> SimulationTrace:
    """Simulate the sampled controller (period ``params.tau``) against ``reference``.

    The run stops early, flagged as diverged, once the state tracking error
    exceeds ``divergence_limit`` meters (or m/s) or stops being finite.
    """
    if not math.isclose(params.omega, reference.omega, rel_tol=1e-12):
        raise InvalidParameterError("controller and reference use different omega")
    dt = reference.base_tick
    per = round(params.tau / dt)
    if per < 1 or abs(per * dt - params.tau) > 1e-9 * params.tau:
        raise InvalidParameterError(f"control period {params.tau!r} s is not a multiple of the base tick {dt!r} s")
    disturbance = disturbance or DisturbanceModel()
    n = reference.n_ticks
    n_updates = -(-n // per)
    xi_hat, n_hat = disturbance.realize(n_updates, params, gains)

    m = discretize(SystemParams(params.omega, dt))
    a00, a01, a10, a11 = (float(v) for v in m.a.ravel())
    b0, b1 = float(m.b[0]), float(m.b[1])
    k0, k1 = (float(v) for v in gains.as_row())
    k = gains.k
    inv_w = 1.0 / params.omega
    x_ref, p_ref_all, xi_ref_all = reference.x_ref, reference.p_ref, reference.xi_ref

    xs = np.empty((n, 2))
    ps = np.empty(n)
    vs = np.empty(n)
    xh = np.empty(n)
    nh = np.empty(n)
    ctl = np.zeros(n, dtype=bool)
    c = float(x_ref[0, 0]) + initial_error.c
    cd = float(x_ref[0, 1]) + initial_error.cdot
    p = v = e_xi = e_n = 0.0
    diverged = False
    last = n
    for t in range(n):
        if t % per == 0:
            j = t // per
            e_xi, e_n = float(xi_hat[j]), float(n_hat[j])
            v = k * e_xi + e_n
            p = float(p_ref_all[t]) + k0 * (c - x_ref[t, 0]) + k1 * (cd - x_ref[t, 1]) + v
            ctl[t] = True
        xs[t] = (c, cd)
        ps[t], vs[t], xh[t], nh[t] = p, v, e_xi, e_n
        ec, ecd = c - x_ref[t, 0], cd - x_ref[t, 1]
        if not (abs(ec) <= divergence_limit and abs(ecd) <= divergence_limit):
            diverged = True
            last = t + 1
            break
        c, cd = a00 * c + a01 * cd + b0 * p, a10 * c + a11 * cd + b1 * p

    sl = slice(0, last)
    xs = xs[sl]
    xi = xs[:, 0] + inv_w * xs[:, 1]
    p_ref = p_ref_all[sl].copy()
    return SimulationTrace(
        time=np.arange(last) * dt,
        x=xs,
        xi=xi,
        p=ps[sl],
        x_ref=x_ref[sl].copy(),
        xi_ref=xi_ref_all[sl].copy(),
        p_ref=p_ref,
        v=vs[sl],
        n_hat=nh[sl],
        xi_hat=xh[sl],
        control_tick=ctl[sl],
        p_tilde=ps[sl] - p_ref,
        diverged=diverged,
        meta={"tau": params.tau, "omega": params.omega, "k": gains.k, "lam": gains.lam,
              "base_tick": dt, "disturbance": disturbance.kind},
    )


@dataclass(frozen=True)
class SweepRow:
    tau: float
    analytic_span: float | None
    worst_case_span: float
    random_span: float
    diverged: bool
    analytic_stable: bool


def analytic_span(params: SystemParams, gains: Gains, budget: UncertaintyBudget) -> float | None:
    """``r * (k xi_span + n_span)`` with r from the series; None when unstable."""
    if not is_stable(gains, params):
        return None
    return ratio_series(params, gains, 1e-10) * budget.disturbance_span(gains.k)


def sweep_and_measure(
    omega: float,
    gains: Gains,
    budget: UncertaintyBudget,
    tau_list: Sequence[float],
    trials: int = 3,
    seed: int = 0,
    base_tick: float = DEFAULT_BASE_TICK,
    blocks: int = 4,
    plan: FootstepPlan | None = None,
) -> list[SweepRow]:
    """Analytic vs empirical CoP-error spans per sampling period.

    Without a ``plan`` the robot stands still for ``blocks`` worst-case blocks,
    which isolates the disturbance response from reference transitions.
    """
    taus = [float(t) for t in tau_list]
    if not taus or any(t <= 0.0 for t in taus):
        raise InvalidParameterError("tau list must be non-empty and positive")
    rows = []
    for tau in taus:
        params = SystemParams(omega, tau)
        h = worst_case_horizon(params, gains)
        if plan is None:
            per = round(tau / base_tick)
            dur = blocks * h * per * base_tick
            ref_plan = FootstepPlan.standing(max(dur, 3.0 / omega + per * base_tick))
        else:
            ref_plan = plan
        ref = generate_reference(ref_plan, params, base_tick)
        wc = rollout(params, gains, ref, DisturbanceModel.from_budget("worst_case_sign", budget, horizon=h))
        rand_span = 0.0
        rand_div = False
        for i, ss in enumerate(np.random.SeedSequence(seed).spawn(trials)):
            dm = DisturbanceModel.from_budget("uniform_random", budget, seed=int(ss.generate_state(1)[0]))
            tr = rollout(params, gains, ref, dm)
            rand_span = max(rand_span, tr.p_tilde_span)
            rand_div |= tr.diverged
        rows.append(SweepRow(
            tau=tau,
            analytic_span=analytic_span(params, gains, budget),
            worst_case_span=wc.p_tilde_span,
            random_span=rand_span,
            diverged=wc.diverged or rand_div,
            analytic_stable=bool(is_stable(gains, params)),
        ))
    return rows
