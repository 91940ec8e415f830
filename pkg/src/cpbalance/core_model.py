"""
Exact zero-order-hold discretization of the linear inverted pendulum.

Continuous model (one horizontal axis):

    cddot = omega**2 * (c - p + n)

With p and n held constant over a period tau the state x = [c, cdot] obeys

    x+ = A x + B (p - n)

    A = [[cosh(w t),      sinh(w t) / w],
         [w sinh(w t),    cosh(w t)    ]]
    B = [1 - cosh(w t), -w sinh(w t)]

The capture point xi = c + cdot / omega is the unstable coordinate:
xi+ = e^{w t} (xi - p) + p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class SystemParams:
    """Pendulum natural frequency ``omega`` [1/s] and sampling period ``tau`` [s]."""

    omega: float
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0.0):
            raise InvalidParameterError(f"omega must be finite and > 0, got {self.omega!r}")
        if not (math.isfinite(self.tau) and self.tau >= 0.0):
            raise InvalidParameterError(f"tau must be finite and >= 0, got {self.tau!r}")

    @property
    def omega_tau(self) -> float:
        return self.omega * self.tau

    def with_tau(self, tau: float) -> "SystemParams":
        return SystemParams(self.omega, tau)


@dataclass(frozen=True)
class StateVec:
    """CoM position ``c`` [m] and velocity ``cdot`` [m/s]."""

    c: float
    cdot: float

    def __post_init__(self):
        if not (math.isfinite(self.c) and math.isfinite(self.cdot)):
            raise InvalidParameterError("state entries must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.c, self.cdot])

    @classmethod
    def from_array(cls, x) -> "StateVec":
        return cls(float(x[0]), float(x[1]))


@dataclass(frozen=True)
class StateMatrices:
    a: np.ndarray
    b: np.ndarray


def discretize(params: SystemParams) -> StateMatrices:
    wt = params.omega_tau
    ch, sh = math.cosh(wt), math.sinh(wt)
    w = params.omega
    a = np.array([[ch, sh / w], [w * sh, ch]])
    b = np.array([1.0 - ch, -w * sh])
    a.setflags(write=False)
    b.setflags(write=False)
    return StateMatrices(a, b)


def step(m: StateMatrices, x: StateVec, p: float, n: float = 0.0) -> StateVec:
    """One period of the plant: ``A x + B (p - n)``."""
    u = p - n
    a, b = m.a, m.b
    return StateVec(
        a[0, 0] * x.c + a[0, 1] * x.cdot + b[0] * u,
        a[1, 0] * x.c + a[1, 1] * x.cdot + b[1] * u,
    )


def capture_point(params: SystemParams, x: StateVec) -> float:
    return x.c + x.cdot / params.omega


def cp_step(params: SystemParams, xi: float, p: float) -> float:
    """Propagate the capture point over one period with the CoP held at ``p``."""
    return math.exp(params.omega_tau) * (xi - p) + p
