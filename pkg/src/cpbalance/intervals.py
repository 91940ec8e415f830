"""Closed real intervals with Minkowski sum and Pontryagin difference.

The empty set is a value (``EMPTY``), not an exception, so that constraint
tightening sweeps can carry infeasible rows through.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import InvalidParameterError


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidParameterError(f"interval bounds must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise InvalidParameterError(f"interval lower bound exceeds upper: [{self.lo}, {self.hi}]")

    is_empty = False

    @classmethod
    def symmetric(cls, span: float, center: float = 0.0) -> "Interval":
        return cls(center - 0.5 * span, center + 0.5 * span)

    @property
    def span(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def contains(self, other: Union[float, "Interval"]) -> bool:
        if isinstance(other, Interval):
            return self.lo <= other.lo and other.hi <= self.hi
        return self.lo <= other <= self.hi

    def scale(self, s: float) -> "Interval":
        a, b = s * self.lo, s * self.hi
        return Interval(min(a, b), max(a, b))

    def __add__(self, other):
        return minkowski_sum(self, other)

    def __sub__(self, other):
        return pontryagin_diff(self, other)

    def __iter__(self):
        yield self.lo
        yield self.hi


class _EmptyInterval:
    """The empty subset of the real line."""

    is_empty = True
    span = 0.0
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def contains(self, other) -> bool:
        return False

    def __add__(self, other):
        return self

    def __sub__(self, other):
        return self

    def __repr__(self):
        return "EMPTY"


EMPTY = _EmptyInterval()
IntervalLike = Union[Interval, _EmptyInterval]


def minkowski_sum(a: IntervalLike, b: IntervalLike) -> IntervalLike:
    if a.is_empty or b.is_empty:
        return EMPTY
    return Interval(a.lo + b.lo, a.hi + b.hi)


def pontryagin_diff(a: IntervalLike, b: IntervalLike) -> IntervalLike:
    """``{x | x + b ⊆ a}``; ``EMPTY`` when b is wider than a."""
    if a.is_empty:
        return EMPTY
    if b.is_empty:
        # every x satisfies x + {} ⊆ a; not representable as a bounded interval
        raise InvalidParameterError("Pontryagin difference by the empty set is unbounded")
    lo, hi = a.lo - b.lo, a.hi - b.hi
    if lo > hi:
        return EMPTY
    return Interval(lo, hi)
