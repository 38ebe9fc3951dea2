"""Closed real intervals with the few operations certification needs."""

from __future__ import annotations

from typing import NamedTuple


class Interval(NamedTuple):
    lo: float
    hi: float

    @classmethod
    def point(cls, x):
        return cls(float(x), float(x))

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Interval) else -other)

    def scale(self, a):
        a = float(a)
        return Interval(a * self.lo, a * self.hi) if a >= 0 else Interval(a * self.hi, a * self.lo)

    def hull(self, other):
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def widen(self, rel, abs_=0.0):
        pad_lo = rel * max(1.0, abs(self.lo)) + abs_
        pad_hi = rel * max(1.0, abs(self.hi)) + abs_
        return Interval(self.lo - pad_lo, self.hi + pad_hi)

    def contains(self, x):
        return self.lo <= x <= self.hi

    @property
    def width(self):
        return self.hi - self.lo
