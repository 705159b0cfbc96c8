"""Intervals on the extended real line and finite unions of them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

INF = math.inf


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    lower_closed: bool = True
    upper_closed: bool = True

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if math.isnan(lo) or math.isnan(hi):
            raise DomainError("interval endpoints must not be NaN")
        if lo > hi:
            raise DomainError(f"empty interval: lower {lo} > upper {hi}")
        # infinite ends are never attained
        if lo == -INF:
            object.__setattr__(self, "lower_closed", False)
        if hi == INF:
            object.__setattr__(self, "upper_closed", False)
        if lo == hi and not (self.lower_closed and self.upper_closed):
            raise DomainError("a point interval must be closed at both ends")

    @classmethod
    def open(cls, lower, upper):
        return cls(lower, upper, False, False)

    @classmethod
    def closed(cls, lower, upper):
        return cls(lower, upper, True, True)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, y: float) -> bool:
        if y < self.lower or y > self.upper:
            return False
        if y == self.lower and not self.lower_closed:
            return False
        if y == self.upper and not self.upper_closed:
            return False
        return True

    __contains__ = contains

    def intersect(self, other: "Interval") -> "Interval | None":
        if self.lower > other.lower:
            lo, lc = self.lower, self.lower_closed
        elif self.lower < other.lower:
            lo, lc = other.lower, other.lower_closed
        else:
            lo, lc = self.lower, self.lower_closed and other.lower_closed
        if self.upper < other.upper:
            hi, hc = self.upper, self.upper_closed
        elif self.upper > other.upper:
            hi, hc = other.upper, other.upper_closed
        else:
            hi, hc = self.upper, self.upper_closed and other.upper_closed
        if lo > hi or (lo == hi and not (lc and hc)):
            return None
        return Interval(lo, hi, lc, hc)

    def to_json(self):
        return [_enc(self.lower), _enc(self.upper), self.lower_closed, self.upper_closed]

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, dict):
            return cls(_dec(obj["lower"]), _dec(obj["upper"]),
                       obj.get("lower_closed", True), obj.get("upper_closed", True))
        lo, hi = _dec(obj[0]), _dec(obj[1])
        lc = obj[2] if len(obj) > 2 else True
        hc = obj[3] if len(obj) > 3 else True
        return cls(lo, hi, lc, hc)

    def __repr__(self):
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower:g}, {self.upper:g}{right}"


def _enc(v: float):
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    return v


def _dec(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return INF
        if s in ("-inf", "-infinity"):
            return -INF
        return float(s)
    return float(v)


def _touch(left: Interval, right: Interval) -> bool:
    """True when ``right`` starts inside or exactly at the closed end of ``left``."""
    if right.lower < left.upper:
        return True
    if right.lower == left.upper:
        return left.upper_closed or right.lower_closed
    return False


class IntervalUnion:
    """A finite union of disjoint, separated intervals, sorted ascending.

    The stored parts are the connected components of the set: abutting
    pieces that share an attained point are merged on construction.
    """

    __slots__ = ("parts",)

    def __init__(self, parts: Iterable[Interval] = ()):
        self.parts: tuple[Interval, ...] = tuple(self._normalize(parts))

    @staticmethod
    def _normalize(parts):
        items = sorted(parts, key=lambda iv: (iv.lower, not iv.lower_closed))
        out: list[Interval] = []
        for iv in items:
            if out and _touch(out[-1], iv):
                prev = out[-1]
                if iv.upper > prev.upper:
                    hi, hc = iv.upper, iv.upper_closed
                elif iv.upper < prev.upper:
                    hi, hc = prev.upper, prev.upper_closed
                else:
                    hi, hc = prev.upper, prev.upper_closed or iv.upper_closed
                out[-1] = Interval(prev.lower, hi, prev.lower_closed, hc)
            else:
                out.append(iv)
        return out

    @classmethod
    def real_line(cls):
        return cls([Interval(-INF, INF)])

    @classmethod
    def empty(cls):
        return cls()

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]], closed: bool = True):
        return cls(Interval(lo, hi, closed, closed) for lo, hi in pairs)

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    def __bool__(self):
        return bool(self.parts)

    def __eq__(self, other):
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return self.parts == other.parts

    def __repr__(self):
        if not self.parts:
            return "IntervalUnion(∅)"
        return "IntervalUnion(" + " ∪ ".join(map(repr, self.parts)) + ")"

    @property
    def is_empty(self) -> bool:
        return not self.parts

    @property
    def total_length(self) -> float:
        return sum(iv.length for iv in self.parts)

    def contains(self, y: float) -> bool:
        return any(iv.contains(y) for iv in self.parts)

    __contains__ = contains

    def component_of(self, y: float) -> Interval | None:
        for iv in self.parts:
            if iv.contains(y):
                return iv
        return None

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self.parts + other.parts)

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        i = j = 0
        a, b = self.parts, other.parts
        while i < len(a) and j < len(b):
            piece = a[i].intersect(b[j])
            if piece is not None:
                out.append(piece)
            if a[i].upper < b[j].upper or (a[i].upper == b[j].upper and not a[i].upper_closed):
                i += 1
            else:
                j += 1
        return IntervalUnion(out)

    def complement(self) -> "IntervalUnion":
        out = []
        lo, lc = -INF, False
        for iv in self.parts:
            if iv.lower > lo or (iv.lower == lo and lc and not iv.lower_closed):
                out.append(Interval(lo, iv.lower, lc, not iv.lower_closed))
            lo, lc = iv.upper, not iv.upper_closed
        if lo < INF:
            out.append(Interval(lo, INF, lc, False))
        return IntervalUnion(out)

    def endpoints(self) -> list[float]:
        """Finite endpoints of all components, sorted."""
        pts = []
        for iv in self.parts:
            for v in (iv.lower, iv.upper):
                if math.isfinite(v):
                    pts.append(v)
        return sorted(set(pts))

    def as_arrays(self):
        lo = np.array([iv.lower for iv in self.parts], dtype=float)
        hi = np.array([iv.upper for iv in self.parts], dtype=float)
        return lo, hi

    def to_json(self):
        return [iv.to_json() for iv in self.parts]

    @classmethod
    def from_json(cls, obj):
        return cls(Interval.from_json(p) for p in obj)
