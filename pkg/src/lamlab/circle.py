"""Exact arithmetic on the circle of angles R/Z.

Angles are reduced big-integer fractions in [0, 1); everything in this module
is exact — no floating point anywhere. The two maps that matter are angle
multiplication mod 1 (`tau`) and the cyclic-order predicates used by the
lamination machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, NamedTuple, Sequence


@dataclass(frozen=True)
class Angle:
    """A point of R/Z as a reduced fraction num/den with 0 <= num < den."""

    num: int
    den: int = 1

    def __post_init__(self):
        if self.den <= 0:
            raise ValueError("denominator must be positive")
        num = self.num % self.den
        g = gcd(num, self.den)
        object.__setattr__(self, "num", num // g)
        object.__setattr__(self, "den", self.den // g)

    @classmethod
    def parse(cls, text: str) -> "Angle":
        """Parse \"num/den\" (the serialization format; zero is \"0/1\")."""
        num, _, den = text.partition("/")
        if not _:
            raise ValueError(f"not an angle: {text!r}")
        return cls(int(num), int(den))

    @classmethod
    def from_fraction(cls, q: Fraction) -> "Angle":
        return cls(q.numerator, q.denominator)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    def __str__(self) -> str:
        return f"{self.num}/{self.den}"

    def __float__(self) -> float:
        return self.num / self.den

    # Total order = order of representatives in [0, 1).
    def __lt__(self, other: "Angle") -> bool:
        return self.num * other.den < other.num * self.den

    def __le__(self, other: "Angle") -> bool:
        return self.num * other.den <= other.num * self.den


class OrbitType(NamedTuple):
    """Minimal (preperiod, period) of an angle under repeated multiplication."""

    preperiod: int
    period: int


class AngleSet(tuple):
    """Strictly increasing tuple of distinct angles (a finite subset of R/Z)."""

    def __new__(cls, angles: Iterable[Angle]) -> "AngleSet":
        return super().__new__(cls, sorted(set(angles)))

    def __repr__(self) -> str:
        return "{" + ", ".join(str(a) for a in self) + "}"


def tau(degree: int, theta: Angle) -> Angle:
    """Multiply the angle by `degree` modulo 1."""
    if degree < 2:
        raise ValueError("degree must be at least 2")
    return Angle(degree * theta.num, theta.den)


def orbit_type(degree: int, theta: Angle) -> OrbitType:
    """Minimal preperiod and period of theta under angle multiplication.

    Every rational angle is eventually periodic, so this terminates; the
    first repeated value pins down both numbers.
    """
    seen: dict[Angle, int] = {}
    current = theta
    step = 0
    while current not in seen:
        seen[current] = step
        current = tau(degree, current)
        step += 1
    first = seen[current]
    return OrbitType(preperiod=first, period=step - first)


def positive_cyclic_order(angles: Sequence[Angle]) -> bool:
    """True when the tuple is in positive (counterclockwise) cyclic order.

    Requires at least three pairwise-distinct angles; duplicates make the
    question degenerate.
    """
    if len(angles) < 3:
        raise ValueError("need at least three angles")
    if len(set(angles)) != len(angles):
        raise ValueError("degenerate tuple")
    lowest = min(range(len(angles)), key=lambda i: angles[i])
    rotated = [angles[(lowest + i) % len(angles)] for i in range(len(angles))]
    return all(a < b for a, b in zip(rotated, rotated[1:]))


def interval_length(start: Angle, end: Angle) -> Fraction:
    """Length of the positively-oriented open arc from `start` to `end`."""
    if start == end:
        raise ValueError("empty or full interval")
    diff = end.fraction - start.fraction
    return diff if diff > 0 else diff + 1


def class_gap(cls: AngleSet) -> Fraction:
    """Smallest positive arc between consecutive members of the set."""
    if len(cls) < 2:
        raise ValueError("gap undefined")
    gaps = [
        interval_length(cls[i], cls[(i + 1) % len(cls)]) for i in range(len(cls))
    ]
    return min(gaps)


def _arc_index(cls: AngleSet, point: Angle) -> int:
    """Which complementary arc of `cls` the point falls in (arc i starts at cls[i])."""
    # Points equal to a member of cls have no arc; callers guard disjointness.
    lo, hi = 0, len(cls)
    while lo < hi:
        mid = (lo + hi) // 2
        if cls[mid] <= point:
            lo = mid + 1
        else:
            hi = mid
    return (lo - 1) % len(cls)


def unlinked(first: AngleSet, second: AngleSet) -> bool:
    """True when the two disjoint sets do not cross on the circle.

    Equivalently: `second` lies inside a single complementary arc of `first`.
    The relation is symmetric, and singletons never link anything.
    """
    if set(first) & set(second):
        raise ValueError("sets not disjoint")
    if len(first) < 2 or len(second) < 2:
        return True
    arcs = {_arc_index(first, p) for p in second}
    return len(arcs) == 1


def periodic_angles(degree: int, max_den: int) -> AngleSet:
    """All angles with denominator <= max_den that are periodic (preperiod 0)."""
    if max_den < 2:
        raise ValueError("max_den must be at least 2")
    found = []
    for den in range(1, max_den + 1):
        for num in range(den):
            if gcd(num, den) != 1:
                continue
            candidate = Angle(num, den)
            if orbit_type(degree, candidate).preperiod == 0:
                found.append(candidate)
    return AngleSet(found)


def all_angles(max_den: int) -> AngleSet:
    """Every reduced angle with denominator <= max_den (periodic and preperiodic)."""
    return AngleSet(
        Angle(num, den)
        for den in range(1, max_den + 1)
        for num in range(den)
        if gcd(num, den) == 1
    )
