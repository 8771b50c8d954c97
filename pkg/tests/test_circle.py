"""Exact-angle arithmetic tests.

The derived expectations here are frozen from the little integer oracles at
the top of the file, which deliberately share no code with the package.
"""

from fractions import Fraction
from math import gcd

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamlab.circle import (
    Angle,
    AngleSet,
    OrbitType,
    all_angles,
    class_gap,
    interval_length,
    orbit_type,
    periodic_angles,
    positive_cyclic_order,
    tau,
    unlinked,
)


# --- independent oracles -------------------------------------------------

def oracle_orbit(degree, num, den):
    """(preperiod, period) by raw integer iteration of num -> degree*num mod den."""
    g = gcd(num, den)
    num, den = num // g, den // g
    seen = {}
    k = 0
    while num not in seen:
        seen[num] = k
        num = (degree * num) % den
        k += 1
    return seen[num], k - seen[num]


def oracle_periodic(degree, max_den):
    out = set()
    for den in range(1, max_den + 1):
        for num in range(den):
            if gcd(num, den) == 1 and oracle_orbit(degree, num, den)[0] == 0:
                out.add((num, den))
    return out


# frozen from oracle_orbit:
ORBIT_CASES = [
    (3, 1, 2, (0, 1)),
    (3, 1, 8, (0, 2)),
    (3, 1, 6, (1, 1)),
    (3, 1, 12, (1, 2)),
    (2, 1, 7, (0, 3)),
]

# frozen from oracle_periodic:
PERIODIC_3_2 = {(0, 1), (1, 2)}
PERIODIC_2_3 = {(0, 1), (1, 3), (2, 3)}


def test_oracles_agree_with_frozen_values():
    for degree, num, den, expected in ORBIT_CASES:
        assert oracle_orbit(degree, num, den) == expected
    assert oracle_periodic(3, 2) == PERIODIC_3_2
    assert oracle_periodic(2, 3) == PERIODIC_2_3


# --- Angle basics ---------------------------------------------------------

def test_angle_normalization():
    assert Angle(5, 4) == Angle(1, 4)
    assert Angle(-1, 4) == Angle(3, 4)
    assert Angle(2, 4) == Angle(1, 2)
    assert Angle(0, 7) == Angle(0, 1)


def test_angle_serialization_round_trip():
    assert str(Angle(5, 12)) == "5/12"
    assert str(Angle(0, 3)) == "0/1"
    assert Angle.parse("7/9") == Angle(7, 9)
    assert Angle.parse(str(Angle(123, 456))) == Angle(123, 456)


def test_angle_ordering_is_by_value():
    assert Angle(1, 3) < Angle(1, 2)
    assert sorted([Angle(1, 2), Angle(1, 12), Angle(1, 3)]) == [
        Angle(1, 12),
        Angle(1, 3),
        Angle(1, 2),
    ]


def test_angleset_sorts_and_dedups():
    s = AngleSet([Angle(1, 2), Angle(1, 4), Angle(2, 4)])
    assert s == AngleSet([Angle(1, 4), Angle(1, 2)])
    assert list(s) == [Angle(1, 4), Angle(1, 2)]


# --- tau -----------------------------------------------------------------

def test_tau_examples():
    assert tau(3, Angle(1, 8)) == Angle(3, 8)
    assert tau(3, Angle(2, 3)) == Angle(0, 1)
    assert tau(2, Angle(5, 7)) == Angle(3, 7)


def test_tau_rejects_degree_below_two():
    with pytest.raises(ValueError):
        tau(1, Angle(1, 3))


# --- orbit_type ----------------------------------------------------------

def test_orbit_type_frozen_cases():
    for degree, num, den, expected in ORBIT_CASES:
        assert orbit_type(degree, Angle(num, den)) == OrbitType(*expected)


# --- positive_cyclic_order -------------------------------------------------

def test_cyclic_order_examples():
    assert positive_cyclic_order([Angle(1, 10), Angle(4, 10), Angle(7, 10)])
    assert not positive_cyclic_order([Angle(1, 10), Angle(7, 10), Angle(4, 10)])
    assert positive_cyclic_order([Angle(9, 10), Angle(0, 1), Angle(2, 10)])


def test_cyclic_order_degenerate():
    with pytest.raises(ValueError, match="degenerate tuple"):
        positive_cyclic_order([Angle(1, 10), Angle(1, 10), Angle(4, 10)])


# --- interval_length -------------------------------------------------------

def test_interval_length_examples():
    assert interval_length(Angle(1, 4), Angle(3, 4)) == Fraction(1, 2)
    assert interval_length(Angle(3, 4), Angle(1, 4)) == Fraction(1, 2)
    assert interval_length(Angle(2, 3), Angle(1, 3)) == Fraction(2, 3)


def test_interval_length_empty():
    with pytest.raises(ValueError, match="empty or full interval"):
        interval_length(Angle(1, 4), Angle(1, 4))


# --- class_gap -------------------------------------------------------------

def test_class_gap_examples():
    assert class_gap(AngleSet([Angle(0, 1), Angle(1, 3), Angle(2, 3)])) == Fraction(1, 3)
    assert class_gap(AngleSet([Angle(1, 12), Angle(5, 12)])) == Fraction(1, 3)
    assert class_gap(AngleSet([Angle(1, 7), Angle(2, 7), Angle(4, 7)])) == Fraction(1, 7)


def test_class_gap_singleton():
    with pytest.raises(ValueError, match="gap undefined"):
        class_gap(AngleSet([Angle(1, 3)]))


# --- unlinked ----------------------------------------------------------------

def test_unlinked_examples():
    a = AngleSet([Angle(1, 10), Angle(2, 10)])
    b = AngleSet([Angle(3, 10), Angle(4, 10)])
    assert unlinked(a, b)
    c = AngleSet([Angle(1, 10), Angle(3, 10)])
    d = AngleSet([Angle(2, 10), Angle(4, 10)])
    assert not unlinked(c, d)


def test_unlinked_singletons_never_link():
    assert unlinked(AngleSet([Angle(1, 2)]), AngleSet([Angle(1, 10), Angle(9, 10)]))
    assert unlinked(AngleSet([Angle(1, 10), Angle(9, 10)]), AngleSet([Angle(1, 2)]))


def test_unlinked_rejects_overlap():
    with pytest.raises(ValueError, match="sets not disjoint"):
        unlinked(AngleSet([Angle(1, 3)]), AngleSet([Angle(1, 3), Angle(2, 3)]))


# --- periodic_angles ----------------------------------------------------------

def test_periodic_angles_frozen():
    assert periodic_angles(3, 2) == AngleSet(Angle(n, d) for n, d in PERIODIC_3_2)
    assert periodic_angles(2, 3) == AngleSet(Angle(n, d) for n, d in PERIODIC_2_3)


def test_periodic_angles_matches_oracle_wider():
    for degree in (2, 3):
        got = {(a.num, a.den) for a in periodic_angles(degree, 12)}
        assert got == oracle_periodic(degree, 12)


# --- properties -----------------------------------------------------------

angles_small = st.builds(
    Angle,
    st.integers(min_value=0, max_value=99),
    st.integers(min_value=1, max_value=100),
)


@given(angles_small, angles_small)
def test_interval_lengths_sum_to_one(a, b):
    if a == b:
        return
    assert interval_length(a, b) + interval_length(b, a) == 1


@given(st.lists(angles_small, min_size=3, max_size=8, unique=True), st.integers(0, 7))
def test_cyclic_order_rotation_invariant_reflection_reversed(pts, shift):
    k = shift % len(pts)
    rotated = pts[k:] + pts[:k]
    assert positive_cyclic_order(pts) == positive_cyclic_order(rotated)
    if not positive_cyclic_order(pts):
        return
    assert not positive_cyclic_order(list(reversed(pts)))


@given(
    st.sets(angles_small, min_size=1, max_size=6),
    st.sets(angles_small, min_size=1, max_size=6),
)
def test_unlinked_symmetric(a, b):
    if a & b:
        return
    first, second = AngleSet(a), AngleSet(b)
    assert unlinked(first, second) == unlinked(second, first)


@settings(max_examples=30)
@given(st.integers(min_value=2, max_value=3), st.integers(min_value=2, max_value=60))
def test_tau_has_exactly_degree_preimages(degree, max_den):
    """tau is degree-to-one on the set of angles with denominator <= N*degree."""
    targets = all_angles(max_den)
    domain = all_angles(max_den * degree)
    counts = {t: 0 for t in targets}
    for a in domain:
        image = tau(degree, a)
        if image in counts:
            counts[image] += 1
    assert all(v == degree for v in counts.values())


def _coprime_part(n, d):
    while (g := gcd(n, d)) > 1:
        n //= g
    return n


def _mult_order(base, mod):
    if mod == 1:
        return 1
    value, k = base % mod, 1
    while value != 1:
        value = value * base % mod
        k += 1
    return k


@settings(max_examples=150)
@given(st.integers(min_value=2, max_value=3), angles_small)
def test_orbit_period_divides_multiplicative_order(degree, theta):
    den = _coprime_part(theta.den, degree)
    order = _mult_order(degree, den)
    assert order % orbit_type(degree, theta).period == 0
