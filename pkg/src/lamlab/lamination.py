"""Finite-support invariant laminations on the circle.

A lamination is stored as its non-singleton equivalence classes: disjoint
finite angle sets, every other angle being an implicit singleton. The axioms
checked by `check_axioms` are the usual invariance package for a degree-d
angle-multiplication map:

* R2 — every class is finite (structural here);
* R3 — the image of a class is again a class (or an implicit singleton);
* R4 — consecutive members of a class map to consecutive members of the
  image class ("complementary arcs map to complementary arcs");
* R5 — distinct classes never cross on the circle.

R1 (topological closedness of the full chord set) is meaningless for a finite
support and is only ever reported as the label "finite-support only".

The constructive side is `preimage_pairings` / `minimal_from_generator`:
pulling a class back under angle multiplication and growing the smallest
invariant relation generated by a two-point class. Candidate preimage classes
must map onto their image in cyclic order, must not cross anything already
present, and must own at least one complementary arc free of the other
preimage points (the arc that maps homeomorphically onto an arc of the image
class).

For generated laminations one more ingredient is needed. The circle side of
an image class that faces away from the seed (away from the common image
point of a collision pair, or away from the shortest sector of a periodic
cycle) is covered by exactly `degree` arcs upstairs, and the true sibling
classes are the boundary pairs of those arcs — that is how the underlying
degree-d map actually folds the disk. `minimal_from_generator` enforces this
arc rule, which settles the nested-versus-crossed choice that pure
unlinkedness leaves open at deeper levels of periodic seeds.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from lamlab.circle import (
    Angle,
    AngleSet,
    interval_length,
    orbit_type,
    tau,
    unlinked,
)
from lamlab.errors import (
    AmbiguousPullback,
    ObstructedPullback,
    ValidationError,
)

Pairing = tuple[AngleSet, ...]


@dataclass(frozen=True)
class Lamination:
    """Non-singleton classes of a finite lamination, canonically ordered."""

    degree: int
    classes: tuple[AngleSet, ...]

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError("degree must be at least 2")
        kept = [AngleSet(c) for c in self.classes if len(c) >= 2]
        kept.sort(key=lambda c: c[0])
        seen: set[Angle] = set()
        for cls in kept:
            for a in cls:
                if a in seen:
                    raise ValidationError("classes not disjoint")
                seen.add(a)
        object.__setattr__(self, "classes", tuple(kept))

    @property
    def support(self) -> AngleSet:
        return AngleSet(a for cls in self.classes for a in cls)

    def class_of(self, angle: Angle) -> AngleSet:
        """The class of an angle; implicit singletons come back as {angle}."""
        for cls in self.classes:
            if angle in cls:
                return cls
        return AngleSet([angle])

    def is_trivial(self) -> bool:
        return not self.classes


@dataclass(frozen=True)
class AxiomReport:
    """Verdicts for R2–R5; a check fails iff a witness is attached."""

    r1: str
    r2: bool
    r3: bool
    r4: bool
    r5: bool
    witnesses: Mapping[str, object]
    max_class_size: int

    def all_pass(self) -> bool:
        return self.r2 and self.r3 and self.r4 and self.r5


def closure(degree: int, pairs: Iterable[tuple[Angle, Angle]]) -> Lamination:
    """Smallest equivalence relation containing the given angle pairs."""
    parent: dict[Angle, Angle] = {}

    def find(x: Angle) -> Angle:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b in pairs:
        for x in (a, b):
            if x not in parent:
                parent[x] = x
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    groups: dict[Angle, list[Angle]] = {}
    for x in parent:
        groups.setdefault(find(x), []).append(x)
    return Lamination(degree, tuple(AngleSet(g) for g in groups.values() if len(g) >= 2))


def contains(coarse: Lamination, fine: Lamination) -> bool:
    """True when every class of `fine` sits inside a class of `coarse`."""
    if coarse.degree != fine.degree:
        raise ValueError("degree mismatch")
    lookup: dict[Angle, int] = {}
    for i, cls in enumerate(coarse.classes):
        for a in cls:
            lookup[a] = i
    for cls in fine.classes:
        ids = {lookup.get(a) for a in cls}
        if len(ids) != 1 or None in ids:
            return False
    return True


def tau_class_image(lam: Lamination, cls: AngleSet) -> AngleSet:
    return AngleSet(tau(lam.degree, a) for a in cls)


def _cyclic_successor_ok(image_class: AngleSet, u: Angle, w: Angle) -> bool:
    """Is (u, w)+ a complementary arc of image_class (w the successor of u)?"""
    idx = image_class.index(u)
    return image_class[(idx + 1) % len(image_class)] == w


def check_axioms(lam: Lamination) -> AxiomReport:
    witnesses: dict[str, object] = {}
    membership: dict[Angle, AngleSet] = {}
    for cls in lam.classes:
        for a in cls:
            membership[a] = cls

    r2 = True  # classes are finite tuples by construction; record anyway

    r3 = True
    for cls in lam.classes:
        image = tau_class_image(lam, cls)
        if len(image) == 1:
            if image[0] in membership:
                r3 = False
                witnesses["r3"] = (cls, image)
                break
        elif membership.get(image[0]) != image:
            r3 = False
            witnesses["r3"] = (cls, image)
            break

    r4 = True
    for cls in lam.classes:
        image = tau_class_image(lam, cls)
        if len(image) == 1:
            continue  # one complementary arc downstairs; nothing to distinguish
        for i, a in enumerate(cls):
            b = cls[(i + 1) % len(cls)]
            u, w = tau(lam.degree, a), tau(lam.degree, b)
            if u == w or not _cyclic_successor_ok(image, u, w):
                r4 = False
                witnesses["r4"] = (cls, (a, b))
                break
        if not r4:
            break

    r5 = True
    index = _ChordIndex()
    for i, cls in enumerate(lam.classes):
        hit = index.crossing(cls)
        if hit is not None:
            r5 = False
            witnesses["r5"] = (lam.classes[hit], cls)
            break
        index.add(i, cls)

    return AxiomReport(
        r1="finite-support only",
        r2=r2,
        r3=r3,
        r4=r4,
        r5=r5,
        witnesses=witnesses,
        max_class_size=max((len(c) for c in lam.classes), default=0),
    )


# --- fast crossing index ----------------------------------------------------


class _ChordIndex:
    """Sorted endpoint index answering "does this class cross anything here?".

    Keeps every stored angle in one sorted list tagged with its class id, so a
    crossing query for a pair class only has to scan the sparser of its two
    arcs. Class sizes let a single-arc scan decide whether a touched class
    lies entirely inside it.
    """

    def __init__(self):
        self.angles: list[Angle] = []
        self.ids: list[int] = []
        self.sizes: dict[int, int] = {}
        self.members: dict[int, AngleSet] = {}

    def __len__(self) -> int:
        return len(self.sizes)

    def add(self, class_id: int, cls: AngleSet) -> None:
        for a in cls:
            pos = bisect_left(self.angles, a)
            self.angles.insert(pos, a)
            self.ids.insert(pos, class_id)
        self.sizes[class_id] = len(cls)
        self.members[class_id] = cls

    def contains_angle(self, a: Angle) -> Optional[int]:
        pos = bisect_left(self.angles, a)
        if pos < len(self.angles) and self.angles[pos] == a:
            return self.ids[pos]
        return None

    def _ids_in_arc(self, lo: Angle, hi: Angle) -> dict[int, int]:
        """Count stored endpoints per class id strictly inside (lo, hi)+."""
        counts: dict[int, int] = {}
        if lo < hi:
            start, stop = bisect_right(self.angles, lo), bisect_left(self.angles, hi)
            span = range(start, stop)
        else:  # arc wraps through 0
            start, stop = bisect_right(self.angles, lo), bisect_left(self.angles, hi)
            span = itertools.chain(range(start, len(self.angles)), range(stop))
        for i in span:
            counts[self.ids[i]] = counts.get(self.ids[i], 0) + 1
        return counts

    def _arc_weight(self, lo: Angle, hi: Angle) -> int:
        if lo < hi:
            return bisect_left(self.angles, hi) - bisect_right(self.angles, lo)
        return (len(self.angles) - bisect_right(self.angles, lo)) + bisect_left(
            self.angles, hi
        )

    def crossing(self, cls: AngleSet) -> Optional[int]:
        """Id of some stored class crossing `cls`, or None.

        Assumes `cls` is disjoint from everything stored (callers check).
        """
        if len(cls) == 2:
            a, b = cls
            # scan whichever side holds fewer endpoints
            if self._arc_weight(a, b) <= self._arc_weight(b, a):
                counts = self._ids_in_arc(a, b)
            else:
                counts = self._ids_in_arc(b, a)
            for cid, n in counts.items():
                if 0 < n < self.sizes[cid]:
                    return cid
            return None
        # general case: a class crosses iff it has endpoints in two arcs of cls
        arc_of: dict[int, int] = {}
        for k in range(len(cls)):
            lo, hi = cls[k], cls[(k + 1) % len(cls)]
            for cid in self._ids_in_arc(lo, hi):
                if cid in arc_of and arc_of[cid] != k:
                    return cid
                arc_of[cid] = k
        return None


# --- pullback ----------------------------------------------------------------


def _preimage_fiber(degree: int, a: Angle) -> list[Angle]:
    return [Angle(a.num + k * a.den, degree * a.den) for k in range(degree)]


def _maps_in_cyclic_order(degree: int, cls: AngleSet, image: AngleSet) -> bool:
    """Does the class traverse its image once, positively?"""
    images = [tau(degree, a) for a in cls]
    if len(set(images)) != len(image) or set(images) != set(image):
        return False
    descents = sum(
        1 for i in range(len(images)) if images[(i + 1) % len(images)] < images[i]
    )
    return descents == 1


def _has_free_arc(cls: AngleSet, other_points: Sequence[Angle]) -> bool:
    """Some complementary arc of cls contains none of the other points."""
    others = sorted(other_points)

    def arc_empty(lo: Angle, hi: Angle) -> bool:
        if lo < hi:
            return bisect_left(others, hi) - bisect_right(others, lo) == 0
        return (
            len(others) - bisect_right(others, lo) + bisect_left(others, hi)
        ) == 0

    return any(
        arc_empty(cls[k], cls[(k + 1) % len(cls)]) for k in range(len(cls))
    )


def _candidate_compatible(candidate: AngleSet, lam: Lamination) -> bool:
    for existing in lam.classes:
        if candidate == existing:
            continue  # re-finding a stored class is fine; caller dedupes
        if set(candidate) & set(existing):
            return False
        if not unlinked(candidate, existing):
            return False
    return True


def preimage_pairings(lam: Lamination, cls: AngleSet) -> list[Pairing]:
    """All valid ways to group the preimages of `cls` into sibling classes.

    Each sibling picks exactly one preimage of every member, maps onto `cls`
    in cyclic order, crosses nothing (stored classes, the other siblings), and
    keeps one complementary arc free of the other preimage points. Results
    come back canonically sorted; none at all is an obstruction.
    """
    if len(cls) < 2:
        raise ValueError("singletons are not pulled back")
    d = lam.degree
    members = list(cls)
    fibers = [_preimage_fiber(d, e) for e in members]
    all_points = [p for fiber in fibers for p in fiber]

    pairings: list[Pairing] = []
    for perms in itertools.product(
        *[itertools.permutations(range(d)) for _ in range(len(members) - 1)]
    ):
        candidate_classes = []
        for i in range(d):
            picks = [fibers[0][i]]
            for j, perm in enumerate(perms, start=1):
                picks.append(fibers[j][perm[i]])
            candidate_classes.append(AngleSet(picks))
        if _pairing_valid(candidate_classes, cls, lam, all_points):
            pairing = tuple(sorted(candidate_classes, key=lambda c: c[0]))
            if pairing not in pairings:
                pairings.append(pairing)

    pairings.sort(key=lambda p: [(a.num, a.den) for c in p for a in c])
    if not pairings:
        raise ObstructedPullback("obstructed pullback")
    return pairings


def _pairing_valid(
    candidates: list[AngleSet],
    image: AngleSet,
    lam: Lamination,
    all_points: Sequence[Angle],
) -> bool:
    d = lam.degree
    for cand in candidates:
        if len(cand) != len(image):
            return False  # a fiber point repeated: not a transversal
        if not _maps_in_cyclic_order(d, cand, image):
            return False
        others = [p for p in all_points if p not in set(cand)]
        if not _has_free_arc(cand, others):
            return False
        if not _candidate_compatible(cand, lam):
            return False
    for a, b in itertools.combinations(candidates, 2):
        if not unlinked(a, b):
            return False
    return True


# --- generated laminations --------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """A two-point seed class plus the degree it lives under.

    Exactly one of two shapes is legal: the members share their image angle
    (the co-landing pair of a critical collision), or both are periodic of
    one common period.
    """

    degree: int
    e_star: AngleSet

    def __post_init__(self):
        object.__setattr__(self, "e_star", AngleSet(self.e_star))
        if len(self.e_star) != 2:
            raise ValidationError("invalid generator")
        self.mode  # force validation

    @property
    def mode(self) -> str:
        a, b = self.e_star
        if tau(self.degree, a) == tau(self.degree, b):
            return "non-periodic"
        ta, tb = orbit_type(self.degree, a), orbit_type(self.degree, b)
        if ta.preperiod == 0 and tb.preperiod == 0 and ta.period == tb.period:
            return "periodic"
        raise ValidationError("invalid generator")


def _strictly_inside(lo: Angle, hi: Angle, x: Angle) -> bool:
    if lo < hi:
        return lo < x < hi
    return x > lo or x < hi


def _seed_locus(spec: GeneratorSpec):
    """Where the seed's critical value sits, as seen from the circle.

    For a collision pair that is a single angle (the common image). For a
    periodic seed it is the shortest sector over the class cycle — the wedge
    the critical value occupies. Returns None when the geometry is too
    symmetric to decide (an antipodal pair has no shorter side).
    """
    d = spec.degree
    if spec.mode == "non-periodic":
        return ("point", tau(d, spec.e_star[0]))
    cycle = [spec.e_star]
    current = spec.e_star
    while True:
        current = AngleSet(tau(d, a) for a in current)
        if current == spec.e_star:
            break
        cycle.append(current)
    best, best_len = None, None
    for cls in cycle:
        a, b = cls
        short = min(interval_length(a, b), interval_length(b, a))
        if best_len is None or short < best_len:
            best, best_len = cls, short
    a, b = best
    if interval_length(a, b) == interval_length(b, a):
        return None
    return ("sector", best)


def _away_side(cls: AngleSet, locus) -> Optional[tuple[Angle, Angle]]:
    """The complementary arc of a pair class facing away from the seed locus."""
    if locus is None or len(cls) != 2:
        return None
    a, b = cls
    kind, payload = locus
    if kind == "point":
        if payload == a or payload == b:
            return None
        return (b, a) if _strictly_inside(a, b, payload) else (a, b)
    # sector: payload is the characteristic pair class itself
    s1, s2 = payload
    if cls == payload:
        # away from its own short sector: the long side
        return (b, a) if interval_length(a, b) < interval_length(b, a) else (a, b)
    in1, in2 = _strictly_inside(a, b, s1), _strictly_inside(a, b, s2)
    if in1 != in2:
        return None  # seed chord crosses this class; no coherent side
    return (b, a) if in1 else (a, b)


def _bounds_preimage_arc(
    degree: int, cand: AngleSet, side: tuple[Angle, Angle]
) -> bool:
    """Does the pair bound one of the `degree` arcs covering `side` upstairs?"""
    x, y = side
    target = interval_length(x, y)
    for p, q in ((cand[0], cand[1]), (cand[1], cand[0])):
        if tau(degree, p) == x and tau(degree, q) == y:
            if degree * interval_length(p, q) == target:
                return True
    return False


class _Builder:
    """Incremental lamination under construction, with the crossing index."""

    def __init__(self, degree: int):
        self.degree = degree
        self.classes: list[AngleSet] = []
        self.index = _ChordIndex()

    def has(self, cls: AngleSet) -> bool:
        cid = self.index.contains_angle(cls[0])
        return cid is not None and self.index.members[cid] == cls

    def add(self, cls: AngleSet) -> None:
        for a in cls:
            if self.index.contains_angle(a) is not None:
                raise ValidationError("classes not disjoint")
        self.index.add(len(self.classes), cls)
        self.classes.append(cls)

    def snapshot(self) -> Lamination:
        return Lamination(self.degree, tuple(self.classes))

    def compatible(self, cand: AngleSet) -> bool:
        if self.has(cand):
            return True
        for a in cand:
            if self.index.contains_angle(a) is not None:
                return False
        return self.index.crossing(cand) is None


def _fast_pairings(
    builder: _Builder, cls: AngleSet, away: Optional[tuple[Angle, Angle]] = None
) -> list[Pairing]:
    """preimage_pairings against the builder's index (same predicate set),
    plus the preimage-arc rule when the seed tells us which side to cover."""
    d = builder.degree
    members = list(cls)
    fibers = [_preimage_fiber(d, e) for e in members]
    all_points = [p for fiber in fibers for p in fiber]

    valid: list[Pairing] = []
    for perms in itertools.product(
        *[itertools.permutations(range(d)) for _ in range(len(members) - 1)]
    ):
        cands = []
        for i in range(d):
            picks = [fibers[0][i]]
            for j, perm in enumerate(perms, start=1):
                picks.append(fibers[j][perm[i]])
            cands.append(AngleSet(picks))
        ok = True
        for cand in cands:
            if (
                len(cand) != len(members)
                or not _maps_in_cyclic_order(d, cand, cls)
                or not _has_free_arc(cand, [p for p in all_points if p not in set(cand)])
                or (away is not None and not _bounds_preimage_arc(d, cand, away))
                or not builder.compatible(cand)
            ):
                ok = False
                break
        if ok:
            for a, b in itertools.combinations(cands, 2):
                if not unlinked(a, b):
                    ok = False
                    break
        if ok:
            pairing = tuple(sorted(cands, key=lambda c: c[0]))
            if pairing not in valid:
                valid.append(pairing)
    valid.sort(key=lambda p: [(a.num, a.den) for c in p for a in c])
    return valid


def minimal_from_generator(spec: GeneratorSpec, depth: int) -> Lamination:
    """Smallest invariant relation generated by the seed class, to a depth.

    Level 0 is the seed (for a periodic seed: its whole forward cycle, so
    that every truncation is image-closed); level k+1 adds the sibling
    classes of every level-k class. A pullback with several valid pairings
    aborts loudly rather than guessing.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    d = spec.degree
    builder = _Builder(d)

    if spec.mode == "non-periodic":
        image = AngleSet(tau(d, a) for a in spec.e_star)
        if len(image) == 1 and image[0] in set(spec.e_star):
            raise ValidationError("invalid generator")
        seed = [spec.e_star]
    else:
        seed = [spec.e_star]
        current = spec.e_star
        while True:
            current = AngleSet(tau(d, a) for a in current)
            if current == spec.e_star:
                break
            if len(current) != 2:
                raise ValidationError("invalid generator")
            seed.append(current)
        for a, b in itertools.combinations(seed, 2):
            if set(a) & set(b) or not unlinked(a, b):
                raise ValidationError("invalid generator")

    for cls in seed:
        builder.add(cls)
    locus = _seed_locus(spec)

    frontier = sorted(seed, key=lambda c: c[0])
    for _ in range(depth):
        next_frontier: list[AngleSet] = []
        for cls in frontier:
            pairings = _fast_pairings(builder, cls, _away_side(cls, locus))
            if not pairings:
                raise ObstructedPullback("obstructed pullback")
            if len(pairings) > 1:
                raise AmbiguousPullback(
                    f"ambiguous pullback of {cls}: "
                    + "; ".join(str(list(p)) for p in pairings),
                    candidates=pairings,
                )
            for new_cls in pairings[0]:
                if builder.has(new_cls):
                    continue
                builder.add(new_cls)
                next_frontier.append(new_cls)
        frontier = sorted(next_frontier, key=lambda c: c[0])
        if not frontier:
            break
    return builder.snapshot()


def visual_lamination(
    lam_h: Lamination, spec: GeneratorSpec, depth: int
) -> Lamination:
    """Closure of a component lamination together with a generated one.

    The result must satisfy the axiom battery; a failure raises with the
    report attached instead of returning a broken object.
    """
    if lam_h.degree != spec.degree:
        raise ValueError("degree mismatch")
    generated = minimal_from_generator(spec, depth)
    pairs: list[tuple[Angle, Angle]] = []
    for lam in (lam_h, generated):
        for cls in lam.classes:
            pairs.extend((cls[0], other) for other in cls[1:])
    merged = closure(spec.degree, pairs)
    report = check_axioms(merged)
    if not report.all_pass():
        raise ValidationError("visual lamination failed validation", report=report)
    return merged


# --- serialization ------------------------------------------------------------


def serialize(lam: Lamination) -> dict:
    return {
        "degree": lam.degree,
        "classes": [[str(a) for a in cls] for cls in lam.classes],
    }


def parse(data: dict) -> Lamination:
    classes = tuple(
        AngleSet(Angle.parse(text) for text in cls) for cls in data["classes"]
    )
    seen: set[Angle] = set()
    for cls in classes:
        for a in cls:
            if a in seen:
                raise ValidationError("classes not disjoint")
            seen.add(a)
    return Lamination(int(data["degree"]), classes)


def restrict(lam: Lamination, max_den: int) -> Lamination:
    """Drop all angles with denominator beyond the bound; keep what remains."""
    kept = []
    for cls in lam.classes:
        small = AngleSet(a for a in cls if a.den <= max_den)
        if len(small) >= 2:
            kept.append(small)
    return Lamination(lam.degree, tuple(kept))
