"""Ray dynamics for marked cubic polynomials z^3 - 3c^2 z + (2c^3 + v).

The map has critical points at +-c.  Throughout, c is the *marked* critical
point (on the slice v = c it is a superattracting fixed point) and -c is the
free one.  Two coordinate systems drive everything here:

* outside the filled Julia set, the escape-rate coordinate ("potential")
  conjugates the map to w -> w^3; external rays are traced by pulling an
  asymptotic start back through the cubic, one grid level at a time, jointly
  over the whole forward orbit of the starting angle so that every pullback
  target is a point computed at an earlier level of the same run;

* inside the basin of the marked cycle, a local degree-two conjugacy
  phi(f^p(z)) = phi(z)^2 plays the same role with doubling in place of
  tripling.  Internal rays are traced outward on a squaring grid; when a ray
  runs into the free critical point the pullback branches collide and the
  trace consumes one entry of a turning sequence (L = rotate the tangent by
  +pi/2, R = by -pi/2) to decide how to continue.

All angles are exact rationals (`lamlab.circle.Angle`); all tolerances come
from `lamlab.config.Config`.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from lamlab.circle import Angle, AngleSet, all_angles, tau
from lamlab.config import Config
from lamlab.errors import NumericalError, ValidationError
from lamlab.lamination import Lamination, check_axioms, closure

DEFAULT = Config()

_OMEGA = complex(-0.5, math.sqrt(3.0) / 2.0)  # primitive cube root of unity

# Ray status literals.  A finished trace that has not been extrapolated to
# its landing point reports "escaped-budget" (the depth budget ran out, which
# is the normal way a trace ends); "obstructed" means the continuation failed
# near a precritical point; "landed" is attached by the landing helpers.
TRACED = "escaped-budget"
OBSTRUCTED = "obstructed"
LANDED = "landed"


# ---------------------------------------------------------------------------
# parameters and elementary evaluations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubicParam:
    """A member of the family, addressed by the marked critical point c."""

    c: complex
    v: complex

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "v", complex(self.v))

    @classmethod
    def slice_point(cls, c: complex) -> "CubicParam":
        """The period-one slice: v = c makes c a superattracting fixed point."""
        return cls(c, c)

    @property
    def co_critical(self) -> complex:
        return -self.c

    @property
    def lin_coeff(self) -> complex:
        return -3.0 * self.c * self.c

    @property
    def const_coeff(self) -> complex:
        return 2.0 * self.c ** 3 + self.v

    def is_generic(self, budget: int = 64, tol: float = 1e-10) -> bool:
        """True when the free critical point -c stays off the orbit of c.

        The orbit is scanned for `budget` steps; c = -c (i.e. c = 0) is the
        degenerate extreme and is always non-generic.
        """
        w = self.c
        target = -self.c
        for _ in range(budget + 1):
            if abs(w - target) < tol:
                return False
            w = evaluate(self, w)
            if abs(w) > 1e6:
                return True
        return True

    def key_bytes(self) -> bytes:
        """Exact (bit-level) identity of the parameter, for cache keys."""
        return struct.pack(
            ">dddd", self.c.real, self.c.imag, self.v.real, self.v.imag
        )


def evaluate(a: CubicParam, z):
    """f_a(z); works for scalars and numpy arrays alike."""
    return (z * z - 3.0 * a.c * a.c) * z + a.const_coeff


def derivative(a: CubicParam, z):
    return 3.0 * (z * z - a.c * a.c)


def critical_points(a: CubicParam) -> tuple[complex, complex]:
    return (a.c, -a.c)


def _escape_radius(a: CubicParam) -> float:
    # |z| beyond this grows monotonically: crude but safe coefficient bound.
    return max(2.0, 1.0 + abs(a.lin_coeff) + abs(a.const_coeff))


# ---------------------------------------------------------------------------
# escape-rate potential
# ---------------------------------------------------------------------------


def green_external(a: CubicParam, z: complex, budget: Optional[int] = None,
                   cfg: Config = DEFAULT) -> float:
    """Escape rate of z: lim 3^-n log|f^n(z)|, or 0.0 if z never escapes.

    After the first escape iterate the remaining sum telescopes into
    log-corrections 3^-(k+1) log|1 + lin/w^2 + const/w^3| which die off
    triply exponentially; the loop stops once they are below machine
    precision (|w| > 1e80 guards overflow before cubing).
    """
    budget = cfg.iteration_budget if budget is None else budget
    radius = _escape_radius(a)
    w = complex(z)
    n = 0
    while abs(w) <= radius:
        if n >= budget:
            return 0.0
        w = evaluate(a, w)
        n += 1
    total = math.log(abs(w))
    scale = 1.0
    for _ in range(80):
        if abs(w) > 1e80:
            break
        correction = 1.0 + a.lin_coeff / w ** 2 + a.const_coeff / w ** 3
        scale /= 3.0
        total += scale * math.log(abs(correction))
        w = evaluate(a, w)
    return total / (3.0 ** n)


# ---------------------------------------------------------------------------
# classification of the free critical orbit
# ---------------------------------------------------------------------------


def _marked_cycle(a: CubicParam, budget: int, tol: float = 1e-8):
    """Period and points of the (numerically) periodic marked orbit, or None."""
    pts = [a.c]
    w = a.c
    for p in range(1, min(budget, 128) + 1):
        w = evaluate(a, w)
        if abs(w - a.c) < tol:
            return pts
        if abs(w) > 1e6:
            return None
        pts.append(w)
    return None


def _segment_converges(a: CubicParam, z0: complex, z1: complex, cycle,
                       entry_radius: float, budget: int, samples: int) -> bool:
    # Every sample of [z0, z1] must reach the cycle's entry disks without
    # escaping; a break in the segment means the endpoints sit in different
    # Fatou components.
    radius = _escape_radius(a)
    for k in range(samples + 1):
        w = z0 + (z1 - z0) * (k / samples)
        ok = False
        for _ in range(budget):
            if abs(w) > radius:
                return False
            if min(abs(w - q) for q in cycle) < entry_radius:
                ok = True
                break
            w = evaluate(a, w)
        if not ok:
            return False
    return True


def classify_type(a: CubicParam, budget: Optional[int] = None,
                  cfg: Config = DEFAULT) -> str:
    """Where does the free critical point -c sit relative to the marked basin?

    Returns one of 'A' (same immediate basin component as c), 'B' (another
    component of the immediate basin cycle), 'C' (a strictly preperiodic
    basin component), 'D-or-escape' (escapes, or shows no affinity to the
    marked cycle within budget), 'undecided' (the marked orbit itself is not
    numerically periodic).  Non-generic parameters are rejected.

    A versus B/C is decided by a segment test: the straight segment from -c
    to the matching cycle point lies in one Fatou component exactly when it
    is one the free critical point shares with the cycle, so every sample of
    it must converge without escaping.  This is a heuristic (a wildly folded
    component could defeat it) but it is conclusive on the hyperbolic
    parameters this package works with.
    """
    budget = cfg.iteration_budget if budget is None else budget
    if not a.is_generic(budget):
        raise ValidationError("non-generic parameter: -c meets the marked orbit")
    cycle = _marked_cycle(a, budget)
    if cycle is None:
        return "undecided"
    p = len(cycle)
    entry_radius = 0.25 * min(
        min(abs(q - (-a.c)) for q in cycle), *(abs(2 * q) for q in cycle)
    )
    entry_radius = max(entry_radius, 1e-12)
    radius = _escape_radius(a)
    w = -a.c
    hit = None
    for k in range(budget + 1):
        if abs(w) > radius:
            return "D-or-escape"
        dists = [abs(w - q) for q in cycle]
        i = int(np.argmin(dists))
        if dists[i] < entry_radius:
            hit = (k, i)
            break
        w = evaluate(a, w)
    if hit is None:
        return "D-or-escape"
    k, i = hit
    j = (i - k) % p  # candidate cycle point sharing a component with -c
    for samples in (48, 192):
        if _segment_converges(a, -a.c, cycle[j], cycle, entry_radius,
                              budget, samples):
            return "A" if j == 0 else "B"
    return "C"


# ---------------------------------------------------------------------------
# vectorised cubic solve
# ---------------------------------------------------------------------------


def _cubic_roots(lin: complex, rhs: np.ndarray) -> np.ndarray:
    """All solutions of z^3 + lin*z = rhs, shape (3,) + rhs.shape.

    Cardano with the larger-magnitude cube-root branch to dodge cancellation;
    callers polish with Newton so ~1e-12 accuracy here is plenty.
    """
    r = -np.asarray(rhs, dtype=complex)  # z^3 + lin z + r = 0
    Q = r / 2.0
    P = lin / 3.0
    disc = np.sqrt(Q * Q + P ** 3)
    u3a = -Q + disc
    u3b = -Q - disc
    u3 = np.where(np.abs(u3a) >= np.abs(u3b), u3a, u3b)
    u = u3 ** (1.0 / 3.0)
    tiny = np.abs(u) < 1e-120
    safe_u = np.where(tiny, 1.0, u)
    vv = np.where(tiny, 0.0, -P / safe_u)
    u = np.where(tiny, (-r) ** (1.0 / 3.0), u)
    roots = np.stack([
        u * _OMEGA ** k + vv * _OMEGA ** (-k) for k in range(3)
    ])
    return roots


def _newton_polish(a: CubicParam, z: np.ndarray, target: np.ndarray,
                   iterations: int = 2) -> np.ndarray:
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        for _ in range(iterations):
            dz = derivative(a, z)
            dz = np.where(np.abs(dz) < 1e-300, 1e-300, dz)
            z = z - (evaluate(a, z) - target) / dz
    return z


# ---------------------------------------------------------------------------
# external rays
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RayPoint:
    potential: float
    z: complex


@dataclass(frozen=True)
class ExternalRay:
    theta: Angle
    points: tuple[RayPoint, ...]
    status: str
    landing: Optional[complex] = None


def _phi_hat(a: CubicParam, z: np.ndarray):
    """Truncated-product escape coordinate and its derivative, vectorised.

    Valid for |z| comfortably outside the escape radius; the product has
    converged to machine precision after a handful of cubings.
    """
    lin, const = a.lin_coeff, a.const_coeff
    log_phi = np.log(z)
    dlog = 1.0 / z
    w = z
    wp = np.ones_like(z)
    scale = 1.0
    for _ in range(60):
        if np.all(np.abs(w) > 1e80):
            break
        s_val = 1.0 + lin / w ** 2 + const / w ** 3
        scale /= 3.0
        log_phi = log_phi + scale * np.log(s_val)
        dlog = dlog + scale * ((-2.0 * lin / w ** 3 - 3.0 * const / w ** 4) * wp) / s_val
        wp = wp * derivative(a, w)
        w = evaluate(a, w)
    phi = np.exp(log_phi)
    return phi, phi * dlog


def _asymptotic_start(a: CubicParam, targets: np.ndarray) -> np.ndarray:
    """Solve phi(z) = w for large |w| (inverse Boettcher, Newton-polished)."""
    lin, const = a.lin_coeff, a.const_coeff
    w = targets
    z = w - lin / (3.0 * w) - const / (3.0 * w ** 2)
    for _ in range(5):
        phi, dphi = _phi_hat(a, z)
        step = (phi - w) / dphi
        z = z - step
        if np.max(np.abs(step) / np.abs(w)) < 1e-14:
            break
    phi, _ = _phi_hat(a, z)
    if np.max(np.abs(phi - w) / np.abs(w)) > 1e-10:
        raise NumericalError("asymptotic ray start failed to converge")
    return z


def _tau3_closure(angles: Iterable[Angle]) -> list[Angle]:
    seen: set[Angle] = set()
    stack = list(angles)
    while stack:
        th = stack.pop()
        if th in seen:
            continue
        seen.add(th)
        stack.append(tau(3, th))
    return sorted(seen)


class _FamilyTrace:
    """Joint pullback trace of a tau_3-closed family of external rays.

    potentials[j] = start * 3^(-j/steps); Z[i, j] is the point of ray
    angles[i] at grid level j (NaN past an obstruction).  The defining
    relation is f(Z[i, j]) = Z[image[i], j - steps], exact in the potential
    grid by construction.
    """

    def __init__(self, angles: list[Angle], potentials: np.ndarray,
                 Z: np.ndarray, good_until: np.ndarray, steps: int):
        self.angles = angles
        self.index = {th: i for i, th in enumerate(angles)}
        self.potentials = potentials
        self.Z = Z
        self.good_until = good_until
        self.steps = steps

    def ray(self, theta: Angle) -> ExternalRay:
        i = self.index[theta]
        last = int(self.good_until[i])
        pts = tuple(
            RayPoint(float(self.potentials[j]), complex(self.Z[i, j]))
            for j in range(last + 1)
        )
        status = TRACED if last == self.Z.shape[1] - 1 else OBSTRUCTED
        return ExternalRay(theta=theta, points=pts, status=status)


def _trace_family(a: CubicParam, family: list[Angle], target_potential: float,
                  steps: int, cfg: Config) -> _FamilyTrace:
    start = cfg.start_potential
    levels = max(steps, int(math.ceil(steps * math.log(start / target_potential, 3.0))))
    cached = _cache_load(a, family, levels, steps, cfg)
    if cached is not None:
        return cached
    n = len(family)
    index = {th: i for i, th in enumerate(family)}
    image = np.array([index[tau(3, th)] for th in family])
    potentials = start * 3.0 ** (-np.arange(levels + 1) / steps)
    Z = np.full((n, levels + 1), np.nan + 0j, dtype=complex)
    good_until = np.full(n, levels, dtype=int)

    # Levels with enough potential are solved directly from the asymptotic
    # coordinate (the conjugacy product converges fast out there); only the
    # deep levels, where preimages crowd together, need the pullback.
    asym_cut = max(2.0, math.log(2.0 * _escape_radius(a)))
    direct = max(steps, int(np.sum(potentials >= asym_cut)))
    direct = min(direct, levels + 1)
    floats = np.array([th.num / th.den for th in family])
    for j in range(direct):
        w = np.exp(potentials[j] + 2j * np.pi * floats)
        Z[:, j] = _asymptotic_start(a, w)

    lin = a.lin_coeff
    for j in range(direct, levels + 1):
        T = Z[image, j - steps]
        pred = Z[:, j - 1]
        alive = (good_until >= j) & np.isfinite(T) & np.isfinite(pred)
        good_until[(good_until >= j) & ~alive] = j - 1
        if not alive.any():
            break
        roots = _cubic_roots(lin, (T - a.const_coeff)[alive])
        dist = np.abs(roots - pred[alive])
        order = np.argsort(dist, axis=0)
        d1 = np.take_along_axis(dist, order[:1], axis=0)[0]
        d2 = np.take_along_axis(dist, order[1:2], axis=0)[0]
        chosen = np.take_along_axis(roots, order[:1], axis=0)[0]
        ambiguous = d2 < 2.0 * d1
        if ambiguous.any():
            chosen = _resolve_ambiguous(a, lin, Z, image, j, steps, alive,
                                        ambiguous, chosen, good_until)
        idx = np.where(alive)[0]
        z = _newton_polish(a, chosen, T[alive])
        res = np.abs(evaluate(a, z) - T[alive]) / np.maximum(1.0, np.abs(T[alive]))
        bad = res > cfg.trace_tol
        if bad.any():
            z[bad] = _newton_polish(a, z[bad], T[alive][bad], iterations=3)
            res = np.abs(evaluate(a, z) - T[alive]) / np.maximum(1.0, np.abs(T[alive]))
            bad = res > cfg.trace_tol
        Z[idx, j] = z
        if bad.any():
            good_until[idx[bad]] = j - 1
            Z[idx[bad], j] = np.nan
    trace = _FamilyTrace(family, potentials, Z, good_until, steps)
    _cache_store(a, family, levels, steps, cfg, trace)
    return trace


def _resolve_ambiguous(a, lin, Z, image, j, steps, alive, ambiguous, chosen,
                       good_until):
    """Walk flagged rays through chord substeps to pick a pullback branch.

    When two preimages are comparably close to the predictor the grid step
    was too coarse near a branch point; interpolating the target along the
    image polyline usually separates them.  Rays that stay ambiguous are cut
    (obstructed) rather than guessed.
    """
    idx_alive = np.where(alive)[0]
    for col, i in enumerate(idx_alive):
        if not ambiguous[col]:
            continue
        t_hi = Z[image[i], j - steps - 1] if j - steps - 1 >= 0 else None
        t_lo = Z[image[i], j - steps]
        pred = Z[i, j - 1]
        ok = False
        if t_hi is not None and np.isfinite(t_hi):
            zc = pred
            for frac in (0.25, 0.5, 0.75, 1.0):
                t_sub = t_hi + (t_lo - t_hi) * frac
                roots = _cubic_roots(lin, np.array([t_sub - a.const_coeff]))[:, 0]
                d = np.abs(roots - zc)
                o = np.argsort(d)
                if frac == 1.0 and d[o[1]] > 1.5 * d[o[0]]:
                    ok = True
                zc = roots[o[0]]
            if ok:
                chosen[col] = zc
        if not ok:
            good_until[i] = j - 1
            chosen[col] = np.nan
    return chosen


def trace_external_ray(a: CubicParam, theta: Angle,
                       target_potential: Optional[float] = None,
                       steps_per_level: Optional[int] = None,
                       cfg: Config = DEFAULT) -> ExternalRay:
    """Trace the external ray at a rational angle down to a target potential.

    The whole forward angle orbit is traced jointly so that every pullback
    target is a previously computed point of the run; the requested angle's
    polyline is returned.
    """
    if not isinstance(theta, Angle):
        theta = Angle.from_fraction(Fraction(theta))
    target = cfg.target_potential if target_potential is None else target_potential
    steps = cfg.steps_per_level if steps_per_level is None else steps_per_level
    family = _tau3_closure([theta])
    trace = _trace_family(a, family, target, steps, cfg)
    return trace.ray(theta)


def _aitken_tail(zs: np.ndarray, tol: float) -> Optional[complex]:
    """Accelerated limit of a convergent tail, or None if unstable.

    One Delta^2 pass kills a geometric mode of unknown ratio; a second pass
    handles the slower, parabolic-like tails.  Stability is judged by the
    last two accelerated values agreeing within tol.
    """
    zs = np.asarray(zs, dtype=complex)
    if zs.size < 5:
        return None

    def sweep(seq):
        d1 = seq[1:] - seq[:-1]
        d2 = seq[2:] - 2 * seq[1:-1] + seq[:-2]
        safe = np.abs(d2) > 1e-300
        acc = np.where(safe, seq[2:] - d1[1:] ** 2 / np.where(safe, d2, 1.0),
                       seq[2:])
        return acc

    first = sweep(zs)
    if first.size >= 2 and abs(first[-1] - first[-2]) < tol:
        return complex(first[-1])
    second = sweep(first) if first.size >= 3 else first
    if second.size >= 2 and abs(second[-1] - second[-2]) < tol:
        return complex(second[-1])
    return None


def landing_point(ray: ExternalRay, tol: Optional[float] = None,
                  cfg: Config = DEFAULT) -> Optional[complex]:
    """Extrapolated landing point of a traced ray, or None if inconclusive."""
    tol = cfg.landing_tol if tol is None else tol
    if ray.status == OBSTRUCTED or len(ray.points) < 8:
        return None
    # subsample so consecutive samples drop the potential by about a factor
    # of three; extrapolation on the raw grid contracts too slowly
    ratio = ray.points[-2].potential / ray.points[-1].potential
    stride = max(1, round(math.log(3.0) / math.log(ratio))) if ratio > 1.0 else 1
    zs = np.array([pt.z for pt in ray.points])[::-1][::stride][::-1][-14:]
    return _aitken_tail(zs, tol)


def with_landing(ray: ExternalRay, z: complex) -> ExternalRay:
    return replace(ray, status=LANDED, landing=z)


def empirical_rational_lamination(a: CubicParam, max_den: int,
                                  tol: Optional[float] = None,
                                  cfg: Config = DEFAULT) -> Lamination:
    """Cluster the landing points of all rays with angle denominator <= max_den.

    Angles land together exactly when their landing points coincide; the
    clustering is single-linkage with radius tol.  The result is validated
    against the lamination axioms before being returned — a failure means
    tol is badly sized for the actual landing separations or some ray has
    not effectively landed, so it is raised rather than patched.
    """
    tol = cfg.cluster_tol if tol is None else tol
    family = sorted(all_angles(max_den))
    landings = _family_landings(a, family, cfg)
    pairs = []
    pts = np.array([landings[th] for th in family])
    if tol > 0:
        lower = np.tri(len(family), k=-1, dtype=bool)
        sep = np.abs(pts[:, None] - pts[None, :])
        linked = np.argwhere((sep <= tol) & lower)
        pairs = [(family[i], family[j]) for i, j in linked]
        # stability: the classes must survive halving the radius, otherwise
        # tol sits inside the cloud of landing separations
        halved = [(family[i], family[j])
                  for i, j in np.argwhere((sep <= 0.5 * tol) & lower)]
        if closure(3, halved) != closure(3, pairs):
            raise ValidationError(
                "clustering unstable: halving tol changes the classes")
    lam = closure(3, pairs)
    report = check_axioms(lam)
    if not report.all_pass():
        raise ValidationError(
            "empirical lamination failed validation (tol mis-sized or a ray "
            "did not land)", report=report)
    return lam


def family_landings(a: CubicParam, angles: Sequence[Angle],
                    cfg: Config = DEFAULT,
                    tol: Optional[float] = None) -> dict[Angle, complex]:
    """Landing points for a whole family of angles, traced jointly.

    The family is closed under tripling before tracing; every angle of the
    closure appears in the result.  Raises if any ray fails to land stably.
    """
    return _family_landings(a, sorted(set(angles)), cfg, tol=tol)


def _family_landings(a: CubicParam, family: list[Angle], cfg: Config,
                     tol: Optional[float] = None) -> dict[Angle, complex]:
    tol = cfg.landing_tol if tol is None else tol
    family = _tau3_closure(family)
    base = cfg.target_potential
    # slow (merging) rays need a deeper tail for a stable extrapolation, but
    # too deep drowns them in the roundoff floor of their landing target —
    # escalate in stages and stop at the first depth where everything lands
    for target in (base, base ** 2, base ** 3):
        trace = _trace_family(a, family, target, cfg.steps_per_level, cfg)
        landings: dict[Angle, complex] = {}
        missing = []
        for th in family:
            i = trace.index[th]
            if trace.good_until[i] != trace.Z.shape[1] - 1:
                missing.append(th)
                continue
            stride = trace.steps
            tail = trace.Z[i, ::-1][::stride][::-1][-12:]
            limit = _aitken_tail(tail, tol)
            if limit is None:
                missing.append(th)
            else:
                landings[th] = limit
        if not missing:
            return landings
    raise NumericalError(
        "rays did not land: " + ", ".join(str(t) for t in missing[:8]))


# ---------------------------------------------------------------------------
# internal coordinate of the marked basin
# ---------------------------------------------------------------------------


def _refine_center(a: CubicParam, p: int) -> complex:
    """Newton-polish the periodic point of period p that shadows c."""
    z = a.c
    for _ in range(40):
        w = z
        dw = 1.0 + 0j
        for _ in range(p):
            dw *= derivative(a, w)
            w = evaluate(a, w)
        g = w - z
        dg = dw - 1.0
        if abs(dg) < 1e-300:
            break
        step = g / dg
        z = z - step
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            break
    return z


def _compose_taylor(a: CubicParam, center: complex, p: int, order: int) -> np.ndarray:
    """Taylor coefficients of f^p(center + u) - center, forced superattracting.

    The cubic's expansion about any point is exact at order three, so the
    composition is a truncated polynomial product.  Constant and linear terms
    are dropped at the end: on-slice they vanish identically, and for the
    slightly off-slice parameters produced by continuation they are below the
    working tolerances.
    """
    F = np.zeros(order + 1, dtype=complex)
    F[0] = center
    F[1] = 1.0
    for _ in range(p):
        z0 = F[0]
        # f(z0 + h) = f(z0) + f'(z0) h + 3 z0 h^2 + h^3, exactly
        c0 = evaluate(a, z0)
        c1 = derivative(a, z0)
        h = F.copy()
        h[0] = 0.0
        h2 = np.convolve(h, h)[: order + 1]
        h3 = np.convolve(h2, h)[: order + 1]
        F = c1 * h + 3.0 * z0 * h2 + h3
        F[0] += c0
    F[0] = 0.0
    F[1] = 0.0
    return F


def _bottcher_series(a: CubicParam, p: int, order: int = 18):
    """(center, coeffs b[1..order]) of the local conjugacy phi(f^p) = phi^2.

    b1 equals half the second derivative of f^p at the center; the remaining
    coefficients follow degree by degree from matching phi(F(u)) = phi(u)^2.
    """
    center = _refine_center(a, p)
    F = _compose_taylor(a, center, p, order + 1)
    alpha = F[2]
    if abs(alpha) < 1e-12:
        raise ValidationError(
            "non-generic parameter: basin coordinate is degenerate")
    b = np.zeros(order + 1, dtype=complex)
    b[1] = alpha
    # powers of F, truncated; F^j contributes only from degree 2j
    F_pow = [None, F.copy()]
    for j in range(2, order // 2 + 2):
        F_pow.append(np.convolve(F_pow[-1], F)[: order + 2])
    for m in range(3, order + 2):
        lhs = 0j
        for j in range(1, m // 2 + 1):
            if j < len(F_pow) and m < len(F_pow[j]):
                lhs += b[j] * F_pow[j][m]
        rhs_known = 0j
        for i in range(2, m - 1):
            k = m - i
            if 1 <= k <= order and i <= order and k < m - 1 and i < m - 1:
                rhs_known += b[i] * b[k]
        target_index = m - 1
        if target_index > order:
            break
        b[target_index] = (lhs - rhs_known) / (2.0 * b[1])
    return center, b


def _series_eval(b: np.ndarray, u):
    acc = np.zeros_like(np.asarray(u, dtype=complex))
    for coeff in b[::-1]:
        acc = acc * u + coeff
    return acc  # note b[0] = 0


def _series_inverse(b: np.ndarray) -> np.ndarray:
    """Coefficients of psi with phi(psi(w)) = w, same truncation order.

    Solved degree by degree: with psi known below degree m, the degree-m
    coefficient of phi(psi(w)) is acc[m] + b1 * psi[m], so psi[m] is whatever
    cancels it (the identity has no degree-m term for m >= 2).
    """
    order = len(b) - 1
    psi = np.zeros(order + 1, dtype=complex)
    psi[1] = 1.0 / b[1]
    for m in range(2, order + 1):
        acc = np.zeros(order + 1, dtype=complex)
        power = psi.copy()
        for k in range(1, order + 1):
            if b[k] != 0:
                acc += b[k] * power
            power = np.convolve(power, psi)[: order + 1]
        psi[m] = -acc[m] / b[1]
    return psi


def _series_trust_radius(b: np.ndarray) -> float:
    """|u| below which the truncated series is accurate to ~1e-15 relative."""
    order = len(b) - 1
    lead = abs(b[1])
    growth = max(
        ((abs(b[k]) / lead) ** (1.0 / (k - 1)) for k in range(2, order + 1)
         if b[k] != 0),
        default=0.0,
    )
    if growth == 0.0:
        return 1.0
    radius_est = 1.0 / growth          # distance to the nearest singularity
    if b[order] != 0:
        machine = (1e-15 * lead / abs(b[order])) ** (1.0 / (order - 1))
    else:
        machine = 0.5 * radius_est
    return min(0.5 * radius_est, machine)


def exp_green_internal(a: CubicParam, p: int, z: complex,
                       budget: Optional[int] = None,
                       cfg: Config = DEFAULT) -> float:
    """Internal escape rate s(z) in [0, 1]: 0 at the marked cycle, 1 outside.

    Computed as |phi(f^(p n)(z))|^(2^-n) once the orbit is inside the trust
    radius of the local conjugacy series; points that escape, or show no
    convergence to the marked cycle within budget, report 1.0 by convention.
    """
    budget = cfg.iteration_budget if budget is None else budget
    center, b = _bottcher_series(a, p)
    trust = _series_trust_radius(b)
    radius = _escape_radius(a)
    w = complex(z)
    for n in range(budget + 1):
        u = w - center
        if abs(u) <= trust:
            if u == 0:
                return 0.0
            val = abs(complex(_series_eval(b, u)))
            if val == 0.0:
                return 0.0
            return float(val ** (2.0 ** -n))
        if abs(w) > radius:
            return 1.0
        for _ in range(p):
            w = evaluate(a, w)
    return 1.0


def _exp_green_internal_grid(a: CubicParam, p: int, Z: np.ndarray,
                             budget: int, cfg: Config = DEFAULT) -> np.ndarray:
    """Vectorised exp_green_internal for rasters; NaN-safe, returns floats."""
    center, b = _bottcher_series(a, p)
    trust = _series_trust_radius(b)
    radius = _escape_radius(a)
    W = np.array(Z, dtype=complex)
    out = np.ones(W.shape, dtype=float)
    settled = np.zeros(W.shape, dtype=bool)
    for n in range(budget + 1):
        u = W - center
        inside = (~settled) & (np.abs(u) <= trust)
        if inside.any():
            vals = np.abs(_series_eval(b, u[inside]))
            out[inside] = vals ** (2.0 ** -n)
            settled |= inside
        escaped = (~settled) & (np.abs(W) > radius)
        out[escaped] = 1.0
        settled |= escaped
        if settled.all():
            break
        active = ~settled
        for _ in range(p):
            W[active] = evaluate(a, W[active])
    return out


# ---------------------------------------------------------------------------
# internal rays
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiberAddress:
    """A component of the basin's grand orbit: a cycle index plus the chain
    of inverse-branch choices (root indices, outermost first) leading back
    from the cycle component."""

    cycle_index: int = 0
    backward_branches: tuple[int, ...] = ()


@dataclass(frozen=True)
class TurningSequence:
    """Branch choices consumed at critical collisions, in chain order.

    entries are 'L' / 'R'; an optional repeating tail extends them, which is
    only meaningful when the fiber-and-angle pair is periodic (the ray system
    then keeps meeting collisions forever).
    """

    entries: tuple[str, ...] = ()
    tail: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        for e in tuple(self.entries) + tuple(self.tail or ()):
            if e not in ("L", "R"):
                raise ValueError("turning entries must be 'L' or 'R'")
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.tail is not None:
            object.__setattr__(self, "tail", tuple(self.tail))

    def entry(self, k: int) -> Optional[str]:
        if k < len(self.entries):
            return self.entries[k]
        if self.tail:
            return self.tail[(k - len(self.entries)) % len(self.tail)]
        return None

    def shifted(self, k: int = 1) -> "TurningSequence":
        if k < len(self.entries):
            return TurningSequence(self.entries[k:], self.tail)
        if self.tail:
            off = (k - len(self.entries)) % len(self.tail)
            return TurningSequence((), self.tail[off:] + self.tail[:off])
        return TurningSequence((), None)


@dataclass(frozen=True)
class InternalRay:
    v: FiberAddress
    t: Angle
    turning: TurningSequence
    points: tuple[RayPoint, ...]
    turning_points: tuple[tuple[float, complex], ...]
    status: str
    landing: Optional[complex] = None


def _doubling_chain(t: Fraction, length: int) -> list[Fraction]:
    chain = [t]
    for _ in range(length):
        chain.append((chain[-1] * 2) % 1)
    return chain


def trace_internal_ray(a: CubicParam, p: int, v: FiberAddress, t,
                       turning: TurningSequence = TurningSequence(),
                       s_max: Optional[float] = None,
                       cfg: Config = DEFAULT) -> InternalRay:
    """Trace an internal ray of the marked basin out to level s_max < 1.

    The ray at angle t is pulled back level by level from the rays at the
    doubled angles (a finite chain, since each pullback halves the depth
    still needed).  When the trace crosses the level of the free critical
    point and the incoming polyline is headed into it, the two pullback
    branches collide there: the trace records a turning point and picks the
    branch whose tangent rotates by +pi/2 ('L') or -pi/2 ('R') per the next
    turning entry.  An exhausted turning sequence obstructs the trace; a
    branch collapse anywhere else is a genuine failure ("branch ambiguity").
    """
    if not a.is_generic():
        raise ValidationError("non-generic parameter: -c meets the marked orbit")
    if isinstance(t, Angle):
        t_frac = t.fraction
    else:
        t_frac = Fraction(t)
    s_max = cfg.s_max if s_max is None else s_max
    m = cfg.internal_steps
    H = cfg.internal_start
    lam_target = -math.log(s_max)
    M = max(m, int(math.ceil(m * math.log(H / lam_target, 2.0))))
    K = M // m + 1
    chain = _doubling_chain(t_frac, K)
    lams = H * 2.0 ** (-np.arange(M + 1) / m)
    svals = np.exp(-lams)

    center, b = _bottcher_series(a, p)
    psi = _series_inverse(b)
    omega = -a.c
    r_a = exp_green_internal(a, p, omega, cfg=cfg)
    omega_level = None
    if 0.0 < r_a < 1.0:
        crossings = np.where((svals[1:] >= r_a) & (svals[:-1] < r_a))[0]
        omega_level = int(crossings[0]) + 1 if crossings.size else None

    n_pos = len(chain)
    P = np.full((n_pos, M + 1), np.nan + 0j, dtype=complex)
    limit = [M - k * m for k in range(n_pos)]  # deepest level each position needs
    collided = [False] * n_pos
    # per-position collision state: 0 normal, 1 drifting through the crossing
    # (branch choice deferred until the level passes r_a), negative = suppress
    # the ambiguity guard for that many levels after the turn
    state = [0] * n_pos
    pending = [""] * n_pos
    incoming = [0j] * n_pos
    events: list[tuple[int, int]] = []  # (chain position, level) of collisions
    status = TRACED

    for j in range(M + 1):
        for k in range(n_pos):
            if limit[k] < j:
                continue
            if j < m:
                w = svals[j] * np.exp(2j * np.pi * float(chain[k]))
                P[k, j] = center + complex(_series_eval(psi, w))
                continue
            if k + 1 >= n_pos:
                continue
            T = P[k + 1, j - m]
            pred = P[k, j - 1]
            if not (np.isfinite(T) and np.isfinite(pred)):
                P[k, j] = np.nan
                continue
            roots = _preimage_candidates(a, p, complex(T), complex(pred))
            d = np.abs(roots - pred)
            o = np.argsort(d)
            near_pair = len(roots) > 1 and d[o[1]] < 2.0 * d[o[0]]
            pair_at_omega = near_pair and abs(
                (roots[o[0]] + roots[o[1]]) / 2.0 - omega
            ) < 0.25 * abs(roots[o[0]] - roots[o[1]]) + 1e-9
            straddle = (omega_level is not None and j == omega_level
                        and abs(pred - omega) < _collision_window(P, k, j))

            if state[k] == 0 and not collided[k] and (pair_at_omega or straddle):
                entry = turning.entry(k)
                collided[k] = True
                events.append((k, j))
                if entry is None:
                    status = OBSTRUCTED
                    limit[k] = j - 1
                    P[k, j] = np.nan
                    continue
                pending[k] = entry
                incoming[k] = complex(omega - pred)
                if svals[j] >= r_a:
                    zb = _turned_branch(roots, omega, omega - incoming[k], entry)
                    P[k, j] = _polish_fp(a, p, zb, complex(T))
                    state[k] = -2 * m
                else:
                    state[k] = 1
                    P[k, j] = _polish_fp(a, p, complex(roots[o[0]]), complex(T))
                continue
            if state[k] == 1:
                if svals[j] >= r_a:
                    zb = _turned_branch(roots, omega, omega - incoming[k],
                                        pending[k])
                    P[k, j] = _polish_fp(a, p, zb, complex(T))
                    state[k] = -2 * m
                else:
                    P[k, j] = _polish_fp(a, p, complex(roots[o[0]]), complex(T))
                continue
            if state[k] < 0:
                state[k] += 1
                P[k, j] = _polish_fp(a, p, complex(roots[o[0]]), complex(T))
                continue
            if near_pair and d[o[0]] > 1e-13:
                # close pullback branches away from a registered collision
                raise NumericalError("branch ambiguity")
            z = _polish_fp(a, p, complex(roots[o[0]]), complex(T))
            res = abs(_iterate(a, p, z) - T)
            if res > cfg.trace_tol * max(1.0, abs(T)):
                status = OBSTRUCTED
                limit[k] = j - 1
                P[k, j] = np.nan
                continue
            P[k, j] = z

    # every collision along the chain leaves a kink on the returned curve at
    # the iterated preimage of the free critical point; walk each one down
    # to position 0 with nearest-preimage steps anchored on the traced grid
    turn_record: list[tuple[float, complex]] = []
    for k, j in events:
        z_turn = omega
        reachable = True
        for i in range(k - 1, -1, -1):
            anchor = P[i, j + (k - i) * m] if j + (k - i) * m <= M else np.nan
            if not np.isfinite(anchor):
                reachable = False
                break
            cands = _preimage_candidates(a, p, complex(z_turn), complex(anchor))
            z_turn = complex(cands[int(np.argmin(np.abs(cands - anchor)))])
        if reachable:
            turn_record.append((r_a ** (0.5 ** k), z_turn))
    turn_record.sort(key=lambda sz: sz[0])

    pts, good = [], True
    for j in range(M + 1):
        zj = P[0, j]
        if not np.isfinite(zj):
            good = False
            break
        pts.append(RayPoint(float(svals[j]), complex(zj)))
    if not good and status == TRACED:
        status = OBSTRUCTED

    ray = InternalRay(v=v, t=Angle.from_fraction(t_frac), turning=turning,
                      points=tuple(pts), turning_points=tuple(turn_record),
                      status=status)
    if v.backward_branches:
        ray = _pull_back_ray(a, p, ray, v, cfg)
    return ray


def _iterate(a: CubicParam, p: int, z: complex) -> complex:
    for _ in range(p):
        z = evaluate(a, z)
    return z


def _polish_fp(a: CubicParam, p: int, z: complex, target: complex) -> complex:
    for _ in range(3):
        w, dw = z, 1.0 + 0j
        for _ in range(p):
            dw *= derivative(a, w)
            w = evaluate(a, w)
        if abs(dw) < 1e-300:
            return z
        z = z - (w - target) / dw
    return z


def _preimage_candidates(a: CubicParam, p: int, T: complex,
                         pred: complex) -> np.ndarray:
    """Local preimages of T under f^p near pred.

    p = 1 gets all three cubic roots (so branch collapses can be seen); for
    longer periods the candidates are Newton continuations seeded at the
    predictor and at small perpendicular offsets of it, deduplicated — a
    pragmatic local root set, sufficient for the same collision tests.
    """
    if p == 1:
        return _cubic_roots(a.lin_coeff, np.array([T - a.const_coeff]))[:, 0]
    seeds = [pred]
    step = 0.05 * max(abs(pred - a.c), 1e-3)
    seeds += [pred + step * 1j, pred - step * 1j, pred + step, pred - step]
    found: list[complex] = []
    for s in seeds:
        z = _polish_fp(a, p, s, target=T)
        z = _polish_fp(a, p, z, target=T)
        if abs(_iterate(a, p, z) - T) > 1e-6 * max(1.0, abs(T)):
            continue
        if all(abs(z - f) > 1e-9 for f in found):
            found.append(z)
    if not found:
        found = [pred]
    return np.array(found)


def _collision_window(P: np.ndarray, k: int, j: int) -> float:
    if j >= 2 and np.isfinite(P[k, j - 2]):
        step = abs(P[k, j - 1] - P[k, j - 2])
        return max(8.0 * step, 1e-9)
    return 1e-9


def _turned_branch(roots: np.ndarray, omega: complex, reference: complex,
                   entry: str) -> complex:
    """Outgoing branch after a critical collision.

    The two candidate roots sit on opposite sides of the critical point,
    perpendicular (asymptotically) to the incoming tangent; 'L' takes the one
    rotated +pi/2 from it, 'R' the one rotated -pi/2.
    """
    d_in = omega - reference
    if d_in == 0:
        raise NumericalError("branch ambiguity")
    cands = sorted(range(len(roots)), key=lambda i: abs(roots[i] - omega))[:2]
    best, best_err = None, float("inf")
    want = 0.5 * math.pi if entry == "L" else -0.5 * math.pi
    for i in cands:
        d_out = roots[i] - omega
        if d_out == 0:
            continue
        rot = math.atan2((d_out / d_in).imag, (d_out / d_in).real)
        err = abs(rot - want)
        if err < best_err:
            best, best_err = roots[i], err
    if best is None:
        raise NumericalError("branch ambiguity")
    return complex(best)


def _pull_back_ray(a: CubicParam, p: int, ray: InternalRay, v: FiberAddress,
                   cfg: Config) -> InternalRay:
    """Pull a cycle-component ray back along inverse-branch tags."""
    pts = np.array([pt.z for pt in ray.points])
    svals = np.array([pt.potential for pt in ray.points])
    for tag in v.backward_branches:
        roots = _cubic_roots(a.lin_coeff, pts[:1] - a.const_coeff)[:, 0]
        order = sorted(range(3), key=lambda i: (roots[i].real, roots[i].imag))
        z = roots[order[tag % 3]]
        out = [z]
        for T in pts[1:]:
            roots = _cubic_roots(a.lin_coeff, np.array([T - a.const_coeff]))[:, 0]
            d = np.abs(roots - out[-1])
            o = np.argsort(d)
            if d[o[1]] < 2.0 * d[o[0]] and d[o[0]] > 1e-13:
                raise NumericalError("branch ambiguity")
            out.append(complex(_newton_polish(a, np.array([roots[o[0]]]),
                                              np.array([T]))[0]))
        pts = np.array(out)
        svals = np.sqrt(svals)
    new_pts = tuple(RayPoint(float(s), complex(z)) for s, z in zip(svals, pts))
    return replace(ray, points=new_pts)


def internal_landing(ray: InternalRay, tol: Optional[float] = None,
                     cfg: Config = DEFAULT) -> Optional[complex]:
    """Boundary landing point of an internal ray traced toward level 1."""
    tol = cfg.landing_tol if tol is None else tol
    if len(ray.points) < 8:
        return None
    # one sample per level halving for smooth tails; rays that keep turning
    # repeat their geometry once per two halvings (each turn quarters the
    # boundary gap), so a doubled stride restores a geometric subsequence
    for stride in (cfg.internal_steps, 2 * cfg.internal_steps):
        zs = np.array([pt.z for pt in ray.points])[::-1][::stride][::-1][-12:]
        z = _aitken_tail(zs, tol)
        if z is not None:
            return z
    return None


# ---------------------------------------------------------------------------
# external classes and characteristic angles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExternalClass:
    angles: AngleSet
    preferred: Angle
    landing: complex


def external_class_of(a: CubicParam, landing: complex,
                      candidate_angles: Sequence[Angle],
                      tol: Optional[float] = None,
                      approach_dir: Optional[complex] = None,
                      cfg: Config = DEFAULT,
                      landings: Optional[dict[Angle, complex]] = None) -> ExternalClass:
    """All candidate rays landing at a point, with a preferred representative.

    The preferred angle is the first one encountered counterclockwise from
    the given approach direction (e.g. an internal ray's asymptotic
    direction); with no direction the least angle is used, which keeps the
    choice deterministic.  A precomputed landing table may be passed to
    avoid re-tracing when several points are classified against the same
    candidate family.
    """
    tol = cfg.cluster_tol if tol is None else tol
    family = sorted(set(candidate_angles))
    if landings is None:
        landings = _family_landings(a, family, cfg)
    matches = [th for th in family if abs(landings[th] - landing) <= tol]
    if not matches:
        raise NumericalError("no ray found — enlarge candidate set")
    if approach_dir is not None and approach_dir != 0:
        base = math.atan2(approach_dir.imag, approach_dir.real)

        def ccw_offset(th: Angle) -> float:
            # direction in which the external ray leaves the landing point
            d = _ray_direction(a, th, landing, cfg)
            ang = math.atan2(d.imag, d.real) - base
            return ang % (2.0 * math.pi)

        preferred = min(matches, key=ccw_offset)
    else:
        preferred = min(matches)
    return ExternalClass(AngleSet(matches), preferred, landing)


def _ray_direction(a: CubicParam, theta: Angle, landing: complex,
                   cfg: Config) -> complex:
    ray = trace_external_ray(a, theta, cfg=cfg)
    for pt in ray.points[::-1]:
        d = pt.z - landing
        if abs(d) > 1e-9:
            return d / abs(d)
    return 1.0 + 0j


def sector_is_critical_free(a: CubicParam, theta1: Angle, theta2: Angle,
                            g_low: float = 1e-3, g_high: float = 2.0,
                            cfg: Config = DEFAULT) -> bool:
    """Whether the sector between two co-landing rays holds no critical point.

    The sector boundary is walked as a closed loop: down the first ray
    between the two equipotential levels, across to the second ray, back up,
    and across again; the crossings are straight chords, safe whenever the
    landing is away from the critical points.  The derivative factors
    through the two critical points, so its winding along the loop is the
    sum of the two point windings, counted exactly from the polyline's
    argument increments.
    """
    loops = []
    for th in (theta1, theta2):
        ray = trace_external_ray(a, th, cfg=cfg)
        zs = [pt.z for pt in ray.points if g_low <= pt.potential <= g_high]
        if len(zs) < 2:
            raise NumericalError("sector boundary has no points in the band")
        loops.append(zs)
    loop = np.array(loops[0] + loops[1][::-1] + [loops[0][0]])

    def winding(w: complex) -> int:
        turns = np.angle((loop[1:] - w) / (loop[:-1] - w)).sum()
        return int(round(turns / (2.0 * np.pi)))

    return winding(a.c) == 0 and winding(-a.c) == 0


def characteristic_angles(a: CubicParam, t0, max_den: int,
                          cfg: Config = DEFAULT) -> tuple[Angle, Angle]:
    """External angle pair supporting the critical collision sector.

    Requires a parameter on (or numerically near) the internal parameter ray
    of angle t0, so that the free critical point sits on the dynamical
    internal ray at angle t0.  The two turned continuations (L and R) of
    that ray land on the basin boundary; their landing points are matched
    against the external rays with denominator <= max_den, and the preferred
    angle of each landing class — first counterclockwise from the incoming
    internal direction — is returned, left one first.  Both are verified by
    re-tracing before being accepted.
    """
    t_frac = t0.fraction if isinstance(t0, Angle) else Fraction(t0)
    omega = -a.c
    r_a = exp_green_internal(a, 1, omega, cfg=cfg)
    if not (0.0 < r_a < 1.0):
        raise NumericalError(
            "free critical point shows no internal level — parameter is not "
            "on an internal parameter ray")
    out: list[Angle] = []
    candidates = sorted(all_angles(max_den))
    table = _family_landings(a, candidates, cfg)
    for entry in ("L", "R"):
        # the turn repeats at every collision: rays with non-periodic
        # combinatorics meet exactly one, periodic ones infinitely many
        iota = TurningSequence((entry,), entry)
        ray = trace_internal_ray(a, 1, FiberAddress(0, ()), t_frac, iota,
                                 cfg=cfg)
        if not ray.turning_points:
            raise NumericalError(
                "internal ray at the requested angle never meets the free "
                "critical point — wrong t0 for this parameter")
        if ray.status != TRACED:
            raise NumericalError("internal ray trace obstructed")
        z_land = internal_landing(ray, cfg=cfg)
        if z_land is None:
            # slow spiral: push the trace closer to the boundary before
            # giving up — each decade of boundary gap adds turn cycles
            deep = replace(cfg, s_max=1.0 - (1.0 - cfg.s_max) / 100.0)
            ray = trace_internal_ray(a, 1, FiberAddress(0, ()), t_frac, iota,
                                     cfg=deep)
            z_land = internal_landing(ray, cfg=deep)
        if z_land is None:
            raise NumericalError("internal ray landing did not stabilise")
        approach = _internal_approach(ray, z_land)
        cls = external_class_of(a, z_land, candidates,
                                tol=10.0 * cfg.cluster_tol,
                                approach_dir=approach, cfg=cfg,
                                landings=table)
        theta = cls.preferred
        # verification: the identified rational must re-trace to the landing;
        # the check ray is pulled deep enough for its own stable extrapolation
        try:
            z_check = _family_landings(a, [theta], cfg)[theta]
        except NumericalError:
            z_check = None
        if z_check is None or abs(z_check - z_land) > 20.0 * cfg.cluster_tol:
            near = [str(t) for t in cls.angles]
            raise NumericalError(
                "rational identification ambiguous — candidates: "
                + ", ".join(near))
        out.append(theta)
    return out[0], out[1]


def _internal_approach(ray: InternalRay, landing: complex) -> complex:
    # asymptotic direction of the internal ray at its landing point, oriented
    # away from the landing point (back toward the basin) so that it is
    # comparable with the outgoing directions of external rays
    for pt in ray.points[::-1]:
        d = pt.z - landing
        if abs(d) > 1e-9:
            return d / abs(d)
    return 1.0 + 0j


# ---------------------------------------------------------------------------
# serialization and caching
# ---------------------------------------------------------------------------


def ray_record(ray) -> dict:
    """JSON-able record of a traced ray (external or internal)."""
    rec: dict = {
        "points": [[pt.potential, pt.z.real, pt.z.imag] for pt in ray.points],
        "status": ray.status,
    }
    if isinstance(ray, ExternalRay):
        rec["theta"] = str(ray.theta)
    else:
        rec["fiber"] = {
            "cycle_index": ray.v.cycle_index,
            "backward_branches": list(ray.v.backward_branches),
        }
        rec["t"] = str(ray.t)
        rec["turning"] = list(ray.turning.entries)
        rec["turning_points"] = [[s, z.real, z.imag]
                                 for s, z in ray.turning_points]
    if ray.landing is not None:
        rec["landing"] = [ray.landing.real, ray.landing.imag]
    return rec


def export_rays_jsonl(rays: Iterable, path: str) -> None:
    with open(path, "w") as handle:
        for ray in rays:
            handle.write(json.dumps(ray_record(ray)) + "\n")


def _cache_key(a: CubicParam, family: list[Angle], levels: int, steps: int,
               cfg: Config) -> str:
    h = hashlib.sha256()
    h.update(a.key_bytes())
    h.update(struct.pack(">iid", levels, steps, cfg.start_potential))
    h.update(struct.pack(">d", cfg.trace_tol))
    for th in family:
        h.update(struct.pack(">qq", th.num, th.den))
    return h.hexdigest()


def _cache_load(a, family, levels, steps, cfg) -> Optional[_FamilyTrace]:
    root = cfg.resolved_cache_dir()
    if not root:
        return None
    path = os.path.join(root, _cache_key(a, family, levels, steps, cfg) + ".npz")
    if not os.path.exists(path):
        return None
    try:
        data = np.load(path)
        return _FamilyTrace(family, data["potentials"], data["Z"],
                            data["good_until"], steps)
    except Exception:
        return None


def _cache_store(a, family, levels, steps, cfg, trace: _FamilyTrace) -> None:
    root = cfg.resolved_cache_dir()
    if not root:
        return
    os.makedirs(root, exist_ok=True)
    path = os.path.join(root, _cache_key(a, family, levels, steps, cfg) + ".npz")
    try:
        np.savez(path, potentials=trace.potentials, Z=trace.Z,
                 good_until=trace.good_until)
    except Exception:
        pass
