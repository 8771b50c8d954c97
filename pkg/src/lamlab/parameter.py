"""Slice geometry, component coordinates, and boundary-lamination prediction.

The slice of parameters whose marked critical point is periodic of a given
period is a curve in (c, v)-space; inside it, a hyperbolic component is
parameterized by the basin coordinate of the free critical orbit.  Following
that coordinate radially produces parameter rays; extrapolating them to the
boundary and combining the component's rational lamination with the
characteristic angle pair found along the way predicts the lamination of the
boundary map, which can then be compared against direct observation at
parameters approaching the end of the ray.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .circle import Angle, AngleSet, all_angles, orbit_type, tau
from .config import Config
from .dynamics import (
    DEFAULT,
    CubicParam,
    characteristic_angles,
    classify_type,
    empirical_rational_lamination,
    evaluate,
    exp_green_internal,
    family_landings,
    _bottcher_series,
    _iterate,
    _series_eval,
    _series_trust_radius,
)
from .errors import NumericalError, ValidationError
from .lamination import (
    GeneratorSpec,
    Lamination,
    check_axioms,
    closure,
    restrict,
    serialize,
    visual_lamination,
)

_SQRT3 = math.sqrt(3.0)


# ---------------------------------------------------------------------------
# slice points and hyperbolic components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SliceParam:
    """A parameter whose marked critical point is periodic of period p."""

    p: int
    a: CubicParam
    residual: float


@dataclass(frozen=True)
class ComponentRef:
    """A hyperbolic component, identified by a witness parameter inside it.

    ell is the entry time of the free critical orbit into the marked basin
    component; deg_d the degree of the component's coordinate (two exactly
    when both critical points share the component).
    """

    type: str
    ell: int
    deg_d: int
    witness: SliceParam


@dataclass(frozen=True)
class BoundaryEstimate:
    """A parameter ray traced toward the boundary, with derived data."""

    t0: Angle
    path: tuple[tuple[float, CubicParam], ...]
    a0: Optional[CubicParam] = None
    combinatorics: Optional[str] = None
    predicted: Optional[Lamination] = None
    status: str = "traced"


def _orbit_value(a: CubicParam, z: complex, n: int) -> complex:
    for _ in range(n):
        z = evaluate(a, z)
    return z


def _solve_v(c: complex, v_seed: complex, p: int, cfg: Config) -> complex:
    """Newton in the constant coefficient for a p-periodic marked point."""
    v = v_seed
    for _ in range(60):
        w = c
        dw = 0j
        for _ in range(p):
            dw = (3.0 * w * w - 3.0 * c * c) * dw + 1.0
            w = w**3 - 3.0 * c * c * w + (2.0 * c**3 + v)
        g = w - c
        if abs(g) < cfg.slice_tol:
            return v
        if abs(dw) < 1e-300 or not np.isfinite(abs(v)):
            break
        v = v - g / dw
    raise NumericalError("slice solve diverged")


def solve_slice(p: int, seed: CubicParam, cfg: Config = DEFAULT) -> SliceParam:
    """Find the slice point with the seed's c whose marked point has period p.

    For period one the slice is the diagonal v = c and the residual vanishes
    identically; for higher periods the constant coefficient is solved by
    Newton from the seed.  A solution whose actual period properly divides p
    is rejected rather than silently accepted.
    """
    if p < 1:
        raise ValidationError("period must be positive")
    c = seed.c
    if p == 1:
        a = CubicParam(c, c)
    else:
        a = CubicParam(c, _solve_v(c, seed.v, p, cfg))
    res = abs(_orbit_value(a, a.c, p) - a.c)
    if res >= cfg.slice_tol:
        raise NumericalError("slice solve diverged")
    for q in range(1, p):
        if p % q == 0 and abs(_orbit_value(a, a.c, q) - a.c) < 1e-8:
            raise NumericalError(f"period collapse: marked point has period {q}")
    if not a.is_generic():
        raise ValidationError("non-generic parameter: -c meets the marked orbit")
    return SliceParam(p, a, res)


def locate_component(witness: SliceParam, cfg: Config = DEFAULT) -> ComponentRef:
    """Classify the component a witness sits in and record its invariants."""
    ct = classify_type(witness.a, cfg=cfg)
    if ct not in ("A", "B", "C"):
        raise ValidationError(
            f"witness is not in a bounded hyperbolic component: {ct}")
    z = -witness.a.c
    ell = None
    for step in range(64):
        if exp_green_internal(witness.a, witness.p, z, cfg=cfg) < 1.0:
            ell = step
            break
        z = evaluate(witness.a, z)
    if ell is None:
        raise NumericalError("free critical orbit never enters the marked basin")
    deg_d = 2 if ct == "A" else 1
    return ComponentRef(ct, ell, deg_d, witness)


# ---------------------------------------------------------------------------
# component coordinate
# ---------------------------------------------------------------------------


def _phi_raw(a: CubicParam, p: int, z: complex, cfg: Config):
    """Basin-coordinate value of the forward orbit: (phi(f^{pn}(z)), n)."""
    center, b = _bottcher_series(a, p)
    trust = _series_trust_radius(b)
    w = complex(z)
    for n in range(cfg.iteration_budget):
        if abs(w - center) <= trust:
            return complex(_series_eval(b, w - center)), n
        w = _iterate(a, p, w)
    raise NumericalError("orbit did not enter the basin coordinate disk")


def _nth_sqrt_branch(y: complex, n: int, prev: complex) -> complex:
    """The 2^n-th root of y whose phase continues prev."""
    if n == 0:
        return y
    mag = abs(y) ** (0.5**n)
    base = cmath.phase(y)
    scale = 2.0**n
    k = round((cmath.phase(prev) * scale - base) / (2.0 * math.pi))
    phase = (base + 2.0 * math.pi * k) / scale
    # the chosen root must sit in prev's angular cell, otherwise the phase
    # reference is too far away to disambiguate
    gap = abs((phase - cmath.phase(prev) + math.pi) % (2.0 * math.pi) - math.pi)
    if gap > math.pi / scale + 1e-12:
        raise NumericalError("basin coordinate phase continuity lost")
    return mag * cmath.exp(1j * phase)


def phi_component(ref: ComponentRef, a, prev: Optional[complex] = None,
                  cfg: Config = DEFAULT) -> complex:
    """Coordinate of a parameter inside its component, in the unit disk.

    The value is the basin coordinate of the free critical orbit's entry
    point.  Deep in the component the orbit point sits inside the series
    disk and the value is direct; elsewhere the coordinate of a forward
    iterate is pulled back by square roots, with the phase branch anchored
    either on a caller-supplied nearby value or on a walk from the component
    center (period-one components only).
    """
    sp = a if isinstance(a, SliceParam) else SliceParam(ref.witness.p, a, 0.0)
    aa = sp.a
    y0 = _orbit_value(aa, -aa.c, ref.ell)
    y, n = _phi_raw(aa, sp.p, y0, cfg)
    if n == 0:
        return y
    if prev is not None:
        return _nth_sqrt_branch(y, n, prev)
    if sp.p != 1 or ref.ell != 0 or ref.type != "A":
        raise NumericalError(
            "no phase anchor: supply prev outside the principal component")
    # walk the radial segment from near the center out to the parameter,
    # carrying the phase; the free critical point never enters the series
    # disk directly (its conformal position scales with the component), so
    # the quadratic center model pins the branch at the inner stop, where
    # its relative error is negligible against the half-cell width
    scale = 1.0
    while abs(aa.c) * scale > 3e-4:
        scale *= 0.5
    value = -2.0 * _SQRT3 * (aa.c * scale) ** 2
    nsteps = 48
    for i in range(nsteps + 1):
        s = scale ** (1.0 - i / nsteps)
        probe = CubicParam(aa.c * s, aa.c * s)
        y_p, n_p = _phi_raw(probe, 1, _orbit_value(probe, -probe.c, ref.ell), cfg)
        value = _nth_sqrt_branch(y_p, n_p, value)
    return value


# ---------------------------------------------------------------------------
# parameter rays
# ---------------------------------------------------------------------------


def _center_model_seed(t: Fraction, rho: float, near: complex) -> complex:
    # leading behaviour of the coordinate at small c; the two square roots
    # seed the two rays of the degree-two component
    base = cmath.sqrt(rho / (2.0 * _SQRT3)) * cmath.exp(
        1j * math.pi * (float(t) + 0.5))
    return min((base, -base), key=lambda cc: abs(cc - near))


def trace_parameter_ray(ref: ComponentRef, t0, r_min: float,
                        steps: int = 200, seed: Optional[CubicParam] = None,
                        cfg: Config = DEFAULT) -> BoundaryEstimate:
    """Follow the constant-angle locus of the component coordinate boundaryward.

    r is the boundary gap 1 - |coordinate|; the continuation starts near the
    center (or at the given seed), shrinks r geometrically, and corrects each
    predicted parameter by Newton until the coordinate matches the target to
    the continuation tolerance.  Failed correctors halve the step; a step
    collapse returns the partial path with a stalled status.
    """
    t_frac = t0.fraction if isinstance(t0, Angle) else Fraction(t0)
    p = ref.witness.p
    if seed is None:
        if p != 1 or ref.type != "A":
            raise NumericalError(
                "default seeding knows only period-one full-degree components; "
                "supply a seed parameter")
        c0 = _center_model_seed(t_frac, 0.1, ref.witness.a.c)
        seed = CubicParam(c0, c0)
    phase = cmath.exp(2j * math.pi * float(t_frac))

    def slice_at(c: complex, v_near: complex) -> CubicParam:
        if p == 1:
            return CubicParam(c, c)
        return CubicParam(c, _solve_v(c, v_near, p, cfg))

    def correct(c_guess: complex, v_near: complex, prev_phi: Optional[complex],
                rho_target: float):
        target = rho_target * phase
        c = c_guess
        phi = prev_phi
        for _ in range(16):
            a_c = slice_at(c, v_near)
            phi = phi_component(ref, a_c, prev=phi, cfg=cfg)
            err = phi - target
            if abs(err) < cfg.continuation_tol:
                return a_c, phi
            h = 1e-7 * max(abs(c), 1e-3)
            phi_h = phi_component(ref, slice_at(c + h, v_near), prev=phi, cfg=cfg)
            slope = (phi_h - phi) / h
            if slope == 0 or not np.isfinite(abs(slope)):
                break
            c = c - err / slope
        raise NumericalError("corrector failed")

    # put the seed exactly on the ray at its own radius
    phi_seed = phi_component(ref, seed, cfg=cfg)
    r = 1.0 - abs(phi_seed)
    a_cur, phi_cur = correct(seed.c, seed.v, phi_seed, 1.0 - r)
    path = [(r, a_cur)]
    status = "traced"
    a_prev = None
    r_prev = r
    budget = steps
    while r > r_min and budget > 0:
        r_next = max(r_min, 0.9 * r)
        while True:
            if a_prev is not None and r_prev != r:
                frac = (r - r_next) / (r_prev - r)
                c_guess = a_cur.c + (a_cur.c - a_prev.c) * frac
            else:
                c_guess = a_cur.c
            try:
                a_new, phi_new = correct(c_guess, a_cur.v, phi_cur, 1.0 - r_next)
                break
            except NumericalError:
                r_next = 0.5 * (r + r_next)
                if r - r_next < 1e-9 * max(r, 1e-6):
                    status = "stalled"
                    break
        if status == "stalled":
            break
        a_prev, r_prev = a_cur, r
        a_cur, phi_cur, r = a_new, phi_new, r_next
        path.append((r, a_cur))
        budget -= 1
    if r > r_min and status == "traced":
        status = "step-budget exhausted"
    return BoundaryEstimate(t0=Angle.from_fraction(t_frac), path=tuple(path),
                            status=status)


def ray_combinatorics(t0) -> str:
    """Periodic or not: whether the fiber angle is periodic under doubling."""
    t_frac = t0.fraction if isinstance(t0, Angle) else Fraction(t0)
    ot = orbit_type(2, Angle.from_fraction(t_frac))
    return "periodic" if ot.preperiod == 0 else "non-periodic"


def boundary_landing(est: BoundaryEstimate, cfg: Config = DEFAULT) -> CubicParam:
    """Extrapolated end of a traced parameter ray.

    Polynomial extrapolation of the path tail in the boundary gap, with a
    cross-order stability check; the boundary parameter itself is never
    traced, only estimated.
    """
    if not est.path or est.path[-1][0] > 0.05 + 1e-12:
        raise ValidationError("path must reach r <= 0.05 before extrapolating")
    pts = est.path[-8:]
    if len(pts) < 5:
        raise ValidationError("too few path points to extrapolate")
    rs = np.array([r for r, _ in pts])
    out = []
    for comp in ("c", "v"):
        vals = np.array([getattr(a, comp) for _, a in pts], dtype=complex)
        fits = []
        for order in (2, 3):
            re = np.polyfit(rs, vals.real, order)[-1]
            im = np.polyfit(rs, vals.imag, order)[-1]
            fits.append(complex(re, im))
        if abs(fits[0] - fits[1]) > 100.0 * cfg.continuation_tol:
            raise NumericalError(
                "extrapolation unstable: orders 2 and 3 disagree by "
                f"{abs(fits[0] - fits[1]):.2e} on {comp}")
        out.append(fits[1])
    return CubicParam(out[0], out[1])


# ---------------------------------------------------------------------------
# boundary lamination: prediction and observation
# ---------------------------------------------------------------------------


def predict_boundary_lamination(ref: ComponentRef, t0, depth: int,
                                max_den: int,
                                cfg: Config = DEFAULT) -> Lamination:
    """Predicted lamination of the ray's end from interior data only.

    The component's own rational lamination is joined with the relation
    generated by the characteristic angle pair, identified at a ray
    parameter still comfortably inside; the result is restricted to the
    requested denominator bound.
    """
    lam_h = empirical_rational_lamination(ref.witness.a, max_den, cfg=cfg)
    est = trace_parameter_ray(ref, t0, r_min=0.3, cfg=cfg)
    if est.status != "traced":
        raise NumericalError(f"parameter ray incomplete: {est.status}")
    a_char = est.path[-1][1]
    th_l, th_r = characteristic_angles(a_char, t0, max_den, cfg=cfg)
    spec = GeneratorSpec(3, AngleSet((th_l, th_r)))
    vis = visual_lamination(lam_h, spec, depth)
    return restrict(vis, max_den)


def observed_boundary_lamination(est: BoundaryEstimate, max_den: int,
                                 tol: Optional[float] = None, tail: int = 6,
                                 cfg: Config = DEFAULT) -> Lamination:
    """Empirical lamination of the ray's end, judged along the path tail.

    Landing points are computed at the last few path parameters — never at
    the extrapolated end itself — and two rays are taken to co-land in the
    limit when their landing separation either is already below tol or
    decays geometrically along the tail (the signature of rays joining at a
    precritical point as the boundary is approached).  The detected classes
    must pass the lamination axioms.
    """
    tol = 10.0 * cfg.cluster_tol if tol is None else tol
    pts = est.path[-tail:]
    if len(pts) < 3:
        raise ValidationError("path tail too short to judge merging")
    family = sorted(all_angles(max_den))
    rs = np.array([r for r, _ in pts])
    stack = []
    for _, a_k in pts:
        landings = family_landings(a_k, family, cfg=cfg)
        stack.append(np.array([landings[th] for th in family]))
    n = len(family)
    lower = np.tri(n, k=-1, dtype=bool)
    seps = np.stack([np.abs(z[:, None] - z[None, :]) for z in stack])
    final = seps[-1]
    # landing separations of a pair merging at the boundary decay like a
    # positive power of r; pairs with distinct limits flatten out.  The
    # power-law exponent per step is scale-free, so the clamped final step
    # of the schedule needs no special casing.
    dlog_r = np.log(rs[1:] / rs[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.log(seps[1:] / seps[:-1]) / dlog_r[:, None, None]
    merging = np.all(np.nan_to_num(beta, nan=0.0) >= 0.3, axis=0) & (final < 0.5)
    already = final <= tol
    linked = np.argwhere((already | merging) & lower)
    pairs = [(family[i], family[j]) for i, j in linked]
    lam = closure(3, pairs)
    report = check_axioms(lam)
    if not report.all_pass():
        raise ValidationError(
            "observed boundary lamination failed validation", report=report)
    return lam


@dataclass(frozen=True)
class PredictionReport:
    agreement: float
    predicted_only: tuple[AngleSet, ...]
    observed_only: tuple[AngleSet, ...]
    angles_checked: int
    q_indistinguishable: bool


def compare_prediction(predicted: Lamination, observed: Lamination,
                       max_den: int) -> PredictionReport:
    """Per-angle agreement of two laminations at a denominator bound."""
    if predicted.degree != observed.degree:
        raise ValidationError("laminations have different degrees")
    p_r = restrict(predicted, max_den)
    o_r = restrict(observed, max_den)
    angles = sorted(all_angles(max_den))
    matches = sum(1 for th in angles if p_r.class_of(th) == o_r.class_of(th))
    p_classes, o_classes = set(p_r.classes), set(o_r.classes)
    return PredictionReport(
        agreement=matches / len(angles) if angles else 1.0,
        predicted_only=tuple(sorted(p_classes - o_classes)),
        observed_only=tuple(sorted(o_classes - p_classes)),
        angles_checked=len(angles),
        q_indistinguishable=(p_classes == o_classes),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def boundary_estimate_json(est: BoundaryEstimate, p: int) -> dict:
    """JSON-able record of a boundary estimate."""
    rec: dict = {
        "p": p,
        "t0": str(est.t0),
        "path": [
            [r, [a.c.real, a.c.imag], [a.v.real, a.v.imag]]
            for r, a in est.path
        ],
        "status": est.status,
        "a0": None,
        "combinatorics": est.combinatorics,
        "predicted": None,
    }
    if est.a0 is not None:
        rec["a0"] = [
            [est.a0.c.real, est.a0.c.imag],
            [est.a0.v.real, est.a0.v.imag],
        ]
    if est.predicted is not None:
        rec["predicted"] = serialize(est.predicted)
    return rec


def boundary_estimate_from_json(rec: dict) -> BoundaryEstimate:
    """Inverse of boundary_estimate_json (the lamination field is dropped)."""
    path = tuple(
        (float(r), CubicParam(complex(c[0], c[1]), complex(v[0], v[1])))
        for r, c, v in rec["path"]
    )
    a0 = None
    if rec.get("a0"):
        (cr, ci), (vr, vi) = rec["a0"]
        a0 = CubicParam(complex(cr, ci), complex(vr, vi))
    return BoundaryEstimate(
        t0=Angle.from_fraction(Fraction(rec["t0"])), path=path, a0=a0,
        combinatorics=rec.get("combinatorics"),
        status=rec.get("status", "traced"))
