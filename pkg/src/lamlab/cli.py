"""Command-line entry point.

Subcommands cover the exact-lamination toolbox (check/close/minimal/visual),
ray tracing in the dynamical plane, the parameter-ray boundary pipeline, and
the two renderers.  Every JSON artifact embeds the configuration it was
produced with; exit codes are 1 for usage problems, 2 for numerical
failures, 3 for validation/axiom failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from fractions import Fraction

from .circle import Angle, AngleSet, all_angles
from .config import Config, load_config
from .dynamics import (
    DEFAULT,
    CubicParam,
    FiberAddress,
    TurningSequence,
    characteristic_angles,
    empirical_rational_lamination,
    internal_landing,
    landing_point,
    ray_record,
    trace_external_ray,
    trace_internal_ray,
)
from .errors import LamlabError, NumericalError, ValidationError
from .lamination import (
    GeneratorSpec,
    check_axioms,
    closure,
    minimal_from_generator,
    parse,
    serialize,
    visual_lamination,
)
from .parameter import (
    boundary_estimate_from_json,
    boundary_estimate_json,
    boundary_landing,
    compare_prediction,
    locate_component,
    observed_boundary_lamination,
    predict_boundary_lamination,
    ray_combinatorics,
    solve_slice,
    trace_parameter_ray,
)
from .render import JuliaPlot, chord_svg, julia_raster


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1; argparse's default of 2 is reserved for numerics
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _angle(text: str) -> Angle:
    return Angle.from_fraction(Fraction(text))


def _angles(text: str) -> list[Angle]:
    return [_angle(part) for part in text.split(",") if part]


def _pairs(text: str) -> list[tuple[Angle, Angle]]:
    out = []
    for chunk in text.split(","):
        if not chunk:
            continue
        left, right = chunk.split(":")
        out.append((_angle(left), _angle(right)))
    return out


def _param(args) -> CubicParam:
    return CubicParam(complex(args.c), complex(args.v))


def _emit(args, payload: dict, cfg: Config) -> None:
    payload = dict(payload)
    payload["config"] = cfg.as_dict()
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _load_lamination(path: str):
    with open(path) as handle:
        data = json.load(handle)
    if "lamination" in data:
        data = data["lamination"]
    return parse(data)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_lam_check(args, cfg) -> int:
    if args.input:
        lam = _load_lamination(args.input)
    else:
        lam = closure(args.degree, _pairs(args.pairs or ""))
    report = check_axioms(lam)
    payload = {
        "passes": report.all_pass(),
        "r1": report.r1,
        "r2": report.r2,
        "r3": report.r3,
        "r4": report.r4,
        "r5": report.r5,
        "max_class_size": report.max_class_size,
        "witnesses": {k: str(v) for k, v in report.witnesses.items()},
    }
    _emit(args, payload, cfg)
    return 0 if report.all_pass() else 3


def _cmd_lam_close(args, cfg) -> int:
    lam = closure(args.degree, _pairs(args.pairs))
    _emit(args, {"lamination": serialize(lam)}, cfg)
    return 0


def _cmd_lam_minimal(args, cfg) -> int:
    spec = GeneratorSpec(args.degree, AngleSet(_angles(args.angles)))
    lam = minimal_from_generator(spec, args.depth)
    _emit(args, {"lamination": serialize(lam), "depth": args.depth}, cfg)
    return 0


def _cmd_lam_visual(args, cfg) -> int:
    spec = GeneratorSpec(args.degree, AngleSet(_angles(args.angles)))
    base = _load_lamination(args.base) if args.base else closure(args.degree, [])
    lam = visual_lamination(base, spec, args.depth)
    _emit(args, {"lamination": serialize(lam), "depth": args.depth}, cfg)
    return 0


def _cmd_ray_ext(args, cfg) -> int:
    a = _param(args)
    ray = trace_external_ray(a, _angle(args.theta), cfg=cfg)
    rec = ray_record(ray)
    z = landing_point(ray, cfg=cfg)
    rec["landing"] = None if z is None else [z.real, z.imag]
    _emit(args, rec, cfg)
    return 0


def _cmd_ray_int(args, cfg) -> int:
    a = _param(args)
    fiber = FiberAddress(args.fiber_cycle,
                         tuple(int(b) for b in args.fiber_branches.split(",") if b))
    entries = tuple(e for e in (args.turns or "").split(",") if e)
    tail = args.tail if args.tail in ("L", "R") else None
    ray = trace_internal_ray(a, args.period, fiber, Fraction(args.t),
                             TurningSequence(entries, tail), cfg=cfg)
    rec = ray_record(ray)
    z = internal_landing(ray, cfg=cfg)
    rec["landing"] = None if z is None else [z.real, z.imag]
    _emit(args, rec, cfg)
    return 0


def _cmd_rat_lam(args, cfg) -> int:
    a = _param(args)
    lam = empirical_rational_lamination(a, args.max_den, tol=args.tol, cfg=cfg)
    _emit(args, {"lamination": serialize(lam), "max_den": args.max_den}, cfg)
    return 0


def _cmd_slice_solve(args, cfg) -> int:
    sp = solve_slice(args.p, CubicParam(complex(args.c), complex(args.v_seed)),
                     cfg=cfg)
    payload = {
        "p": sp.p,
        "c": [sp.a.c.real, sp.a.c.imag],
        "v": [sp.a.v.real, sp.a.v.imag],
        "residual": sp.residual,
    }
    _emit(args, payload, cfg)
    return 0


def _make_ref(args, cfg):
    witness = solve_slice(args.p, CubicParam(complex(args.c0),
                                             complex(args.v_seed)), cfg=cfg)
    return locate_component(witness, cfg=cfg)


def _cmd_param_ray(args, cfg) -> int:
    ref = _make_ref(args, cfg)
    seed = CubicParam(complex(args.seed_c), complex(args.seed_c)) \
        if args.seed_c else None
    est = trace_parameter_ray(ref, Fraction(args.t0), args.r_min,
                              steps=args.steps, seed=seed, cfg=cfg)
    est = dataclasses.replace(est, combinatorics=ray_combinatorics(est.t0))
    if est.path[-1][0] <= 0.05:
        try:
            est = dataclasses.replace(est, a0=boundary_landing(est, cfg=cfg))
        except NumericalError:
            pass  # tail too shallow for a stable limit; leave a0 null
    _emit(args, boundary_estimate_json(est, args.p), cfg)
    return 0


def _cmd_boundary_predict(args, cfg) -> int:
    ref = _make_ref(args, cfg)
    lam = predict_boundary_lamination(ref, Fraction(args.t0), args.depth,
                                      args.max_den, cfg=cfg)
    payload = {
        "p": args.p,
        "t0": args.t0,
        "depth": args.depth,
        "max_den": args.max_den,
        "lamination": serialize(lam),
    }
    _emit(args, payload, cfg)
    return 0


def _cmd_compare(args, cfg) -> int:
    predicted = _load_lamination(args.predicted)
    if args.observed:
        observed = _load_lamination(args.observed)
    else:
        with open(args.estimate) as handle:
            est = boundary_estimate_from_json(json.load(handle))
        observed = observed_boundary_lamination(est, args.max_den, cfg=cfg)
    rep = compare_prediction(predicted, observed, args.max_den)
    payload = {
        "agreement": rep.agreement,
        "angles_checked": rep.angles_checked,
        "predicted_only": [[str(t) for t in cl] for cl in rep.predicted_only],
        "observed_only": [[str(t) for t in cl] for cl in rep.observed_only],
        "q_indistinguishable": rep.q_indistinguishable,
    }
    _emit(args, payload, cfg)
    return 0


def _cmd_draw_chords(args, cfg) -> int:
    if not args.out:
        print("lamlab: draw-chords requires --out", file=sys.stderr)
        return 1
    lam = _load_lamination(args.input)
    svg = chord_svg(lam, size=args.size, stroke_width=args.stroke,
                    show_labels=args.labels)
    with open(args.out, "w") as handle:
        handle.write(svg)
    return 0


def _cmd_draw_julia(args, cfg) -> int:
    if not args.out:
        print("lamlab: draw-julia requires --out", file=sys.stderr)
        return 1
    a = _param(args)
    overlays = []
    for theta in _angles(args.rays or ""):
        overlays.append(trace_external_ray(a, theta, cfg=cfg))
    if args.internal_t is not None:
        entries = tuple(e for e in (args.turns or "").split(",") if e)
        tail = args.tail if args.tail in ("L", "R") else None
        overlays.append(trace_internal_ray(
            a, args.period, FiberAddress(0, ()), Fraction(args.internal_t),
            TurningSequence(entries, tail), cfg=cfg))
    plot = JuliaPlot(a, resolution=args.resolution, budget=args.budget,
                     overlays=tuple(overlays), center=complex(args.center),
                     half_width=args.half_width, marked_period=args.period)
    julia_raster(plot).save(args.out)
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


_CONFIG_FLAGS = (
    ("trace-tol", "trace_tol", float),
    ("cluster-tol", "cluster_tol", float),
    ("landing-tol", "landing_tol", float),
    ("slice-tol", "slice_tol", float),
    ("continuation-tol", "continuation_tol", float),
    ("iteration-budget", "iteration_budget", int),
    ("target-potential", "target_potential", float),
    ("cache-dir", "cache_dir", str),
)


def _add_common(sub):
    sub.add_argument("--config", help="TOML config file")
    sub.add_argument("--out", help="write the JSON artifact here instead of stdout")
    for flag, _, typ in _CONFIG_FLAGS:
        sub.add_argument(f"--{flag}", type=typ, default=None,
                         help=argparse.SUPPRESS)


def _build_config(args) -> Config:
    overrides = {}
    for _, name, _ in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "config", None) or overrides:
        return load_config(getattr(args, "config", None), overrides)
    return DEFAULT


def build_parser() -> _Parser:
    parser = _Parser(prog="lamlab",
                     description="laminations and cubic ray dynamics")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    def sub(name, func, **kwargs):
        s = subs.add_parser(name, **kwargs)
        s.set_defaults(func=func)
        _add_common(s)
        return s

    s = sub("lam-check", _cmd_lam_check, help="axiom-check a lamination")
    s.add_argument("--input", help="serialized lamination JSON")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--pairs", help="colon pairs, e.g. 1/9:4/9,4/9:7/9")

    s = sub("lam-close", _cmd_lam_close, help="equivalence closure of pairs")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--pairs", required=True)

    s = sub("lam-minimal", _cmd_lam_minimal,
            help="smallest invariant lamination containing a generator class")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--angles", required=True, help="comma list, e.g. 1/3,2/3")
    s.add_argument("--depth", type=int, default=5)

    s = sub("lam-visual", _cmd_lam_visual,
            help="join a base lamination with a generated one")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--angles", required=True)
    s.add_argument("--depth", type=int, default=5)
    s.add_argument("--base", help="serialized base lamination JSON")

    s = sub("ray-ext", _cmd_ray_ext, help="trace one external ray")
    s.add_argument("--c", required=True)
    s.add_argument("--v", required=True)
    s.add_argument("--theta", required=True)

    s = sub("ray-int", _cmd_ray_int, help="trace one internal ray")
    s.add_argument("--c", required=True)
    s.add_argument("--v", required=True)
    s.add_argument("--t", required=True)
    s.add_argument("--period", type=int, default=1)
    s.add_argument("--fiber-cycle", type=int, default=0)
    s.add_argument("--fiber-branches", default="")
    s.add_argument("--turns", default="", help="comma list of L/R entries")
    s.add_argument("--tail", default="", help="L or R to repeat forever")

    s = sub("rat-lam", _cmd_rat_lam, help="empirical rational lamination")
    s.add_argument("--c", required=True)
    s.add_argument("--v", required=True)
    s.add_argument("--max-den", type=int, default=26)
    s.add_argument("--tol", type=float, default=None)

    s = sub("slice-solve", _cmd_slice_solve, help="solve the slice equation")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--c", required=True)
    s.add_argument("--v-seed", default="0")

    s = sub("param-ray", _cmd_param_ray, help="trace a parameter ray")
    s.add_argument("--p", type=int, default=1)
    s.add_argument("--c0", default="0.3", help="witness seed c")
    s.add_argument("--v-seed", default="0")
    s.add_argument("--t0", required=True)
    s.add_argument("--r-min", type=float, default=0.05)
    s.add_argument("--steps", type=int, default=200)
    s.add_argument("--seed-c", help="explicit on-ray seed (selects the ray)")

    s = sub("boundary-predict", _cmd_boundary_predict,
            help="predict the boundary lamination from interior data")
    s.add_argument("--p", type=int, default=1)
    s.add_argument("--c0", default="0.3")
    s.add_argument("--v-seed", default="0")
    s.add_argument("--t0", required=True)
    s.add_argument("--depth", type=int, default=5)
    s.add_argument("--max-den", type=int, default=80)

    s = sub("compare", _cmd_compare, help="compare two laminations per angle")
    s.add_argument("--predicted", required=True)
    s.add_argument("--observed", help="serialized lamination JSON")
    s.add_argument("--estimate",
                   help="param-ray artifact; the observed side is measured "
                        "along its path tail")
    s.add_argument("--max-den", type=int, default=80)

    s = sub("draw-chords", _cmd_draw_chords, help="SVG chord diagram")
    s.add_argument("--input", required=True)
    s.add_argument("--size", type=int, default=600)
    s.add_argument("--stroke", type=float, default=1.2)
    s.add_argument("--labels", action="store_true")

    s = sub("draw-julia", _cmd_draw_julia, help="PNG Julia raster")
    s.add_argument("--c", required=True)
    s.add_argument("--v", required=True)
    s.add_argument("--resolution", type=int, default=512)
    s.add_argument("--budget", type=int, default=400)
    s.add_argument("--half-width", type=float, default=1.6)
    s.add_argument("--center", default="0")
    s.add_argument("--rays", help="comma list of external angles to overlay")
    s.add_argument("--internal-t", dest="internal_t", default=None)
    s.add_argument("--turns", default="")
    s.add_argument("--tail", default="")
    s.add_argument("--period", type=int, default=1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = _build_config(args)
    except (ValueError, OSError) as exc:
        print(f"lamlab: config error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, cfg)
    except NumericalError as exc:
        print(f"lamlab: numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"lamlab: validation failure: {exc}", file=sys.stderr)
        return 3
    except LamlabError as exc:  # pragma: no cover - safety net
        print(f"lamlab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
