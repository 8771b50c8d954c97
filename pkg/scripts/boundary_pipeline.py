#!/usr/bin/env python3
"""End-to-end boundary experiment for one parameter-ray angle.

Solves the slice witness, locates its component, predicts the boundary
lamination from interior data, traces the ray deep, extrapolates the landing
parameter, measures the observed lamination along the path tail, and writes
the comparison plus all artifacts (JSON + chord SVGs) to an output directory.

    python3 scripts/boundary_pipeline.py --t0 1/2 --max-den 80 --out-dir runs/half
"""

import argparse
import dataclasses
import json
import pathlib
import sys
import time
from fractions import Fraction

from lamlab.config import Config
from lamlab.dynamics import DEFAULT, CubicParam
from lamlab.errors import NumericalError
from lamlab.lamination import serialize
from lamlab.parameter import (
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
from lamlab.render import chord_svg


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t0", default="1/2")
    ap.add_argument("--c0", type=float, default=0.3, help="witness seed")
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--max-den", type=int, default=80)
    ap.add_argument("--r-observe", type=float, default=0.05)
    ap.add_argument("--r-deep", type=float, default=2.5e-4,
                    help="extrapolation tail depth")
    ap.add_argument("--out-dir", default="runs/pipeline")
    args = ap.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = Fraction(args.t0)
    cfg = DEFAULT
    started = time.monotonic()

    witness = solve_slice(1, CubicParam(args.c0, 0.0), cfg=cfg)
    ref = locate_component(witness, cfg=cfg)
    print(f"witness {witness.a.c:.4f}: type {ref.type}, "
          f"entry {ref.ell}, degree {ref.deg_d}")

    predicted = predict_boundary_lamination(ref, t0, args.depth,
                                            args.max_den, cfg=cfg)
    print(f"predicted: {sum(1 for c in predicted.classes if len(c) > 1)} "
          f"nontrivial classes  [{time.monotonic() - started:.1f}s]")

    est = trace_parameter_ray(ref, t0, r_min=args.r_deep, cfg=cfg)
    est = dataclasses.replace(est, combinatorics=ray_combinatorics(t0),
                              predicted=predicted)
    try:
        est = dataclasses.replace(est, a0=boundary_landing(est, cfg=cfg))
        print(f"ray: {len(est.path)} points, landing estimate "
              f"c = {est.a0.c:.8f} ({est.combinatorics})")
    except NumericalError as exc:
        print(f"ray: {len(est.path)} points; no stable landing ({exc})")

    tail = dataclasses.replace(
        est, path=tuple((r, a) for r, a in est.path if r >= args.r_observe))
    observed = observed_boundary_lamination(tail, args.max_den, cfg=cfg)
    report = compare_prediction(predicted, observed, args.max_den)
    print(f"observed: {sum(1 for c in observed.classes if len(c) > 1)} "
          f"nontrivial classes; agreement "
          f"{100.0 * report.agreement:.2f}% on {report.angles_checked} angles")

    (out / "estimate.json").write_text(
        json.dumps(boundary_estimate_json(est, p=1), indent=2) + "\n")
    (out / "predicted.json").write_text(
        json.dumps({"lamination": serialize(predicted)}, indent=2) + "\n")
    (out / "observed.json").write_text(
        json.dumps({"lamination": serialize(observed)}, indent=2) + "\n")
    (out / "report.json").write_text(json.dumps({
        "t0": str(t0),
        "agreement": report.agreement,
        "angles_checked": report.angles_checked,
        "predicted_only": [[str(t) for t in c] for c in report.predicted_only],
        "observed_only": [[str(t) for t in c] for c in report.observed_only],
        "q_indistinguishable": report.q_indistinguishable,
        "seconds": round(time.monotonic() - started, 2),
        "config": cfg.as_dict(),
    }, indent=2) + "\n")
    (out / "predicted.svg").write_text(chord_svg(predicted))
    (out / "observed.svg").write_text(chord_svg(observed))
    print(f"artifacts in {out}/  [{time.monotonic() - started:.1f}s total]")
    return 0 if report.agreement == 1.0 else 1


if __name__ == "__main__":
    sys.exit(main())
