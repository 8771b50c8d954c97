#!/usr/bin/env python3
"""Sample random non-periodic generators and validate their laminations.

Each sample draws an angle theta = k/d with d a multiple of 3 (so the orbit
has a genuine preperiod) and pairs it with theta + 1/3, making the pair
legal by construction. The pullback closure is expanded to the requested
depth over the trivial base and checked against all five axioms.

    python3 scripts/random_visual_laminations.py --count 10 --depth 6 --svg runs/viz
"""

import argparse
import math
import pathlib
import random
import sys
import time
from fractions import Fraction

from lamlab.circle import Angle, AngleSet
from lamlab.lamination import (
    GeneratorSpec,
    Lamination,
    check_axioms,
    visual_lamination,
)
from lamlab.render import chord_svg


def sample_generator(rng: random.Random) -> GeneratorSpec:
    while True:
        d = 3 * rng.randint(1, 100)
        k = rng.randint(1, d - 1)
        if math.gcd(k, d) == 1:
            break
    theta = Angle.from_fraction(Fraction(k, d))
    partner = Angle.from_fraction((Fraction(k, d) + Fraction(1, 3)) % 1)
    return GeneratorSpec(3, AngleSet((theta, partner)))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--seed", type=int, default=20260816)
    ap.add_argument("--svg", default=None, help="directory for chord renders")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    svg_dir = None
    if args.svg:
        svg_dir = pathlib.Path(args.svg)
        svg_dir.mkdir(parents=True, exist_ok=True)

    failures = 0
    for i in range(args.count):
        spec = sample_generator(rng)
        tick = time.monotonic()
        lam = visual_lamination(Lamination(3, ()), spec, args.depth)
        report = check_axioms(lam)
        ntc = sum(1 for c in lam.classes if len(c) > 1)
        theta = min(spec.e_star)
        ok = report.all_pass()
        if not ok:
            failures += 1
        print(f"{i:3d}  theta={str(theta.fraction):>8}  classes={ntc:5d}  "
              f"max_class={report.max_class_size}  "
              f"{'pass' if ok else 'FAIL ' + report.r1}  "
              f"[{time.monotonic() - tick:.2f}s]")
        if svg_dir is not None:
            name = f"{i:03d}_{theta.fraction.numerator}_{theta.fraction.denominator}.svg"
            (svg_dir / name).write_text(chord_svg(lam))

    print(f"{args.count - failures}/{args.count} passed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
