"""Exact laminations on the circle and ray dynamics for marked cubic polynomials.

The package has two halves that meet in the parameter module:

* combinatorics — exact rational angles, angle-tripling/doubling, invariant
  laminations built by constrained pullback of a two-point generator class
  (`lamlab.circle`, `lamlab.lamination`);
* numerics — external/internal ray tracing for the cubic family with a marked
  superattracting cycle, collision ("turning") detection at the free critical
  point, and parameter-space continuation toward component boundaries
  (`lamlab.dynamics`, `lamlab.parameter`).

`lamlab.render` draws chord diagrams and filled-Julia-set rasters;
`lamlab.cli` exposes everything as subcommands.
"""

from lamlab.circle import Angle, AngleSet, OrbitType
from lamlab.lamination import Lamination, GeneratorSpec

__all__ = ["Angle", "AngleSet", "OrbitType", "Lamination", "GeneratorSpec"]

__version__ = "0.1.0"
