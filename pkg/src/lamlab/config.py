"""Run configuration: tolerances, budgets, cache location, output paths.

Every numerical entry point takes one of these; results that get written to
disk embed the exact values used so a run can be reproduced or invalidated.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from typing import Optional

try:  # py3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


@dataclass(frozen=True)
class Config:
    # tolerances
    trace_tol: float = 1e-10        # pullback residual per accepted ray point
    cluster_tol: float = 1e-6      # landing-point single-linkage radius
    landing_tol: float = 1e-8      # tail-extrapolation stability
    slice_tol: float = 1e-12       # |f^p(c) - c| on the slice
    continuation_tol: float = 1e-8  # parameter-ray corrector residual

    # budgets
    iteration_budget: int = 400     # orbit iterations (Green, classification)
    depth: int = 5                  # lamination pullback depth
    max_den: int = 80               # densest rational angle family

    # ray-trace geometry
    start_potential: float = 16.0   # Green value of the first external point
    steps_per_level: int = 6        # grid points per division of potential by 3
    internal_start: float = 16.0    # -log s of the first internal point
    internal_steps: int = 6         # grid points per squaring level
    target_potential: float = 1e-7  # external trace descends to here
    s_max: float = 0.99999          # internal trace ascends to here

    # io
    cache_dir: Optional[str] = None
    output_dir: str = "."

    def __post_init__(self):
        for name in (
            "trace_tol", "cluster_tol", "landing_tol", "slice_tol",
            "continuation_tol", "start_potential", "target_potential",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("iteration_budget", "depth", "max_den", "steps_per_level",
                     "internal_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be a positive integer")
        if not (0 < self.s_max < 1):
            raise ValueError("s_max must lie in (0, 1)")

    def resolved_cache_dir(self) -> Optional[str]:
        env = os.environ.get("LAMLAB_CACHE")
        return env if env else self.cache_dir

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> Config:
    """Defaults, overlaid by a TOML file, overlaid by explicit overrides."""
    values: dict = {}
    if path is not None:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
        known = {f.name for f in fields(Config)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return Config(**values)
