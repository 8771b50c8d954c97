"""Chord diagrams of laminations and Julia-set rasters with ray overlays.

Output is deliberately boring: a deterministic SVG string for the disk
pictures, and a Pillow image for the dynamical plane.  Nothing here feeds
back into the numerics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw

from .dynamics import (
    DEFAULT,
    CubicParam,
    InternalRay,
    _bottcher_series,
    _series_eval,
    _series_trust_radius,
)
from .errors import ValidationError
from .lamination import Lamination

MAX_RESOLUTION = 4096

_PALETTE = (
    "#355e8d", "#a4423b", "#3c7a4e", "#8a5a2c",
    "#6b4d8e", "#2c7a7a", "#9c3f68", "#5c6b2c",
)


# ---------------------------------------------------------------------------
# chord diagrams
# ---------------------------------------------------------------------------


def _disk_point(theta_frac, radius: float, cx: float, cy: float):
    ang = 2.0 * math.pi * float(theta_frac)
    # screen y grows downward; angle 0 points right, angles run counterclockwise
    return cx + radius * math.cos(ang), cy - radius * math.sin(ang)


def _geodesic_path(t1, t2, radius: float, cx: float, cy: float) -> str:
    """SVG path for the hyperbolic geodesic between two circle angles."""
    x1, y1 = _disk_point(t1, radius, cx, cy)
    x2, y2 = _disk_point(t2, radius, cx, cy)
    u = complex(math.cos(2 * math.pi * float(t1)), math.sin(2 * math.pi * float(t1)))
    w = complex(math.cos(2 * math.pi * float(t2)), math.sin(2 * math.pi * float(t2)))
    det = u.real * w.imag - u.imag * w.real
    if abs(det) < 1e-9:
        # antipodal endpoints: the geodesic degenerates to a diameter
        return f"M {x1:.3f} {y1:.3f} L {x2:.3f} {y2:.3f}"
    # center z0 of the circle through u and w orthogonal to the unit circle:
    # Re(z0 conj(u)) = Re(z0 conj(w)) = 1
    x0 = (w.imag - u.imag) / det
    y0 = (u.real - w.real) / det
    r_math = math.hypot(x0, y0) ** 2 - 1.0
    r_math = math.sqrt(max(r_math, 0.0))
    zx, zy = cx + radius * x0, cy - radius * y0
    r_s = radius * r_math
    # midpoint of the arc that stays inside the disk, used to orient the sweep
    mx, my = 0.5 * (x1 + x2), 0.5 * (y1 + y2)
    norm = math.hypot(mx - zx, my - zy)
    qx = zx + r_s * (mx - zx) / norm
    qy = zy + r_s * (my - zy) / norm
    a_u = math.atan2(y1 - zy, x1 - zx)
    a_q = math.atan2(qy - zy, qx - zx)
    a_w = math.atan2(y2 - zy, x2 - zx)
    d_w = (a_w - a_u) % (2.0 * math.pi)
    d_q = (a_q - a_u) % (2.0 * math.pi)
    sweep = 1 if d_q < d_w else 0
    extent = d_w if sweep == 1 else 2.0 * math.pi - d_w
    large = 0 if extent <= math.pi else 1
    return (f"M {x1:.3f} {y1:.3f} A {r_s:.3f} {r_s:.3f} 0 "
            f"{large} {sweep} {x2:.3f} {y2:.3f}")


def chord_svg(lam: Lamination, size: int = 600, stroke_width: float = 1.2,
              palette: Sequence[str] = _PALETTE,
              show_labels: bool = False) -> str:
    """Disk picture of a lamination as a deterministic SVG string.

    Every class of size k contributes its k(k-1)/2 geodesics, colored per
    class from the palette in canonical class order, so identical inputs
    produce byte-identical output.
    """
    cx = cy = size / 2.0
    radius = size / 2.0 - max(8.0, size * 0.03)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="#ffffff"/>',
        f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{radius:.3f}" '
        f'fill="none" stroke="#222222" stroke-width="{stroke_width:.2f}"/>',
    ]
    classes = sorted((tuple(sorted(cl)) for cl in lam.classes if len(cl) > 1))
    for idx, cl in enumerate(classes):
        color = palette[idx % len(palette)]
        for i in range(len(cl)):
            for j in range(i + 1, len(cl)):
                path = _geodesic_path(cl[i].fraction, cl[j].fraction,
                                      radius, cx, cy)
                out.append(f'<path d="{path}" fill="none" stroke="{color}" '
                           f'stroke-width="{stroke_width:.2f}"/>')
        if show_labels:
            for th in cl:
                x, y = _disk_point(th.fraction, radius + 4.0, cx, cy)
                out.append(f'<text x="{x:.3f}" y="{y:.3f}" '
                           f'font-size="{max(8, size // 75)}" '
                           f'fill="{color}">{th}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Julia rasters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JuliaPlot:
    """Everything needed to raster one dynamical-plane picture."""

    a: CubicParam
    resolution: int = 512
    budget: int = 400
    overlays: tuple = ()
    center: complex = 0j
    half_width: float = 1.6
    marked_period: int = 1


def _escape_counts(a: CubicParam, Z: np.ndarray, budget: int) -> np.ndarray:
    """Iteration count of first escape beyond radius 1e3; -1 if bounded."""
    c2 = 3.0 * a.c * a.c
    const = 2.0 * a.c**3 + a.v
    counts = np.full(Z.shape, -1, dtype=np.int32)
    z = Z.copy()
    alive = np.ones(Z.shape, dtype=bool)
    for n in range(budget):
        z[alive] = z[alive] ** 3 - c2 * z[alive] + const
        esc = alive & (np.abs(z) > 1e3)
        counts[esc] = n
        alive &= ~esc
        if not alive.any():
            break
    return counts


def _basin_levels(a: CubicParam, p: int, Z: np.ndarray,
                  steps: int = 80) -> np.ndarray:
    """Internal level of each grid point in the marked basin; 1.0 outside."""
    center, b = _bottcher_series(a, p)
    trust = _series_trust_radius(b)
    c2 = 3.0 * a.c * a.c
    const = 2.0 * a.c**3 + a.v
    levels = np.ones(Z.shape)
    z = Z.copy()
    pending = np.ones(Z.shape, dtype=bool)
    for n in range(steps):
        hit = pending & (np.abs(z - center) <= trust)
        if hit.any():
            phi = _series_eval(b, z[hit] - center)
            levels[hit] = np.abs(phi) ** (0.5**n)
            pending &= ~hit
        if not pending.any():
            break
        zp = z[pending]
        for _ in range(p):
            zp = zp**3 - c2 * zp + const
        z[pending] = zp
        bad = pending & (np.abs(z) > 1e6)
        pending &= ~bad
    return levels


def _to_pixel(z: complex, plot: JuliaPlot) -> tuple[float, float]:
    scale = plot.resolution / (2.0 * plot.half_width)
    x = (z.real - plot.center.real + plot.half_width) * scale
    y = (plot.center.imag + plot.half_width - z.imag) * scale
    return x, y


def julia_raster(plot: JuliaPlot) -> Image.Image:
    """Escape-time picture with marked-basin shading and ray overlays.

    The escape region is colored by (log-smoothed) escape time, the marked
    superattracting basin by its internal level, the rest of the filled
    Julia set in near-black.  Overlays are drawn as polylines from traced
    ray points; internal-ray turning points get a small circular marker.
    """
    if plot.resolution > MAX_RESOLUTION:
        raise ValidationError(f"resolution above maximum {MAX_RESOLUTION}")
    n = plot.resolution
    xs = np.linspace(plot.center.real - plot.half_width,
                     plot.center.real + plot.half_width, n)
    ys = np.linspace(plot.center.imag + plot.half_width,
                     plot.center.imag - plot.half_width, n)
    Z = xs[None, :] + 1j * ys[:, None]
    counts = _escape_counts(plot.a, Z, plot.budget)
    rgb = np.zeros((n, n, 3), dtype=np.uint8)
    escaped = counts >= 0
    if escaped.any():
        t = counts[escaped].astype(float)
        shade = 0.55 + 0.45 * np.cos(0.35 * np.sqrt(t))
        rgb[escaped, 0] = (90 + 120 * shade).astype(np.uint8)
        rgb[escaped, 1] = (110 + 130 * shade).astype(np.uint8)
        rgb[escaped, 2] = (150 + 105 * shade).astype(np.uint8)
    bounded = ~escaped
    if bounded.any():
        try:
            levels = _basin_levels(plot.a, plot.marked_period, Z)
        except ValidationError:
            levels = np.ones(Z.shape)
        basin = bounded & (levels < 1.0)
        rgb[basin, 0] = (30 + 50 * levels[basin]).astype(np.uint8)
        rgb[basin, 1] = (40 + 110 * levels[basin]).astype(np.uint8)
        rgb[basin, 2] = (60 + 120 * levels[basin]).astype(np.uint8)
        rest = bounded & ~basin
        rgb[rest] = (22, 18, 28)
    img = Image.fromarray(rgb, "RGB")
    draw = ImageDraw.Draw(img)
    for ray in plot.overlays:
        pts = [_to_pixel(pt.z, plot) for pt in ray.points]
        if len(pts) >= 2:
            draw.line(pts, fill=(255, 240, 120), width=1)
        for s, z in getattr(ray, "turning_points", ()):
            x, y = _to_pixel(z, plot)
            draw.ellipse((x - 3, y - 3, x + 3, y + 3),
                         outline=(255, 80, 80), width=2)
    return img
