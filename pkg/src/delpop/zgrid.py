"""Complex evaluation grids: symmetric arcs on the unit circle and lattice
grids inside the disc |z - (1 - p/m)| <= p/m.

Theory prescribes arc half-widths of 2*pi/L or 1/L with L ~ (n/(log n *
p^2))^(1/3) and spacings far too fine to enumerate; spacing and point cap
are therefore explicit configuration, and wider arcs are allowed (and
useful) when p is large.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .core import ParameterError

ARC_TOL = 1e-14
DISC_TOL = 1e-14


@dataclass(frozen=True)
class GridPoint:
    z: complex
    kind: str  # "arc" | "disc"
    index: int


@dataclass(frozen=True)
class GridSpec:
    """Grid shape parameters.

    kind: "arc" or "disc".  L: arc width parameter; width_mode picks the
    half-width 2*pi/L ("2pi") or 1/L ("inv", default).  spacing: angular
    step (arc) or lattice pitch (disc).  m: disc grids live in
    |z - (1 - p/m)| <= p/m.
    """

    kind: str
    L: int = 1
    spacing: float = 0.1
    max_points: int = 257
    m: int = 1
    width_mode: str = "inv"

    def __post_init__(self):
        if self.kind not in ("arc", "disc"):
            raise ParameterError(f"unknown grid kind {self.kind!r}")
        if self.spacing <= 0:
            raise ParameterError("spacing must be positive")
        if self.max_points < 1:
            raise ParameterError("max_points must be >= 1")
        if self.kind == "arc" and self.L < 1:
            raise ParameterError("L must be >= 1")
        if self.kind == "disc" and self.m < 1:
            raise ParameterError("m must be >= 1")
        if self.width_mode not in ("2pi", "inv"):
            raise ParameterError(f"unknown width mode {self.width_mode!r}")

    @property
    def arc_half_width(self) -> float:
        return (2.0 * math.pi / self.L) if self.width_mode == "2pi" else (1.0 / self.L)


def default_L(n: int, p: float) -> int:
    """L = max(1, floor((n / (ln n * p^2))^(1/3)))."""
    if n < 2:
        raise ParameterError("n must be >= 2")
    return max(1, math.floor((n / (math.log(n) * p * p)) ** (1.0 / 3.0)))


def build_arc_grid(spec: GridSpec):
    """Points e^{i*theta}, theta = j*spacing, |theta| <= half-width.

    Symmetric around theta = 0, which is always included; when the cap
    bites, points closest to 0 are kept (still symmetric)."""
    if spec.kind != "arc":
        raise ParameterError("spec is not an arc grid")
    width = spec.arc_half_width
    if spec.spacing > width * (1 + 1e-12):
        raise ParameterError("spacing exceeds arc half-width")
    jmax = math.floor(width / spec.spacing + 1e-12)
    if 2 * jmax + 1 > spec.max_points:
        jmax = (spec.max_points - 1) // 2
    thetas = [j * spec.spacing for j in range(-jmax, jmax + 1)]
    return [
        GridPoint(complex(math.cos(t), math.sin(t)), "arc", i)
        for i, t in enumerate(thetas)
    ]


def build_disc_grid(spec: GridSpec, p: float):
    """Lattice points (a*s, b*s) inside the closed disc |z - c| <= p/m,
    c = 1 - p/m; capped at max_points keeping those nearest the center."""
    if spec.kind != "disc":
        raise ParameterError("spec is not a disc grid")
    if not (0.0 < p < 1.0):
        raise ParameterError("p must lie in (0,1)")
    s = spec.spacing
    rho = p / spec.m
    c = 1.0 - rho
    pts = []
    a_lo = math.floor((c - rho) / s - 1)
    a_hi = math.ceil((c + rho) / s + 1)
    b_hi = math.ceil(rho / s + 1)
    for a in range(a_lo, a_hi + 1):
        for b in range(-b_hi, b_hi + 1):
            z = complex(a * s, b * s)
            if abs(z - c) <= rho + DISC_TOL:
                pts.append(z)
    if not pts:
        raise ParameterError("disc grid is empty; decrease spacing")
    pts.sort(key=lambda z: (abs(z - c), z.real, z.imag))
    pts = pts[: spec.max_points]
    return [GridPoint(z, "disc", i) for i, z in enumerate(pts)]


def build_grid(spec: GridSpec, p: float | None = None):
    if spec.kind == "arc":
        return build_arc_grid(spec)
    if p is None:
        raise ParameterError("disc grid requires p")
    return build_disc_grid(spec, p)


def grid_to_json(spec: GridSpec, points) -> str:
    return json.dumps(
        {
            "kind": spec.kind,
            "L": spec.L,
            "spacing": spec.spacing,
            "points": [[gp.z.real, gp.z.imag] for gp in points],
        }
    )
