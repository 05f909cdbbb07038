"""Target annulus, its tiling by annular shells, and the map onto it.

Net cell (i, j) goes to the shell between the circles r_i, r_{i+1} and
the rays phi_j, phi_{j+1}.  Inside a cell the map is bilinear in the
(g, h) coordinates, so the g-levels land on circles and the h-levels on
radial segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import TWO_PI, net_measures, point_value, total_nu
from .rectnet import RectNet


@dataclass(frozen=True, eq=False)
class TargetAnnulus:
    """Concentric circles r_i = exp(2 pi g_i / P) and rays phi_j = 2 pi h_j / P.

    ``stated_radii`` holds the boundary radii in the closed form the theory
    announces, (1, 2 pi exp(2 pi k / P)).  The shells themselves live between
    ``radii[0]`` and ``radii[-1]``; see the README for the difference.
    """

    k: float
    period: float
    radii: np.ndarray
    angles: np.ndarray
    t_lo: float = 0.0
    dphi: np.ndarray | None = None

    @property
    def inner_radius(self) -> float:
        return 1.0 if self.t_lo == 0.0 else math.exp(TWO_PI * self.t_lo / self.period)

    @property
    def outer_radius(self) -> float:
        return TWO_PI * math.exp(TWO_PI * self.k / self.period)

    @property
    def stated_radii(self) -> tuple[float, float]:
        return (self.inner_radius, self.outer_radius)

    @property
    def area(self) -> float:
        """mu(S_A) of the region tiled by the shells."""
        return math.pi * (math.exp(2.0 * TWO_PI * self.k / self.period)
                          - math.exp(2.0 * TWO_PI * self.t_lo / self.period))

    def shells(self) -> "ShellTiling":
        return ShellTiling(self.radii, self.angles, self.dphi)


def build_target(k: float, period: float, g_levels, h_levels, t_lo: float = 0.0) -> TargetAnnulus:
    """Radii and angles from the level values of g and h."""
    if not (period > 0 and math.isfinite(period)):
        raise ValueError(f"period must be positive, got {period!r}")
    gv = np.asarray(g_levels, dtype=float)
    hv = np.asarray(h_levels, dtype=float)
    if len(gv) < 2 or len(hv) < 2:
        raise ValueError("need at least two levels in each family")
    if np.any(np.diff(gv) <= 0) or np.any(np.diff(hv) <= 0):
        raise ValueError("level values must be strictly increasing")
    if gv[0] != t_lo or gv[-1] != k:
        raise ValueError(f"g-levels must run from {t_lo!r} to {k!r}, got {gv[0]!r}..{gv[-1]!r}")
    if hv[0] != 0.0 or abs(hv[-1] - period) > 1e-9 * period:
        raise ValueError(f"h-levels must run from 0 to the period, got {hv[0]!r}..{hv[-1]!r}")
    s = TWO_PI / period
    radii = np.exp(s * gv)
    angles = s * hv
    angles[-1] = TWO_PI
    # widths straight from the h-increments: differencing the angles would
    # lose digits on very thin cells
    dphi = s * np.diff(hv)
    return TargetAnnulus(float(k), float(period), radii, angles, float(t_lo), dphi)


@dataclass(frozen=True, eq=False)
class ShellTiling:
    radii: np.ndarray
    angles: np.ndarray
    dphi: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.radii) - 1, len(self.angles) - 1)

    def corners(self, i: int, j: int) -> np.ndarray:
        """Counterclockwise corners r_i e^{i phi_j}, r_{i+1} e^{i phi_j}, ..."""
        r = self.radii[[i, i + 1, i + 1, i]]
        a = self.angles[[j, j, j + 1, j + 1]]
        return np.column_stack([r * np.cos(a), r * np.sin(a)])

    def areas(self) -> np.ndarray:
        r2 = np.diff(self.radii ** 2)
        da = np.diff(self.angles) if self.dphi is None else self.dphi
        return 0.5 * np.outer(r2, da)

    def disjoint(self) -> bool:
        """Shells indexed by a strictly increasing grid never overlap."""
        return bool(np.all(np.diff(self.radii) > 0) and np.all(np.diff(self.angles) > 0))


@dataclass(frozen=True, eq=False)
class PLMap:
    """Cell-by-cell map from the rectangular net onto the shell tiling."""

    net: RectNet
    target: TargetAnnulus

    def cell_of(self, g: float, h: float) -> tuple[int, int]:
        gv, hv = self.net.g_values, self.net.h_values
        i = int(np.clip(np.searchsorted(gv, g, side="right") - 1, 0, len(gv) - 2))
        j = int(np.clip(np.searchsorted(hv, h, side="right") - 1, 0, len(hv) - 2))
        return i, j

    def image_polar(self, g: float, h: float) -> tuple[float, float]:
        """(r, phi) of the point with coordinates (g, h)."""
        gv, hv = self.net.g_values, self.net.h_values
        r, a = self.target.radii, self.target.angles
        i, j = self.cell_of(g, h)
        s = (g - gv[i]) / (gv[i + 1] - gv[i])
        t = (h - hv[j]) / (hv[j + 1] - hv[j])
        return r[i] + s * (r[i + 1] - r[i]), a[j] + t * (a[j + 1] - a[j])

    def image(self, g: float, h: float) -> np.ndarray:
        rho, phi = self.image_polar(g, h)
        return np.array([rho * math.cos(phi), rho * math.sin(phi)])

    def vertex_images(self) -> np.ndarray:
        """Image of every vertex of the cut quadrilateral."""
        return np.array([self.image(float(a), float(b)) for a, b in zip(self.net.g, self.net.h)])

    def corner_image(self, i: int, j: int) -> np.ndarray:
        r, a = self.target.radii[i], self.target.angles[j]
        return np.array([r * math.cos(a), r * math.sin(a)])


def build_map(net: RectNet, target: TargetAnnulus) -> PLMap:
    if (len(net.g_values), len(net.h_values)) != (len(target.radii), len(target.angles)):
        raise ValueError("net and target have different numbers of levels")
    return PLMap(net, target)


@dataclass
class MeasureReport:
    nu: np.ndarray
    mu: np.ndarray
    max_rel: float
    total_nu: float
    total_expected: float
    shell_total: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_measure_preservation(m: PLMap, nu: np.ndarray | None = None,
                                rtol: float = 1e-9, total_rtol: float = 1e-8) -> MeasureReport:
    """Compare nu(R) with the shell area mu(T_R) cell by cell, and the totals."""
    net, tg = m.net, m.target
    if nu is None:
        nu, _ = net_measures(net.g_values, net.h_values, tg.period)
    mu = tg.shells().areas()
    rel = np.abs(nu - mu) / mu
    v = []
    for i, j in np.argwhere(rel > rtol)[:20]:
        v.append(f"cell ({i}, {j}): nu {nu[i, j]!r} vs shell {mu[i, j]!r}")
    tot = math.fsum(nu.ravel())
    expect = total_nu(tg.k, tg.period) if tg.t_lo == 0.0 else tg.area
    if abs(tot - expect) > total_rtol * expect:
        v.append(f"total nu {tot!r} differs from {expect!r}")
    shell_total = math.fsum(mu.ravel())
    if abs(shell_total - tg.area) > total_rtol * tg.area:
        v.append(f"shells cover {shell_total!r}, annulus has {tg.area!r}")
    if not tg.shells().disjoint():
        v.append("shell grid is not strictly increasing")
    return MeasureReport(nu, mu, float(rel.max()), tot, expect, shell_total, v)


def verify_level_images(m: PLMap) -> list[str]:
    """g-levels must go to single circles and h-levels to single rays,
    each traversed monotonically."""
    net = m.net
    v = []
    for i, L in enumerate(net.g_levels):
        hs = np.array([point_value(p, net.h) for p in L.points])
        if np.any(np.diff(hs) < -1e-12 * m.target.period):
            v.append(f"h is not monotone along g-level {i}")
    for j, M in enumerate(net.h_levels):
        gs = np.array([point_value(p, net.g) for p in M.points])
        if np.any(np.diff(gs) < -1e-12 * max(abs(m.target.k), 1.0)):
            v.append(f"g is not monotone along h-level {j}")
    return v


@dataclass(frozen=True)
class Cylinder:
    """Round cylinder of radius 1 between heights log a and log b."""

    a: float
    b: float

    @property
    def height(self) -> float:
        return math.log(self.b / self.a)

    @staticmethod
    def F(x: float, y: float) -> tuple[float, float, float]:
        rho = math.hypot(x, y)
        return (x / rho, y / rho, math.log(rho))

    def rectangle(self, r0: float, r1: float, phi0: float, phi1: float):
        """Image of an annular shell: (phi-width, height) of a flat rectangle."""
        return (phi1 - phi0, math.log(r1 / r0))


def to_cylinder(target: TargetAnnulus) -> Cylinder:
    a, b = float(target.radii[0]), float(target.radii[-1])
    if not a > 0:
        raise ValueError(f"inner radius must be positive, got {a!r}")
    return Cylinder(a, b)


def verify_cylinder(target: TargetAnnulus, lam: np.ndarray, rtol: float = 1e-9) -> list[str]:
    """lambda(R) must equal the area of the rectangle F(T_R)."""
    to_cylinder(target)  # validates the radii
    v = []
    r = target.radii
    da = target.dphi if target.dphi is not None else np.diff(target.angles)
    for i in range(len(r) - 1):
        ht = math.log(r[i + 1] / r[i])
        for j in range(len(da)):
            rect = da[j] * ht
            if abs(lam[i, j] - rect) > rtol * rect:
                v.append(f"cell ({i}, {j}): lambda {lam[i, j]!r} vs rectangle {rect!r}")
    return v
