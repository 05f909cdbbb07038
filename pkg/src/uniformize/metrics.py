"""Pair-flux weight, curve lengths, and the cell measures nu and lambda."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import VerificationError
from .network import ScalarField
from .plgeom import LevelCurve, LevelPoint

TWO_PI = 2.0 * math.pi


def point_value(p: LevelPoint, u: ScalarField) -> float:
    """Value of a vertex field at a level point, affine along its edge."""
    if p.vertex is not None:
        return float(u[p.vertex])
    a, b = p.edge
    ua, ub = float(u[a]), float(u[b])
    if ua == ub:
        return ua
    return (1.0 - p.lam) * ua + p.lam * ub


@dataclass(frozen=True)
class PairFluxWeight:
    """Edge weights built from the pair (g, h).

    The weight of an oriented edge e = (e-, e+) is
    (2 pi / period) exp(2 pi g(e-) / period) |h(e+) - h(e-)|.
    """

    period: float
    g: ScalarField
    h: ScalarField

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError(f"period must be positive, got {self.period!r}")

    @property
    def scale(self) -> float:
        return TWO_PI / self.period

    def dh(self, a: int, b: int) -> float:
        return float(self.h[b] - self.h[a])

    def psi(self, a: int) -> float:
        """The conformal factor exp(2 pi g / period) at a vertex."""
        return math.exp(self.scale * float(self.g[a]))


def edge_weight(w: PairFluxWeight, e) -> float:
    """rho(e) for an oriented edge given as (tail, head) vertex ids,
    or as a pair of (g, h) value tuples."""
    a, b = e
    if isinstance(a, tuple):
        (ga, ha), (_, hb) = a, b
    else:
        ga, ha, hb = float(w.g[a]), float(w.h[a]), float(w.h[b])
    return w.scale * math.exp(w.scale * ga) * abs(hb - ha)


def g_level_length(w: PairFluxWeight, L: LevelCurve, rtol: float = 1e-9) -> float:
    """Pair-flux length of a g-level, checked against 2 pi exp(2 pi m / period).

    ``L`` is the g-level as an arc on the cut quadrilateral, from the base
    copy of the slit to the top copy; its pair-flux sum equals that of the
    closed curve in the annulus.
    """
    if L.closed:
        # h jumps by the period across the slit, so a closed curve has no
        # single-valued h; pass the arc on the cut quadrilateral instead
        raise ValueError("pass the level as an arc on the cut quadrilateral")
    gh = [(point_value(p, w.g), point_value(p, w.h)) for p in L.points]
    total = math.fsum(edge_weight(w, (gh[i], gh[i + 1])) for i in range(len(gh) - 1))
    expect = TWO_PI * math.exp(w.scale * L.value)
    if abs(total - expect) > rtol * expect:
        raise VerificationError(
            f"g-level {L.value!r} has pair-flux length {total!r}, expected {expect!r}",
            abs(total - expect) / expect)
    return total


def h_level_length(L: LevelCurve, g: ScalarField) -> float:
    """Length exp(g(end)) - exp(g(start)) of an h-level from the inner to
    the outer boundary; it telescopes over the curve's segments."""
    g0 = point_value(L.points[0], g)
    g1 = point_value(L.points[-1], g)
    return math.exp(g1) - math.exp(g0)


def _check_layer(gt: float, gb: float, dh_base: float, dh_top: float):
    if not gt >= gb:
        raise ValueError(f"top level {gt!r} lies below base level {gb!r}")
    if abs(dh_base - dh_top) > 1e-9 * max(abs(dh_base), abs(dh_top), 1e-300):
        raise ValueError(f"cell h-increments differ on base ({dh_base!r}) and top ({dh_top!r})")


def cell_measure_nu(g_top: float, g_base: float, dh_base: float, period: float,
                    dh_top: float | None = None) -> float:
    """nu(R) = 1/2 (exp(2 pi g_t / P)^2 - exp(2 pi g_b / P)^2) * 2 pi dh / P."""
    _check_layer(g_top, g_base, dh_base, dh_base if dh_top is None else dh_top)
    s = TWO_PI / period
    rt, rb = math.exp(s * g_top), math.exp(s * g_base)
    return 0.5 * (rt * rt - rb * rb) * (s * dh_base)


def cell_measure_lambda(g_top: float, g_base: float, dh_base: float, period: float,
                        dh_top: float | None = None) -> float:
    """lambda(R) = (2 pi dh / P) log(r_t / r_b) with r = exp(2 pi g / P)."""
    _check_layer(g_top, g_base, dh_base, dh_base if dh_top is None else dh_top)
    s = TWO_PI / period
    return (s * dh_base) * math.log(math.exp(s * g_top) / math.exp(s * g_base))


def net_measures(g_values, h_values, period: float):
    """Arrays nu[i, j] and lambda[i, j] over every net cell."""
    gv = np.asarray(g_values, dtype=float)
    hv = np.asarray(h_values, dtype=float)
    ni, nj = len(gv) - 1, len(hv) - 1
    nu = np.empty((ni, nj))
    lam = np.empty((ni, nj))
    for i in range(ni):
        for j in range(nj):
            dh = hv[j + 1] - hv[j]
            nu[i, j] = cell_measure_nu(gv[i + 1], gv[i], dh, period)
            lam[i, j] = cell_measure_lambda(gv[i + 1], gv[i], dh, period)
    return nu, lam


def total_nu(k: float, period: float) -> float:
    """Closed form pi (exp(4 pi k / period) - 1) of the total measure."""
    return math.pi * (math.exp(2.0 * TWO_PI * k / period) - 1.0)
