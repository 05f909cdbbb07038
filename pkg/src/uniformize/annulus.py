"""The annulus pipeline, from a solved g to the shell tiling, with checks.

Also used for the pieces of a split domain, whose low boundary value
``t_lo`` may be positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conjugate import (ConjugateField, conjugate_of_g, conjugate_of_h, harmonic_conjugate, period,
                        top_spread, verify_level_topology, width)
from .mapper import (Cylinder, PLMap, TargetAnnulus, build_map, build_target, to_cylinder,
                     verify_cylinder, verify_level_images, verify_measure_preservation)
from .metrics import PairFluxWeight, g_level_length, h_level_length, net_measures
from .network import ScalarField, max_principle_violations
from .plgeom import PLComplex, Slit, SlitQuadrilateral, cut_along_slit, find_slit
from .rectnet import RectNet, build_rectnet, verify_orthogonal_filling
from .errors import VerificationError


@dataclass
class Check:
    """One labelled verification outcome."""

    name: str
    passed: bool
    residual: float = 0.0
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "residual": float(self.residual),
                "detail": self.detail}


@dataclass(eq=False)
class AnnulusResult:
    complex: PLComplex
    g: ScalarField
    k: float
    t_lo: float
    slit: Slit
    q: SlitQuadrilateral
    gstar: ConjugateField
    period: float
    h: ScalarField
    hstar: ConjugateField
    width: float
    net: RectNet
    target: TargetAnnulus
    map: PLMap
    nu: np.ndarray
    lam: np.ndarray
    cylinder: Cylinder
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def uniformize_annulus(cx: PLComplex, g: ScalarField, k: float, t_lo: float = 0.0,
                       slit: Slit | None = None) -> AnnulusResult:
    """Run slit, conjugates, net, target and map on a solved annulus.

    ``g`` must equal ``k`` on the outer boundary and ``t_lo`` on the inner.
    Failed invariants are recorded as checks; construction errors raise.
    """
    if len(cx.inner) != 1:
        raise ValueError(f"expected an annulus, got {1 + len(cx.inner)} boundary components")
    g = np.asarray(g, dtype=float)
    if slit is None:
        slit = find_slit(cx, g)
    slit.validate(cx, g)
    q = cut_along_slit(cx, slit)
    gstar = conjugate_of_g(q, g)
    checks = []
    try:
        P = period(q, g, gstar)
        checks.append(Check("period_spread", True, top_spread(q, gstar) / gstar.total))
    except VerificationError as exc:
        P = float(gstar.total)
        checks.append(Check("period_spread", False, exc.residual, str(exc)))
    h = harmonic_conjugate(q, P)
    hstar = conjugate_of_h(q, h)
    try:
        W = width(q, hstar)
        checks.append(Check("width_spread", True, 0.0))
    except VerificationError as exc:
        W = hstar.total
        checks.append(Check("width_spread", False, exc.residual, str(exc)))
    gq = q.lift(g)
    for name, fld, conj in (("g_star_topology", gq, gstar), ("h_star_topology", h, hstar)):
        rep = verify_level_topology(q, fld, conj)
        checks.append(Check(name, rep.ok, float(len(rep.violations)), "; ".join(rep.violations[:3])))

    fixed = set(cx.outer) | {v for c in cx.inner for v in c}
    bad = max_principle_violations(g, fixed)
    checks.append(Check("maximum_principle", not bad, float(len(bad)),
                        f"vertices {bad[:5]}" if bad else ""))

    net = build_rectnet(q, gq, h)
    orth = verify_orthogonal_filling(net)
    nbad = int(np.count_nonzero(net.counts != 1))
    checks.append(Check("orthogonal_filling", orth.ok, float(nbad), "; ".join(orth.violations[:3])))

    target = build_target(k, P, net.g_values, net.h_values, t_lo=t_lo)
    m = build_map(net, target)
    nu, lam = net_measures(net.g_values, net.h_values, P)
    mrep = verify_measure_preservation(m, nu)
    checks.append(Check("measure_preservation", mrep.ok, mrep.max_rel, "; ".join(mrep.violations[:3])))
    tot_rel = abs(mrep.total_nu - mrep.total_expected) / mrep.total_expected
    checks.append(Check("total_measure", tot_rel <= 1e-8, tot_rel))
    tile_rel = abs(mrep.shell_total - target.area) / target.area
    disjoint = target.shells().disjoint() and net.counts.shape == (len(target.radii), len(target.angles))
    checks.append(Check("tiling_completeness", tile_rel <= 1e-8 and disjoint, tile_rel))

    stated = (1.0, 2 * math.pi * math.exp(2 * math.pi * k / P)) if t_lo == 0.0 else target.stated_radii
    checks.append(Check("boundary_radii", target.stated_radii == stated, 0.0,
                        f"{target.stated_radii!r}"))

    cyl = to_cylinder(target)
    cv = verify_cylinder(target, lam)
    h_ok = cyl.height == math.log(cyl.b / cyl.a)
    checks.append(Check("cylinder", not cv and h_ok, float(len(cv)), "; ".join(cv[:3])))

    expect_h = math.exp(k) - math.exp(t_lo)
    lens = [h_level_length(M, gq) for M in net.h_levels]
    hbad = [x for x in lens if x != expect_h]
    checks.append(Check("h_level_lengths", not hbad,
                        max((abs(x - expect_h) for x in lens), default=0.0)))

    w = PairFluxWeight(P, gq, h)
    worst, gfail = 0.0, ""
    for L in net.g_levels:
        try:
            g_level_length(w, L)
        except VerificationError as exc:
            worst = max(worst, exc.residual)
            gfail = str(exc)
    checks.append(Check("g_level_lengths", not gfail, worst, gfail))
    lv = verify_level_images(m)
    checks.append(Check("level_images", not lv, float(len(lv)), "; ".join(lv[:3])))

    return AnnulusResult(cx, g, float(k), float(t_lo), slit, q, gstar, P, h, hstar, W, net,
                         target, m, nu, lam, cyl, checks)
