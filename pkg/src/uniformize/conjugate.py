"""Conjugate functions, period, harmonic conjugate and width.

The conjugate of a field is obtained by walking along each of its level
curves and accumulating the current that crosses the curve.  Every point
of a level curve carries a share of that current:

* an edge-interior crossing carries the current of the crossed edge;
* a vertex on the level carries the current it sends to strictly lower
  neighbors;
* on the minimum level (the inner boundary) a vertex carries the current
  it receives from strictly higher neighbors.

The conjugate at a point is the current carried by the points before it.
The shares add up to the flux through the curve, which is the same for
every curve by current conservation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LevelError, VerificationError
from .network import DirichletNeumannSpec, FiniteNetwork, ScalarField, solve_dirichlet_neumann, total_flux
from .plgeom import (LevelCurve, PLComplex, SlitQuadrilateral, level_clusters, level_curve,
                     level_tolerance)

SPREAD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LevelTrace:
    """One level curve with the conjugate value at each of its points.

    ``conj`` has one entry per point, plus a final entry for closed curves
    (the start point seen again from the far side of the slit).
    """

    value: float
    curve: LevelCurve
    conj: np.ndarray
    shares: np.ndarray


@dataclass(frozen=True, eq=False)
class ConjugateField:
    """Conjugate values on the vertices of the slit quadrilateral.

    ``base_kind`` is ``"of_g"`` or ``"of_h"``; ``total`` is the period or
    the width; ``traces`` keeps the full per-level data, including values
    at edge-interior points (the type I vertices of the construction).
    """

    values: np.ndarray
    base_kind: str
    total: float
    traces: tuple[LevelTrace, ...]


def point_shares(net: FiniteNetwork, u: ScalarField, curve: LevelCurve, tol: float,
                 minimum_level: bool) -> np.ndarray:
    """Current carried by each point of a level curve of u."""
    t = curve.value
    out = np.empty(len(curve.points))
    for i, p in enumerate(curve.points):
        if p.vertex is None:
            a, b = p.edge
            out[i] = net.c(a, b) * abs(u[a] - u[b])
        else:
            v = p.vertex
            nb = net.neighbors(v)
            if minimum_level:
                out[i] = math.fsum(net.c(v, y) * (u[y] - u[v]) for y in nb if u[y] > t + tol)
            else:
                out[i] = math.fsum(net.c(v, y) * (u[v] - u[y]) for y in nb if u[y] < t - tol)
    return out


def _rotate_closed(curve: LevelCurve, start_keys: set) -> LevelCurve:
    keys = curve.keys
    hits = [i for i, k in enumerate(keys) if k in start_keys]
    if len(hits) != 1:
        raise LevelError(f"level {curve.value!r} meets the slit {len(hits)} times")
    i = hits[0]
    pts = curve.points[i:] + curve.points[:i]
    cells = curve.seg_cells[i:] + curve.seg_cells[:i]
    return LevelCurve(curve.value, pts, True, cells, curve.component)


def conjugate_of_g(q: SlitQuadrilateral, g: ScalarField, tol: float | None = None) -> ConjugateField:
    """Integrate the flux of g along its level curves from the base copy of the slit.

    ``g`` is the field on the annulus.  Vertices of the top copy get the
    full flux, i.e. the period.
    """
    A = q.annulus
    net = A.net
    if tol is None:
        tol = level_tolerance(g)
    path = q.slit.path
    slit_keys = {("v", s) for s in path} | {("e",) + tuple(sorted(e)) for e in zip(path, path[1:])}
    lo = float(min(g[list(c)].min() for c in A.inner))
    hi = float(g[list(A.outer)].max())
    levels = level_clusters(g, tol, pinned=(lo, hi))
    nq = q.complex.n
    values = np.full(nq, np.nan)
    twin_of = dict(zip(q.base, q.top))
    traces = []
    for t, reach in levels:
        curves = level_curve(A, g, t, reach)
        if len(curves) != 1 or not curves[0].closed:
            raise LevelError(f"level {t!r} of g is not a single closed curve")
        c = _rotate_closed(curves[0], slit_keys)
        shares = point_shares(net, g, c, reach, minimum_level=abs(t - lo) <= tol)
        conj = np.concatenate([[0.0], np.cumsum(shares)])
        traces.append(LevelTrace(float(t), c, conj, shares))
        for p, val in zip(c.points, conj[:-1]):
            if p.vertex is not None:
                values[p.vertex] = val
        p0 = c.points[0]
        if p0.vertex is not None:
            values[twin_of[p0.vertex]] = conj[-1]
    missing = np.flatnonzero(np.isnan(values))
    if len(missing):
        raise LevelError(f"vertices {missing[:10].tolist()} lie on no traced level curve")
    total = float(traces[-1].conj[-1])
    return ConjugateField(values, "of_g", total, tuple(traces))


def period(q: SlitQuadrilateral, g: ScalarField, gstar: ConjugateField, rtol: float = SPREAD_TOL) -> float:
    """Value of g* on the top copy of the slit.

    Checks that it is constant along the top copy and equal to the flux
    of g through the outer boundary.
    """
    tops = np.array([gstar.values[v] for v in q.top])
    ends = np.array([tr.conj[-1] for tr in gstar.traces])
    p = float(gstar.values[q.top[0]])
    spread = float(max(np.ptp(tops), np.ptp(ends)))
    if spread > rtol * abs(p):
        raise VerificationError(f"g* varies by {spread:.3e} along the top copy", spread)
    flux = total_flux(q.annulus.net, g, q.annulus.outer)
    if abs(flux - p) > rtol * abs(p):
        raise VerificationError(f"period {p!r} differs from the outer flux {flux!r}", abs(flux - p))
    return p


def top_spread(q: SlitQuadrilateral, gstar: ConjugateField) -> float:
    """Largest difference among g* values at the far end of every g-level."""
    ends = np.array([tr.conj[-1] for tr in gstar.traces] + [gstar.values[v] for v in q.top])
    return float(np.ptp(ends))


def harmonic_conjugate(q: SlitQuadrilateral, p: float) -> ScalarField:
    """h = 0 on the base copy, p on the top copy, no flux through the other sides."""
    if not p > 0:
        raise ValueError("period must be positive")
    corners = set(q.corners)
    neumann = tuple(v for v in q.qe1 + q.qe2 if v not in corners)
    spec = DirichletNeumannSpec(((q.base, 0.0), (q.top, float(p))), (neumann,))
    return solve_dirichlet_neumann(q.complex.net, spec)


def _orient_from(curve: LevelCurve, start_side: set, end_side: set) -> LevelCurve:
    k0, k1 = curve.points[0].key, curve.points[-1].key
    if k0 in start_side and k1 in end_side:
        return curve
    if k1 in start_side and k0 in end_side:
        return curve.reversed()
    raise LevelError(f"level {curve.value!r} does not join the expected boundary arcs")


def arc_keys(cx: PLComplex, arc) -> set:
    """Keys of all level points that can lie on a boundary arc."""
    keys = {("v", v) for v in arc}
    keys |= {("e",) + tuple(sorted(e)) for e in zip(arc, arc[1:])}
    return keys


def conjugate_of_h(q: SlitQuadrilateral, h: ScalarField, tol: float | None = None) -> ConjugateField:
    """Integrate the flux of h along its level curves, starting on the outer arc."""
    Q = q.complex
    net = Q.net
    if tol is None:
        tol = level_tolerance(h)
    e1, e2 = arc_keys(Q, q.qe1), arc_keys(Q, q.qe2)
    lo, hi = 0.0, float(h[q.top[0]])
    levels = level_clusters(h, tol, pinned=(lo, hi))
    values = np.full(Q.n, np.nan)
    traces = []
    for s, reach in levels:
        curves = level_curve(Q, h, s, reach)
        if len(curves) != 1 or curves[0].closed:
            raise LevelError(f"level {s!r} of h is not a single arc")
        c = _orient_from(curves[0], e1, e2)
        shares = point_shares(net, h, c, reach, minimum_level=abs(s - lo) <= tol)
        conj = np.concatenate([[0.0], np.cumsum(shares)[:-1]])
        # the end point on the inner arc receives the whole current
        conj[-1] = math.fsum(shares)
        traces.append(LevelTrace(float(s), c, conj, shares))
        for p, val in zip(c.points, conj):
            if p.vertex is not None:
                values[p.vertex] = val
    missing = np.flatnonzero(np.isnan(values))
    if len(missing):
        raise LevelError(f"vertices {missing[:10].tolist()} lie on no traced h-level")
    total = float(np.median([tr.conj[-1] for tr in traces]))
    return ConjugateField(values, "of_h", total, tuple(traces))


def width(q: SlitQuadrilateral, hstar: ConjugateField, rtol: float = SPREAD_TOL) -> float:
    """Value of h* on the inner arc; raises when it is not constant there."""
    vals = np.array([hstar.values[v] for v in q.qe2] + [tr.conj[-1] for tr in hstar.traces])
    w = float(np.median(vals))
    spread = float(np.ptp(vals))
    if spread > rtol * abs(w):
        raise VerificationError(f"h* varies by {spread:.3e} along the inner arc", spread)
    return w


@dataclass
class TopologyReport:
    levels_checked: int
    conj_levels_checked: int
    violations: list[str]
    flat_boundary_steps: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def _zero_sets(seq: np.ndarray, c: np.ndarray, tol: float) -> np.ndarray:
    """Number of connected zero sets of the piecewise-linear map i -> seq[i] - c.

    ``seq`` has shape (N,), ``c`` shape (M,); returns shape (M,).
    """
    d = seq[None, :] - c[:, None]
    z = np.abs(d) <= tol
    sgn = np.where(z, 0, np.sign(d))
    # strict crossings inside a segment
    cross = (sgn[:, :-1] * sgn[:, 1:] < 0).sum(axis=1)
    # runs of zero points
    starts = z[:, 0].astype(int) + (z[:, 1:] & ~z[:, :-1]).sum(axis=1)
    return cross + starts


def verify_level_topology(q: SlitQuadrilateral, field: ScalarField, conj: ConjugateField,
                          max_conj_levels: int = 400) -> TopologyReport:
    """Check the level structure of a conjugate against its base field.

    Along every base-field level the conjugate must start at 0 on the
    start arc, end at the total on the end arc, and increase strictly in
    between.  Every conjugate level (one per distinct vertex value, up to
    ``max_conj_levels``) must then meet every base level exactly once,
    counted as connected zero sets of the conjugate minus its level along
    the curve.

    On the two boundary levels a point with no neighbour on the far side
    (a mesh corner, or a bend of the slit) carries no flux, so there the
    conjugate may stall; such zero steps are counted, not flagged.
    """
    violations = []
    total = conj.total
    tol = SPREAD_TOL * max(abs(total), 1e-300)
    last = len(conj.traces) - 1
    flat = 0
    for n, tr in enumerate(conj.traces):
        if abs(tr.conj[0]) > tol:
            violations.append(f"level {tr.value!r}: conjugate {tr.conj[0]!r} at the start arc")
        if abs(tr.conj[-1] - total) > tol:
            violations.append(f"level {tr.value!r}: conjugate {tr.conj[-1]!r} at the end arc, expected {total!r}")
        steps = np.diff(tr.conj)
        floor = -tol if n in (0, last) else 0.0
        if n in (0, last):
            flat += int(np.count_nonzero(np.abs(steps) <= tol))
        if np.any(steps <= floor):
            i = int(np.argmax(steps <= floor))
            violations.append(f"level {tr.value!r}: conjugate not increasing at point {i}")
    # the stored vertex values are what a caller may corrupt; rebuild the
    # per-level sequences from them and compare with the traced currents
    seqs = []
    for n, tr in enumerate(conj.traces):
        seq = tr.conj.copy()
        for i, p in enumerate(tr.curve.points):
            if p.vertex is not None:
                seq[i] = conj.values[p.vertex]
                if abs(seq[i] - tr.conj[i]) > tol:
                    violations.append(f"vertex {p.vertex}: stored conjugate {seq[i]!r} disagrees "
                                      f"with the flux along level {tr.value!r}")
        floor = -tol if n in (0, last) else 0.0
        if np.any(np.diff(seq) <= floor):
            violations.append(f"level {tr.value!r}: stored conjugate not increasing")
        seqs.append(seq)
    cvals = np.unique(conj.values)
    cvals = cvals[(cvals > tol) & (cvals < total - tol)]
    if len(cvals) > max_conj_levels:
        cvals = cvals[np.linspace(0, len(cvals) - 1, max_conj_levels).astype(int)]
    for tr, seq in zip(conj.traces, seqs):
        counts = _zero_sets(seq, cvals, tol)
        bad = np.flatnonzero(counts != 1)
        for b in bad[:5]:
            violations.append(f"conjugate level {cvals[b]!r} meets level {tr.value!r} {counts[b]} times")
    return TopologyReport(len(conj.traces), len(cvals), violations, flat)
