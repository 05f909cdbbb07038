"""The rectangular net cut out by the g-levels and the h-levels.

Lattice point (i, j) is the intersection of the i-th g-level with the
j-th h-level.  Intersections are found cell by cell from the straight
level segments, then merged by location (vertex, edge, or cell
interior), so a point on a shared edge is counted once.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .conjugate import arc_keys
from .errors import LevelError
from .network import ScalarField
from .plgeom import LevelCurve, SlitQuadrilateral, level_clusters, level_curve, level_tolerance

SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class RectNet:
    """Families, lattice and cells of the net.

    ``g_levels[i]`` runs from the base copy to the top copy; ``h_levels[j]``
    from the inner arc to the outer arc.  ``counts[i, j]`` is the number of
    distinct intersection points found; ``lattice[i, j]`` is the point when
    the count is one (NaN otherwise).  ``cell_area[i, j]`` is the source
    area of the cell between levels i, i+1 and j, j+1.
    """

    q: SlitQuadrilateral
    g: ScalarField
    h: ScalarField
    g_values: np.ndarray
    h_values: np.ndarray
    g_levels: tuple[LevelCurve, ...]
    h_levels: tuple[LevelCurve, ...]
    counts: np.ndarray
    lattice: np.ndarray
    lattice_keys: dict
    cell_area: np.ndarray
    degenerate: list = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.g_values) - 1, len(self.h_values) - 1)

    def cells(self):
        """Corner index lists {(i,j),(i+1,j),(i+1,j+1),(i,j+1)} per cell."""
        ni, nj = self.shape
        return [((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)) for i in range(ni) for j in range(nj)]

    def cell_corners_xy(self, i: int, j: int) -> np.ndarray:
        return self.lattice[[i, i + 1, i + 1, i], [j, j, j + 1, j + 1]]


def _orient(curve: LevelCurve, start: set, end: set) -> LevelCurve:
    k0, k1 = curve.points[0].key, curve.points[-1].key
    if k0 in start and k1 in end:
        return curve
    if k1 in start and k0 in end:
        return curve.reversed()
    raise LevelError(f"level {curve.value!r} does not join the expected arcs")


def family(q: SlitQuadrilateral, u: ScalarField, start_arc, end_arc, pinned):
    """All level arcs of u on the quadrilateral, one per distinct vertex value."""
    Q = q.complex
    tol = level_tolerance(u)
    levels = level_clusters(u, tol, pinned=pinned)
    s, e = arc_keys(Q, start_arc), arc_keys(Q, end_arc)
    curves = []
    for t, reach in levels:
        cs = level_curve(Q, u, t, reach)
        if len(cs) != 1 or cs[0].closed:
            raise LevelError(f"level {t!r} is not a single arc across the quadrilateral")
        curves.append(_orient(cs[0], s, e))
    return np.array([t for t, _ in levels]), tuple(curves)


def _segments_by_cell(Q, curves):
    """Map cell -> list of (family index, p0, p1, key0, key1)."""
    out = defaultdict(list)
    for idx, c in enumerate(curves):
        pts = c.points
        for k in range(len(pts) - 1):
            a, b = pts[k], pts[k + 1]
            cells = {c.seg_cells[k]}
            if a.vertex is not None and b.vertex is not None:
                for ci in Q.edge_cells.get(tuple(sorted((a.vertex, b.vertex))), ()):
                    cells.add(ci)
            for ci in cells:
                out[ci].append((idx, tuple(map(float, a.xy)), tuple(map(float, b.xy)), a.key, b.key))
    return out


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _intersect(p0, p1, k0, k1, q0, q1, m0, m1, ci, scale):
    """Intersection of two straight level segments in one cell.

    Returns a list of (key, xy); a list of two or more entries signals an
    overlap (degenerate).
    """
    eps = SNAP * scale * scale
    d1, d2 = _cross(p0, p1, q0), _cross(p0, p1, q1)
    d3, d4 = _cross(q0, q1, p0), _cross(q0, q1, p1)
    rx, ry = p1[0] - p0[0], p1[1] - p0[1]
    if abs(d1) <= eps and abs(d2) <= eps:
        # collinear: overlapping pieces would mean both fields constant on them
        L2 = rx * rx + ry * ry or 1.0
        s0, s1 = sorted((((q0[0] - p0[0]) * rx + (q0[1] - p0[1]) * ry) / L2,
                         ((q1[0] - p0[0]) * rx + (q1[1] - p0[1]) * ry) / L2))
        if s1 < -SNAP or s0 > 1 + SNAP:
            return []
        if min(s1, 1.0) - max(s0, 0.0) > SNAP:
            return [(("overlap", ci), np.array(p0)), (("overlap2", ci), np.array(p1))]
    if (d1 > eps and d2 > eps) or (d1 < -eps and d2 < -eps):
        return []
    if (d3 > eps and d4 > eps) or (d3 < -eps and d4 < -eps):
        return []
    den = d3 - d4
    if den == 0:
        return []
    lam = d3 / den
    x, y = p0[0] + lam * rx, p0[1] + lam * ry
    tol = SNAP * scale
    near = [(key, pt) for key, pt in ((k0, p0), (k1, p1), (m0, q0), (m1, q1))
            if math.hypot(x - pt[0], y - pt[1]) <= tol]
    if near:
        # a vertex key beats an edge key for the same spot
        key, pt = min(near, key=lambda kp: kp[0][0] != "v")
        return [(key, np.array(pt))]
    return [(("c", ci), np.array((x, y)))]


def _shared_points(gl, hl, scale):
    """Intersections sitting on a level point common to both families."""
    index = defaultdict(list)
    for j, c in enumerate(hl):
        for p in c.points:
            index[p.key].append((j, np.asarray(p.xy)))
    out = []
    for i, c in enumerate(gl):
        for p in c.points:
            xy = np.asarray(p.xy)
            for j, other in index.get(p.key, ()):
                if np.hypot(*(xy - other)) <= SNAP * scale:
                    out.append((i, j, p.key, xy))
    return out


def _split(poly, c: int, t: float):
    """Cut a convex polygon of (x, y, g, h) tuples by row[c] = t.

    Returns the parts with row[c] <= t and row[c] >= t.
    """
    f = [p[c] - t for p in poly]
    if max(f) <= 0:
        return poly, []
    if min(f) >= 0:
        return [], poly
    lo, hi = [], []
    a, fa = poly[-1], f[-1]
    for b, fb in zip(poly, f):
        if (fa < 0 < fb) or (fb < 0 < fa):
            lam = fa / (fa - fb)
            x = (a[0] + lam * (b[0] - a[0]), a[1] + lam * (b[1] - a[1]),
                 a[2] + lam * (b[2] - a[2]), a[3] + lam * (b[3] - a[3]))
            lo.append(x)
            hi.append(x)
        if fb <= 0:
            lo.append(b)
        if fb >= 0:
            hi.append(b)
        a, fa = b, fb
    return lo, hi


def _poly_area(poly) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    s = 0.0
    for k in range(n):
        (x0, y0), (x1, y1) = poly[k][:2], poly[(k + 1) % n][:2]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _cell_areas(Q, g, h, gv, hv):
    """Source area of every net cell.

    Each cell of Q is split into a fan of triangles from its first corner
    (refined cells are convex), and each triangle is swept by the g-levels
    and then by the h-levels inside every strip.
    """
    area = np.zeros((len(gv) - 1, len(hv) - 1))
    xy = Q.coords
    rows_all = [(float(xy[v, 0]), float(xy[v, 1]), float(g[v]), float(h[v])) for v in range(Q.n)]
    ni, nj = len(gv) - 1, len(hv) - 1
    for corners in Q.corners:
        for m in range(1, len(corners) - 1):
            rest = [rows_all[corners[0]], rows_all[corners[m]], rows_all[corners[m + 1]]]
            G = [r[2] for r in rest]
            i = min(max(int(np.searchsorted(gv, min(G), side="right")) - 1, 0), ni - 1)
            while rest and i < ni:
                strip, rest = _split(rest, 2, gv[i + 1]) if i < ni - 1 else (rest, [])
                if len(strip) >= 3:
                    H = [r[3] for r in strip]
                    j = min(max(int(np.searchsorted(hv, min(H), side="right")) - 1, 0), nj - 1)
                    while strip and j < nj:
                        piece, strip = _split(strip, 3, hv[j + 1]) if j < nj - 1 else (strip, [])
                        if len(piece) >= 3:
                            area[i, j] += _poly_area(piece)
                        j += 1
                i += 1
    return area


def build_rectnet(q: SlitQuadrilateral, g: ScalarField, h: ScalarField) -> RectNet:
    """Intersect the two level families on the quadrilateral.

    ``g`` and ``h`` are fields on the quadrilateral's vertices.
    """
    Q = q.complex
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    glo = float(g[list(q.qe2)].min())
    ghi = float(g[list(q.qe1)].max())
    gv, gl = family(q, g, q.base, q.top, (glo, ghi))
    hv, hl = family(q, h, q.qe2, q.qe1, (0.0, float(h[q.top[0]])))
    scale = float(np.ptp(Q.coords, axis=0).max())
    gseg = _segments_by_cell(Q, gl)
    hseg = _segments_by_cell(Q, hl)
    found: dict = defaultdict(dict)
    degenerate = []
    for i, j, key, xy in _shared_points(gl, hl, scale):
        found[(i, j)].setdefault(key, xy)
    for ci in sorted(set(gseg) & set(hseg)):
        for i, p0, p1, k0, k1 in gseg[ci]:
            for j, q0, q1, m0, m1 in hseg[ci]:
                hits = _intersect(p0, p1, k0, k1, q0, q1, m0, m1, ci, scale)
                if len(hits) > 1:
                    degenerate.append((i, j, ci))
                for key, xy in hits:
                    found[(i, j)].setdefault(key, xy)
    nL, nM = len(gv), len(hv)
    counts = np.zeros((nL, nM), dtype=int)
    lattice = np.full((nL, nM, 2), np.nan)
    keys = {}
    for (i, j), pts in found.items():
        counts[i, j] = len(pts)
        if len(pts) == 1:
            (key, xy), = pts.items()
            lattice[i, j] = xy
            keys[(i, j)] = key
    area = _cell_areas(Q, g, h, gv, hv)
    return RectNet(q, g, h, gv, hv, gl, hl, counts, lattice, keys, area, degenerate)


@dataclass
class OrthogonalityReport:
    counts: np.ndarray
    violations: list[str]
    area_sum: float
    area_q: float

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def pairs(self) -> int:
        return int(self.counts.size)


def verify_orthogonal_filling(net: RectNet, area_rtol: float = 1e-9) -> OrthogonalityReport:
    """Every (g-level, h-level) pair must meet in exactly one point."""
    v = []
    bad = np.argwhere(net.counts != 1)
    for i, j in bad[:50]:
        v.append(f"g-level {net.g_values[i]!r} and h-level {net.h_values[j]!r} meet "
                 f"{net.counts[i, j]} times")
    if len(bad) > 50:
        v.append(f"... {len(bad) - 50} more pairs with count != 1")
    for i, j, ci in net.degenerate[:10]:
        v.append(f"levels {i}, {j} overlap inside cell {ci}")
    # each family: single simple arcs joining the prescribed sides
    for name, fam in (("g", net.g_levels), ("h", net.h_levels)):
        for c in fam:
            keys = c.keys
            if len(set(keys)) != len(keys):
                v.append(f"{name}-level {c.value!r} is not simple")
    small = np.argwhere(net.cell_area <= 0)
    for i, j in small[:10]:
        v.append(f"net cell ({i}, {j}) has no area")
    total = math.fsum(net.cell_area.ravel())
    aq = net.q.complex.area()
    if abs(total - aq) > area_rtol * aq:
        v.append(f"net cells cover area {total!r}, quadrilateral has {aq!r}")
    return OrthogonalityReport(net.counts, v, total, aq)
