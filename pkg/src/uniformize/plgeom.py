"""Piecewise-linear geometry on polygonal cell complexes.

Cells are vertex cycles in counterclockwise order.  A cell may carry
collinear extra vertices (after edge subdivision); its *corners* are the
vertices where the boundary actually turns.  Fields extend affinely over
three-corner cells and bilinearly over four-corner cells.

Level sets are traced cell by cell: entry and exit points on the cell
boundary are found by inverting the linear restriction to each edge, and
joined by straight segments.
"""

from __future__ import annotations

import hashlib
import math
import weakref
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import LevelError, MeshError, TieError
from .network import FiniteNetwork, ScalarField, edge_key

LEVEL_TOL = 1e-9

ORIGINAL, TYPE_I, TYPE_II = 0, 1, 2


def signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True, eq=False)
class PLComplex:
    """Planar polygonal complex over a finite network.

    ``outer`` is oriented counterclockwise and each ``inner`` cycle
    clockwise, so the domain always lies to the left of its boundary.
    ``provenance`` tags every vertex as original, type I, or type II.
    """

    net: FiniteNetwork
    cells: tuple[tuple[int, ...], ...]
    outer: tuple[int, ...]
    inner: tuple[tuple[int, ...], ...] = ()
    provenance: np.ndarray | None = None

    def __post_init__(self):
        if self.provenance is None:
            object.__setattr__(self, "provenance", np.zeros(self.net.n, dtype=np.int8))

    @property
    def coords(self) -> np.ndarray:
        return self.net.coords

    @property
    def n(self) -> int:
        return self.net.n

    @classmethod
    def from_cells(cls, coords, cells, conductance=1.0, provenance=None,
                   boundary_names=True) -> "PLComplex":
        """Build a complex from cells; edges and boundary cycles are derived.

        ``conductance`` is a scalar or a mapping from vertex pairs to values.
        """
        coords = np.asarray(coords, dtype=float)
        oriented = []
        for cyc in cells:
            cyc = tuple(int(v) for v in cyc)
            if len(set(cyc)) != len(cyc) or len(cyc) < 3:
                raise MeshError(f"cell {cyc} is not a simple polygon")
            if signed_area(coords[list(cyc)]) < 0:
                cyc = cyc[::-1]
            oriented.append(cyc)
        edges = sorted({edge_key(c[i], c[(i + 1) % len(c)]) for c in oriented for i in range(len(c))})
        if isinstance(conductance, (int, float)):
            cond = {e: float(conductance) for e in edges}
        else:
            cond = {}
            for e in edges:
                if e in conductance:
                    cond[e] = float(conductance[e])
                elif e[::-1] in conductance:
                    cond[e] = float(conductance[e[::-1]])
                else:
                    raise MeshError(f"no conductance given for edge {e}")
        outer, inner = boundary_cycles(coords, oriented)
        bnd = {"E1": outer}
        for i, cyc in enumerate(inner):
            bnd[f"E2_{i + 1}"] = cyc
        net = FiniteNetwork.from_dict(coords, cond, bnd)
        prov = None if provenance is None else np.asarray(provenance, dtype=np.int8)
        return cls(net, tuple(oriented), outer, tuple(inner), prov)

    @cached_property
    def edge_cells(self) -> dict[tuple[int, int], list[int]]:
        out: dict[tuple[int, int], list[int]] = defaultdict(list)
        for ci, cyc in enumerate(self.cells):
            r = len(cyc)
            for i in range(r):
                out[edge_key(cyc[i], cyc[(i + 1) % r])].append(ci)
        return dict(out)

    @cached_property
    def vertex_cells(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for ci, cyc in enumerate(self.cells):
            for v in cyc:
                out[v].append(ci)
        return out

    @cached_property
    def boundary_edges(self) -> set[tuple[int, int]]:
        return {e for e, cs in self.edge_cells.items() if len(cs) == 1}

    @cached_property
    def boundary_vertices(self) -> set[int]:
        return {v for cyc in (self.outer, *self.inner) for v in cyc}

    @cached_property
    def corners(self) -> tuple[tuple[int, ...], ...]:
        """Per cell, the vertices where the boundary turns (non-collinear ones)."""
        out = []
        xy = self.coords
        for cyc in self.cells:
            r = len(cyc)
            scale = max(np.ptp(xy[list(cyc)], axis=0).max(), 1e-300)
            keep = []
            for i in range(r):
                p, v, q = xy[cyc[i - 1]], xy[cyc[i]], xy[cyc[(i + 1) % r]]
                if abs(_cross(p, v, q)) > 1e-12 * scale * scale:
                    keep.append(cyc[i])
            out.append(tuple(keep))
        return tuple(out)

    @cached_property
    def _padded_cells(self) -> np.ndarray:
        r = max(len(c) for c in self.cells)
        return np.array([c + (c[0],) * (r - len(c)) for c in self.cells], dtype=np.int64)

    def cell_ranges(self, u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
        """Per-cell minimum and maximum of a vertex field."""
        vals = np.asarray(u)[self._padded_cells]
        return vals.min(axis=1), vals.max(axis=1)

    def euler_characteristic(self) -> int:
        return self.n - len(self.net.edges) + len(self.cells)

    def area(self) -> float:
        return math.fsum(signed_area(self.coords[list(c)]) for c in self.cells)

    def cell_area(self, ci: int) -> float:
        return signed_area(self.coords[list(self.cells[ci])])


def boundary_cycles(coords: np.ndarray, cells) -> tuple[tuple[int, ...], list[tuple[int, ...]]]:
    """Chain boundary half-edges of CCW cells into cycles.

    Returns the outer cycle (largest positive signed area) and the inner
    cycles, each oriented with the domain on its left.
    """
    half = set()
    for c in cells:
        for i in range(len(c)):
            half.add((c[i], c[(i + 1) % len(c)]))
    bnext: dict[int, int] = {}
    for a, b in sorted(half):
        if (b, a) not in half:
            if a in bnext:
                raise MeshError(f"boundary is not a manifold at vertex {a}")
            bnext[a] = b
    cycles = []
    todo = set(bnext)
    while todo:
        start = min(todo)
        cyc = [start]
        todo.discard(start)
        v = bnext[start]
        while v != start:
            if v not in todo:
                raise MeshError("boundary half-edges do not close into cycles")
            cyc.append(v)
            todo.discard(v)
            v = bnext[v]
        cycles.append(tuple(cyc))
    if not cycles:
        raise MeshError("complex has no boundary")
    areas = [signed_area(coords[list(c)]) for c in cycles]
    oi = int(np.argmax(areas))
    if areas[oi] <= 0:
        raise MeshError("no counterclockwise outer boundary")
    inner = [c for i, c in enumerate(cycles) if i != oi]
    for c in inner:
        if signed_area(coords[list(c)]) >= 0:
            raise MeshError("inner boundary is not clockwise; is the domain connected?")
    inner.sort(key=lambda c: min(c))
    return cycles[oi], inner


# ----------------------------------------------------------------------------
# field extension

def _bilinear_inverse(P: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    """Solve P(s,t) = p for the bilinear quad with corners P[0..3]."""
    s = t = 0.5
    for _ in range(50):
        q = ((1 - s) * (1 - t) * P[0] + s * (1 - t) * P[1] + s * t * P[2] + (1 - s) * t * P[3])
        ds = (1 - t) * (P[1] - P[0]) + t * (P[2] - P[3])
        dt = (1 - s) * (P[3] - P[0]) + s * (P[2] - P[1])
        J = np.column_stack([ds, dt])
        step = np.linalg.solve(J, p - q)
        s, t = s + step[0], t + step[1]
        if abs(step).max() < 1e-15:
            break
    return float(s), float(t)


def _bary(P: np.ndarray, p: np.ndarray) -> np.ndarray:
    T = np.column_stack([P[1] - P[0], P[2] - P[0]])
    l1, l2 = np.linalg.solve(T, p - P[0])
    return np.array([1 - l1 - l2, l1, l2])


def _point_in_cell(xy: np.ndarray, p: np.ndarray, tol: float) -> bool:
    r = len(xy)
    for i in range(r):
        if _cross(xy[i], xy[(i + 1) % r], p) < -tol:
            return False
    return True


def cell_value(cx: PLComplex, u: ScalarField, ci: int, p) -> float:
    """Extension of u over cell ci evaluated at p."""
    corners = cx.corners[ci]
    P = cx.coords[list(corners)]
    vals = u[list(corners)]
    p = np.asarray(p, dtype=float)
    if len(corners) == 3:
        return float(_bary(P, p) @ vals)
    if len(corners) == 4:
        s, t = _bilinear_inverse(P, p)
        return float((1 - s) * (1 - t) * vals[0] + s * (1 - t) * vals[1] + s * t * vals[2] + (1 - s) * t * vals[3])
    raise MeshError(f"cell {ci} has {len(corners)} corners; only triangles and quadrilaterals extend")


def locate(cx: PLComplex, p) -> int:
    p = np.asarray(p, dtype=float)
    xy = cx.coords
    diam = float(np.ptp(xy, axis=0).max())
    tol = 1e-12 * diam * diam
    for ci, cyc in enumerate(cx.cells):
        P = xy[list(cyc)]
        if np.any(p < P.min(axis=0) - 1e-12 * diam) or np.any(p > P.max(axis=0) + 1e-12 * diam):
            continue
        if _point_in_cell(P, p, tol):
            return ci
    raise ValueError(f"point {tuple(p)} lies outside the domain")


def evaluate(cx: PLComplex, u: ScalarField, p) -> float:
    """Affine (triangle) or bilinear (quadrilateral) value of u at point p."""
    return cell_value(cx, u, locate(cx, p), p)


# ----------------------------------------------------------------------------
# level curves

@dataclass(frozen=True)
class LevelPoint:
    """A point of a level curve.

    ``kind`` is ``"vertex"`` (original vertex), ``"typeI"``/``"typeII"``
    (inserted vertex) or ``"edge"`` (interior point of edge ``edge`` at
    parameter ``lam`` measured from ``edge[0]``).
    """

    xy: tuple[float, float]
    kind: str
    vertex: int | None = None
    edge: tuple[int, int] | None = None
    lam: float = 0.0

    @property
    def key(self):
        return ("v", self.vertex) if self.vertex is not None else ("e",) + self.edge


@dataclass(frozen=True, eq=False)
class LevelCurve:
    """Oriented polyline of constant field value.

    For closed curves the first point is not repeated at the end.
    ``seg_cells[i]`` is a cell containing the segment from point i to i+1.
    ``component`` groups circles that belong to one bouquet.
    """

    value: float
    points: tuple[LevelPoint, ...]
    closed: bool
    seg_cells: tuple[int, ...] = ()
    component: int = 0

    @cached_property
    def xy(self) -> np.ndarray:
        return np.array([p.xy for p in self.points], dtype=float)

    @property
    def keys(self):
        return [p.key for p in self.points]

    def vertices(self) -> list[int]:
        return [p.vertex for p in self.points if p.vertex is not None]

    def polyline(self) -> np.ndarray:
        xy = self.xy
        return np.vstack([xy, xy[:1]]) if self.closed else xy

    def length(self) -> float:
        d = np.diff(self.polyline(), axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def reversed(self) -> "LevelCurve":
        pts = self.points[::-1]
        cells = self.seg_cells[::-1]
        if self.closed and pts:
            # keep the same start point; the closing segment moves to the end
            pts = (pts[-1],) + pts[:-1]
            cells = cells[1:] + cells[:1] if cells else cells
        return LevelCurve(self.value, pts, self.closed, cells, self.component)


def winding_number(poly: np.ndarray, p) -> int:
    """Winding number of the closed polygon ``poly`` around point p."""
    x = poly[:, 0] - p[0]
    y = poly[:, 1] - p[1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    up = (y <= 0) & (y2 > 0)
    down = (y > 0) & (y2 <= 0)
    cr = x * y2 - x2 * y
    return int(np.sum(up & (cr > 0)) - np.sum(down & (cr < 0)))


def level_tolerance(u: ScalarField) -> float:
    return LEVEL_TOL * max(float(np.ptp(u)), 1e-300)


def _kind_of(cx: PLComplex, v: int) -> str:
    return ("vertex", "typeI", "typeII")[int(cx.provenance[v])]


def _quad_saddle(vals: np.ndarray) -> float | None:
    den = vals[0] + vals[2] - vals[1] - vals[3]
    if den == 0:
        return None
    return (vals[0] * vals[2] - vals[1] * vals[3]) / den


def level_segments(cx: PLComplex, u: ScalarField, t: float, tol: float | None = None):
    """All straight pieces of the level set {u = t}.

    Returns ``(points, segments)`` where ``points`` maps a key to a
    LevelPoint and ``segments`` is a list of ``(key_a, key_b, cell)``.
    Raises TieError for flat cells (constant at t).
    """
    if tol is None:
        tol = level_tolerance(u)
    xy = cx.coords
    d = u - t
    s = np.where(np.abs(d) <= tol, 0, np.sign(d)).astype(int)
    points: dict = {}
    segments: list = []
    on_level_edges: dict[tuple[int, int], list[int]] = defaultdict(list)

    def vpoint(v):
        k = ("v", v)
        if k not in points:
            points[k] = LevelPoint((float(xy[v, 0]), float(xy[v, 1])), _kind_of(cx, v), vertex=v)
        return k

    def epoint(a, b):
        a, b = edge_key(a, b)
        k = ("e", a, b)
        if k not in points:
            lam = float(d[a] / (d[a] - d[b]))
            p = (1 - lam) * xy[a] + lam * xy[b]
            points[k] = LevelPoint((float(p[0]), float(p[1])), "edge", edge=(a, b), lam=lam)
        return k

    lo, hi = cx.cell_ranges(u)
    s_list = s.tolist()
    bnd = cx.boundary_vertices
    for ci in np.flatnonzero((lo <= t + tol) & (hi >= t - tol)).tolist():
        cyc = cx.cells[ci]
        sc = [s_list[v] for v in cyc]
        if not any(sc):
            r = len(cyc)
            ring = [edge_key(cyc[i], cyc[(i + 1) % r]) for i in range(r)]
            # a corner cell spanned by boundary vertices of one component is
            # constant there by the boundary data, not by a tie
            if not all(v in bnd for v in cyc):
                raise TieError(f"cell {ci} is flat at level {t!r}", ring)
            for e in ring:
                on_level_edges[e].append(ci)
            continue
        if min(sc) > 0 or max(sc) < 0:
            continue
        r = len(cyc)
        crossing = []  # (key, arc position) in cyclic order
        for i in range(r):
            a, b = cyc[i], cyc[(i + 1) % r]
            if sc[i] == 0:
                prev, nxt = sc[i - 1], sc[(i + 1) % r]
                if prev == 0 or nxt == 0:
                    if nxt == 0:
                        on_level_edges[edge_key(a, b)].append(ci)
                    # endpoint of an on-level run: passes through only if the
                    # run is flanked by opposite strict signs
                    if prev == 0 and nxt != 0:
                        j = i - 1
                        while sc[j % r] == 0:
                            j -= 1
                        if sc[j % r] == -nxt:
                            crossing.append(vpoint(a))
                elif prev == -nxt:
                    crossing.append(vpoint(a))
            elif sc[(i + 1) % r] == -sc[i]:
                crossing.append(epoint(a, b))
        # chords through the cell interior
        chords = []
        if len(crossing) == 2:
            chords.append((crossing[0], crossing[1]))
        elif len(crossing) == 4:
            corners = cx.corners[ci]
            vals = d[list(corners)]
            sad = _quad_saddle(vals) if len(corners) == 4 else None
            # sign of the boundary arc that starts at crossing[0]
            k0 = crossing[0]
            if k0[0] == "v":
                i0 = cyc.index(k0[1])
                arc_sign = sc[(i0 + 1) % r]
            else:
                ia = cyc.index(k0[1]) if cyc[(cyc.index(k0[1]) + 1) % r] == k0[2] else cyc.index(k0[2])
                arc_sign = sc[(ia + 1) % r]
            if sad is not None and np.sign(sad) == -arc_sign:
                chords += [(crossing[0], crossing[1]), (crossing[2], crossing[3])]
            else:
                chords += [(crossing[1], crossing[2]), (crossing[3], crossing[0])]
        elif len(crossing) not in (0,):
            raise LevelError(f"cell {ci} meets level {t!r} in {len(crossing)} points")
        for ka, kb in chords:
            if ka[0] == "v" and kb[0] == "v" and edge_key(ka[1], kb[1]) in on_level_edges:
                continue
            segments.append((ka, kb, ci))

    # edges lying on the level: keep when on the boundary or separating sides
    for (a, b), cells in sorted(on_level_edges.items()):
        cells = sorted(set(cells))
        if len(cx.edge_cells.get((a, b), ())) == 1:
            keep = True
        else:
            sides = set()
            for ci in cx.edge_cells[(a, b)]:
                sc = s[list(cx.cells[ci])]
                nz = sc[sc != 0]
                sides.add(int(nz[0]) if len(nz) else 0)
            keep = sides == {-1, 1}
        if keep:
            segments.append((vpoint(a), vpoint(b), cells[0]))
    return points, segments


def _ray_angle(points, k_from, k_to) -> float:
    p, q = points[k_from].xy, points[k_to].xy
    return math.atan2(q[1] - p[1], q[0] - p[0])


def _pair_at_branch(cx: PLComplex, u, t, tol, points, v, incident):
    """Pair the level segments meeting at a branch vertex v.

    Rays around v are sorted counterclockwise; each pair bounds one
    sector where the field lies below t, so every circle of the bouquet
    wraps one sublevel region.
    """
    key = ("v", v)
    rays = sorted(incident, key=lambda sid_other: _ray_angle(points, key, sid_other[1]))
    angles = [_ray_angle(points, key, o) for _, o in rays]
    nb = cx.net.neighbors(v)
    nb_ang = [math.atan2(*(cx.coords[w] - cx.coords[v])[::-1]) for w in nb]
    m = len(rays)
    below = []
    for i in range(m):
        a0, a1 = angles[i], angles[(i + 1) % m]
        span = (a1 - a0) % (2 * math.pi) or 2 * math.pi
        sign = 0
        for w, aw in zip(nb, nb_ang):
            off = (aw - a0) % (2 * math.pi)
            if 0 < off < span and abs(u[w] - t) > tol:
                sign = 1 if u[w] > t else -1
                break
        if sign == 0:
            # fall back on the field just inside the sector
            mid = a0 + span / 2
            p = np.array(cx.coords[v]) + 1e-7 * np.array([math.cos(mid), math.sin(mid)]) * float(
                np.ptp(cx.coords, axis=0).max())
            try:
                sign = 1 if evaluate(cx, u, p) > t else -1
            except ValueError:
                sign = 1
        below.append(sign < 0)
    # below-sector i lies between ray i and ray i+1
    pairs = []
    start = 0 if not below[0] else 1
    if all(below) or not any(below) or m % 2:
        raise LevelError(f"cannot resolve branch point {v} at level {t!r}")
    for i in range(start, start + m, 1):
        if below[i % m]:
            pairs.append((rays[i % m][0], rays[(i + 1) % m][0]))
    if len(pairs) * 2 != m:
        raise LevelError(f"unbalanced branch point {v} at level {t!r}")
    return pairs


# traced levels per complex; the conjugates and the net trace the same levels
_LEVEL_CACHE: "weakref.WeakKeyDictionary[PLComplex, dict]" = weakref.WeakKeyDictionary()


def level_curve(cx: PLComplex, u: ScalarField, t: float, tol: float | None = None) -> list[LevelCurve]:
    """Connected pieces of {u = t}, chained into polylines.

    Regular components come back as single closed curves or as paths
    ending on the boundary.  A component through a branch vertex (a
    bouquet) is split into its circles; those share a ``component`` id.
    Closed curves are oriented counterclockwise.
    """
    if tol is None:
        tol = level_tolerance(u)
    u = np.asarray(u, dtype=float)
    key = (hashlib.blake2b(u.tobytes(), digest_size=16).digest(), float(t), float(tol))
    memo = _LEVEL_CACHE.setdefault(cx, {})
    if key not in memo:
        memo[key] = tuple(_trace_level(cx, u, t, tol))
    return list(memo[key])


def _trace_level(cx: PLComplex, u: ScalarField, t: float, tol: float) -> list[LevelCurve]:
    lo, hi = float(u.min()), float(u.max())
    if t < lo - tol or t > hi + tol:
        raise ValueError(f"level {t!r} outside field range [{lo}, {hi}]")
    points, segs = level_segments(cx, u, t, tol)
    inc: dict = defaultdict(list)
    for sid, (a, b, _) in enumerate(segs):
        inc[a].append((sid, b))
        inc[b].append((sid, a))

    # connected components of the segment graph (for bouquet grouping)
    comp_of: dict = {}
    ncomp = 0
    for k in sorted(inc, key=repr):
        if k in comp_of:
            continue
        stack = [k]
        comp_of[k] = ncomp
        while stack:
            x = stack.pop()
            for _, y in inc[x]:
                if y not in comp_of:
                    comp_of[y] = ncomp
                    stack.append(y)
        ncomp += 1

    # pairing of segment ends: link[(node, sid)] = partner sid through node
    link: dict = {}
    for k, lst in inc.items():
        if len(lst) == 2:
            (s1, _), (s2, _) = lst
            link[(k, s1)] = s2
            link[(k, s2)] = s1
        elif len(lst) > 2:
            if k[0] != "v":
                raise LevelError(f"level {t!r} branches at an edge point")
            for s1, s2 in _pair_at_branch(cx, u, t, tol, points, k[1], lst):
                link[(k, s1)] = s2
                link[(k, s2)] = s1

    used = [False] * len(segs)
    curves = []

    def walk(node, sid):
        pts, cells = [node], []
        while True:
            used[sid] = True
            a, b, ci = segs[sid]
            other = b if a == node else a
            cells.append(ci)
            nxt = link.get((other, sid))
            if nxt is None or used[nxt]:
                return pts, cells, other
            pts.append(other)
            node, sid = other, nxt

    ends = sorted((k for k, lst in inc.items() if len(lst) == 1), key=repr)
    for k in ends:
        sid = inc[k][0][0]
        if used[sid]:
            continue
        pts, cells, last = walk(k, sid)
        pts.append(last)
        curves.append(LevelCurve(t, tuple(points[p] for p in pts), False, tuple(cells), comp_of[k]))
    for sid in range(len(segs)):
        if used[sid]:
            continue
        a = segs[sid][0]
        pts, cells, last = walk(a, sid)
        if last != a:
            raise LevelError(f"level {t!r} does not close up")
        c = LevelCurve(t, tuple(points[p] for p in pts), True, tuple(cells), comp_of[a])
        if signed_area(c.xy) < 0:
            c = c.reversed()
        curves.append(c)
    # renumber components in order of first appearance
    remap: dict[int, int] = {}
    out = []
    for c in curves:
        cid = remap.setdefault(c.component, len(remap))
        out.append(LevelCurve(c.value, c.points, c.closed, c.seg_cells, cid))
    return out


# ----------------------------------------------------------------------------
# refinement

class Refined(NamedTuple):
    complex: PLComplex
    field: ScalarField


def _rebuild(cx: PLComplex, coords, cells, cond: dict, prov, outer, inner) -> PLComplex:
    bnd = {"E1": tuple(outer)}
    for i, cyc in enumerate(inner):
        bnd[f"E2_{i + 1}"] = tuple(cyc)
    net = FiniteNetwork.from_dict(np.asarray(coords), cond, bnd)
    return PLComplex(net, tuple(tuple(c) for c in cells), tuple(outer),
                     tuple(tuple(c) for c in inner), np.asarray(prov, dtype=np.int8))


def _subdivide_edges(cx: PLComplex, u: ScalarField, inserts: dict, kind: int):
    """Insert vertices along edges.

    ``inserts`` maps an edge key (a, b) to a list of (lam, value) pairs
    with 0 < lam < 1 measured from a.  Sub-edges get series conductances
    c (u(a) - u(b)) / (u(p) - u(q)), which keeps every current unchanged.
    Returns the new arrays plus a map edge -> chain of vertex ids.
    """
    coords = [tuple(p) for p in cx.coords]
    vals = list(u)
    prov = list(cx.provenance)
    cond = {tuple(map(int, e)): float(c) for e, c in zip(cx.net.edges, cx.net.conductance)}
    chains: dict[tuple[int, int], list[int]] = {}
    for (a, b) in sorted(inserts):
        pts = sorted(inserts[(a, b)])
        if not pts:
            continue
        c0 = cond.pop((a, b))
        chain = [a]
        for lam, val in pts:
            p = (1 - lam) * cx.coords[a] + lam * cx.coords[b]
            coords.append((float(p[0]), float(p[1])))
            vals.append(float(val))
            prov.append(kind)
            chain.append(len(vals) - 1)
        chain.append(b)
        du = vals[a] - vals[b]
        for p, q in zip(chain, chain[1:]):
            dpq = vals[p] - vals[q]
            if dpq == 0:
                raise TieError(f"split of edge {(a, b)} creates equal values", [(a, b)])
            cond[edge_key(p, q)] = c0 * du / dpq
        chains[(a, b)] = chain
    return coords, vals, prov, cond, chains


def _expand_cycle(cyc, chains):
    out = []
    r = len(cyc)
    for i in range(r):
        a, b = cyc[i], cyc[(i + 1) % r]
        out.append(a)
        k = edge_key(a, b)
        if k in chains:
            mid = chains[k][1:-1]
            out.extend(mid if k == (a, b) else mid[::-1])
    return out


def refine_type1(cx: PLComplex, u: ScalarField, curves) -> Refined:
    """Make a level curve part of the 1-skeleton.

    Every edge-interior point of the curve becomes a type I vertex, the
    split edge gets the current-preserving conductances, cells are cut
    along the curve, and the new chords get conductance zero.
    """
    if isinstance(curves, LevelCurve):
        curves = [curves]
    inserts: dict = defaultdict(list)
    for cv in curves:
        for p in cv.points:
            if p.kind == "edge":
                a, b = p.edge
                if not (0 < p.lam < 1):
                    raise LevelError(f"crossing on edge {p.edge} is not interior")
                if any(abs(l - p.lam) < 1e-15 for l, _ in inserts[(a, b)]):
                    continue
                inserts[(a, b)].append((p.lam, cv.value))
    coords, vals, prov, cond, chains = _subdivide_edges(cx, u, inserts, TYPE_I)
    new_id = {}
    for (a, b), chain in chains.items():
        for v, (lam, _) in zip(chain[1:-1], sorted(inserts[(a, b)])):
            new_id[(a, b, lam)] = v

    def vid(p: LevelPoint) -> int:
        if p.vertex is not None:
            return p.vertex
        return new_id[(p.edge[0], p.edge[1], p.lam)]

    cells = [_expand_cycle(c, chains) for c in cx.cells]
    outer = _expand_cycle(cx.outer, chains)
    inner = [_expand_cycle(c, chains) for c in cx.inner]

    chords = []
    for cv in curves:
        ids = [vid(p) for p in cv.points]
        n_seg = len(ids) if cv.closed else len(ids) - 1
        for i in range(n_seg):
            chords.append((ids[i], ids[(i + 1) % len(ids)]))
    by_vertex: dict[int, list[int]] = defaultdict(list)
    for ci, c in enumerate(cells):
        for v in c:
            by_vertex[v].append(ci)
    for a, b in chords:
        if edge_key(a, b) in cond:
            continue  # already an edge: the curve runs along it
        common = [ci for ci in by_vertex[a] if b in cells[ci]]
        if len(common) != 1:
            raise LevelError(f"chord {(a, b)} does not lie in exactly one cell")
        ci = common[0]
        c = cells[ci]
        i, j = c.index(a), c.index(b)
        if i > j:
            i, j = j, i
        p1 = c[i:j + 1]
        p2 = c[j:] + c[:i + 1]
        cells[ci] = p1
        cells.append(p2)
        for v in p2:
            by_vertex[v] = [x for x in by_vertex[v] if x != ci] + [len(cells) - 1]
            if v in p1:
                by_vertex[v].append(ci)
        cond[edge_key(a, b)] = 0.0
    new = _rebuild(cx, coords, cells, cond, prov, outer, inner)
    return Refined(new, np.asarray(vals))


def refine_type2(cx: PLComplex, u: ScalarField, levels: Sequence[float]) -> Refined:
    """Insert midpoint-value vertices on edges spanning whole level gaps.

    For an edge whose value range contains consecutive levels l_i < l_{i+1},
    a vertex with value (l_i + l_{i+1})/2 is placed where the linear
    interpolant takes that value.
    """
    levels = np.asarray(levels, dtype=float)
    if np.any(np.diff(levels) < 0):
        raise ValueError("levels must be sorted ascending")
    tol = level_tolerance(u)
    inserts: dict = {}
    for a, b in cx.net.edges:
        a, b = int(a), int(b)
        lo, hi = sorted((u[a], u[b]))
        inside = levels[(levels >= lo - tol) & (levels <= hi + tol)]
        mids = [(x + y) / 2 for x, y in zip(inside, inside[1:]) if y - x > tol]
        if not mids:
            continue
        pts = [(float((m - u[a]) / (u[b] - u[a])), m) for m in mids]
        inserts[(a, b)] = pts
    coords, vals, prov, cond, chains = _subdivide_edges(cx, u, inserts, TYPE_II)
    cells = [_expand_cycle(c, chains) for c in cx.cells]
    outer = _expand_cycle(cx.outer, chains)
    inner = [_expand_cycle(c, chains) for c in cx.inner]
    new = _rebuild(cx, coords, cells, cond, prov, outer, inner)
    return Refined(new, np.asarray(vals))


# ----------------------------------------------------------------------------
# ties

def tied_edges(cx: PLComplex, u: ScalarField, tol: float | None = None) -> list[tuple[int, int]]:
    """Edges whose endpoints share a value, excluding edges inside one boundary component."""
    if tol is None:
        tol = level_tolerance(u)
    comp = {}
    for i, cyc in enumerate((cx.outer, *cx.inner)):
        for v in cyc:
            comp[v] = i
    out = []
    for a, b in cx.net.edges:
        a, b = int(a), int(b)
        if abs(u[a] - u[b]) <= tol and not (a in comp and comp.get(a) == comp.get(b)):
            out.append((a, b))
    return out


def flat_cells(cx: PLComplex, u: ScalarField, tol: float | None = None) -> list[int]:
    """Cells on which u is constant (excluding nothing: any such cell is degenerate)."""
    if tol is None:
        tol = level_tolerance(u)
    return [ci for ci, c in enumerate(cx.cells) if np.ptp(u[list(c)]) <= tol]


# ----------------------------------------------------------------------------
# slit and cut

@dataclass(frozen=True)
class Slit:
    """Vertex path from the outer boundary to an inner one."""

    path: tuple[int, ...]

    def validate(self, cx: PLComplex, u: ScalarField):
        p = self.path
        if len(p) < 2:
            raise MeshError("slit needs at least two vertices")
        if len(set(p)) != len(p):
            raise MeshError("slit is not simple")
        if p[0] not in set(cx.outer):
            raise MeshError("slit must start on the outer boundary")
        inner = {v for c in cx.inner for v in c}
        if p[-1] not in inner:
            raise MeshError("slit must end on an inner boundary")
        for a, b in zip(p, p[1:]):
            if edge_key(a, b) not in cx.net.edge_index:
                raise MeshError(f"slit step {(a, b)} is not an edge")
            if not u[a] > u[b]:
                raise TieError(f"field is not strictly decreasing along slit step {(a, b)}", [(a, b)])
        bnd = cx.boundary_vertices
        if any(v in bnd for v in p[1:-1]):
            raise MeshError("slit interior touches the boundary")


def find_slit(cx: PLComplex, u: ScalarField, start: int | None = None) -> Slit:
    """Greedy descent from the outer boundary to an inner one.

    Starts at the outer vertex of largest degree (smallest id on ties)
    unless ``start`` is given, and always steps to the lowest neighbor.
    """
    outer = cx.outer
    if start is None:
        start = min(outer, key=lambda v: (-len(cx.net.neighbors(v)), v))
    inner = {v for c in cx.inner for v in c}
    bnd = cx.boundary_vertices
    path = [start]
    seen = {start}
    while path[-1] not in inner:
        x = path[-1]
        cand = [y for y in cx.net.neighbors(x) if u[y] < u[x] and y not in seen
                and (y in inner or y not in bnd)]
        if not cand:
            raise TieError(f"no strictly descending step from vertex {x}",
                           [edge_key(x, y) for y in cx.net.neighbors(x) if u[y] == u[x]])
        y = min(cand, key=lambda w: (u[w], w))
        path.append(y)
        seen.add(y)
    slit = Slit(tuple(path))
    slit.validate(cx, u)
    return slit


@dataclass(frozen=True, eq=False)
class SlitQuadrilateral:
    """The annulus cut open along a slit.

    ``orig[v]`` is the annulus vertex a Q vertex comes from; top copies
    of slit vertices are numbered after the annulus vertices.  Arcs:
    ``base`` and ``top`` run from the outer to the inner boundary,
    ``qe1`` runs counterclockwise along the outer boundary from the base
    copy to the top copy, ``qe2`` counterclockwise around the hole from
    the base copy to the top copy.
    """

    complex: PLComplex
    annulus: PLComplex
    slit: Slit
    orig: np.ndarray
    base: tuple[int, ...]
    top: tuple[int, ...]
    qe1: tuple[int, ...]
    qe2: tuple[int, ...]

    @property
    def twin(self) -> dict[int, int]:
        return dict(zip(self.top, self.base))

    @property
    def corners(self) -> tuple[int, int, int, int]:
        return (self.base[0], self.base[-1], self.top[0], self.top[-1])

    def lift(self, u: ScalarField) -> ScalarField:
        """Pull an annulus field back to the quadrilateral."""
        return np.asarray(u)[self.orig]


def _ang(xy, a, b) -> float:
    d = xy[b] - xy[a]
    return math.atan2(d[1], d[0])


def cut_along_slit(cx: PLComplex, slit: Slit) -> SlitQuadrilateral:
    """Duplicate the slit and reattach the cells on its clockwise side.

    Walking counterclockwise around the hole, cells just after the slit
    keep the base copy and cells just before it get the top copy.
    """
    path = slit.path
    if len(set(path)) != len(path):
        raise MeshError("slit not simple")
    if len(cx.inner) != 1:
        raise MeshError("cutting needs an annulus (one inner boundary)")
    n = cx.n
    xy = cx.coords
    L = len(path)
    top_id = {s: n + i for i, s in enumerate(path)}
    outer, hole = cx.outer, cx.inner[0]
    onext = outer[(outer.index(path[0]) + 1) % len(outer)]
    # hole is clockwise; the counterclockwise successor is the predecessor
    hnext = hole[hole.index(path[-1]) - 1]

    sector = {}
    for i, s in enumerate(path):
        back = path[i - 1] if i > 0 else onext
        fwd = path[i + 1] if i + 1 < L else hnext
        a0 = _ang(xy, s, back)
        span = (_ang(xy, s, fwd) - a0) % (2 * math.pi)
        sector[s] = (a0, span)

    new_cells = []
    for cyc in cx.cells:
        r = len(cyc)
        out = list(cyc)
        for i, v in enumerate(cyc):
            if v in sector:
                q = cyc[(i + 1) % r]
                a0, span = sector[v]
                off = (_ang(xy, v, q) - a0) % (2 * math.pi)
                # the cell's sector at v starts at the ray towards q
                if not off < span:
                    out[i] = top_id[v]
        new_cells.append(tuple(out))

    coords = np.vstack([xy, xy[list(path)]])
    orig = np.concatenate([np.arange(n), np.asarray(path)])
    base_cond = {(int(a), int(b)): float(c) for (a, b), c in zip(cx.net.edges, cx.net.conductance)}
    cond = {}
    for cyc in new_cells:
        for i in range(len(cyc)):
            a, b = cyc[i], cyc[(i + 1) % len(cyc)]
            cond[edge_key(a, b)] = base_cond[edge_key(int(orig[a]), int(orig[b]))]
    base = tuple(path)
    top = tuple(top_id[s] for s in path)
    k0 = outer.index(path[0])
    qe1 = outer[k0:] + outer[:k0]
    qe1 = qe1 + (top[0],)
    ccw_hole = hole[::-1]
    k1 = ccw_hole.index(path[-1])
    qe2 = ccw_hole[k1:] + ccw_hole[:k1]
    qe2 = qe2 + (top[-1],)
    # the disk boundary, counterclockwise
    cycle = qe1 + top[1:] + tuple(reversed(qe2))[1:-1] + tuple(reversed(base))[:-1]
    prov = np.concatenate([cx.provenance, cx.provenance[list(path)]])
    net = FiniteNetwork.from_dict(coords, cond, {"E1": cycle})
    q = PLComplex(net, tuple(new_cells), cycle, (), prov)
    # sanity: boundary chaining must agree with the constructed cycle
    bo, bi = boundary_cycles(coords, new_cells)
    if bi or set(bo) != set(cycle) or len(bo) != len(cycle):
        raise MeshError("cut did not produce a disk; is the slit valid?")
    if q.euler_characteristic() != 1:
        raise MeshError("cut complex is not a disk")
    return SlitQuadrilateral(q, cx, slit, orig, base, top, qe1, qe2)


def level_clusters(u: ScalarField, tol: float | None = None, pinned=()) -> list[tuple[float, float]]:
    """Distinct values of u as (level, reach) pairs, merging values closer than tol.

    Merging chains, so a run of near-ties can span more than tol.  Such a
    cluster is represented by the middle of its range and traced with a
    reach covering every member, which keeps all of its vertices on one
    level.  A cluster holding a ``pinned`` value (boundary data) is
    represented by that value exactly.
    """
    if tol is None:
        tol = level_tolerance(u)
    vals = np.sort(np.asarray(u, dtype=float))
    out = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > tol:
            cluster = vals[start:i]
            lo, hi = float(cluster[0]), float(cluster[-1])
            rep = float(np.median(cluster)) if hi - lo <= tol else 0.5 * (lo + hi)
            for p in pinned:
                if lo - tol <= p <= hi + tol:
                    rep = float(p)
            reach = max(tol, rep - lo, hi - rep)
            out.append((rep, reach * (1 + 1e-12) if reach > tol else tol))
            start = i
    return out


def distinct_levels(u: ScalarField, tol: float | None = None, pinned=()) -> np.ndarray:
    """Sorted distinct values of u, one per cluster of :func:`level_clusters`."""
    return np.array([t for t, _ in level_clusters(u, tol, pinned)])
