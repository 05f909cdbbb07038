"""Singular levels, splitting along them, and gluing the pieces back.

A domain with m > 2 boundary components is cut along its maximal
singular level, the bouquet of circles that encloses every hole.  The
outside piece, lifted so that each tangency vertex gets one copy per
side touching it, is an ordinary annulus; the inside pieces are solved
again with the level value on their outer circle.  Pieces with more
than one hole are split again.  Every final piece goes through the
annulus pipeline, and the resulting flat annuli are scaled so that
glued boundary lengths agree.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .annulus import AnnulusResult, Check, uniformize_annulus
from .errors import LevelError, MeshError, TieError
from .metrics import point_value
from .network import DirichletSpec, FiniteNetwork, ScalarField, edge_key, solve_dirichlet
from .plgeom import (LevelCurve, PLComplex, Refined, level_curve, level_tolerance, refine_type1,
                     winding_number)

TWO_PI = 2.0 * math.pi


# ----------------------------------------------------------------------------
# vertex index

@dataclass(frozen=True)
class VertexIndex:
    """Sign changes of f(w) - f(v) around v, and the index 1 - Sgc/2."""

    vertex: int
    sgc: int

    @property
    def index(self) -> int:
        return 1 - self.sgc // 2

    @property
    def singular(self) -> bool:
        return self.index != 0


def vertex_index(net: FiniteNetwork, u: ScalarField, v: int, tol: float | None = None,
                 strict: bool = True) -> VertexIndex:
    """Index of v from the cyclic sequence of neighbour differences.

    Edges of zero conductance (chords added by refinement) are ignored.
    A neighbour with the same value raises TieError, unless ``strict`` is
    off, in which case it is skipped.
    """
    if tol is None:
        tol = level_tolerance(u)
    nb = [w for w in net.neighbors_ccw(v) if net.c(v, w) > 0]
    d = np.array([u[w] - u[v] for w in nb])
    ties = [edge_key(v, w) for w, x in zip(nb, d) if abs(x) <= tol]
    if ties and strict:
        raise TieError(f"vertex {v} has neighbours with the same value", ties)
    s = np.sign(d[np.abs(d) > tol])
    if len(s) == 0:
        return VertexIndex(v, 0)
    sgc = int(np.count_nonzero(s != np.roll(s, -1)))
    return VertexIndex(v, sgc)


def interior_vertices(cx: PLComplex) -> list[int]:
    bnd = cx.boundary_vertices
    return [v for v in range(cx.n) if v not in bnd]


def saddles(cx: PLComplex, u: ScalarField, tol: float | None = None) -> list[VertexIndex]:
    """Interior vertices of negative index."""
    out = []
    for v in interior_vertices(cx):
        ix = vertex_index(cx.net, u, v, tol)
        if ix.index < 0:
            out.append(ix)
    return out


# ----------------------------------------------------------------------------
# bouquets

@dataclass(frozen=True, eq=False)
class Bouquet:
    """Circles of one connected component of a level set.

    ``tangencies`` maps each vertex shared by several circles to the
    number m(v) of circles through it.
    """

    value: float
    circles: tuple[LevelCurve, ...]
    tangencies: dict

    @property
    def singular(self) -> bool:
        return bool(self.tangencies)

    def circle_vertex_sets(self) -> list[set[int]]:
        return [set(c.vertices()) for c in self.circles]


@dataclass(frozen=True, eq=False)
class LevelClass:
    value: float
    singular: bool
    singular_vertices: tuple[VertexIndex, ...]
    bouquets: tuple[Bouquet, ...]


def classify_level(cx: PLComplex, u: ScalarField, t: float, tol: float | None = None) -> LevelClass:
    """Regular or singular, with the level set split into bouquets."""
    if tol is None:
        tol = level_tolerance(u)
    curves = level_curve(cx, u, t, tol)
    groups: dict[int, list[LevelCurve]] = defaultdict(list)
    for c in curves:
        groups[c.component].append(c)
    bouquets = []
    for cid in sorted(groups):
        circ = groups[cid]
        count: dict[int, int] = defaultdict(int)
        for c in circ:
            for v in set(c.vertices()):
                count[v] += 1
        tang = {v: m for v, m in sorted(count.items()) if m > 1}
        bouquets.append(Bouquet(float(t), tuple(circ), tang))
    bnd = cx.boundary_vertices
    on_level = sorted({v for c in curves for v in c.vertices() if v not in bnd})
    sing = tuple(ix for ix in (vertex_index(cx.net, u, v, tol, strict=False) for v in on_level)
                 if ix.singular)
    return LevelClass(float(t), bool(sing), sing, tuple(bouquets))


def interior_point(poly: np.ndarray) -> np.ndarray:
    """A point strictly inside a simple polygon."""
    c = poly.mean(axis=0)
    if winding_number(poly, c) != 0:
        return c
    n = len(poly)
    for i in range(n):
        p = (poly[i - 1] + poly[i] + poly[(i + 1) % n]) / 3.0
        if winding_number(poly, p) != 0:
            return p
    raise MeshError("could not find a point inside a boundary cycle")


def hole_points(cx: PLComplex) -> list[np.ndarray]:
    return [interior_point(cx.coords[list(c)]) for c in cx.inner]


def enclosed_holes(b: Bouquet, holes) -> list[set[int]]:
    """For each circle, the holes it winds around."""
    out = []
    for c in b.circles:
        poly = c.polyline()
        out.append({i for i, p in enumerate(holes) if winding_number(poly, p) != 0})
    return out


@dataclass(frozen=True, eq=False)
class MaximalCurve:
    bouquet: Bouquet
    candidates: int
    scanned: int


def maximal_singular_curve(cx: PLComplex, u: ScalarField, tol: float | None = None) -> MaximalCurve:
    """The singular bouquet whose circles together enclose every hole.

    Scans every saddle value; uniqueness is checked, not assumed.
    """
    m = 1 + len(cx.inner)
    if m <= 2:
        raise LevelError(f"a domain with {m} boundary components has no maximal singular curve")
    if tol is None:
        tol = level_tolerance(u)
    sad = saddles(cx, u, tol)
    if not sad:
        hint = ""
        if any(len(c) == 4 for c in cx.corners):
            hint = "; a bilinear saddle can sit inside a quadrilateral, so triangulate the mesh"
        raise LevelError("no saddle vertex found" + hint)
    holes = hole_points(cx)
    values = sorted({float(u[s.vertex]) for s in sad})
    merged: list[float] = []
    for t in values:
        if not merged or t - merged[-1] > tol:
            merged.append(t)
    found = []
    for t in merged:
        lc = classify_level(cx, u, t, tol)
        sv = {s.vertex for s in lc.singular_vertices}
        for b in lc.bouquets:
            if not sv & {v for c in b.circles for v in c.vertices()}:
                continue
            enc = set().union(*enclosed_holes(b, holes))
            if len(enc) == len(holes):
                found.append(b)
    if len(found) != 1:
        raise LevelError(f"expected one maximal singular curve, found {len(found)}")
    return MaximalCurve(found[0], len(found), len(merged))


# ----------------------------------------------------------------------------
# splitting

@dataclass(eq=False)
class SubDomain:
    """One complementary component of a split, as its own complex.

    ``parent_ids[i]`` is the vertex of the refined parent complex that
    vertex i copies.  ``level_vertices`` lie on the cutting level.
    """

    complex: PLComplex
    field: ScalarField
    high: float
    low: float
    parent_ids: np.ndarray
    level_vertices: frozenset
    exterior: bool
    solve_residual: float

    @property
    def connectivity(self) -> int:
        return 1 + len(self.complex.inner)

    @property
    def spec(self) -> DirichletSpec:
        return DirichletSpec.for_network(self.complex.net, self.high, self.low)


@dataclass(eq=False)
class SingularAnnulus:
    """Exterior piece of a split: an annulus whose inner circle is the lift
    of a bouquet.  ``labels`` maps each copy of a tangency vertex to that
    vertex (in the refined parent); copies with one label are identified
    by the quotient map.  ``arcs`` lists, in inner-cycle order, the
    circle index and vertices of each arc between labelled copies.
    """

    domain: SubDomain
    bouquet: Bouquet
    labels: dict
    arcs: list

    def label_classes(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = defaultdict(list)
        for copy, v in sorted(self.labels.items()):
            out[v].append(copy)
        return dict(out)


@dataclass(eq=False)
class Split:
    bouquet: Bouquet
    refined: Refined
    exterior: SingularAnnulus
    interior: list[SubDomain]
    circle_of_interior: list[int]


def _cell_sides(cx: PLComplex, u, t, tol) -> np.ndarray:
    lo, hi = cx.cell_ranges(u)
    above = hi > t + tol
    below = lo < t - tol
    if np.any(above & below):
        ci = int(np.argmax(above & below))
        raise LevelError(f"cell {ci} still straddles level {t!r} after refinement")
    if np.any(~above & ~below):
        ci = int(np.argmax(~above & ~below))
        raise TieError(f"cell {ci} lies entirely on level {t!r}", [])
    return above.astype(int)


def _components(cx: PLComplex, side: np.ndarray) -> list[list[int]]:
    rows, cols = [], []
    for cs in cx.edge_cells.values():
        if len(cs) == 2 and side[cs[0]] == side[cs[1]]:
            rows.append(cs[0])
            cols.append(cs[1])
    nc = len(cx.cells)
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nc, nc))
    k, lab = connected_components(A, directed=False)
    return [np.flatnonzero(lab == i).tolist() for i in range(k)]


def _lift(cx: PLComplex, cells: list[int]):
    """Copy the cells into a new complex, one vertex copy per cell fan."""
    cellset = set(cells)
    fan_id: dict[tuple[int, int], int] = {}   # (vertex, cell) -> new id
    parent: list[int] = []
    for v in sorted({x for ci in cells for x in cx.cells[ci]}):
        mine = [ci for ci in cx.vertex_cells[v] if ci in cellset]
        # union cells that share an edge at v
        root = {ci: ci for ci in mine}

        def find(a):
            while root[a] != a:
                root[a] = root[root[a]]
                a = root[a]
            return a

        for ci in mine:
            cyc = cx.cells[ci]
            r = len(cyc)
            i = cyc.index(v)
            for w in (cyc[i - 1], cyc[(i + 1) % r]):
                for cj in cx.edge_cells[edge_key(v, w)]:
                    if cj in root:
                        root[find(cj)] = find(ci)
        new_of_root: dict[int, int] = {}
        for ci in mine:
            rt = find(ci)
            if rt not in new_of_root:
                new_of_root[rt] = len(parent)
                parent.append(v)
            fan_id[(v, ci)] = new_of_root[rt]
    new_cells = [tuple(fan_id[(v, ci)] for v in cx.cells[ci]) for ci in cells]
    parent = np.asarray(parent, dtype=np.int64)
    cond = {}
    for c in new_cells:
        cs = [cx.net.c(int(parent[c[i]]), int(parent[c[(i + 1) % len(c)]])) for i in range(len(c))]
        pos = [x for x in cs if x > 0]
        # Level chords carry zero conductance in the parent.  Both ends are
        # Dirichlet vertices of the piece, so g does not see them, but the
        # Neumann problem for h would pin a chord end to its only interior
        # neighbour and flatten h on the whole cell.
        fill = sum(pos) / len(pos) if pos else 1.0
        for i, x in enumerate(cs):
            e = edge_key(c[i], c[(i + 1) % len(c)])
            cond[e] = max(cond.get(e, 0.0), x if x > 0 else fill)
    coords = cx.coords[parent]
    sub = PLComplex.from_cells(coords, new_cells, cond, provenance=cx.provenance[parent])
    return sub, parent


def _circle_ids(refined: PLComplex, level_ids: np.ndarray, circles) -> list[list[int]]:
    """Refined vertex ids along each circle, matched by position."""
    tree = cKDTree(refined.coords[level_ids])
    scale = float(np.ptp(refined.coords, axis=0).max())
    out = []
    for c in circles:
        d, idx = tree.query(c.xy)
        if np.any(d > 1e-9 * scale):
            raise LevelError("refined complex is missing a level point")
        out.append([int(level_ids[i]) for i in idx])
    return out


def _circle_edges(ids) -> set:
    return {edge_key(a, b) for a, b in zip(ids, ids[1:] + ids[:1])}


def split_domain(cx: PLComplex, u: ScalarField, bouquet: Bouquet, high: float, low: float = 0.0,
                 tol: float | None = None) -> Split:
    """Cut along the bouquet and set up the induced problems.

    The exterior gets k = ``high`` on E1 and the level value on the
    lifted bouquet; each interior piece gets the level value on its outer
    circle and ``low`` on its holes.  The restriction of u must solve
    every induced problem; the residual is recorded per piece.
    """
    if tol is None:
        tol = level_tolerance(u)
    t = bouquet.value
    ref = refine_type1(cx, u, list(bouquet.circles))
    R, ur = ref.complex, np.asarray(ref.field)
    side = _cell_sides(R, ur, t, tol)
    level_ids = np.flatnonzero(np.abs(ur - t) <= tol)
    circ_ids = _circle_ids(R, level_ids, bouquet.circles)
    circ_edges = [_circle_edges(ids) for ids in circ_ids]
    outer_set = set(R.outer)

    pieces = []
    ext = None
    for comp in _components(R, side):
        sub, parent = _lift(R, comp)
        lv = frozenset(int(i) for i in np.flatnonzero(np.abs(ur[parent] - t) <= tol))
        is_ext = bool(side[comp[0]]) and bool(outer_set & set(parent.tolist()))
        hi_v, lo_v = (high, t) if is_ext else (t, low)
        fld = ur[parent].astype(float)
        # exact boundary data: the level carries exactly t
        for i in lv:
            fld[i] = t
        outer_ok = all((i in lv) != is_ext for i in sub.outer)
        inner_ok = all(all((i in lv) == is_ext for i in c) for c in sub.inner)
        if not (outer_ok and inner_ok):
            raise LevelError("split piece has boundary cycles mixing level and original boundary")
        spec = DirichletSpec.for_network(sub.net, hi_v, lo_v)
        resolved = solve_dirichlet(sub.net, spec)
        resid = float(np.max(np.abs(resolved - fld)))
        piece = SubDomain(sub, fld, float(hi_v), float(lo_v), parent, lv, is_ext, resid)
        if is_ext:
            if ext is not None:
                raise LevelError("more than one component lies above the level")
            ext = piece
        else:
            pieces.append(piece)
    if ext is None:
        raise LevelError("no exterior component found")

    # the lifted inner cycle of the exterior, cut at tangency copies
    labels = {i: int(ext.parent_ids[i]) for i in ext.level_vertices
              if int(ext.parent_ids[i]) in _refined_tangencies(circ_ids)}
    cyc = list(ext.complex.inner[0])
    arcs = _arcs(cyc, labels, ext.parent_ids, circ_edges)

    # interior piece <-> circle by the edges of its outer cycle
    circle_of = []
    for p in pieces:
        oc = [int(p.parent_ids[i]) for i in p.complex.outer]
        e = _circle_edges(oc)
        hits = [i for i, ce in enumerate(circ_edges) if e <= ce]
        if len(hits) != 1:
            raise LevelError("interior piece does not match exactly one circle")
        circle_of.append(hits[0])
    if sorted(circle_of) != list(range(len(bouquet.circles))):
        raise LevelError("circles and interior pieces are not in one-to-one correspondence")
    sa = SingularAnnulus(ext, bouquet, labels, arcs)
    return Split(bouquet, ref, sa, pieces, circle_of)


def _refined_tangencies(circ_ids) -> set[int]:
    count: dict[int, int] = defaultdict(int)
    for ids in circ_ids:
        for v in set(ids):
            count[v] += 1
    return {v for v, m in count.items() if m > 1}


def _arcs(cyc, labels, parent_ids, circ_edges):
    """Arcs of a lifted cycle between labelled copies, tagged by circle."""
    n = len(cyc)
    starts = [i for i, v in enumerate(cyc) if v in labels]
    if not starts:
        starts = [0]
    arcs = []
    for a, b in zip(starts, starts[1:] + [starts[0] + n]):
        verts = [cyc[i % n] for i in range(a, b + 1)]
        pe = {edge_key(int(parent_ids[x]), int(parent_ids[y])) for x, y in zip(verts, verts[1:])}
        hits = [i for i, ce in enumerate(circ_edges) if pe <= ce]
        if len(hits) != 1:
            raise LevelError("an arc of the lifted bouquet does not follow one circle")
        arcs.append((hits[0], verts))
    return arcs


# ----------------------------------------------------------------------------
# splitting tree

@dataclass(eq=False)
class Leaf:
    domain: SubDomain
    result: AnnulusResult | None = None


@dataclass(eq=False)
class Node:
    """A split: the exterior singular annulus and one child per circle."""

    domain: SubDomain
    maximal: MaximalCurve
    split: Split
    children: list            # Leaf | Node, indexed by circle
    result: AnnulusResult | None = None

    @property
    def exterior(self) -> SingularAnnulus:
        return self.split.exterior


def root_domain(cx: PLComplex, g: ScalarField, k: float) -> SubDomain:
    return SubDomain(cx, np.asarray(g, dtype=float), float(k), 0.0, np.arange(cx.n),
                     frozenset(), False, 0.0)


def build_tree(dom: SubDomain, depth: int = 0):
    """Split recursively until only annuli remain."""
    if dom.connectivity == 2:
        return Leaf(dom)
    if dom.connectivity < 2:
        raise MeshError("piece without an inner boundary")
    mc = maximal_singular_curve(dom.complex, dom.field)
    sp = split_domain(dom.complex, dom.field, mc.bouquet, dom.high, dom.low)
    for p in sp.interior:
        if p.connectivity >= dom.connectivity:
            raise LevelError("splitting did not reduce connectivity")
    kids = [None] * len(sp.interior)
    for p, ci in zip(sp.interior, sp.circle_of_interior):
        kids[ci] = build_tree(p, depth + 1)
    return Node(dom, mc, sp, kids)


def walk(tree):
    """Every node and leaf, parents first."""
    yield tree
    if isinstance(tree, Node):
        for c in tree.children:
            yield from walk(c)


def uniformize_singular_annulus(sa: SingularAnnulus) -> AnnulusResult:
    """Annulus pipeline on the lifted exterior piece."""
    d = sa.domain
    return uniformize_annulus(d.complex, d.field, d.high, d.low)


def uniformize_tree(tree, workers: int = 1):
    """Run the annulus pipeline on every piece of the tree."""
    items = []
    for node in walk(tree):
        items.append(node)
    def run(node):
        if isinstance(node, Node):
            return uniformize_singular_annulus(node.exterior)
        return uniformize_annulus(node.domain.complex, node.domain.field, node.domain.high,
                                  node.domain.low)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, items))
    else:
        results = [run(x) for x in items]
    for node, r in zip(items, results):
        node.result = r
    return tree


# ----------------------------------------------------------------------------
# gluing

def cone_angle(incident: int) -> float:
    """Cone angle 2 (n + 1) pi at the tangency point of n + 1 cylinders."""
    if incident < 1:
        raise ValueError("a cone point needs at least one incident cylinder")
    return 2.0 * incident * math.pi


def _q_copies(r: AnnulusResult, v: int) -> list[int]:
    top_of = {b: t for t, b in r.q.twin.items()}
    out = [v]
    if v in top_of:
        out.append(top_of[v])
    return out


def boundary_angle(r: AnnulusResult, v: int) -> float:
    """Total shell-corner angle at a boundary vertex v of the piece.

    Each shell with a corner at the image of v contributes pi / 2; the
    slit end has one copy at h = 0 and one at h = period.
    """
    hv = r.net.h_values
    total = 0.0
    for qv in _q_copies(r, v):
        j = int(np.argmin(np.abs(hv - r.h[qv])))
        for jj in (j - 1, j):
            if 0 <= jj < len(hv) - 1:
                total += math.pi / 2
    return total


def _qe2_arc_lengths(r: AnnulusResult, arcs):
    """Pair-flux length and angle of each arc of the inner boundary.

    The inner boundary of the cut piece runs from the base copy of the
    slit end (h = 0) to the top copy (h = period); arcs crossing the slit
    are split in two and summed.
    """
    q = r.q
    orig = q.orig
    P = r.period
    s = TWO_PI / P
    edge_dh: dict = {}
    path = list(q.qe2)
    for a, b in zip(path, path[1:]):
        edge_dh[edge_key(int(orig[a]), int(orig[b]))] = float(r.h[b] - r.h[a])
    out = []
    for ci, verts in arcs:
        dhs = [edge_dh[edge_key(x, y)] for x, y in zip(verts, verts[1:])]
        gval = r.t_lo
        length = math.fsum(s * math.exp(s * gval) * abs(d) for d in dhs)
        dphi = s * math.fsum(dhs)
        out.append((ci, length, dphi))
    return out


@dataclass
class GlueRecord:
    parent: str
    child: str
    circle: int
    parent_length: float
    child_length: float

    @property
    def rel(self) -> float:
        return abs(self.parent_length - self.child_length) / self.parent_length


@dataclass
class ConePoint:
    """``angle`` is the cone angle 2 (n + 1) pi; ``geometric_angle`` sums
    the shell corners at every copy of the vertex in the glued pieces."""

    vertex: int               # id in the input mesh, -1 for an inserted vertex
    piece: str
    xy: tuple[float, float]
    multiplicity: int
    incident: int
    angle: float
    geometric_angle: float


@dataclass
class LadderPiece:
    path: str
    kind: str                 # "cylinder" or "generalized"
    result: AnnulusResult
    scale: float              # factor applied to the flat annulus
    cylinder_scale: float     # factor applied to the radius-1 cylinder
    parent: str | None
    circle: int | None


@dataclass(eq=False)
class PantsLadder:
    pieces: list[LadderPiece]
    glued: list[GlueRecord]
    boundary_lengths: list[tuple[str, float]]
    cone_points: list[ConePoint]
    smooth_angle_dev: float
    candidates: list[int]
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks) and all(p.result.ok for p in self.pieces)

    @property
    def boundary_count(self) -> int:
        return len(self.boundary_lengths)

    @property
    def splits(self) -> int:
        return len(self.candidates)


def _outer_length(r: AnnulusResult) -> tuple[float, float]:
    """Closed-form and edge-sum pair-flux length of the outer circle."""
    s = TWO_PI / r.period
    closed = TWO_PI * math.exp(s * r.k)
    L = r.net.g_levels[-1]
    hs = [point_value(p, r.h) for p in L.points]
    edge = math.fsum(s * math.exp(s * r.k) * abs(b - a) for a, b in zip(hs, hs[1:]))
    return closed, edge


def assemble_ladder(tree, rtol: float = 1e-9) -> PantsLadder:
    """Scale every piece so glued lengths agree, and collect cone angles.

    Lengths are pair-flux lengths, i.e. circumferences in the flat
    annulus picture.  A child glued along circle C of its parent gets
    scale s_child = s_parent * length_parent(C) / length_child(outer).
    """
    pieces: list[LadderPiece] = []
    glued: list[GlueRecord] = []
    bl: list[tuple[str, float]] = []
    cones: list[ConePoint] = []
    smooth_dev = 0.0
    candidates: list[int] = []
    checks: list[Check] = []

    root_r = tree.result
    closed, edge = _outer_length(root_r)
    bl.append(("E1", closed))
    checks.append(Check("outer_length", abs(edge - closed) <= rtol * closed, abs(edge - closed) / closed))

    def visit(node, path, scale, cscale, parent, circle, to_root):
        nonlocal smooth_dev
        r = node.result
        kind = "generalized" if isinstance(node, Node) else "cylinder"
        pieces.append(LadderPiece(path, kind, r, scale, cscale, parent, circle))
        if isinstance(node, Leaf):
            # the hole: inner circle of radius exp(0) = 1
            bl.append((path, scale * TWO_PI * float(r.target.radii[0])))
            return
        candidates.append(node.maximal.candidates)
        sa = node.exterior
        arcs = _qe2_arc_lengths(r, sa.arcs)
        per_circle: dict[int, list] = defaultdict(lambda: [0.0, 0.0])
        for ci, length, dphi in arcs:
            per_circle[ci][0] += length
            per_circle[ci][1] += dphi
        rin = float(r.target.radii[0])
        for ci, child in enumerate(node.children):
            length, dphi = per_circle[ci]
            cr = child.result
            c_closed, c_edge = _outer_length(cr)
            # geometric lengths fix the scale; edge sums are checked against them
            s_child = scale * (rin * dphi) / c_closed
            c_child = cscale * dphi / TWO_PI
            cpath = f"{path}/{ci}"
            glued.append(GlueRecord(path, cpath, ci, scale * length, s_child * c_edge))
            visit(child, cpath, s_child, c_child, path, ci, _compose(to_root, node, child))
            # angles along the glued circle, vertex by vertex
            cmap = _child_outer_map(child)
            for pv, ext_ids in _boundary_copies(sa, ci).items():
                if pv in sa.labels.values():
                    continue
                a_par = sum(boundary_angle(r, e) for e in ext_ids)
                a_kid = boundary_angle(cr, cmap[pv])
                smooth_dev = max(smooth_dev, abs(a_par + a_kid - TWO_PI))
        # cone points of this split
        for pv, copies in sa.label_classes().items():
            m = len(copies)
            geo = sum(boundary_angle(r, e) for e in copies)
            for ci, child in enumerate(node.children):
                kid = _child_outer_map(child).get(pv)
                if kid is not None:
                    geo += boundary_angle(child.result, kid)
            xy = tuple(float(x) for x in sa.domain.complex.coords[copies[0]])
            root_id = to_root(pv) if pv < node.domain.complex.n else -1
            cones.append(ConePoint(root_id, path, xy, m, m + 1, cone_angle(m + 1), geo))

    visit(tree, "root", 1.0, 1.0, None, None, lambda v: int(v))
    worst = max((g.rel for g in glued), default=0.0)
    checks.append(Check("glued_lengths", worst <= rtol, worst))
    checks.append(Check("smooth_vertex_angles", smooth_dev <= 1e-12, smooth_dev))
    checks.append(Check("unique_maximal_curve", all(c == 1 for c in candidates), 0.0,
                        f"candidates per split {candidates}"))
    leaves_ok = all(isinstance(p, Leaf) == (p.domain.connectivity == 2) for p in walk(tree))
    checks.append(Check("terminated_in_annuli", leaves_ok, 0.0))
    m = 1 + len(tree.domain.complex.inner)
    checks.append(Check("boundary_count", len(bl) == m, float(len(bl) - m),
                        f"{len(bl)} boundary lengths for {m} components"))
    return PantsLadder(pieces, glued, bl, cones, smooth_dev, candidates, checks)


def _compose(to_root, node, child):
    """Vertex ids of a child piece, traced back to the input mesh."""
    n_parent = node.domain.complex.n
    pid = child.domain.parent_ids

    def f(v):
        w = int(pid[v])
        # refinement appends inserted vertices after the parent's own
        return to_root(w) if w < n_parent else -1

    return lambda v: f(v) if v >= 0 else -1


def _boundary_copies(sa: SingularAnnulus, circle: int) -> dict[int, list[int]]:
    """Refined-parent vertex -> exterior copies, along one circle's arcs."""
    out: dict[int, list[int]] = defaultdict(list)
    pid = sa.domain.parent_ids
    for ci, verts in sa.arcs:
        if ci != circle:
            continue
        for x in verts[1:-1]:
            out[int(pid[x])].append(x)
    return out


def _child_outer_map(child) -> dict[int, int]:
    """Parent-refined vertex -> child vertex on the child's outer circle."""
    d = child.domain
    return {int(d.parent_ids[i]): int(i) for i in d.complex.outer}
