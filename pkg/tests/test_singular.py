import math

import numpy as np
import pytest

from conftest import complex_and_g, pipeline
from uniformize.errors import LevelError, TieError
from uniformize.plgeom import PLComplex
from uniformize.singular import (
    Leaf,
    Node,
    assemble_ladder,
    build_tree,
    classify_level,
    cone_angle,
    enclosed_holes,
    hole_points,
    maximal_singular_curve,
    root_domain,
    saddles,
    uniformize_tree,
    vertex_index,
    walk,
)


def star():
    """Centre vertex 0 with four neighbours, one per quadrant axis."""
    xy = [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]]
    return PLComplex.from_cells(xy, [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 1)])


@pytest.mark.parametrize("ring, sgc, index", [
    ([-1.0, -2.0, -1.5, -3.0], 0, 1),    # local maximum
    ([1.0, 2.0, -1.0, -2.0], 2, 0),      # regular point
    ([1.0, -1.0, 2.0, -2.0], 4, -1),     # simple saddle
])
def test_vertex_index(ring, sgc, index):
    cx = star()
    u = np.array([0.0] + ring)
    vi = vertex_index(cx.net, u, 0)
    assert vi.sgc == sgc
    assert vi.index == index
    assert vi.singular == (index != 0)


def test_vertex_index_tie():
    cx = star()
    u = np.array([0.0, 0.0, 1.0, -1.0, 2.0])
    with pytest.raises(TieError):
        vertex_index(cx.net, u, 0)
    assert vertex_index(cx.net, u, 0, strict=False).sgc == 2


def test_figure_eight_on_p3():
    cx, g = complex_and_g("p3")
    (s,) = saddles(cx, g)
    lc = classify_level(cx, g, float(g[s.vertex]))
    assert lc.singular
    (b,) = lc.bouquets
    assert len(b.circles) == 2
    assert b.tangencies == {s.vertex: 2}
    holes = hole_points(cx)
    assert sorted(map(sorted, enclosed_holes(b, holes))) == [[0], [1]]


def test_regular_level_on_p3():
    cx, g = complex_and_g("p3")
    (s,) = saddles(cx, g)
    # above the saddle one curve surrounds both holes; below it, one per hole
    for t, n in ((0.5 * (g[s.vertex] + g.max()), 1), (0.5 * g[s.vertex], 2)):
        lc = classify_level(cx, g, float(t))
        assert not lc.singular
        assert len(lc.bouquets) == n
        assert all(len(b.circles) == 1 for b in lc.bouquets)


def test_maximal_curve_p3():
    cx, g = complex_and_g("p3")
    mc = maximal_singular_curve(cx, g)
    assert mc.candidates == 1
    assert len(mc.bouquet.circles) == 2


def test_maximal_curve_c4_encloses_every_hole():
    cx, g = complex_and_g("c4")
    mc = maximal_singular_curve(cx, g)
    assert mc.candidates == 1
    enc = set().union(*enclosed_holes(mc.bouquet, hole_points(cx)))
    assert enc == {0, 1, 2}
    # the other saddle lies at a lower level, inside one of the circles
    lower = [s.vertex for s in saddles(cx, g) if g[s.vertex] < mc.bouquet.value]
    assert len(lower) == 1


def test_annulus_has_no_maximal_curve():
    cx, g = complex_and_g("annulus_a")
    with pytest.raises(LevelError):
        maximal_singular_curve(cx, g)


def test_p3_split():
    tree = pipeline("p3").tree
    assert isinstance(tree, Node)
    sp = tree.split
    assert sp.exterior.domain.connectivity == 2
    assert [d.connectivity for d in sp.interior] == [2, 2]
    assert all(isinstance(c, Leaf) for c in tree.children)
    t = tree.maximal.bouquet.value
    assert sp.exterior.domain.low == t
    assert all(d.high == t for d in sp.interior)
    # the pieces solve their induced problems
    for d in [sp.exterior.domain] + sp.interior:
        assert d.solve_residual <= 1e-9


def test_p3_singular_annulus_labels():
    sa = pipeline("p3").tree.exterior
    classes = sa.label_classes()
    # the tangency vertex has one copy per circle on the lifted inner boundary
    multi = [ids for ids in classes.values() if len(ids) > 1]
    assert len(multi) == 1 and len(multi[0]) == 2


def test_c4_tree_depth():
    tree = pipeline("c4").tree
    kinds = [(type(n).__name__, n.domain.connectivity) for n in walk(tree)]
    assert kinds == [("Node", 4), ("Leaf", 2), ("Node", 3), ("Leaf", 2), ("Leaf", 2)]


@pytest.mark.parametrize("incident, angle", [(1, 2 * math.pi), (2, 4 * math.pi), (3, 6 * math.pi)])
def test_cone_angle(incident, angle):
    assert cone_angle(incident) == angle


def test_cone_angle_needs_a_cylinder():
    with pytest.raises(ValueError):
        cone_angle(0)


@pytest.mark.parametrize("name, m", [("p3", 3), ("c4", 4)])
def test_ladder(name, m):
    lad = pipeline(name).ladder
    assert lad.ok, [c for c in lad.checks if not c.passed]
    assert lad.boundary_count == m
    assert lad.candidates == [1] * (m - 2)
    for gr in lad.glued:
        assert gr.rel <= 1e-9
    for c in lad.cone_points:
        assert c.multiplicity == 2
        assert c.angle == 2 * c.incident * math.pi
        assert c.geometric_angle == pytest.approx(2 * c.multiplicity * math.pi)
    assert lad.smooth_angle_dev <= 1e-9


def test_annulus_tree_is_a_single_cylinder():
    cx, g = complex_and_g("g8x3")
    tree = uniformize_tree(build_tree(root_domain(cx, g, 1.0)))
    assert isinstance(tree, Leaf)
    lad = assemble_ladder(tree)
    assert [p.kind for p in lad.pieces] == ["cylinder"]
    assert lad.cone_points == []
    assert lad.boundary_count == 2
    assert lad.ok


def test_threads_give_same_ladder():
    cx, g = complex_and_g("p3")
    a = assemble_ladder(uniformize_tree(build_tree(root_domain(cx, g, 1.0)), workers=1))
    b = assemble_ladder(uniformize_tree(build_tree(root_domain(cx, g, 1.0)), workers=3))
    assert [x for _, x in a.boundary_lengths] == [x for _, x in b.boundary_lengths]
