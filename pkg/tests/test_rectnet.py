import dataclasses
import math

import numpy as np
import pytest

from conftest import ANNULI, complex_and_g, pipeline
from uniformize.conjugate import conjugate_of_g, harmonic_conjugate
from uniformize.plgeom import cut_along_slit, find_slit
from uniformize.rectnet import build_rectnet, verify_orthogonal_filling


def net_for(name):
    cx, g = complex_and_g(name)
    q = cut_along_slit(cx, find_slit(cx, g))
    p = conjugate_of_g(q, g).total
    return q, q.lift(g), harmonic_conjugate(q, p), p


def test_wheel_net_shape():
    q, g, h, _ = net_for("wheel")
    net = build_rectnet(q, g, h)
    assert len(net.g_levels) == 2
    assert len(net.h_levels) == 5
    assert net.shape == (1, 4)
    assert np.all(net.counts == 1)


def test_wheel_lattice_points_are_vertices():
    q, g, h, _ = net_for("wheel")
    net = build_rectnet(q, g, h)
    xy = q.complex.coords
    for (i, j), key in net.lattice_keys.items():
        assert key[0] == "v"
        assert net.lattice[i, j] == pytest.approx(xy[key[1]])


def test_g8x3_two_layers():
    q, g, h, _ = net_for("g8x3")
    net = build_rectnet(q, g, h)
    assert len(net.g_levels) == 3
    assert net.shape[0] == 2
    rep = verify_orthogonal_filling(net)
    assert rep.ok, rep.violations
    assert np.all(rep.counts == 1)


def test_single_layer_cells_touch_both_boundaries():
    q, g, h, _ = net_for("wheel")
    net = build_rectnet(q, g, h)
    assert net.g_values[0] == 0.0 and net.g_values[-1] == 1.0
    assert sorted(net.g_levels[0].vertices()) == sorted(q.qe2)
    assert sorted(net.g_levels[-1].vertices()) == sorted(q.qe1)


@pytest.mark.parametrize("name", ANNULI)
def test_cells_cover_quadrilateral(name):
    net = pipeline(name).annulus.net
    rep = verify_orthogonal_filling(net)
    assert rep.ok, rep.violations
    assert math.fsum(net.cell_area.ravel()) == pytest.approx(net.q.complex.area(), rel=1e-9)
    assert np.all(net.cell_area > 0)


def test_lattice_is_a_grid():
    net = pipeline("g8x3").annulus.net
    ni, nj = net.shape
    assert len(net.cells()) == ni * nj
    assert net.cells()[0] == ((0, 0), (1, 0), (1, 1), (0, 1))
    assert not np.isnan(net.lattice).any()


def test_corrupted_h_is_detected():
    q, g, h, p = net_for("g8x3")
    bad = h.copy()
    # middle-ring vertex 9 has h = 0.5; pushing it past its neighbour's 1.0
    # makes the h-level through it cross the middle ring twice
    assert h[9] == pytest.approx(0.5) and h[10] == pytest.approx(1.0)
    bad[9] = 1.2
    net = build_rectnet(q, g, bad)
    rep = verify_orthogonal_filling(net)
    assert not rep.ok
    assert np.any(net.counts != 1)


def test_report_counts_pairs():
    net = pipeline("wheel").annulus.net
    rep = verify_orthogonal_filling(net)
    assert rep.pairs == 2 * 5
    degenerate = dataclasses.replace(net, counts=np.where(net.counts == 1, 2, 0))
    assert not verify_orthogonal_filling(degenerate).ok
