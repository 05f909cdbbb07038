import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import complex_and_g, mesh, ANNULI
from oracles import dense_dirichlet, green_sides, net_oracle, random_planar_network
from uniformize.errors import ConductanceError, MeshError, SolverError
from uniformize.network import (DirichletNeumannSpec, DirichletSpec, FiniteNetwork, energy_scale,
                                green_identity_residual, laplacian, max_principle_violations,
                                normal_derivative, solve_dirichlet, solve_dirichlet_neumann,
                                total_flux, vertex_boundary)


def path_net(c=(1.0, 1.0)):
    return FiniteNetwork.from_dict([[0, 0], [1, 0], [2, 0]], {(0, 1): c[0], (1, 2): c[1]})


def star_net():
    return FiniteNetwork.from_dict([[0, 0], [1, 0], [0, 1], [-1, 0]], {(0, 1): 1, (0, 2): 1, (0, 3): 1})


class TestLaplacian:
    def test_affine_on_path_is_harmonic(self):
        assert laplacian(path_net(), np.array([0.0, 1.0, 2.0]), 1) == 0.0

    def test_star_centre(self):
        assert laplacian(star_net(), np.array([1.0, 0, 0, 0]), 0) == 3.0

    def test_single_edge(self):
        net = FiniteNetwork.from_dict([[0, 0], [1, 0]], {(0, 1): 2.0})
        assert laplacian(net, np.array([1.0, 0.0]), 0) == 2.0

    def test_unknown_vertex(self):
        with pytest.raises(KeyError):
            laplacian(path_net(), np.zeros(3), 7)


class TestNormalDerivative:
    def test_one_neighbour(self):
        net = FiniteNetwork.from_dict([[0, 0], [1, 0]], {(0, 1): 1.0})
        assert normal_derivative(net, np.array([1.0, 0.0]), 0, {1}) == 1.0

    def test_two_neighbours(self):
        net = FiniteNetwork.from_dict([[0, 0], [1, 0], [0, 1]], {(0, 1): 1, (0, 2): 1})
        assert normal_derivative(net, np.array([1.0, 0.0, 0.5]), 0, {1, 2}) == 1.5

    def test_constant(self):
        assert normal_derivative(star_net(), np.ones(4), 1, {0, 2, 3}) == 0.0

    def test_vertex_inside_F_rejected(self):
        with pytest.raises(ValueError):
            normal_derivative(star_net(), np.ones(4), 0, {0, 1})

    def test_vertex_boundary(self):
        assert vertex_boundary(star_net(), {0}) == {1, 2, 3}


class TestConstruction:
    def test_negative_conductance(self):
        with pytest.raises((ConductanceError, MeshError)):
            FiniteNetwork.from_dict([[0, 0], [1, 0]], {(0, 1): -1.0})

    def test_edge_order_is_canonical(self):
        net = FiniteNetwork.from_dict([[0, 0], [1, 0], [2, 0]], {(2, 1): 1.0, (1, 0): 3.0})
        assert net.edges.tolist() == [[0, 1], [1, 2]]
        assert net.c(1, 0) == 3.0 and net.c(0, 2) == 0.0


class TestDirichlet:
    def test_symmetric_middle(self):
        u = solve_dirichlet(path_net(), DirichletSpec((0,), ((2,),), 1.0))
        assert u[1] == pytest.approx(0.5, abs=1e-15)

    def test_weighted_middle(self):
        # 3 (1 - u) = 1 (u - 0)  ->  u = 3/4
        u = solve_dirichlet(path_net((3.0, 1.0)), DirichletSpec((0,), ((2,),), 1.0))
        assert u[1] == pytest.approx(0.75, abs=1e-15)

    def test_sets_must_be_disjoint(self):
        with pytest.raises(ValueError):
            DirichletSpec((0, 1), ((1,),), 1.0)

    def test_k_must_exceed_low_value(self):
        with pytest.raises(ValueError):
            DirichletSpec((0,), ((2,),), 0.0)

    def test_g8x3_middle_ring(self):
        cx, g = complex_and_g("g8x3")
        middle = list(range(8, 16))
        # four neighbours: two on the ring, one inside (0), one outside (1)
        assert np.allclose(g[middle], 0.5, atol=1e-14)

    @pytest.mark.parametrize("name", ANNULI + ["p3", "c4", "fine_annulus"])
    def test_matches_dense_oracle(self, name):
        cx, g = complex_and_g(name)
        spec = DirichletSpec.for_network(cx.net, mesh(name).k)
        ref = net_oracle(cx.net, spec.fixed())
        assert np.max(np.abs(g - ref)) <= 1e-10

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), s=st.floats(0.1, 100.0))
    def test_linearity(self, seed, s):
        net, hi, lo = random_planar_network(seed, 10, 60)
        u1 = solve_dirichlet(net, DirichletSpec(hi, (lo,), 1.0))
        us = solve_dirichlet(net, DirichletSpec(hi, (lo,), s))
        assert np.max(np.abs(us - s * u1)) <= 1e-12 * s

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_maximum_principle_random(self, seed):
        net, hi, lo = random_planar_network(seed, 10, 80)
        u = solve_dirichlet(net, DirichletSpec(hi, (lo,), 1.0))
        assert max_principle_violations(u, hi + lo) == []

    def test_constant_data(self):
        net, hi, lo = random_planar_network(3)
        u = dense_dirichlet(net.n, net.edges.tolist(), net.conductance.tolist(),
                            {v: 2.0 for v in hi + lo})
        assert np.allclose(u, 2.0)
        assert max_principle_violations(u, hi + lo) == []

    def test_flux_conservation(self):
        cx, g = complex_and_g("annulus_a")
        out = total_flux(cx.net, g, cx.outer)
        inn = total_flux(cx.net, g, cx.inner[0])
        assert out == pytest.approx(-inn, rel=1e-10)


class TestDirichletNeumann:
    def square(self, n=5):
        xy = [[i, j] for j in range(n) for i in range(n)]
        cond = {}
        for j in range(n):
            for i in range(n):
                v = j * n + i
                if i + 1 < n:
                    cond[(v, v + 1)] = 1.0
                if j + 1 < n:
                    cond[(v, v + n)] = 1.0
        left = tuple(j * n for j in range(n))
        right = tuple(j * n + n - 1 for j in range(n))
        tb = tuple(i for i in range(1, n - 1)) + tuple((n - 1) * n + i for i in range(1, n - 1))
        return FiniteNetwork.from_dict(xy, cond), left, right, tb

    def test_linear_ramp(self):
        net, left, right, tb = self.square()
        u = solve_dirichlet_neumann(net, DirichletNeumannSpec(((left, 0.0), (right, 1.0)), (tb,)))
        assert np.allclose(u, net.coords[:, 0] / 4.0, atol=1e-14)

    def test_constant_data(self):
        net, left, right, tb = self.square()
        u = solve_dirichlet_neumann(net, DirichletNeumannSpec(((left, 3.0), (right, 3.0)), (tb,)))
        assert np.allclose(u, 3.0)

    def test_needs_dirichlet_data(self):
        net, left, right, tb = self.square()
        with pytest.raises(SolverError):
            solve_dirichlet_neumann(net, DirichletNeumannSpec((), (tb,)))

    def test_arcs_disjoint(self):
        with pytest.raises(ValueError):
            DirichletNeumannSpec((((0, 1), 0.0),), ((1, 2),))


class TestGreenIdentity:
    def test_single_edge(self):
        net = FiniteNetwork.from_dict([[0, 0], [1, 0]], {(0, 1): 2.5})
        u = np.array([1.0, 0.0])
        lhs, rhs = green_sides(2, [(0, 1)], [2.5], u, u, {0})
        assert lhs == rhs == 2.5
        assert green_identity_residual(net, u, u, {0}) == 0.0

    def test_g8x3_field_with_itself(self):
        cx, g = complex_and_g("g8x3")
        F = [v for v in range(cx.n) if v not in set(cx.outer) | set(cx.inner[0])]
        lhs, rhs = green_sides(cx.n, cx.net.edges.tolist(), cx.net.conductance.tolist(), g, g, F)
        assert abs(lhs - rhs) <= 1e-12
        assert green_identity_residual(cx.net, g, g, F) <= 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_constant_v(self, seed):
        net, hi, lo = random_planar_network(seed)
        u = solve_dirichlet(net, DirichletSpec(hi, (lo,), 1.0))
        F = [v for v in range(net.n) if v not in hi + lo]
        assert green_identity_residual(net, u, np.ones(net.n), F) <= 1e-12

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_arbitrary_fields(self, seed):
        # the identity holds for any u, v; not only harmonic ones
        net, hi, lo = random_planar_network(seed, 10, 50)
        rng = np.random.default_rng(seed)
        u, v = rng.normal(size=net.n), rng.normal(size=net.n)
        F = rng.choice(net.n, size=net.n // 2, replace=False).tolist()
        assert green_identity_residual(net, u, v, F) <= 1e-9 * energy_scale(net, u, v, F)
