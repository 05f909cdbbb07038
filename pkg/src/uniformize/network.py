"""Weighted planar networks and discrete potential theory.

A network carries vertex coordinates, an undirected edge list with
conductances, and named boundary components.  Fields are plain numpy
arrays indexed by vertex id; a field is harmonic at x when

    laplacian(u, x) = sum_{y ~ x} c(x, y) (u(x) - u(y)) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import ConductanceError, MeshError, SolverError

# Systems with more unknowns than this go through conjugate gradients.
DIRECT_SOLVE_LIMIT = 50_000
CG_RTOL = 1e-12
# Post-solve residuals are compared against this multiple of the flux scale.
RESIDUAL_TOL = 1e-9

ScalarField = np.ndarray


def edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True, eq=False)
class FiniteNetwork:
    """Simple weighted graph embedded in the plane.

    Parameters
    ----------
    coords : (n, 2) array
        Vertex positions; vertex ids are ``0 .. n-1``.
    edges : (m, 2) int array
        Undirected edges.  Stored with ``a < b`` and sorted, so the edge
        order is deterministic.
    conductance : (m,) array
        Edge weights.  Refinement may introduce zero weights; negative or
        non-finite weights are rejected.
    boundary : mapping name -> vertex cycle
        ``"E1"`` is the outer component, inner ones are ``"E2_1"``,
        ``"E2_2"``, ...
    """

    coords: np.ndarray
    edges: np.ndarray
    conductance: np.ndarray
    boundary: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        cond = np.asarray(self.conductance, dtype=float).reshape(-1)
        if len(cond) != len(edges):
            raise MeshError("conductance length does not match edge count")
        n = len(coords)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            bad = edges[(edges < 0).any(axis=1) | (edges >= n).any(axis=1)][0]
            raise MeshError(f"edge {tuple(bad)} references an unknown vertex")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise MeshError("self-loop in edge list")
        edges = np.sort(edges, axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges, cond = edges[order], cond[order]
        if len(edges) > 1:
            dup = np.all(edges[1:] == edges[:-1], axis=1)
            if dup.any():
                raise MeshError(f"duplicate edge {tuple(edges[1:][dup][0])}")
        if not np.all(np.isfinite(cond)):
            raise ConductanceError("non-finite conductance")
        if np.any(cond < 0):
            i = int(np.argmax(cond < 0))
            raise ConductanceError(f"negative conductance on edge {tuple(edges[i])}")
        seen: set[int] = set()
        bnd = {}
        for name, cyc in self.boundary.items():
            cyc = tuple(int(v) for v in cyc)
            for v in cyc:
                if not 0 <= v < n:
                    raise MeshError(f"boundary {name!r} references unknown vertex {v}")
            if seen & set(cyc):
                raise MeshError(f"boundary {name!r} overlaps another component")
            seen |= set(cyc)
            bnd[name] = cyc
        coords.setflags(write=False)
        edges.setflags(write=False)
        cond.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "conductance", cond)
        object.__setattr__(self, "boundary", bnd)

    @classmethod
    def from_dict(cls, coords, conductance: Mapping[tuple[int, int], float], boundary=None):
        keys = sorted(edge_key(*e) for e in conductance)
        lookup = {edge_key(*e): c for e, c in conductance.items()}
        return cls(coords, np.array(keys, dtype=np.int64).reshape(-1, 2),
                   np.array([lookup[k] for k in keys], dtype=float), boundary or {})

    @property
    def n(self) -> int:
        return len(self.coords)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}

    def c(self, a: int, b: int) -> float:
        """Conductance of edge (a, b); zero if the vertices are not adjacent."""
        i = self.edge_index.get(edge_key(a, b))
        return 0.0 if i is None else float(self.conductance[i])

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.n
        a, b = self.edges[:, 0], self.edges[:, 1]
        w = self.conductance
        return sp.csr_matrix((np.concatenate([w, w]), (np.concatenate([a, b]), np.concatenate([b, a]))),
                             shape=(n, n))

    @cached_property
    def _neighbor_lists(self) -> list[tuple[int, ...]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges:
            nbrs[a].append(int(b))
            nbrs[b].append(int(a))
        return [tuple(sorted(x)) for x in nbrs]

    def neighbors(self, x: int) -> tuple[int, ...]:
        self._check_vertex(x)
        return self._neighbor_lists[x]

    def neighbors_ccw(self, x: int) -> list[int]:
        """Neighbors of x sorted by angle, counterclockwise from the +x axis."""
        nb = list(self.neighbors(x))
        d = self.coords[nb] - self.coords[x]
        ang = np.arctan2(d[:, 1], d[:, 0])
        return [nb[i] for i in np.lexsort((nb, ang))]

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse L = D - W so that (L u)[x] is the Laplacian of u at x."""
        W = self.adjacency
        deg = np.asarray(W.sum(axis=1)).ravel()
        return (sp.diags(deg) - W).tocsr()

    def is_connected(self) -> bool:
        ncomp, _ = connected_components(self.adjacency != 0, directed=False)
        return ncomp == 1 or self.n == 0

    def _check_vertex(self, x: int):
        if not (isinstance(x, (int, np.integer)) and 0 <= x < self.n):
            raise KeyError(f"unknown vertex id {x!r}")

    def with_conductance(self, conductance) -> "FiniteNetwork":
        return FiniteNetwork(self.coords, self.edges, conductance, self.boundary)


def as_field(net: FiniteNetwork, values) -> ScalarField:
    """Turn an array or a ``{vertex: value}`` mapping into a full field."""
    if isinstance(values, Mapping):
        u = np.full(net.n, np.nan)
        for k, v in values.items():
            u[int(k)] = v
    else:
        u = np.asarray(values, dtype=float)
    if u.shape != (net.n,) or not np.all(np.isfinite(u)):
        raise ValueError("field must assign a finite value to every vertex")
    return u


def laplacian(net: FiniteNetwork, u: ScalarField, x: int) -> float:
    net._check_vertex(x)
    nb = net.neighbors(x)
    if not nb:
        raise ValueError(f"vertex {x} has no neighbors")
    return float(sum(net.c(x, y) * (u[x] - u[y]) for y in nb))


def normal_derivative(net: FiniteNetwork, u: ScalarField, x: int, F: Iterable[int]) -> float:
    """Flux of u out of x into the set F; x must lie in the vertex boundary of F."""
    net._check_vertex(x)
    F = set(F)
    if x in F:
        raise ValueError(f"vertex {x} lies in F, not in its boundary")
    inside = [y for y in net.neighbors(x) if y in F]
    if not inside:
        raise ValueError(f"vertex {x} has no neighbor in F")
    return float(sum(net.c(x, y) * (u[x] - u[y]) for y in inside))


def vertex_boundary(net: FiniteNetwork, F: Iterable[int]) -> set[int]:
    """delta F: vertices outside F adjacent to F."""
    F = set(F)
    return {y for x in F for y in net.neighbors(x) if y not in F}


def green_identity_residual(net: FiniteNetwork, u: ScalarField, v: ScalarField,
                            F: Iterable[int]) -> float:
    """|LHS - RHS| of the first Green identity over F.

    LHS sums c (du)(dv) over edges with an endpoint in F; RHS is
    sum_F (Lap u) v plus sum_{dF} (du/dn) v.
    """
    F = np.asarray(sorted(set(int(x) for x in F)), dtype=np.int64)
    inF = np.zeros(net.n, dtype=bool)
    inF[F] = True
    a, b = net.edges[:, 0], net.edges[:, 1]
    c = net.conductance
    du, dv = u[a] - u[b], v[a] - v[b]
    touch = inF[a] | inF[b]
    lhs = math.fsum(c[touch] * du[touch] * dv[touch])

    lap_F = np.zeros(net.n)
    # Laplacian at x in F uses every neighbor.
    np.add.at(lap_F, a[inF[a]], (c * du)[inF[a]])
    np.add.at(lap_F, b[inF[b]], (-c * du)[inF[b]])
    # Normal derivative at x in dF uses neighbors in F only.
    nd = np.zeros(net.n)
    m1 = ~inF[a] & inF[b]
    np.add.at(nd, a[m1], (c * du)[m1])
    m2 = inF[a] & ~inF[b]
    np.add.at(nd, b[m2], (-c * du)[m2])
    rhs = math.fsum(np.concatenate([lap_F[inF] * v[inF], nd[~inF] * v[~inF]]))
    return abs(lhs - rhs)


def energy_scale(net: FiniteNetwork, u: ScalarField, v: ScalarField, F: Iterable[int]) -> float:
    """Scale for Green residuals: sum of c |du| |dv| over edges touching F, plus one."""
    inF = np.zeros(net.n, dtype=bool)
    inF[list(set(F))] = True
    a, b = net.edges[:, 0], net.edges[:, 1]
    touch = inF[a] | inF[b]
    return float(np.sum(net.conductance[touch] * np.abs(u[a] - u[b])[touch]
                        * np.abs(v[a] - v[b])[touch])) + 1.0


@dataclass(frozen=True)
class DirichletSpec:
    """Value k on ``high_set`` and ``low_value`` (normally 0) on each low set."""

    high_set: tuple[int, ...]
    low_sets: tuple[tuple[int, ...], ...]
    k: float
    low_value: float = 0.0

    def __post_init__(self):
        hi = tuple(sorted(set(int(v) for v in self.high_set)))
        lows = tuple(tuple(sorted(set(int(v) for v in s))) for s in self.low_sets)
        object.__setattr__(self, "high_set", hi)
        object.__setattr__(self, "low_sets", lows)
        if not hi or not lows or any(not s for s in lows):
            raise ValueError("boundary sets must be nonempty")
        allow = set(hi)
        for s in lows:
            if allow & set(s):
                raise ValueError("boundary sets must be disjoint")
            allow |= set(s)
        if not self.k > self.low_value:
            raise ValueError("k must exceed the low boundary value")

    def fixed(self) -> dict[int, float]:
        out = {v: float(self.k) for v in self.high_set}
        for s in self.low_sets:
            out.update({v: float(self.low_value) for v in s})
        return out

    @classmethod
    def for_network(cls, net: FiniteNetwork, k: float, low_value: float = 0.0) -> "DirichletSpec":
        inner = tuple(net.boundary[n] for n in sorted(net.boundary) if n != "E1")
        return cls(net.boundary["E1"], inner, k, low_value)


@dataclass(frozen=True)
class DirichletNeumannSpec:
    """Dirichlet arcs with prescribed values and Neumann arcs with zero flux.

    Neumann vertices are unknowns whose full Laplacian vanishes, i.e. the
    current they exchange with all of their neighbors balances.  Vertices
    in no arc are interior.
    """

    dirichlet: tuple[tuple[tuple[int, ...], float], ...]
    neumann: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        seen: set[int] = set()
        arcs = []
        for verts, val in self.dirichlet:
            verts = tuple(int(v) for v in verts)
            if seen & set(verts):
                raise ValueError("arcs must be disjoint")
            seen |= set(verts)
            arcs.append((verts, float(val)))
        neu = []
        for verts in self.neumann:
            verts = tuple(int(v) for v in verts)
            if seen & set(verts):
                raise ValueError("arcs must be disjoint")
            seen |= set(verts)
            neu.append(verts)
        object.__setattr__(self, "dirichlet", tuple(arcs))
        object.__setattr__(self, "neumann", tuple(neu))

    def fixed(self) -> dict[int, float]:
        return {v: val for verts, val in self.dirichlet for v in verts}


def _solve_fixed(net: FiniteNetwork, fixed: Mapping[int, float]) -> ScalarField:
    """Harmonic extension of the values in ``fixed`` to every other vertex."""
    n = net.n
    if not fixed:
        raise SolverError("underdetermined system: no Dirichlet data")
    is_fixed = np.zeros(n, dtype=bool)
    ids = np.fromiter(fixed.keys(), dtype=np.int64)
    if ids.min() < 0 or ids.max() >= n:
        raise SolverError("Dirichlet data references an unknown vertex")
    is_fixed[ids] = True
    u = np.zeros(n)
    u[ids] = np.fromiter(fixed.values(), dtype=float)
    free = np.flatnonzero(~is_fixed)
    if len(free) == 0:
        return u

    W = net.adjacency
    Wff = W[free][:, free]
    # every free component must be tied to a Dirichlet vertex by a positive edge
    ncomp, labels = connected_components(Wff > 0, directed=False)
    tie = np.asarray(W[free][:, np.flatnonzero(is_fixed)].sum(axis=1)).ravel() > 0
    anchored = np.zeros(ncomp, dtype=bool)
    anchored[labels[tie]] = True
    if not anchored.all():
        orphan = free[labels == int(np.argmin(anchored))]
        raise SolverError(f"interior component {orphan[:10].tolist()} touches no boundary")

    L = net.laplacian_matrix
    A = L[free][:, free].tocsc()
    rhs = -(L[free][:, np.flatnonzero(is_fixed)] @ u[is_fixed])
    if len(free) <= DIRECT_SOLVE_LIMIT:
        x = spla.spsolve(A, rhs, permc_spec="MMD_AT_PLUS_A")
    else:
        x, info = spla.cg(A, rhs, rtol=CG_RTOL, maxiter=20 * len(free))
        if info != 0:
            raise SolverError("conjugate gradient did not converge")
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values")
    u[free] = x
    return u


def flux_scale(net: FiniteNetwork, u: ScalarField) -> float:
    a, b = net.edges[:, 0], net.edges[:, 1]
    return float(np.sum(net.conductance * np.abs(u[a] - u[b]))) + 1e-300


def _post_check(net: FiniteNetwork, u: ScalarField, free: np.ndarray):
    lap = net.laplacian_matrix @ u
    # constant data has no flux; round-off then scales with the values
    scale = max(flux_scale(net, u),
                float(np.max(np.abs(u), initial=0.0)) * float(np.max(net.conductance, initial=0.0)))
    worst = float(np.max(np.abs(lap[free]))) if len(free) else 0.0
    if worst > RESIDUAL_TOL * scale:
        raise SolverError(f"harmonic residual {worst:.3e} exceeds tolerance")
    # consistency: total flux leaving the boundary into the interior vanishes
    total = math.fsum(lap[free]) if len(free) else 0.0
    if abs(total) > RESIDUAL_TOL * scale:
        raise SolverError(f"boundary flux imbalance {total:.3e}")


def solve_dirichlet(net: FiniteNetwork, spec: DirichletSpec) -> ScalarField:
    """Solve Lap u = 0 off the boundary sets with u = k on high, low_value on lows."""
    fixed = spec.fixed()
    if max(fixed) >= net.n:
        raise SolverError("boundary set references an unknown vertex")
    u = _solve_fixed(net, fixed)
    free = np.setdiff1d(np.arange(net.n), np.fromiter(fixed, dtype=np.int64))
    _post_check(net, u, free)
    return u


def solve_dirichlet_neumann(net: FiniteNetwork, spec: DirichletNeumannSpec) -> ScalarField:
    """Solve the mixed problem; Neumann vertices carry a zero full Laplacian."""
    fixed = spec.fixed()
    if not fixed:
        raise SolverError("underdetermined system: no Dirichlet data")
    u = _solve_fixed(net, fixed)
    free = np.setdiff1d(np.arange(net.n), np.fromiter(fixed, dtype=np.int64))
    _post_check(net, u, free)
    return u


def max_principle_violations(u: ScalarField, fixed: Iterable[int]) -> list[int]:
    """Free vertices whose value is not strictly between the boundary extremes.

    Returns an empty list when the boundary data is constant (strictness
    cannot hold there and is not claimed).
    """
    fixed = np.asarray(sorted(set(fixed)), dtype=np.int64)
    lo, hi = u[fixed].min(), u[fixed].max()
    if lo == hi:
        return []
    free = np.setdiff1d(np.arange(len(u)), fixed)
    bad = free[(u[free] <= lo) | (u[free] >= hi)]
    return bad.tolist()


def total_flux(net: FiniteNetwork, u: ScalarField, S: Sequence[int]) -> float:
    """Current leaving the vertex set S: sum over x in S, y not in S of c (u(x) - u(y))."""
    inS = np.zeros(net.n, dtype=bool)
    inS[list(S)] = True
    a, b = net.edges[:, 0], net.edges[:, 1]
    c = net.conductance
    out = inS[a] & ~inS[b]
    inn = inS[b] & ~inS[a]
    return math.fsum(np.concatenate([c[out] * (u[a] - u[b])[out], c[inn] * (u[b] - u[a])[inn]]))
