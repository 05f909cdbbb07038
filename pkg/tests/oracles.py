"""Independent reference computations for the tests.

Everything here is built straight from the definitions with dense
numpy linear algebra, and shares no code with the package beyond
reading its network data.
"""

import numpy as np


def dense_laplacian(n, edges, cond):
    L = np.zeros((n, n))
    for (a, b), c in zip(edges, cond):
        L[a, a] += c
        L[b, b] += c
        L[a, b] -= c
        L[b, a] -= c
    return L


def dense_dirichlet(n, edges, cond, fixed):
    """Solve Lap u = 0 on the free vertices by Gaussian elimination.

    ``fixed`` maps vertex -> value.  Every other vertex is free and
    carries a zero Laplacian (for Neumann vertices that is the no-flux
    condition).
    """
    L = dense_laplacian(n, edges, cond)
    fix = np.array(sorted(fixed), dtype=int)
    free = np.array([v for v in range(n) if v not in fixed], dtype=int)
    u = np.zeros(n)
    u[fix] = [fixed[v] for v in fix]
    if len(free):
        A = L[np.ix_(free, free)]
        rhs = -L[np.ix_(free, fix)] @ u[fix]
        u[free] = np.linalg.solve(A, rhs)
    return u


def net_oracle(net, fixed):
    return dense_dirichlet(net.n, net.edges.tolist(), net.conductance.tolist(), fixed)


def green_sides(n, edges, cond, u, v, F):
    """Both sides of the first Green identity, summed term by term."""
    F = set(F)
    lhs = 0.0
    for (a, b), c in zip(edges, cond):
        if a in F or b in F:
            lhs += c * (u[a] - u[b]) * (v[a] - v[b])
    nb = {x: [] for x in range(n)}
    for (a, b), c in zip(edges, cond):
        nb[a].append((b, c))
        nb[b].append((a, c))
    rhs = 0.0
    for x in range(n):
        if x in F:
            rhs += sum(c * (u[x] - u[y]) for y, c in nb[x]) * v[x]
        else:
            inside = [(y, c) for y, c in nb[x] if y in F]
            if inside:
                rhs += sum(c * (u[x] - u[y]) for y, c in inside) * v[x]
    return lhs, rhs


def random_planar_network(seed, n_min=10, n_max=200):
    """Delaunay network on random points with conductances in [0.5, 2].

    The convex hull is the high set and the vertex nearest the centroid
    the low set.
    """
    from scipy.spatial import ConvexHull, Delaunay

    from uniformize.network import FiniteNetwork, edge_key

    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    pts = rng.uniform(-1, 1, size=(n, 2))
    tri = Delaunay(pts)
    edges = sorted({edge_key(int(s[i]), int(s[(i + 1) % 3])) for s in tri.simplices for i in range(3)})
    cond = {e: float(c) for e, c in zip(edges, rng.uniform(0.5, 2.0, len(edges)))}
    hull = [int(v) for v in ConvexHull(pts).vertices]
    centre = int(np.argmin(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
    if centre in hull:
        centre = next(v for v in range(n) if v not in hull)
    net = FiniteNetwork.from_dict(pts, cond, {"E1": tuple(hull), "E2_1": (centre,)})
    return net, hull, [centre]
