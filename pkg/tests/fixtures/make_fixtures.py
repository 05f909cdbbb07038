"""Regenerate the mesh fixtures in this directory.

    python tests/fixtures/make_fixtures.py

Every mesh is deterministic (fixed seeds), so rerunning reproduces the
checked-in files byte for byte.
"""

import json
import math
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

HERE = Path(__file__).resolve().parent


def polar_quads(n_rings, n_spokes, r0=1.0, dr=1.0):
    """Quad grid on concentric rings; ring 0 is the hole."""
    verts = []
    for i in range(n_rings):
        r = r0 + i * dr
        for j in range(n_spokes):
            a = 2 * math.pi * j / n_spokes
            verts.append([r * math.cos(a), r * math.sin(a)])
    quads = []
    for i in range(n_rings - 1):
        for j in range(n_spokes):
            a = i * n_spokes + j
            b = i * n_spokes + (j + 1) % n_spokes
            quads.append([a, b, b + n_spokes, a + n_spokes])
    inner = list(range(n_spokes))[::-1]
    outer = list(range((n_rings - 1) * n_spokes, n_rings * n_spokes))
    return verts, quads, outer, inner


def circle(c, r, m, phase=0.0):
    a = phase + 2 * math.pi * np.arange(m) / m
    return np.column_stack([c[0] + r * np.cos(a), c[1] + r * np.sin(a)])


def cotan_weights(P, tris, floor):
    w = {}
    for t in tris:
        for k in range(3):
            i, j, o = t[k], t[(k + 1) % 3], t[(k + 2) % 3]
            u, v = P[i] - P[o], P[j] - P[o]
            cot = float(np.dot(u, v) / abs(u[0] * v[1] - u[1] * v[0]))
            key = (min(i, j), max(i, j))
            w[key] = w.get(key, 0.0) + 0.5 * cot
    return {e: max(c, floor) for e, c in w.items()}


def domain_mesh(outer_r, holes, n_outer, hole_counts, n_interior, seed, spacing):
    """Delaunay mesh of a disk minus round holes.

    Boundary vertices are evenly spaced; interior points are rejection
    sampled with a minimum spacing so no triangle is a sliver.
    """
    rng = np.random.default_rng(seed)
    pts = [circle((0, 0), outer_r, n_outer, phase=0.1)]
    for (c, r), m in zip(holes, hole_counts):
        pts.append(circle(c, r, m, phase=0.3))
    bnd = np.vstack(pts)
    interior = []
    tries = 0
    while len(interior) < n_interior and tries < 200000:
        tries += 1
        p = rng.uniform(-outer_r, outer_r, 2)
        if np.hypot(*p) > outer_r - 0.6 * spacing:
            continue
        if any(np.hypot(*(p - np.asarray(c))) < r + 0.6 * spacing for c, r in holes):
            continue
        cand = np.vstack([bnd] + ([np.array(interior)] if interior else []))
        if np.min(np.hypot(*(cand - p).T)) < spacing:
            continue
        interior.append(p)
    P = np.vstack([bnd, np.array(interior)])
    tri = Delaunay(P).simplices
    keep = []
    for t in tri:
        c = P[t].mean(axis=0)
        if np.hypot(*c) > outer_r:
            continue
        if any(np.hypot(*(c - np.asarray(hc))) < hr for hc, hr in holes):
            continue
        keep.append([int(x) for x in t])
    # boundary cycles
    offs = np.cumsum([0, n_outer] + list(hole_counts))
    outer = list(range(0, n_outer))
    inner = [list(range(offs[i + 1], offs[i + 2]))[::-1] for i in range(len(holes))]
    return P, keep, outer, inner


def check_mesh(P, tris, outer, inner):
    comp = {}
    for i, cyc in enumerate([outer] + inner):
        for v in cyc:
            comp[v] = i
    bedges = set()
    for cyc in [outer] + inner:
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            bedges.add((min(a, b), max(a, b)))
    for t in tris:
        cs = [comp.get(v) for v in t]
        if cs[0] is not None and cs[0] == cs[1] == cs[2]:
            return False
        for k in range(3):
            a, b = t[k], t[(k + 1) % 3]
            if comp.get(a) is not None and comp.get(a) == comp.get(b) and (min(a, b), max(a, b)) not in bedges:
                return False
    return True


def write(name, verts, outer, inner, k, triangles=None, quads=None, conductance=None, note=""):
    doc = {"schema": "uniformize-mesh/1", "name": name}
    if note:
        doc["note"] = note
    doc["vertices"] = [[round(float(x), 12), round(float(y), 12)] for x, y in verts]
    if triangles:
        doc["triangles"] = [[int(v) for v in t] for t in triangles]
    if quads:
        doc["quads"] = [[int(v) for v in q] for q in quads]
    doc["boundary"] = {"outer": [int(v) for v in outer], "inner": [[int(v) for v in c] for c in inner]}
    if conductance is None:
        doc["conductance"] = {"default": 1.0}
    else:
        doc["conductance"] = {"default": 1.0,
                              "edges": [[a, b, round(c, 12)] for (a, b), c in sorted(conductance.items())]}
    doc["k"] = k
    (HERE / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


def irregular(name, seed, n_interior, cotan, holes, outer_r, n_outer, hole_counts, spacing, k=1.0):
    for attempt in range(50):
        P, tris, outer, inner = domain_mesh(outer_r, holes, n_outer, hole_counts, n_interior,
                                            seed + attempt, spacing)
        if check_mesh(P, tris, outer, inner):
            break
    else:
        raise RuntimeError(f"could not build {name}")
    cond = cotan_weights(P, tris, 0.05) if cotan else None
    write(name, P, outer, inner, k, triangles=tris, conductance=cond,
          note=f"seed {seed + attempt}, {'clamped cotangent' if cotan else 'unit'} conductances")


def fine_annulus(n_rings=13, n_spokes=64):
    """Triangulated annulus 1 <= r <= 2 with rings spaced geometrically."""
    verts = []
    for i in range(n_rings):
        r = 2.0 ** (i / (n_rings - 1))
        for j in range(n_spokes):
            a = 2 * math.pi * (j + 0.5 * (i % 2)) / n_spokes
            verts.append([r * math.cos(a), r * math.sin(a)])
    tris = []
    for i in range(n_rings - 1):
        for j in range(n_spokes):
            a = i * n_spokes + j
            b = i * n_spokes + (j + 1) % n_spokes
            c = (i + 1) * n_spokes + j
            d = (i + 1) * n_spokes + (j + 1) % n_spokes
            if i % 2 == 0:
                tris += [[a, b, c], [b, d, c]]
            else:
                tris += [[a, b, d], [a, d, c]]
    P = np.array(verts)
    cond = cotan_weights(P, tris, 0.05)
    inner = list(range(n_spokes))[::-1]
    outer = list(range((n_rings - 1) * n_spokes, n_rings * n_spokes))
    write("fine_annulus", verts, outer, [inner], 1.0, triangles=tris, conductance=cond,
          note="geometric ring spacing, cotangent conductances")


def main():
    v, q, o, i = polar_quads(2, 4)
    write("wheel", v, o, [i], 1.0, quads=q, note="two rings, four spokes")
    v, q, o, i = polar_quads(3, 8)
    write("g8x3", v, o, [i], 1.0, quads=q, note="three rings, eight spokes")
    irregular("annulus_a", 11, 70, False, [((0.0, 0.0), 1.0)], 3.0, 24, [10], 0.42)
    irregular("annulus_b", 23, 110, True, [((0.35, -0.2), 0.9)], 3.0, 28, [12], 0.36)
    irregular("p3", 31, 120, True, [((-1.5, 0.0), 0.6), ((1.4, 0.35), 0.8)], 3.6, 30, [8, 10], 0.42)
    irregular("c4", 47, 150, True, [((-1.6, -0.9), 0.55), ((1.5, -0.7), 0.7), ((0.1, 1.6), 0.6)],
              3.8, 32, [8, 9, 8], 0.42)
    fine_annulus()


if __name__ == "__main__":
    main()
