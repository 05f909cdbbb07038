"""Result documents and SVG figures."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .annulus import AnnulusResult
from .io import dumps, validate_result

RESULT_ID = "uniformize-result/1"


def plain(obj):
    """Lists, dicts, and Python scalars only, so that a JSON round trip
    gives back an equal object."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(x) for x in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def annulus_document(r: AnnulusResult) -> dict:
    net, tg, q = r.net, r.target, r.q
    cyl = r.cylinder
    return {
        "k": r.k,
        "t_lo": r.t_lo,
        "period": r.period,
        "width": r.width,
        "slit": list(r.slit.path),
        "quadrilateral": {"orig": q.orig, "base": q.base, "top": q.top, "qe1": q.qe1, "qe2": q.qe2},
        "h": r.h,
        "levels": {
            "g": net.g_values,
            "h": net.h_values,
            "g_curves": [L.xy for L in net.g_levels],
            "h_curves": [M.xy for M in net.h_levels],
        },
        "net": {"shape": list(net.shape), "lattice": net.lattice, "source_area": net.cell_area,
                "nu": r.nu, "lambda": r.lam},
        "target": {"radii": tg.radii, "angles": tg.angles, "dphi": tg.dphi,
                   "stated_radii": list(tg.stated_radii), "area": tg.area},
        "cylinder": {"a": cyl.a, "b": cyl.b, "height": cyl.height},
        "map": {"vertex_images": r.map.vertex_images()},
        "checks": [c.as_dict() for c in r.checks],
    }


def result_document(res) -> dict:
    """The full ResultDocument of a pipeline run."""
    from .pipeline import tree_summary

    doc = res.doc
    out = {
        "schema": RESULT_ID,
        "version": __version__,
        "input": {"name": doc.name, "vertices": doc.n, "connectivity": doc.connectivity, "k": res.k},
        "options": res.options.as_dict(),
        "perturbation_round": res.perturbation,
        "kind": res.kind,
        "g": res.g,
        "checks": [c.as_dict() for c in res.all_checks()],
        "ok": res.ok,
    }
    if res.annulus is not None:
        out["annulus"] = annulus_document(res.annulus)
    else:
        lad = res.ladder
        out["ladder"] = {
            "tree": tree_summary(res.tree),
            "pieces": [{"path": p.path, "kind": p.kind, "parent": p.parent, "circle": p.circle,
                        "scale": p.scale, "cylinder_scale": p.cylinder_scale,
                        "annulus": annulus_document(p.result)} for p in lad.pieces],
            "glued": [{"parent": g.parent, "child": g.child, "circle": g.circle,
                       "parent_length": g.parent_length, "child_length": g.child_length}
                      for g in lad.glued],
            "boundary_lengths": [{"boundary": n, "length": x} for n, x in lad.boundary_lengths],
            "cone_points": [{"vertex": c.vertex, "piece": c.piece, "xy": list(c.xy),
                             "multiplicity": c.multiplicity, "incident": c.incident,
                             "angle": c.angle, "geometric_angle": c.geometric_angle}
                            for c in lad.cone_points],
            "candidates_per_split": lad.candidates,
        }
    out = plain(out)
    validate_result(out)
    return out


def write_result(res, path) -> Path:
    path = Path(path)
    path.write_text(dumps(result_document(res)))
    return path


# ----------------------------------------------------------------------------
# SVG

def _f(x: float) -> str:
    return f"{x:.6g}"


def _polyline(xy, cls: str, tf) -> str:
    pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in (tf(p) for p in xy))
    return f'<polyline class="{cls}" points="{pts}"/>'


def _shell_path(r0, r1, a0, da, cx, cy, s) -> str:
    a1 = a0 + da
    large = 1 if da > math.pi else 0

    def pt(r, a):
        return f"{_f(cx + s * r * math.cos(a))},{_f(cy - s * r * math.sin(a))}"

    # counterclockwise on the page is sweep flag 0 once y is flipped
    d = (f"M{pt(r0, a0)} L{pt(r1, a0)} A{_f(s * r1)},{_f(s * r1)} 0 {large} 0 {pt(r1, a1)} "
         f"L{pt(r0, a1)} A{_f(s * r0)},{_f(s * r0)} 0 {large} 1 {pt(r0, a0)} Z")
    return f'<path class="shell" d="{d}"/>'


def _shells(r: AnnulusResult, cx, cy, half) -> list[str]:
    tg = r.target
    s = half / float(tg.radii[-1])
    out = []
    for i in range(len(tg.radii) - 1):
        for j in range(len(tg.angles) - 1):
            out.append(_shell_path(float(tg.radii[i]), float(tg.radii[i + 1]), float(tg.angles[j]),
                                   float(tg.dphi[j]), cx, cy, s))
    return out


def render_svg(res, size: float = 480.0) -> str:
    """Source domain with both level families, next to the target tiling.

    A ladder shows one flat annulus per piece, left to right.
    """
    cx = res.complex
    xy = cx.coords
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    pad = 10.0
    sc = (size - 2 * pad) / span

    def tf(p):
        return (pad + sc * (p[0] - lo[0]), size - pad - sc * (p[1] - lo[1]))

    pieces = [res.annulus] if res.annulus is not None else [p.result for p in res.ladder.pieces]
    width = size * (1 + len(pieces))
    el = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(size)}" '
          f'viewBox="0 0 {_f(width)} {_f(size)}">',
          "<style>.mesh{stroke:#ccc;stroke-width:0.5;fill:none}"
          ".g-level{stroke:#c33;stroke-width:1;fill:none}"
          ".h-level{stroke:#36c;stroke-width:1;fill:none}"
          ".shell{stroke:#333;stroke-width:0.4;fill:#eef}</style>",
          f"<title>{escape(res.doc.name or 'domain')}</title>",
          '<g id="source">']
    for c in cx.cells:
        el.append(_polyline(xy[list(c) + [c[0]]], "mesh", tf))
    for r in pieces:
        for L in r.net.g_levels:
            el.append(_polyline(L.polyline(), "g-level", tf))
        for M in r.net.h_levels:
            el.append(_polyline(M.polyline(), "h-level", tf))
    el.append("</g>")
    for n, r in enumerate(pieces):
        el.append(f'<g id="target-{n}">')
        el += _shells(r, size * (n + 1.5), size / 2, size / 2 - pad)
        el.append("</g>")
    el.append("</svg>")
    return "\n".join(el) + "\n"


def write_svg(res, path) -> Path:
    path = Path(path)
    path.write_text(render_svg(res))
    return path
