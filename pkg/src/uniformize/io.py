"""Mesh ingestion and result serialization.

Meshes and results are JSON documents validated against the versioned
schemas shipped in ``uniformize/schemas``.  Floats are written with 17
significant digits and keys in sorted order, so identical inputs give
identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import ConductanceError, MeshError
from .network import edge_key
from .plgeom import PLComplex

MESH_SCHEMA = "mesh-1.schema.json"
RESULT_SCHEMA = "result-1.schema.json"


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("uniformize").joinpath("schemas", name).read_text()
    return json.loads(text)


@dataclass
class MeshDocument:
    vertices: np.ndarray
    triangles: list[tuple[int, int, int]]
    outer: tuple[int, ...]
    inner: list[tuple[int, ...]]
    conductance: dict[tuple[int, int], float]
    k: float = 1.0
    quads: list[tuple[int, int, int, int]] = field(default_factory=list)
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def connectivity(self) -> int:
        return 1 + len(self.inner)

    def cells(self):
        return [tuple(t) for t in self.triangles] + [tuple(q) for q in self.quads]

    def to_complex(self) -> PLComplex:
        cx = PLComplex.from_cells(self.vertices, self.cells(), self.conductance)
        if not _same_cycle(cx.outer, self.outer):
            raise MeshError("declared outer boundary does not match the mesh boundary")
        if len(cx.inner) != len(self.inner):
            raise MeshError(f"mesh has {len(cx.inner)} inner boundaries, document declares {len(self.inner)}")
        remaining = list(cx.inner)
        ordered = []
        for cyc in self.inner:
            match = [c for c in remaining if _same_cycle(c, cyc)]
            if not match:
                raise MeshError(f"declared inner boundary starting at {cyc[0]} is not a mesh boundary")
            remaining.remove(match[0])
            ordered.append(match[0])
        if not cx.net.is_connected():
            raise MeshError("mesh graph is not connected")
        return cx

    def with_conductance(self, cond: dict) -> "MeshDocument":
        return MeshDocument(self.vertices, self.triangles, self.outer, self.inner, dict(cond),
                            self.k, self.quads, self.name)


def _same_cycle(a, b) -> bool:
    a, b = list(a), list(b)
    if len(a) != len(b) or set(a) != set(b):
        return False
    if not a:
        return True
    i = a.index(b[0])
    rot = a[i:] + a[:i]
    if rot == b:
        return True
    rev = a[::-1]
    i = rev.index(b[0])
    return rev[i:] + rev[:i] == b


def _simple_cycle(cyc, what):
    seen = set()
    for v in cyc:
        if v in seen:
            raise MeshError(f"{what} visits vertex {v} twice")
        seen.add(v)


def parse_mesh(data: Any, source: str = "<mesh>") -> MeshDocument:
    """Validate a decoded mesh JSON object and build a MeshDocument."""
    validator = jsonschema.Draft202012Validator(load_schema(MESH_SCHEMA))
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "(root)"
        raise MeshError(f"{source}: field {where}: {e.message}")
    raw = data["vertices"]
    if raw and isinstance(raw[0], dict):
        n = len(raw)
        xy = [None] * n
        for item in raw:
            vid = item["id"]
            if vid >= n:
                raise MeshError(f"{source}: vertex id {vid} out of range (ids must be 0..{n - 1})")
            if xy[vid] is not None:
                raise MeshError(f"{source}: duplicate vertex id {vid}")
            xy[vid] = item["xy"]
        verts = np.array(xy, dtype=float)
    else:
        verts = np.array(raw, dtype=float)
    n = len(verts)
    if not np.all(np.isfinite(verts)):
        raise MeshError(f"{source}: non-finite vertex coordinate")

    def check_ids(ids, what):
        for v in ids:
            if not 0 <= v < n:
                raise MeshError(f"{source}: {what} references dangling vertex id {v}")

    tris = [tuple(t) for t in data.get("triangles", [])]
    quads = [tuple(q) for q in data.get("quads", [])]
    if not tris and not quads:
        raise MeshError(f"{source}: mesh has no cells")
    for i, t in enumerate(tris):
        check_ids(t, f"triangle {i}")
    for i, q in enumerate(quads):
        check_ids(q, f"quad {i}")
    outer = tuple(data["boundary"]["outer"])
    inner = [tuple(c) for c in data["boundary"]["inner"]]
    check_ids(outer, "outer boundary")
    _simple_cycle(outer, "outer boundary")
    for i, c in enumerate(inner):
        check_ids(c, f"inner boundary {i}")
        _simple_cycle(c, f"inner boundary {i}")

    spec = data.get("conductance", 1.0)
    if isinstance(spec, (int, float)):
        default, explicit = float(spec), []
    else:
        default, explicit = float(spec.get("default", 1.0)), spec.get("edges", [])
    edges = set()
    for cyc in tris + quads:
        for i in range(len(cyc)):
            edges.add(edge_key(cyc[i], cyc[(i + 1) % len(cyc)]))
    cond = {e: default for e in edges}
    for a, b, c in explicit:
        key = edge_key(int(a), int(b))
        if key not in edges:
            raise MeshError(f"{source}: conductance given for non-edge {key}")
        cond[key] = float(c)
    bad = [e for e, c in cond.items() if not (math.isfinite(c) and c > 0)]
    if bad:
        raise ConductanceError(f"{source}: non-positive conductance on edge {sorted(bad)[0]}")

    return MeshDocument(verts, tris, outer, inner, cond, float(data.get("k", 1.0)), quads,
                        data.get("name", Path(source).stem))


def load_mesh(path) -> MeshDocument:
    """Read and validate a mesh file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    doc = parse_mesh(data, str(path))
    doc.to_complex()
    return doc


# ----------------------------------------------------------------------------
# serialization

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("cannot serialize a non-finite float")
    s = "%.17g" % x
    if "e" not in s and "." not in s and "inf" not in s and "nan" not in s:
        s += ".0"
    return s


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ","
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (list, tuple, dict, np.ndarray)) for x in obj):
            return "[" + ", ".join(_encode(x, 0, 0) for x in obj) + "]"
        return "[" + pad + sep.join(_encode(x, indent, level + 1) for x in obj) + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        body = sep.join(json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in items)
        return "{" + pad + body + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 1) -> str:
    """JSON text with sorted keys and 17 significant digits per float."""
    return _encode(obj, indent, 0) + "\n"


def validate_result(doc: dict):
    jsonschema.Draft202012Validator(load_schema(RESULT_SCHEMA)).validate(doc)


def write_json(doc: dict, path) -> Path:
    path = Path(path)
    try:
        path.write_text(dumps(doc))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
