import functools
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from uniformize import load_mesh, run_pipeline  # noqa: E402
from uniformize.network import DirichletSpec, solve_dirichlet  # noqa: E402

FIXTURES = Path(__file__).resolve().parent / "fixtures"
ANNULI = ["wheel", "g8x3", "annulus_a", "annulus_b"]


@functools.lru_cache(maxsize=None)
def mesh(name):
    return load_mesh(FIXTURES / f"{name}.json")


@functools.lru_cache(maxsize=None)
def complex_and_g(name):
    doc = mesh(name)
    cx = doc.to_complex()
    return cx, solve_dirichlet(cx.net, DirichletSpec.for_network(cx.net, doc.k))


@functools.lru_cache(maxsize=None)
def pipeline(name):
    """One full run per fixture, shared by every test module."""
    return run_pipeline(mesh(name))


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def polar_annulus(n_rings, n_spokes, r0=1.0, dr=1.0):
    """Quad annulus on concentric rings, as plain arrays."""
    verts, quads = [], []
    for i in range(n_rings):
        for j in range(n_spokes):
            a = 2 * math.pi * j / n_spokes
            verts.append([(r0 + i * dr) * math.cos(a), (r0 + i * dr) * math.sin(a)])
    for i in range(n_rings - 1):
        for j in range(n_spokes):
            a = i * n_spokes + j
            b = i * n_spokes + (j + 1) % n_spokes
            quads.append((a, b, b + n_spokes, a + n_spokes))
    return np.array(verts), quads


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
