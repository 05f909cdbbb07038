"""Closeness to the smooth map on a fine concentric annulus.

Not an acceptance gate: the discrete map only approaches the conformal
one as the mesh is refined.
"""

import numpy as np
import pytest

from conftest import mesh
from uniformize import run_pipeline
from uniformize.pipeline import Options

# spoke 0 from the outer ring (1 + 12/12) down to the inner ring
STRAIGHT_SLIT = tuple(768 - 64 * k for k in range(13))


@pytest.fixture(scope="module")
def fine():
    return run_pipeline(mesh("fine_annulus"), Options(slit=STRAIGHT_SLIT)).annulus


def test_fine_annulus_checks_pass(fine):
    assert fine.ok, [c.name for c in fine.checks if not c.passed]


def test_fine_annulus_close_to_identity(fine):
    # radii 1 and 2 with the slit on the positive x axis: the smooth map is z -> z
    z = fine.complex.coords
    im = fine.map.vertex_images()[: len(z)]
    rel = np.hypot(*(im - z).T) / np.hypot(*z.T)
    assert rel.max() < 0.05
    assert fine.target.radii[-1] == pytest.approx(2.0, rel=5e-3)
