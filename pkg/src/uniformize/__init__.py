"""Discrete uniformization of planar multiply connected domains.

Solve a discrete Dirichlet problem on a triangulated domain, build the
conjugate and the harmonic conjugate, cut the domain into a rectangular
net of level curves, and map it onto a concentric annulus (two boundary
components) or a ladder of flat annuli glued at cone points (more).
"""

__version__ = "0.1.0"

from .errors import (ConductanceError, LevelError, MeshError, SolverError, TieError,  # noqa: E402
                     UniformizeError, VerificationError)
from .io import MeshDocument, load_mesh, parse_mesh  # noqa: E402
from .network import (DirichletNeumannSpec, DirichletSpec, FiniteNetwork,  # noqa: E402
                      solve_dirichlet, solve_dirichlet_neumann)
from .plgeom import PLComplex  # noqa: E402
from .annulus import AnnulusResult, uniformize_annulus  # noqa: E402
from .pipeline import Options, PipelineResult, run_pipeline  # noqa: E402

__all__ = [
    "__version__", "AnnulusResult", "ConductanceError", "DirichletNeumannSpec", "DirichletSpec",
    "FiniteNetwork", "LevelError", "MeshDocument", "MeshError", "Options", "PLComplex",
    "PipelineResult", "SolverError", "TieError", "UniformizeError", "VerificationError",
    "load_mesh", "parse_mesh", "run_pipeline", "solve_dirichlet", "solve_dirichlet_neumann",
    "uniformize_annulus",
]
