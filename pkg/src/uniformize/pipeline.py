"""Run the whole construction on a mesh document and collect the results.

Two boundary components go straight through the annulus pipeline; more
are split along maximal singular levels first and glued into a ladder.
"""

from __future__ import annotations

import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import plgeom
from .annulus import AnnulusResult, Check, uniformize_annulus
from .errors import MeshError, TieError, VerificationError
from .io import MeshDocument
from .network import DirichletSpec, ScalarField, flux_scale, max_principle_violations, solve_dirichlet
from .plgeom import PLComplex, Slit
from .singular import PantsLadder, assemble_ladder, build_tree, root_domain, uniformize_tree, walk

log = logging.getLogger(__name__)

PERTURB_EPS = 1e-3
PERTURB_ROUNDS = 3
PERTURB_SEED = 7


@dataclass
class Options:
    """Pipeline settings.  ``k`` overrides the document's value; ``slit``
    is a vertex path from E1 to E2 (annulus inputs only)."""

    k: float | None = None
    tolerance: float = plgeom.LEVEL_TOL
    slit: tuple[int, ...] | None = None
    perturb_ties: bool = False
    strict: bool = False
    verify: bool = True
    threads: int | None = None

    def workers(self) -> int:
        n = self.threads or os.cpu_count() or 1
        cap = os.environ.get("UNIFORMIZE_THREADS")
        if cap:
            try:
                n = min(n, max(1, int(cap)))
            except ValueError:
                log.warning("ignoring UNIFORMIZE_THREADS=%r", cap)
        return max(1, n)

    def as_dict(self) -> dict:
        return {"k": self.k, "tolerance": self.tolerance,
                "slit": None if self.slit is None else list(self.slit),
                "perturb_ties": self.perturb_ties, "strict": self.strict, "verify": self.verify}


@dataclass(eq=False)
class PipelineResult:
    doc: MeshDocument
    options: Options
    complex: PLComplex
    g: ScalarField
    k: float
    annulus: AnnulusResult | None = None
    tree: object = None
    ladder: PantsLadder | None = None
    perturbation: int = 0
    checks: list[Check] = field(default_factory=list)

    @property
    def kind(self) -> str:
        return "annulus" if self.annulus is not None else "ladder"

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.all_checks())

    def all_checks(self) -> list[Check]:
        """Every check, with piece checks prefixed by the piece path."""
        out = list(self.checks)
        if self.annulus is not None:
            out += self.annulus.checks
        if self.ladder is not None:
            out += self.ladder.checks
            for p in self.ladder.pieces:
                out += [Check(f"{p.path}: {c.name}", c.passed, c.residual, c.detail)
                        for c in p.result.checks]
        return out

    def to_document(self) -> dict:
        from .report import result_document
        return result_document(self)


@contextmanager
def using_level_tolerance(rel: float):
    """Temporarily set the relative tolerance for points on a level."""
    if not (0 < rel < 1e-3):
        raise ValueError(f"tolerance must lie in (0, 1e-3), got {rel!r}")
    old = plgeom.LEVEL_TOL
    plgeom.LEVEL_TOL = rel
    try:
        yield
    finally:
        plgeom.LEVEL_TOL = old


def perturbed_conductance(cond: dict, round_: int) -> dict:
    """Multiply every conductance by 1 + eps * U(-1, 1), seeded by the round.

    The perturbed g is the exact solution on a nearby network, which
    breaks the symmetric ties that make a cell flat or a saddle
    degenerate.
    """
    eps = PERTURB_EPS * 10.0 ** (round_ - 1)
    keys = sorted(cond)
    rng = np.random.default_rng(PERTURB_SEED + round_)
    f = 1.0 + eps * rng.uniform(-1.0, 1.0, len(keys))
    return {e: cond[e] * float(x) for e, x in zip(keys, f)}


def solve_g(cx: PLComplex, k: float) -> ScalarField:
    return solve_dirichlet(cx.net, DirichletSpec.for_network(cx.net, k))


def _field_checks(cx: PLComplex, g: ScalarField) -> list[Check]:
    L = cx.net.laplacian_matrix
    fixed = set(cx.outer) | {v for c in cx.inner for v in c}
    free = np.array([v for v in range(cx.n) if v not in fixed], dtype=np.int64)
    res = float(np.max(np.abs((L @ g)[free]))) if len(free) else 0.0
    rel = res / flux_scale(cx.net, g)
    bad = max_principle_violations(g, fixed)
    return [Check("harmonic", rel <= 1e-9, rel),
            Check("maximum_principle", not bad, float(len(bad)), f"vertices {bad[:5]}" if bad else "")]


def _run_once(doc: MeshDocument, opts: Options, cond: dict, round_: int) -> PipelineResult:
    cx = doc.with_conductance(cond).to_complex()
    k = doc.k if opts.k is None else float(opts.k)
    g = solve_g(cx, k)
    res = PipelineResult(doc, opts, cx, g, k, perturbation=round_)
    res.checks = _field_checks(cx, g)
    if doc.connectivity == 2:
        slit = None if opts.slit is None else Slit(tuple(int(v) for v in opts.slit))
        res.annulus = uniformize_annulus(cx, g, k, slit=slit)
    else:
        if opts.slit is not None:
            raise ValueError("an explicit slit applies to annulus inputs only")
        tree = build_tree(root_domain(cx, g, k))
        uniformize_tree(tree, opts.workers())
        res.tree = tree
        res.ladder = assemble_ladder(tree)
    return res


def run_pipeline(doc: MeshDocument, opts: Options | None = None) -> PipelineResult:
    """Solve, uniformize, and verify.

    Raises TieError listing the offending edges when equal values block
    the construction, unless ``perturb_ties`` is set; then conductances
    are perturbed (deterministically, with growing size) and the whole
    run is repeated, also when a run fails a check.  With ``strict``, a failed check raises
    VerificationError.
    """
    opts = opts or Options()
    if doc.connectivity < 2:
        raise MeshError("the domain needs at least one inner boundary")
    with using_level_tolerance(opts.tolerance):
        cond = doc.conductance
        round_ = 0
        while True:
            try:
                res = _run_once(doc, opts, cond, round_)
                # near-ties that survive the tolerance show up as failed
                # checks; with perturbation on, move away from them
                if res.ok or not opts.perturb_ties or round_ >= PERTURB_ROUNDS:
                    break
                reason = "checks failed"
            except TieError as exc:
                if not opts.perturb_ties or round_ >= PERTURB_ROUNDS:
                    raise
                reason = str(exc)
            round_ += 1
            log.info("%s; perturbing conductances, round %d", reason, round_)
            cond = perturbed_conductance(doc.conductance, round_)
    if opts.strict and opts.verify and not res.ok:
        bad = [c for c in res.all_checks() if not c.passed]
        raise VerificationError(f"{len(bad)} checks failed, first: {bad[0].name} {bad[0].detail}",
                                bad[0].residual)
    return res


def tree_summary(tree) -> list[dict]:
    """Flat description of the splitting tree, parents first."""
    from .singular import Node

    out = []

    def visit(node, path):
        d = node.domain
        item = {"path": path, "connectivity": d.connectivity, "high": d.high, "low": d.low,
                "kind": "singular_annulus" if isinstance(node, Node) else "annulus",
                "resolve_residual": d.solve_residual}
        if isinstance(node, Node):
            b = node.maximal.bouquet
            item["level"] = b.value
            item["circles"] = len(b.circles)
            item["tangencies"] = {str(v): m for v, m in b.tangencies.items()}
            item["candidates"] = node.maximal.candidates
        out.append(item)
        if isinstance(node, Node):
            for i, c in enumerate(node.children):
                visit(c, f"{path}/{i}")

    visit(tree, "root")
    return out


__all__ = ["Options", "PipelineResult", "run_pipeline", "perturbed_conductance", "tree_summary",
           "walk"]
