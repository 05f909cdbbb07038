"""Command line: ``uniformize run mesh.json [options]``.

Exit status is 0 when every check passes (or ``--no-verify`` is given),
1 when a check fails, and 2 for unusable input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import TieError, UniformizeError, VerificationError
from .io import load_mesh
from .pipeline import Options, run_pipeline
from .report import write_result, write_svg

log = logging.getLogger("uniformize")

FORMATS = ("json", "svg")


def _formats(text: str) -> list[str]:
    out = [f.strip() for f in text.split(",") if f.strip()]
    bad = [f for f in out if f not in FORMATS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"formats must be a comma list of {', '.join(FORMATS)}")
    return out


def _slit(text: str):
    if text == "auto":
        return None
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("slit must be 'auto' or comma-separated vertex ids") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uniformize", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="uniformize one mesh and write the results")
    r.add_argument("mesh", type=Path)
    r.add_argument("--k", type=float, default=None, help="value of g on the outer boundary")
    r.add_argument("--out", type=Path, default=Path("."), help="output directory")
    r.add_argument("--format", type=_formats, default=["json"], help="json, svg, or json,svg")
    r.add_argument("--strict", action="store_true", help="abort on the first failed check")
    r.add_argument("--tolerance", type=float, default=1e-9,
                   help="relative tolerance for points on a level (default 1e-9)")
    r.add_argument("--slit", type=_slit, default=None, help="auto or a vertex path from E1 to E2")
    r.add_argument("--perturb-ties", action="store_true",
                   help="perturb conductances and re-solve when equal values block the run")
    r.add_argument("--no-verify", action="store_true", help="exit 0 even if checks fail")
    return p


def run(args) -> int:
    doc = load_mesh(args.mesh)
    opts = Options(k=args.k, tolerance=args.tolerance, slit=args.slit,
                   perturb_ties=args.perturb_ties, strict=args.strict, verify=not args.no_verify)
    res = run_pipeline(doc, opts)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = doc.name or args.mesh.stem
    if "json" in args.format:
        path = write_result(res, args.out / f"{stem}.result.json")
        print(f"wrote {path}")
    if "svg" in args.format:
        path = write_svg(res, args.out / f"{stem}.svg")
        print(f"wrote {path}")
    checks = res.all_checks()
    failed = [c for c in checks if not c.passed]
    for c in failed:
        print(f"FAIL {c.name}: residual {c.residual:.3e} {c.detail}")
    print(f"{res.kind}: {len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed and opts.verify:
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except TieError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.edges:
            print("tied edges: " + ", ".join(f"{a}-{b}" for a, b in exc.edges[:20]), file=sys.stderr)
        print("hint: --perturb-ties perturbs conductances to break ties", file=sys.stderr)
        return 2
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except (UniformizeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
