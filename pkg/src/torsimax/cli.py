"""Command-line entry point: ``torsimax <command> ...``.

All reports are JSON on stdout with floats rounded to 12 significant digits;
sweeps write CSV to ``--out``. Any run with ``--out`` also writes a manifest
``<out>.manifest.json`` next to it.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import distance as dist
from . import domains as dom
from . import energy as en
from . import torsion as tor
from . import verify
from .errors import (
    InvalidDomain,
    InvalidInput,
    NotConverged,
    ResolutionTooCoarse,
    ToleranceNotReached,
)
from .geometry import LatticeDomain, Triangle

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_NOT_CONVERGED = 4
EXIT_RESOLUTION = 5


class ParseError(Exception):
    """Malformed command-line value or input file."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _round(obj):
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not math.isfinite(x) else float(f"{x:.12g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True)


def _g(x: float) -> str:
    return f"{float(x):.12g}"


# --- argument parsing helpers ---------------------------------------------


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParseError(f"cannot parse numbers from {text!r}") from exc
    if not vals or (n is not None and len(vals) != n):
        raise ParseError(f"expected {n or 'some'} comma-separated numbers, got {text!r}")
    return vals


def _points(text: str) -> list[tuple[float, float]]:
    pts = [tuple(_floats(tok, 2)) for tok in text.split()]
    if len(pts) != 3:
        raise ParseError(f"expected three 'x,y' pairs, got {text!r}")
    return pts


def _h_value(text: str) -> float | str:
    if text == "auto":
        return "auto"
    try:
        h = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"must be a number or 'auto', got {text!r}") from exc
    if not h > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return h


def _resolve_h(h, eps: float | None, default: float) -> float:
    if h == "auto":
        if eps is None:
            return default
        return eps / 16.0
    return default if h is None else h


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _load_domain(path: str) -> dom.DomainDescriptor:
    obj = _read_json(path)
    try:
        if isinstance(obj, dict) and "cells" in obj and "kind" not in obj:
            return dom.lattice(LatticeDomain.from_json(obj))
        return dom.DomainDescriptor.from_json(obj)
    except InvalidDomain as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _builtin_domain(args) -> dom.DomainDescriptor:
    kind = args.domain
    if kind == "disc":
        return dom.disc(args.radius)
    if kind == "rectangle":
        return dom.rectangle(args.a, args.b)
    if kind == "interval-union":
        return dom.interval_union(_floats(args.radii))
    if kind == "disc-union":
        return dom.disc_union(args.n, spacing=args.spacing)
    if kind == "honeycomb":
        return dom.honeycomb_perforated(args.radius, args.eps, args.variant)
    if kind == "perforated":
        return dom.perforated_disc(args.radius, args.eps)
    raise ParseError(f"unknown domain {kind!r}")


def _domain(args) -> dom.DomainDescriptor:
    if args.domain_file:
        return _load_domain(args.domain_file)
    if not args.domain:
        raise ParseError("give --domain or --domain-file")
    return _builtin_domain(args)


def _threads() -> int:
    raw = os.environ.get("TORSIMAX_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError as exc:
        raise ParseError(f"TORSIMAX_THREADS must be an integer, got {raw!r}") from exc


def _parallel_map(fn: Callable, params: Sequence) -> list:
    """Evaluate ``fn`` on every parameter; results come back sorted by parameter."""
    order = sorted(params)
    n = min(_threads(), len(order)) or 1
    if n == 1:
        return [fn(x) for x in order]
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(fn, x) for x in order]
        return [f.result() for f in futures]


# --- outputs ---------------------------------------------------------------


def _write_manifest(args, outputs: list[str]) -> None:
    params = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command if not getattr(args, "kind", None) else f"{args.command} {args.kind}",
        "parameters": _round(params),
        "outputs": outputs,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": _version(),
    }
    for out in outputs:
        Path(f"{out}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _emit_report(args, report: dict) -> None:
    text = _dumps(report)
    print(text)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
        _write_manifest(args, [args.out])


def _emit_csv(args, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in row])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
        _write_manifest(args, [args.out])
    else:
        sys.stdout.write(buf.getvalue())


# --- commands --------------------------------------------------------------


def cmd_energy(args) -> int:
    if (args.points is None) == (args.sides is None):
        raise ParseError("give exactly one of --points or --sides")
    if args.sides is not None:
        sides = _floats(args.sides, 3)
        if args.inscribed:
            value = en.energy_from_sides(*sides)
            t = Triangle.from_sides(*sides)
            report = en.energy(t)
            out = {"sides": sides, "energy": value, "method": "inscribed_sides",
                   "area": report.area, "circumradius": report.circumradius}
        else:
            report = en.energy(Triangle.from_sides(*sides))
            out = None
    else:
        report = en.energy(Triangle(tuple(_points(args.points))))
        out = None
    if out is None:
        out = {"sides": list(report.triangle.side_lengths), "energy": report.energy,
               "method": report.method, "area": report.area,
               "circumradius": report.circumradius, "vertex_integral": report.vertex_integral}
    if args.oracle:
        oracle = en.energy(report.triangle, method="quadrature", tol=args.tol)
        out["quadrature_energy"] = oracle.energy
        out["quadrature_relative_difference"] = abs(oracle.energy - out["energy"]) / out["energy"]
    _emit_report(args, out)
    return EXIT_OK


def cmd_phi(args) -> int:
    d = _domain(args)
    if d.kind == "honeycomb_perforated":
        eps = d.params["eps"]
        h = _resolve_h(args.h, eps, eps / 16.0)
        rep = dist.honeycomb_phi_infinity(d.params["R"], eps, h, d.params.get("variant", "centers"))
    else:
        eps = d.params.get("spacing") if d.kind == "perforated_disc" else None
        rep = dist.phi_infinity(d, _resolve_h(args.h, eps, 1.0 / 256.0))
    out = {"domain": d.to_json(), **rep.to_json()}
    _emit_report(args, out)
    return EXIT_OK


def _random_lattice(args) -> LatticeDomain:
    rng = np.random.default_rng(args.seed)
    return dom.random_polyomino(rng, args.random, eps=args.eps)


def cmd_phi_d(args) -> int:
    if args.domain_file:
        d = _load_domain(args.domain_file)
        if d.kind != "lattice":
            d_eps = args.eps
            q = dom.approximate_lattice(d, d_eps)
        else:
            q = d.lattice_domain
    elif args.random:
        q = _random_lattice(args)
    else:
        raise ParseError("give --domain-file or --random N")
    res = dist.phi_d_infinity(q, grid_h=None if args.h is None else q.eps * args.h,
                              check_grid=not args.no_grid)
    out = {"lattice": q.to_json(), **res.report.to_json(),
           "integral": res.integral, "delaunay_integral": res.delaunay_integral,
           "delaunay_ratio": res.delaunay_ratio, "largest_empty_circle": {
               "center": list(res.center), "radius": res.radius}}
    if not args.no_grid:
        out["grid_integral"] = res.grid_integral
        out["grid_h"] = res.grid_h
    _emit_report(args, out)
    return EXIT_OK


def _sample(field, point: Sequence[float]) -> float:
    axes = [field.origin[k] + field.spacing * np.arange(n) for k, n in enumerate(field.values.shape)]
    interp = RegularGridInterpolator(axes, np.where(field.mask, field.values, 0.0),
                                     bounds_error=False, fill_value=0.0)
    return float(interp(np.asarray(point, float)[None, :])[0])


def _config(args, h: float) -> tor.SolverConfig:
    return tor.SolverConfig(p=args.p, h=h, max_iterations=args.max_iterations,
                            tolerance=args.tol, method=args.method)


def cmd_torsion(args) -> int:
    d = _domain(args)
    eps = d.params.get("spacing") if d.kind == "perforated_disc" else None
    h = _resolve_h(args.h, eps, 1.0 / 128.0)
    g = dom.rasterize(d, h)
    tf = tor.solve_torsion(g, _config(args, h))
    if args.at is not None:
        point = _floats(args.at, d.dim)
    else:
        lo, hi = np.array(d.bbox()[: d.dim]), np.array(d.bbox()[d.dim:])
        point = list(0.5 * (lo + hi))
    f = tor.shape_functionals(tf, d.area)
    out = {"domain": d.to_json(), "p": args.p, "h": h, "point": point,
           "w_at_point": _sample(tf.field, point), "max": tf.field.max(),
           "mean": tf.field.mean(), "phi_p": f.phi_p, "psi_p": f.psi_p, "T_p": f.T_p,
           "lambda_p_upper": f.lambda_p_upper, "F_p": f.F_p,
           "iterations": tf.iterations, "residual": tf.residual,
           "identity_gap": tf.identity_gap}
    _emit_report(args, out)
    return EXIT_OK


def _sweep_honeycomb(args):
    eps_list = _floats(args.eps)

    def one(eps):
        h = _resolve_h(args.h, eps, eps / 16.0)
        rep = dist.honeycomb_phi_infinity(args.R, eps, h, args.variant)
        return [eps, h, rep.ratio, dist.HONEYCOMB_CONSTANT - rep.ratio]

    return ["eps", "h", "ratio", "limit_gap"], _parallel_map(one, eps_list)


def _sweep_perforated(args):
    spacings = _floats(args.eps)

    def one(s):
        h = _resolve_h(args.h, s, 1.0 / 128.0)
        row = tor.perforated_sweep([s], args.p, h, args.R, _config(args, h))[0]
        return [s, h, *row.functionals.as_row(), row.iterations]

    return ["eps", "h", "phi", "psi", "Tp", "lambda_upper", "Fp", "iterations"], \
        _parallel_map(one, spacings)


def _sweep_eps_lattice(args):
    eps_list = _floats(args.eps)
    d = _load_domain(args.domain_file) if args.domain_file else dom.disc(args.R)

    def one(eps):
        q = dom.approximate_lattice(d, eps)
        res = dist.phi_d_infinity(q, check_grid=False)
        return [eps, len(q.cells), res.report.ratio, res.delaunay_ratio,
                dist.HONEYCOMB_CONSTANT - res.report.ratio]

    return ["eps", "cells", "ratio", "delaunay_ratio", "limit_gap"], _parallel_map(one, eps_list)


def _sweep_disc_union(args):
    ns = [int(v) for v in _floats(args.n)]
    if any(n < 1 for n in ns):
        raise ParseError("--n values must be positive integers")

    def one(n):
        d = dom.disc_union(n, spacing=args.spacing)
        h = _resolve_h(args.h, None, 1.0 / 64.0)
        tf = tor.solve_torsion(dom.rasterize(d, h), _config(args, h))
        f = tor.shape_functionals(tf, d.area)
        return [n, h, *f.as_row(), tf.iterations]

    return ["n", "h", "phi", "psi", "Tp", "lambda_upper", "Fp", "iterations"], _parallel_map(one, ns)


SWEEPS = {"honeycomb": _sweep_honeycomb, "perforated": _sweep_perforated,
          "eps-lattice": _sweep_eps_lattice, "disc-union": _sweep_disc_union}


def cmd_sweep(args) -> int:
    header, rows = SWEEPS[args.kind](args)
    _emit_csv(args, header, rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    only = None if args.only is None else {int(v) for v in _floats(args.only)}
    print(verify.CONSTANT_NOTE)
    results = verify.run(fast=args.fast, seed=args.seed, only=only, echo=print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


# --- parser ----------------------------------------------------------------


def _add_domain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--domain", choices=["disc", "rectangle", "interval-union", "disc-union",
                                        "honeycomb", "perforated"])
    p.add_argument("--domain-file", help="domain JSON (descriptor or lattice cells)")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0, help="rectangle width")
    p.add_argument("--b", type=float, default=1.0, help="rectangle height")
    p.add_argument("--radii", default="1", help="interval half-lengths, comma-separated")
    p.add_argument("--n", type=int, default=2, help="number of discs")
    p.add_argument("--spacing", type=float, default=2.0, help="disc-union centre spacing")
    p.add_argument("--eps", type=float, default=0.1, help="perforation scale")
    p.add_argument("--variant", choices=["centers", "vertices"], default="centers")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--method", choices=["newton", "gradient"], default="newton")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torsimax",
                                     description="Mean-to-max efficiency of torsion and distance functions.")
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("energy", help="triangle energy")
    p.add_argument("--points", help='three vertices, e.g. "0,0 1,0 0,1"')
    p.add_argument("--sides", help="three side lengths, comma-separated")
    p.add_argument("--inscribed", action="store_true",
                   help="sides are chords of the unit circle")
    p.add_argument("--oracle", action="store_true", help="add the quadrature cross-check")
    p.add_argument("--tol", type=float, default=1e-7, help="quadrature tolerance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("phi", help="efficiency of the distance function")
    _add_domain_flags(p)
    p.add_argument("--h", type=_h_value, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("phi-d", help="efficiency of the distance to the discrete boundary")
    p.add_argument("--domain-file")
    p.add_argument("--random", type=int, help="random polyomino with this many cells")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=None, help="grid check spacing in lattice units")
    p.add_argument("--no-grid", action="store_true", help="skip the grid cross-check")
    p.add_argument("--out")
    p.set_defaults(func=cmd_phi_d)

    p = sub.add_parser("torsion", help="p-torsion function and shape functionals")
    _add_domain_flags(p)
    _add_solver_flags(p)
    p.add_argument("--h", type=_h_value, default=None)
    p.add_argument("--at", help="evaluation point, comma-separated (default: bbox centre)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_torsion)

    p = sub.add_parser("sweep", help="parameter sweeps written as CSV")
    p.add_argument("kind", choices=sorted(SWEEPS))
    _add_solver_flags(p)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--eps", default="0.2,0.1,0.05", help="scales, comma-separated")
    p.add_argument("--n", default="1,2,4,8", help="disc counts for disc-union")
    p.add_argument("--spacing", type=float, default=2.0)
    p.add_argument("--variant", choices=["centers", "vertices"], default="centers")
    p.add_argument("--domain-file", help="domain approximated by eps-lattice (default disc)")
    p.add_argument("--h", type=_h_value, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--fast", action="store_true", help="coarser grids, PDE tolerances 5%%")
    p.add_argument("--only", help="criterion numbers, comma-separated")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvalidDomain as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (NotConverged, ToleranceNotReached) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ResolutionTooCoarse as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION


if __name__ == "__main__":
    sys.exit(main())
