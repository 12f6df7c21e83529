"""Command-line front end.

    dtnforms mesh-info --mesh disk_h0.05
    dtnforms spectrum --kind lambda --degree 0 --count 6
    dtnforms ball --n 3 --p 1 --kmax 1
    dtnforms verify --suite all --mesh annulus_h0.1
    dtnforms decompose --mesh annulus_h0.1 --degree 1 --input u.csv

``--mesh`` takes a file path or the name of a shipped fixture and defaults
to ``disk_h0.05``.  Usage errors exit with status 2, failed computations or
failed checks with status 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, dtn
from .ball import ball_table, hps_sharpness_table
from .data import fixture_names, resolve_mesh
from .dtn import assemble_dtn, normalize_kind
from .forms import Cochain, mass_condition, read_cochain_csv
from .hodge import betti_numbers, field_residuals, hmf_decompose
from .mesh import extract_boundary, load_mesh
from .spectra import boundary_hodge_spectrum, minmax_probe, steklov_spectrum
from .verify import SUITES, environment, run_suite

DEFAULT_MESH = "disk_h0.05"


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="seed for randomized probes (default 42)")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for column solves (default 1)")
    common.add_argument("--format", choices=("json", "csv"), default=None, help="output format")
    common.add_argument("--output", type=Path, default=None, help="write output to this file")
    common.add_argument("--strict", action="store_true", help="exact (tolerance 0) comparison for analytic rows")
    return common


def _with_mesh(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mesh", default=DEFAULT_MESH,
                   help=f"mesh file or fixture name (default {DEFAULT_MESH}); fixtures: {', '.join(fixture_names())}")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="dtnforms", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=_version_text())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh-info", parents=[common], help="counts, Betti numbers and I_p")
    _with_mesh(p)

    p = sub.add_parser("spectrum", parents=[common], help="eigenvalues of Lambda, L or the boundary Hodge Laplacian")
    _with_mesh(p)
    p.add_argument("--kind", choices=("lambda", "rs", "hodge"), required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--probe", type=int, default=0, metavar="TRIALS",
                   help="run the min-max probe with this many random trials per index")
    p.add_argument("--export", type=Path, default=None, metavar="DIR",
                   help="write the operator pair and basis (Matrix Market + CSV + manifest)")

    p = sub.add_parser("ball", parents=[common], help="exact spectra on the round sphere")
    p.add_argument("--n", type=int, required=True, help="sphere dimension")
    p.add_argument("--p", type=int, required=True, help="form degree")
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--sharpness", type=int, default=0, metavar="M",
                   help="also print the B^{2p+2} sharpness table up to m = M")

    p = sub.add_parser("verify", parents=[common], help="run theorem checks")
    _with_mesh(p)
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--count", type=int, default=3, help="admissible eigencochains for the duality suite")

    p = sub.add_parser("decompose", parents=[common], help="Hodge-Morrey-Friedrichs split of a cochain")
    _with_mesh(p)
    p.add_argument("--input", type=Path, required=True, help="CSV of simplex_index,value")
    p.add_argument("--degree", type=int, required=True)
    return parser


def _version_text() -> str:
    tol = environment()["tolerances"]
    return f"dtnforms {__version__} (tolerances: " + ", ".join(f"{k}={v:g}" for k, v in tol.items()) + ")"


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _load(name_or_path: str):
    try:
        path = resolve_mesh(name_or_path)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    return load_mesh(path)


def cmd_mesh_info(args) -> int:
    mesh = _load(args.mesh)
    info = {"mesh": mesh.name, "dim": mesh.dim, "ambient_dim": mesh.ambient_dim, "counts": mesh.counts,
            "euler_characteristic": mesh.euler_characteristic(), "closed": mesh.is_closed()}
    conds = []
    for p in range(mesh.dim + 1):
        lo, hi = mass_condition(mesh, p)
        conds.append({"degree": p, "min_eig": lo, "max_eig": hi, "condition": hi / lo})
    info["mass"] = conds
    if not mesh.is_closed():
        bnd = extract_boundary(mesh)
        info["boundary_counts"] = bnd.mesh.counts
        info.update(betti_numbers(mesh).to_dict())
    if args.format == "csv":
        rows = [["key", "value"]] + [[k, json.dumps(v)] for k, v in info.items()]
        _emit(_csv(rows), args.output)
    else:
        _emit(_json(info), args.output)
    return 0


def cmd_spectrum(args) -> int:
    mesh = _load(args.mesh)
    if args.count < 1:
        raise UsageError("--count must be positive")
    if args.kind == "hodge":
        # a closed mesh is treated as the boundary complex itself
        bnd = mesh if mesh.is_closed() else extract_boundary(mesh).mesh
        if not 0 <= args.degree <= bnd.dim:
            raise UsageError(f"--degree must be in 0..{bnd.dim}")
        spec = boundary_hodge_spectrum(bnd, args.degree)
        op = None
    else:
        if mesh.is_closed():
            raise UsageError(f"--kind {args.kind} needs a mesh with boundary")
        bnd = extract_boundary(mesh)
        if not 0 <= args.degree <= mesh.dim - 1:
            raise UsageError(f"--degree must be in 0..{mesh.dim - 1}")
        op = assemble_dtn(mesh, bnd, args.degree, normalize_kind(args.kind))
        spec = steklov_spectrum(op)
        if args.export is not None:
            op.export(args.export)
    count = min(args.count, len(spec.eigenvalues))
    vals = spec.eigenvalues[:count]
    groups = spec.groups[:count]
    if args.format == "json":
        out = spec.to_dict()
        out["eigenvalues"] = [float(v) for v in vals]
        out["multiplicity_group"] = [int(g) for g in groups]
        out["mesh"] = mesh.name
        if op is not None and args.probe:
            out["minmax_probe"] = minmax_probe(spec, op, trials=args.probe, seed=args.seed).to_dict()
        _emit(_json(out), args.output)
    else:
        _emit(spec.to_csv(count), args.output)
        if op is not None and args.probe:
            rep = minmax_probe(spec, op, trials=args.probe, seed=args.seed)
            sys.stderr.write(f"minmax probe: {rep.violations} violations, worst margin {rep.worst_margin:.3e}\n")
    return 0


def cmd_ball(args) -> int:
    try:
        table = ball_table(args.n, args.p, args.kmax)
        sharp = hps_sharpness_table(args.p, args.sharpness) if args.sharpness else []
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = [e.to_dict() for e in table]
    if args.format == "json":
        _emit(_json({"entries": rows, "sharpness": [r.to_dict() for r in sharp]}), args.output)
    else:
        header = ["n", "p", "k", "family", "lambda", "L", "delta", "multiplicity"]
        lines = [header] + [[r[h] for h in header] for r in rows]
        text = _csv(lines)
        if sharp:
            sh = ["m", "lhs_index", "rhs_index", "lhs", "rhs", "holds", "equality"]
            text += "\n" + _csv([sh] + [[r.to_dict()[h] for h in sh] for r in sharp])
        _emit(text, args.output)
    return 0


def cmd_verify(args) -> int:
    mesh = _load(args.mesh)
    report = run_suite(mesh, args.suite, strict=args.strict, k_max=args.kmax, duality_count=args.count)
    data = report.to_dict()
    data["environment"]["jobs"] = args.jobs
    data["environment"]["seed"] = args.seed
    if args.format == "csv":
        header = ["name", "paper_ref", "lhs", "rhs", "tol", "pass", "margin"]
        _emit(_csv([header] + [[c[h] for h in header] for c in data["checks"]]), args.output)
    else:
        _emit(_json(data), args.output)
    for c in report.failures:
        sys.stderr.write(f"FAIL {c.name}: lhs={c.lhs} rhs={c.rhs} tol={c.tol} margin={c.margin:.3e}\n")
    return 0 if report.passed else 1


def cmd_decompose(args) -> int:
    mesh = _load(args.mesh)
    if not 0 <= args.degree <= mesh.dim:
        raise UsageError(f"--degree must be in 0..{mesh.dim}")
    if not args.input.is_file():
        raise UsageError(f"input file {args.input} does not exist")
    values = read_cochain_csv(args.input, size=mesh.count(args.degree))
    u = Cochain(args.degree, values, mesh)
    parts = hmf_decompose(u)
    ex, co, fi = parts
    if args.format == "json":
        dres, sres = field_residuals(fi)
        out = {
            "mesh": mesh.name, "degree": args.degree,
            "norms": {"input": u.norm(), "exact_D": ex.norm(), "coexact_N": co.norm(), "field": fi.norm()},
            "inner_products": {"exact_coexact": ex.inner(co), "exact_field": ex.inner(fi),
                               "coexact_field": co.inner(fi)},
            "recombination_error": float(np.max(np.abs((ex + co + fi - u).values), initial=0.0)),
            "field_residuals": {"d": dres, "delta": sres},
            "components": {"exact_D": ex.values.tolist(), "coexact_N": co.values.tolist(),
                           "field": fi.values.tolist()},
        }
        _emit(_json(out), args.output)
    else:
        rows = [["simplex_index", "exact_D", "coexact_N", "field"]]
        rows += [[i, repr(float(a)), repr(float(b)), repr(float(c))]
                 for i, (a, b, c) in enumerate(zip(ex.values, co.values, fi.values))]
        _emit(_csv(rows), args.output)
    return 0


COMMANDS = {"mesh-info": cmd_mesh_info, "spectrum": cmd_spectrum, "ball": cmd_ball,
            "verify": cmd_verify, "decompose": cmd_decompose}
DEFAULT_FORMAT = {"mesh-info": "json", "spectrum": "csv", "ball": "csv", "verify": "json", "decompose": "csv"}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.format is None:
        args.format = DEFAULT_FORMAT[args.command]
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        dtn.set_jobs(args.jobs)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"dtnforms: error: {exc}\n")
        return 2
    except Exception as exc:  # computation failure
        sys.stderr.write(f"dtnforms: {type(exc).__name__}: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
