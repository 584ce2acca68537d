"""``covdiff`` command-line interface.

Exit codes: 0 success, 1 non-convergence, 2 invalid configuration,
3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .bench import (TABLE_IDS, ExperimentConfig, rows_to_csv, rows_to_json, run_solve,
                    run_sweep_alpha, run_table, run_trace)
from .solvers import SolverError

EXIT_OK, EXIT_NONCONVERGED, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("covdiff")


def _common(p):
    p.add_argument("--nx", type=int, default=100)
    p.add_argument("--ell", type=int, default=10)
    p.add_argument("--D", type=float, default=0.2, help="Daley lengthscale")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--precond", choices=("none", "exact", "nc1", "nc2", "sp"), default="none")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-outer", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inner-precond", choices=("mg", "jacobi", "identity"), default="mg")
    p.add_argument("--amg-matvec-equiv", type=float, default=80.0,
                   help="matvecs charged per multigrid setup when reporting equivalent cost")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--allow-nonconverged", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="covdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one end-to-end solve")
    _common(p)
    p.add_argument("--trace", action="store_true", help="include the residual trace")

    p = sub.add_parser("table", help="reproduce one of the reference tables")
    _common(p)
    p.add_argument("table_id", type=int)
    p.add_argument("--full", action="store_true", help="run the full sweep rather than anchor rows")
    p.add_argument("--rows", type=int, nargs="+", default=None, help="nx (or ell) values to run")
    p.add_argument("--alphas", type=float, nargs="+", default=None)
    p.add_argument("--etas", type=float, nargs="+", default=None)

    p = sub.add_parser("sweep-alpha", help="outer iterations against alpha")
    _common(p)
    p.add_argument("--alphas", type=float, nargs="+",
                   default=[1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
    p.add_argument("--kinds", nargs="+", default=None,
                   choices=("exact", "nc1", "nc2", "sp"))

    p = sub.add_parser("trace", help="per-iteration residual trace")
    _common(p)
    p.add_argument("--inner-root", type=int, default=None,
                   help="trace CI on a single block (1-based root index) with its bound curve")

    p = sub.add_parser("verify", help="run the dense oracle suite")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args):
    return ExperimentConfig(
        nx=args.nx, ell=args.ell, D=args.D, alpha=args.alpha, eta=args.eta,
        precond=args.precond, tol=args.tol, max_outer=args.max_outer, seed=args.seed,
        inner_precond=args.inner_precond, amg_matvec_equiv=args.amg_matvec_equiv,
        threads=args.threads)


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(rows, fmt, default):
    fmt = fmt or default
    return rows_to_csv(rows) if fmt == "csv" else rows_to_json(rows)


def _cmd_verify(args):
    from .oracle import verify_all

    reports = verify_all()
    rows = [r.to_dict() for r in reports]
    if args.format == "csv":
        flat = [{"name": r["name"], "passed": r["passed"], "max_deviation": r["max_deviation"],
                 "tol": r["tol"], **{k: v for k, v in r["details"].items()
                                     if k in ("nx", "ell", "alpha")}} for r in rows]
        _emit(rows_to_csv(flat), args.out)
    else:
        _emit(json.dumps(rows, indent=2, default=str) + "\n", args.out)
    failed = [r for r in reports if not r.passed]
    for r in failed:
        log.error("%s failed: deviation %.3e > %.1e (%s)", r.name, r.max_deviation, r.tol, r.details)
    return EXIT_VERIFY if failed else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        return _cmd_verify(args)
    try:
        cfg = _config(args)
        # table and sweep commands set alpha/precond per row themselves
        (cfg if args.command in ("solve", "trace") else replace(cfg, precond="none")).validate()
    except ValueError as exc:
        print(f"covdiff: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.command == "solve":
            row = run_solve(cfg, keep_residuals=args.trace)
            text = (rows_to_csv([row.as_dict(args.trace)]) if args.format == "csv"
                    else json.dumps(row.as_dict(args.trace), indent=2) + "\n")
            _emit(text, args.out)
            ok = row.converged
        elif args.command == "table":
            if args.table_id not in TABLE_IDS:
                print(f"covdiff: unknown table id {args.table_id}; choose from {TABLE_IDS}",
                      file=sys.stderr)
                return EXIT_INVALID
            rows = run_table(args.table_id, cfg, full=args.full, alphas=args.alphas,
                             etas=args.etas, rows=args.rows)
            _emit(_render(rows, args.format, "csv"), args.out)
            ok = all(r.get("converged", True) for r in rows)
        elif args.command == "sweep-alpha":
            kinds = args.kinds or ((cfg.precond,) if cfg.precond != "none" else ("exact",))
            rows = run_sweep_alpha(cfg, args.alphas, kinds)
            _emit(_render(rows, args.format, "csv"), args.out)
            ok = all(r["converged"] for r in rows)
        else:  # trace
            rows = run_trace(cfg, inner_root=args.inner_root)
            _emit(_render(rows, args.format, "csv"), args.out)
            ok = rows[-1]["residual"] < cfg.tol
    except ValueError as exc:
        print(f"covdiff: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"covdiff: solver failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if not ok and not args.allow_nonconverged:
        print("covdiff: did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
