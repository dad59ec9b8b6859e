"""Command-line surface for factorization, verification and benchmarks.

Commands operate on JSON polynomial files (see ``matpoly.poly_to_dict``)
and write certificate/report JSON with 17-significant-digit floats so
that save -> load round trips are value-exact.  Exit codes form a stable
contract: 0 for an accepted result; 2 for a mathematical rejection of a
well-formed input (residual above tolerance, input not positive
semidefinite, empty solution set, factorization schedule exhausted);
1 for usage and format errors (unreadable files, malformed JSON, wrong
variable count, bad option values).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .certify import psd_check_poly, verify_certificate
from .errors import (ConvergenceError, EmptySetError, FactorizationError,
                     NotPsdError, TrigfactorError)
from .fr1d import Factor1dOptions, outer_factor_1d
from .fr2d import (Factor2dOptions, compute_extremal_pair, factor_2d,
                   swap_variables)
from .genbench import (bench_suite, default_corpus,
                       random_boundary_singular_1d, random_sos_1d,
                       random_sos_2d)
from .matpoly import (MatrixPoly1, MatrixPoly2, json_dumps, load_poly,
                      poly_from_dict, poly_to_dict, regroup_blocks,
                      sample_grid_1d)
from .mset import extremality_report

__all__ = ["main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2


def _write_document(text, out_path):
    """Write text to a file atomically, or to stdout when no path."""
    if out_path:
        tmp = str(out_path) + ".tmp"
        with open(tmp, "w") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
        os.replace(tmp, out_path)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _parse_eps_schedule(text):
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ValueError("--eps-schedule must be a comma-separated list "
                         "of numbers, got %r" % text) from None
    if not values:
        raise ValueError("--eps-schedule must contain at least one value")
    return values


def _load_poly_checked(path, expect_vars=None):
    poly = load_poly(path)
    nvars = 1 if isinstance(poly, MatrixPoly1) else 2
    if expect_vars is not None and nvars != expect_vars:
        raise ValueError("%s holds a %d-variable polynomial, expected "
                         "%d variables" % (path, nvars, expect_vars))
    return poly


def _certificate_document(q, factors, report, accepted, extra=None):
    full_report = dict(report)
    if extra:
        full_report.update(extra)
    return {
        "polynomial": poly_to_dict(q),
        "certificate": {
            "factors": [poly_to_dict(f) for f in factors],
            "residual": report["residual_sup"],
            "degrees": [list(f.degree) if isinstance(f, MatrixPoly2)
                        else f.degree for f in factors],
            "count": len(factors),
            "accepted": bool(accepted),
        },
        "report": full_report,
    }


def cmd_factor1d(args):
    q = _load_poly_checked(args.input, expect_vars=1)
    opts = Factor1dOptions(residual_tol=args.tol,
                           eps_schedule=_parse_eps_schedule(
                               args.eps_schedule))
    try:
        p = outer_factor_1d(q, opts)
    except (FactorizationError, NotPsdError) as exc:
        sys.stderr.write("rejected: %s\n" % exc)
        return EXIT_REJECTED
    factors = [p] if p.coeffs else []
    grid = args.grid_size or 512
    report = verify_certificate(q, factors, grid=grid, offset=True)
    accepted = report["residual_sup"] <= args.tol
    doc = _certificate_document(q, factors, report, accepted)
    _write_document(json_dumps(doc, indent=0), args.out)
    if not accepted:
        sys.stderr.write("rejected: residual %.3e exceeds tolerance %.3e\n"
                         % (report["residual_sup"], args.tol))
        return EXIT_REJECTED
    return EXIT_OK


def cmd_factor2d(args):
    q = _load_poly_checked(args.input, expect_vars=2)
    swapped = bool(args.swap_vars)
    if swapped:
        q = swap_variables(q)
    opts = Factor2dOptions(
        certificate_tol=args.tol,
        grid_size=args.grid_size,
        max_iter=args.max_iter,
        degree_tol=args.degree_tol,
        eps_schedule=_parse_eps_schedule(args.eps_schedule))
    try:
        cert = factor_2d(q, opts)
    except (FactorizationError, EmptySetError, NotPsdError) as exc:
        sys.stderr.write("rejected: %s\n" % exc)
        return EXIT_REJECTED
    meta = dict(cert.pipeline_metadata)
    meta["swapped_variables"] = swapped
    if cert.rejection_reason:
        meta["rejection_reason"] = cert.rejection_reason
    report = meta.pop("verify_report", {})
    doc = _certificate_document(q, cert.factors, report, cert.accepted,
                                extra=meta)
    _write_document(json_dumps(doc, indent=0), args.out)
    if not cert.accepted:
        sys.stderr.write("rejected: %s\n" % cert.rejection_reason)
        return EXIT_REJECTED
    return EXIT_OK


def cmd_verify(args):
    q = _load_poly_checked(args.polynomial)
    with open(args.certificate) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError("invalid JSON in %s: %s"
                             % (args.certificate, exc)) from None
    if not isinstance(doc, dict) or "certificate" not in doc \
            or "factors" not in doc.get("certificate", {}):
        raise ValueError("certificate document missing field "
                         "'certificate.factors'")
    factors = [poly_from_dict(d) for d in doc["certificate"]["factors"]]
    grid = args.grid_size
    if grid is not None and factors and isinstance(factors[0], MatrixPoly2):
        grid = (grid, grid)
    report = verify_certificate(q, factors, grid=grid, offset=True)
    psd = psd_check_poly(q)
    report["min_eig"] = psd["min_eigenvalue"]
    report["argmin"] = psd["argmin"]
    report["accepted"] = report["residual_sup"] <= args.tol
    _write_document(json_dumps(report, indent=0), args.out)
    return EXIT_OK if report["accepted"] else EXIT_REJECTED


def cmd_analyze_mset(args):
    with open(args.input) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError("invalid JSON in %s: %s"
                             % (args.input, exc)) from None
    if isinstance(doc, dict) and "a" in doc and "b" in doc:
        a_poly = poly_from_dict(doc["a"])
        b_poly = poly_from_dict(doc["b"])
        if not isinstance(a_poly, MatrixPoly1) \
                or not isinstance(b_poly, MatrixPoly1):
            raise ValueError("pencil entries 'a' and 'b' must be "
                             "one-variable polynomials")
        d1 = max(a_poly.degree, b_poly.degree)

        class _Pair:
            pass

        pair = _Pair()
        pair.a, pair.b, pair.d1 = a_poly, b_poly, d1
    else:
        q = poly_from_dict(doc)
        if not isinstance(q, MatrixPoly2):
            raise ValueError("analyze-mset expects a two-variable "
                             "polynomial or an {'a':…, 'b':…} pencil file")
        pair = regroup_blocks(q)
        d1 = pair.d1

    n_grid = args.grid_size or max(64, 8 * d1)
    asamp = sample_grid_1d(pair.a, n_grid)
    bsamp = sample_grid_1d(pair.b, n_grid)
    rows = []
    max_gap = 0.0
    n_singleton = 0
    for j in range(n_grid):
        omega = 2.0 * np.pi * j / n_grid
        try:
            rep = extremality_report(asamp[j], bsamp[j], tol=args.tol,
                                     max_iter=args.max_iter)
        except NotPsdError as exc:
            sys.stderr.write(
                "rejected: solution set is empty at frequency index %d "
                "(omega = %.6f): %s\n" % (j, omega, exc))
            return EXIT_REJECTED
        max_gap = max(max_gap, rep.gap)
        n_singleton += int(rep.is_singleton)
        rows.append({
            "index": j,
            "omega": omega,
            "gap": rep.gap,
            "defects": [list(d) for d in rep.defects],
            "is_singleton": rep.is_singleton,
        })
    out = {
        "grid_size": n_grid,
        "tol": args.tol,
        "aggregate": {
            "max_gap": max_gap,
            "median_gap": float(np.median([r["gap"] for r in rows])),
            "singleton_nodes": n_singleton,
        },
        "frequencies": rows,
    }
    if args.extremalize:
        try:
            esp = compute_extremal_pair(pair, n_grid=n_grid,
                                        max_iter=args.max_iter,
                                        degree_tol=args.degree_tol)
        except (EmptySetError, ConvergenceError,
                FactorizationError) as exc:
            sys.stderr.write("rejected: %s\n" % exc)
            return EXIT_REJECTED
        out["extremal_pair"] = {
            "a_hat": poly_to_dict(esp.a_hat),
            "m_hat": poly_to_dict(esp.m_hat),
            "decay_report": esp.decay_report,
            "grid_size": esp.grid_size,
            "stats": esp.stats,
        }
    _write_document(json_dumps(out, indent=0), args.out)
    return EXIT_OK


def cmd_generate(args):
    if args.kind == "sos2d":
        inst = random_sos_2d(args.k, args.d1, args.d2, args.n_factors,
                             args.seed)
    elif args.kind == "sos1d":
        inst = random_sos_1d(args.k, args.d, args.n_factors, args.seed)
    elif args.kind == "boundary1d":
        inst = random_boundary_singular_1d(args.k, args.d, args.seed)
    else:
        raise ValueError("unknown instance kind %r" % args.kind)
    _write_document(json_dumps(poly_to_dict(inst["q"]), indent=0), args.out)
    return EXIT_OK


def cmd_bench(args):
    config = {}
    if args.config:
        with open(args.config) as fh:
            try:
                config = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError("invalid JSON in %s: %s"
                                 % (args.config, exc)) from None
        if not isinstance(config, dict):
            raise ValueError("bench config must be a JSON object")
    if args.csv:
        config["csv_path"] = args.csv
    if args.json_out:
        config["json_path"] = args.json_out
    if "instances" not in config:
        config["instances"] = default_corpus()
    rows = bench_suite(config)
    for row in rows:
        sys.stdout.write(
            "%-16s %-28s %10.1f ms  residual=%-12s accepted=%s\n"
            % (row["instance_id"], row["stage"], row["wall_ms"],
               row["residual"], row["accepted"]))
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="trigfactor",
        description="Factor positive semidefinite matrix trigonometric "
                    "polynomials into sums of hermitian squares.")
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("factor1d",
                        help="factor a one-variable polynomial")
    p1.add_argument("input", help="polynomial JSON file")
    p1.add_argument("--tol", type=float, default=1e-6,
                    help="residual acceptance tolerance")
    p1.add_argument("--grid-size", type=int, default=None,
                    help="verification grid size")
    p1.add_argument("--eps-schedule", default="1e-2,1e-4,1e-6,0",
                    help="comma-separated regularization schedule")
    p1.add_argument("--out", default=None, help="output JSON path")
    p1.set_defaults(func=cmd_factor1d)

    p2 = sub.add_parser("factor2d",
                        help="factor a two-variable polynomial")
    p2.add_argument("input", help="polynomial JSON file")
    p2.add_argument("--tol", type=float, default=1e-5,
                    help="certificate acceptance tolerance")
    p2.add_argument("--grid-size", type=int, default=None,
                    help="frequency grid for the pointwise stage")
    p2.add_argument("--max-iter", type=int, default=500,
                    help="iteration budget per pointwise collapse")
    p2.add_argument("--degree-tol", type=float, default=1e-6,
                    help="relative Fourier-tail bound beyond degree d1")
    p2.add_argument("--eps-schedule", default="1e-2,1e-4,1e-6,0",
                    help="comma-separated regularization schedule")
    p2.add_argument("--swap-vars", action="store_true",
                    help="exchange the variables before factoring")
    p2.add_argument("--out", default=None, help="output JSON path")
    p2.set_defaults(func=cmd_factor2d)

    pv = sub.add_parser("verify", help="verify a certificate file")
    pv.add_argument("polynomial", help="polynomial JSON file")
    pv.add_argument("certificate", help="certificate JSON file")
    pv.add_argument("--tol", type=float, default=1e-5,
                    help="residual acceptance tolerance")
    pv.add_argument("--grid-size", type=int, default=None,
                    help="verification grid size (per variable)")
    pv.add_argument("--out", default=None, help="output JSON path")
    pv.set_defaults(func=cmd_verify)

    pm = sub.add_parser("analyze-mset",
                        help="per-frequency solution-set statistics")
    pm.add_argument("input",
                    help="two-variable polynomial or {'a','b'} pencil JSON")
    pm.add_argument("--tol", type=float, default=1e-7,
                    help="singleton tolerance")
    pm.add_argument("--grid-size", type=int, default=None,
                    help="frequency grid size")
    pm.add_argument("--max-iter", type=int, default=500,
                    help="iteration budget")
    pm.add_argument("--degree-tol", type=float, default=1e-6,
                    help="tail bound for --extremalize")
    pm.add_argument("--extremalize", action="store_true",
                    help="also compute the collapsed degree-d1 pair")
    pm.add_argument("--out", default=None, help="output JSON path")
    pm.set_defaults(func=cmd_analyze_mset)

    pg = sub.add_parser("generate", help="generate a random instance")
    pg.add_argument("--kind", default="sos2d",
                    choices=("sos2d", "sos1d", "boundary1d"))
    pg.add_argument("--k", type=int, default=1, help="matrix dimension")
    pg.add_argument("--d1", type=int, default=1)
    pg.add_argument("--d2", type=int, default=1)
    pg.add_argument("--d", type=int, default=1,
                    help="degree for one-variable kinds")
    pg.add_argument("--n-factors", type=int, default=2)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", default=None, help="output JSON path")
    pg.set_defaults(func=cmd_generate)

    pb = sub.add_parser("bench", help="run the benchmark corpus")
    pb.add_argument("config", nargs="?", default=None,
                    help="bench config JSON (defaults to built-in corpus)")
    pb.add_argument("--csv", default=None, help="CSV report path")
    pb.add_argument("--json-out", default=None, help="JSON report path")
    pb.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    """Entry point; returns the exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TrigfactorError, ValueError, OSError) as exc:
        sys.stderr.write("error: %s\n" % exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
