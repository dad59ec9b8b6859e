"""Random instance generation and a desk-scale benchmark harness.

Ground-truth generators plant analytic factors and return both the
hermitian sum of squares Q = sum F*F (exactly hermitian and pointwise
positive semidefinite by construction) and the planted factors, so
property tests can compare recovered certificates against a known
solution.  ``bench_suite`` runs a corpus of such instances through the
factorization pipeline and reports per-stage timings, residuals and
iteration counts as CSV/JSON.
"""
from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .fr1d import Factor1dOptions, outer_factor_1d
from .fr2d import Factor2dOptions, factor_2d
from .matpoly import (MatrixPoly1, MatrixPoly2, hermitian_square_sum,
                      sample_grid_1d, sample_grid_2d)
from .psdcore import spectral_norm

__all__ = [
    "random_sos_1d",
    "random_sos_2d",
    "random_boundary_singular_1d",
    "default_corpus",
    "bench_suite",
]

CSV_COLUMNS = ("instance_id", "k", "d1", "d2", "stage", "wall_ms",
               "residual", "iters", "accepted")


def _scale_poly(p, s):
    """Multiply every coefficient of an analytic polynomial by s."""
    coeffs = {n: s * mat for n, mat in p.coeffs.items()}
    return type(p)(coeffs, degree=p.degree, analytic=True, dim=p.shape)


def _random_analytic_1d(rng, k, d):
    coeffs = {}
    for n in range(d + 1):
        coeffs[n] = (rng.uniform(-1.0, 1.0, (k, k))
                     + 1j * rng.uniform(-1.0, 1.0, (k, k)))
    return MatrixPoly1(coeffs, degree=d, analytic=True, dim=(k, k))


def _random_analytic_2d(rng, k, d1, d2):
    coeffs = {}
    for n1 in range(d1 + 1):
        for n2 in range(d2 + 1):
            coeffs[(n1, n2)] = (rng.uniform(-1.0, 1.0, (k, k))
                                + 1j * rng.uniform(-1.0, 1.0, (k, k)))
    return MatrixPoly2(coeffs, degree=(d1, d2), analytic=True, dim=(k, k))


def random_sos_1d(k, d, n_factors, seed):
    """Planted one-variable sum of hermitian squares.

    Draws ``n_factors`` analytic polynomials of degree d with coefficient
    entries uniform on [-1, 1] in both real and imaginary parts, scales
    them so the grid sup-norm of Q is about 1, and returns the exactly
    hermitian sum of squares together with the planted factors.

    Parameters
    ----------
    k : int
        Coefficient dimension (factors are k x k).
    d : int
        Degree of each planted factor.
    n_factors : int
        Number of planted factors; 0 yields the zero polynomial.
    seed : int
        Fixes the random stream; identical seeds give bit-identical
        output.

    Returns
    -------
    dict
        ``{"q": MatrixPoly1, "planted": [MatrixPoly1, ...]}``.
    """
    if k < 1 or d < 0 or n_factors < 0:
        raise ValueError("k must be >= 1 and d, n_factors >= 0")
    if n_factors == 0:
        q = MatrixPoly1({}, degree=0, hermitian=True, dim=(k, k))
        return {"q": q, "planted": []}
    rng = np.random.default_rng(seed)
    factors = [_random_analytic_1d(rng, k, d) for _ in range(n_factors)]
    q = hermitian_square_sum(factors)
    vals = sample_grid_1d(q, max(64, 4 * d + 1))
    sup = float(np.linalg.svd(vals, compute_uv=False)[:, 0].max())
    if sup > 0.0:
        shrink = 1.0 / np.sqrt(sup)
        factors = [_scale_poly(f, shrink) for f in factors]
        q = hermitian_square_sum(factors)
    return {"q": q, "planted": factors}


def random_sos_2d(k, d1, d2, n_factors, seed):
    """Planted two-variable sum of hermitian squares.

    Same construction as ``random_sos_1d`` with analytic factors of
    degree (d1, d2); the sum is exactly hermitian and pointwise positive
    semidefinite by construction, and the grid sup-norm of Q is scaled to
    about 1 for comparable conditioning across the corpus.

    Parameters
    ----------
    k, d1, d2 : int
        Coefficient dimension and degree box of the planted factors.
    n_factors : int
        Number of planted factors; 0 yields the zero polynomial.
    seed : int
        Fixes the random stream.

    Returns
    -------
    dict
        ``{"q": MatrixPoly2, "planted": [MatrixPoly2, ...]}``.
    """
    if k < 1 or d1 < 0 or d2 < 0 or n_factors < 0:
        raise ValueError("k must be >= 1 and d1, d2, n_factors >= 0")
    if n_factors == 0:
        q = MatrixPoly2({}, degree=(0, 0), hermitian=True, dim=(k, k))
        return {"q": q, "planted": []}
    rng = np.random.default_rng(seed)
    factors = [_random_analytic_2d(rng, k, d1, d2) for _ in range(n_factors)]
    q = hermitian_square_sum(factors)
    n1 = max(16, 2 * d1 + 1)
    n2 = max(16, 2 * d2 + 1)
    vals = sample_grid_2d(q, n1, n2)
    sup = float(np.linalg.svd(vals, compute_uv=False)[..., 0].max())
    if sup > 0.0:
        shrink = 1.0 / np.sqrt(sup)
        factors = [_scale_poly(f, shrink) for f in factors]
        q = hermitian_square_sum(factors)
    return {"q": q, "planted": factors}


def random_boundary_singular_1d(k, d, seed, zeta=None):
    """One-variable instance with a planted zero on the unit circle.

    The planted factor is P(z) = (1 - conj(zeta) z) G(z) with |zeta| = 1
    and G a random analytic polynomial of degree d - 1, so Q = P*P is
    positive semidefinite with min eigenvalue exactly 0 at z = zeta —
    the regime where factorization regularization matters.  Q is scaled
    so its constant coefficient has spectral norm 2, matching the
    classic profile 2 - z - conj(z) (which is returned exactly for
    k = 1, d = 1, zeta = 1).

    Parameters
    ----------
    k : int
        Coefficient dimension.
    d : int
        Degree of the planted factor (>= 1).
    seed : int
        Fixes the random stream.
    zeta : complex, optional
        Unit-circle zero; drawn uniformly from the circle when omitted.

    Returns
    -------
    dict
        ``{"q": MatrixPoly1, "planted": [MatrixPoly1], "zeta": complex}``.
    """
    if k < 1 or d < 1:
        raise ValueError("k must be >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    if zeta is None:
        zeta = complex(np.exp(2j * np.pi * rng.uniform()))
    else:
        zeta = complex(zeta)
        if abs(abs(zeta) - 1.0) > 1e-12:
            raise ValueError("zeta must lie on the unit circle")
    if d == 1 and k == 1:
        g = MatrixPoly1({0: np.eye(1, dtype=complex)}, degree=0,
                        analytic=True, dim=(1, 1))
    else:
        g = _random_analytic_1d(rng, k, d - 1)
    # P = (1 - conj(zeta) z) G
    coeffs = {}
    zero = np.zeros((k, k), dtype=complex)
    for n in range(d + 1):
        lead = g.coeffs.get(n, zero)
        lag = g.coeffs.get(n - 1, zero)
        mat = lead - np.conj(zeta) * lag
        if np.abs(mat).max() > 0.0:
            coeffs[n] = mat
    p = MatrixPoly1(coeffs, degree=d, analytic=True, dim=(k, k))
    q = hermitian_square_sum([p])
    c0 = spectral_norm(q.coeffs.get(0, zero))
    if c0 > 0.0:
        p = _scale_poly(p, np.sqrt(2.0 / c0))
        q = hermitian_square_sum([p])
    return {"q": q, "planted": [p], "zeta": zeta}


def default_corpus():
    """Small deterministic benchmark corpus covering all generators."""
    corpus = []
    for i, (k, d) in enumerate([(1, 2), (2, 3)]):
        corpus.append({"id": "sos1d-%d" % i, "kind": "sos1d", "k": k,
                       "d": d, "n_factors": 2, "seed": 1000 + i})
    for i, (k, d1, d2) in enumerate([(1, 1, 1), (1, 2, 1), (2, 1, 1),
                                     (2, 2, 2)]):
        corpus.append({"id": "sos2d-%d" % i, "kind": "sos2d", "k": k,
                       "d1": d1, "d2": d2, "n_factors": 2,
                       "seed": 2000 + i})
    for i, (k, d) in enumerate([(1, 1), (2, 2)]):
        corpus.append({"id": "boundary1d-%d" % i, "kind": "boundary1d",
                       "k": k, "d": d, "seed": 3000 + i})
    return corpus


def _bench_one(item, budget_s):
    """Run one corpus item; returns a list of report rows."""
    kind = item["kind"]
    iid = item["id"]
    k = item.get("k", 1)
    d1 = item.get("d1", item.get("d", 0))
    d2 = item.get("d2", 0)
    base = {"instance_id": iid, "k": k, "d1": d1, "d2": d2}
    rows = []
    t0 = time.perf_counter()
    try:
        if kind == "sos1d":
            inst = random_sos_1d(k, item["d"], item["n_factors"],
                                 item["seed"])
            t1 = time.perf_counter()
            p = outer_factor_1d(inst["q"], Factor1dOptions())
            wall = time.perf_counter() - t1
            vals = sample_grid_1d(inst["q"], 512)
            pv = sample_grid_1d(p, 512)
            resid = vals - np.einsum("jba,jbc->jac", pv.conj(), pv)
            residual = float(np.abs(resid).max()) if resid.size else 0.0
            accepted = residual <= 1e-6
            rows.append(dict(base, stage="factor", wall_ms=wall * 1e3,
                             residual=residual, iters="", accepted=""))
        elif kind == "boundary1d":
            inst = random_boundary_singular_1d(k, item["d"], item["seed"])
            t1 = time.perf_counter()
            p = outer_factor_1d(inst["q"], Factor1dOptions())
            wall = time.perf_counter() - t1
            vals = sample_grid_1d(inst["q"], 512)
            pv = sample_grid_1d(p, 512)
            resid = vals - np.einsum("jba,jbc->jac", pv.conj(), pv)
            residual = float(np.abs(resid).max()) if resid.size else 0.0
            accepted = residual <= 1e-5
            rows.append(dict(base, stage="factor", wall_ms=wall * 1e3,
                             residual=residual, iters="", accepted=""))
        elif kind == "sos2d":
            inst = random_sos_2d(k, item["d1"], item["d2"],
                                 item["n_factors"], item["seed"])
            cert = factor_2d(inst["q"], Factor2dOptions())
            meta = cert.pipeline_metadata
            for stage, secs in meta.get("stage_seconds", {}).items():
                if stage == "total":
                    continue
                rows.append(dict(base, stage=stage, wall_ms=secs * 1e3,
                                 residual="", iters="", accepted=""))
            residual = cert.residual
            accepted = cert.accepted
        else:
            raise ValueError("unknown corpus kind %r" % kind)
    except Exception as exc:  # keep the suite running, flag the row
        total = time.perf_counter() - t0
        rows.append(dict(base, stage="error: %s" % type(exc).__name__,
                         wall_ms=total * 1e3, residual="", iters="",
                         accepted=False))
        return rows
    total = time.perf_counter() - t0
    iters = ""
    if kind == "sos2d":
        iters = cert.pipeline_metadata.get(
            "pointwise_iterations", {}).get("iterations_total", "")
    stage = "total"
    if budget_s is not None and total > budget_s:
        stage = "total(budget_exceeded)"
    rows.append(dict(base, stage=stage, wall_ms=total * 1e3,
                     residual=residual, iters=iters, accepted=accepted))
    return rows


def bench_suite(config=None):
    """Run a benchmark corpus and report stage timings and residuals.

    Parameters
    ----------
    config : dict, optional
        Keys (all optional): ``instances`` (list of corpus items, see
        ``default_corpus``; defaults to it), ``time_budget_s``
        (per-instance budget; overruns are flagged in the stage column
        after the fact, the run always continues), ``workers`` (thread
        count; defaults to the TRIGFACTOR_THREADS environment variable
        or 1), ``csv_path`` and ``json_path`` (report files, written
        atomically).

    Returns
    -------
    list of dict
        One row per stage per instance with the columns
        ``instance_id, k, d1, d2, stage, wall_ms, residual, iters,
        accepted``, in deterministic corpus order.
    """
    config = dict(config or {})
    instances = config.get("instances", None)
    if instances is None:
        instances = default_corpus()
    budget = config.get("time_budget_s", 600.0)
    workers = int(config.get("workers", 0)
                  or os.environ.get("TRIGFACTOR_THREADS", "0") or 1)
    workers = max(1, workers)

    if not instances:
        results = []
    elif workers == 1:
        results = [_bench_one(item, budget) for item in instances]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda it: _bench_one(it, budget),
                                    instances))
    rows = [row for group in results for row in group]

    csv_path = config.get("csv_path")
    if csv_path:
        tmp = str(csv_path) + ".tmp"
        with open(tmp, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        os.replace(tmp, csv_path)
    json_path = config.get("json_path")
    if json_path:
        tmp = str(json_path) + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(rows, fh, indent=1)
        os.replace(tmp, json_path)
    return rows
