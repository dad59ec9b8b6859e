"""Independent verification of factorizations, grid positivity, smoothing.

Certificates are judged against the input polynomial on offset torus grids
(half a step away from the construction grids) with spectral-norm residuals,
a degree-box check, and a factor-count check.  The module also provides the
triangular-weight (Cesaro) smoothing operator, which maps a positive
polynomial to a finite-degree positive approximant.
"""
from __future__ import annotations

import numpy as np

from .matpoly import (MatrixPoly1, MatrixPoly2, sample_grid_1d,
                      sample_grid_2d)

__all__ = [
    "verify_certificate",
    "psd_check_poly",
    "cesaro_smooth",
]


def _spectral_norms(stack):
    """Largest singular value of each matrix in a (..., r, c) stack."""
    if stack.shape[-1] == 1 and stack.shape[-2] == 1:
        return np.abs(stack[..., 0, 0])
    return np.linalg.svd(stack, compute_uv=False)[..., 0]


def _square_sum_1d(factors, n_points, offset):
    total = None
    for f in factors:
        vals = sample_grid_1d(f, n_points, offset=offset)
        term = np.einsum("jba,jbc->jac", vals.conj(), vals)
        total = term if total is None else total + term
    return total


def _square_sum_2d(factors, n1, n2, offset1, offset2):
    total = None
    for f in factors:
        vals = sample_grid_2d(f, n1, n2, offset1=offset1, offset2=offset2)
        term = np.einsum("jlba,jlbc->jlac", vals.conj(), vals)
        total = term if total is None else total + term
    return total


def _degree_box_ok_1d(factors, d):
    for f in factors:
        for n in f.coeffs:
            if n < 0 or n > d:
                return False
    return True


def _degree_box_ok_2d(factors, box):
    b1, b2 = box
    for f in factors:
        for (n1, n2) in f.coeffs:
            if n1 < 0 or n1 > b1 or n2 < 0 or n2 > b2:
                return False
    return True


def verify_certificate(q, factors, grid=None, offset=True):
    """Check a sum-of-squares certificate against its polynomial.

    The residual is the spectral norm of Q(z) - sum_m F_m(z)* F_m(z),
    evaluated on a torus grid offset by half a step from the uniform grid
    (so verification nodes differ from typical construction nodes).

    Parameters
    ----------
    q : MatrixPoly1 or MatrixPoly2
        The polynomial the certificate claims to factor.
    factors : sequence of MatrixPoly1 or MatrixPoly2
        Analytic factors, matching q's variable count; column dimensions
        must equal q's dimension.
    grid : int or (int, int), optional
        Verification grid size(s); defaults to 512 (one variable) or
        (64, 64) (two variables), enlarged to resolve q's degree.
    offset : bool
        When True (default) the grid is shifted by half a step.

    Returns
    -------
    dict
        ``{"residual_sup", "residual_rms", "degree_ok", "count_ok"}``.
        degree_ok enforces the analytic degree box: deg <= d for one
        variable, (d1, 2 d2 - 1) for two (d2 >= 1; (d1, 0) when d2 = 0).
        count_ok enforces at most one factor in one variable and at most
        2 d2 factors in two (one when d2 = 0).
    """
    factors = list(factors)
    for f in factors:
        if f.shape[1] != q.shape[1]:
            raise ValueError(
                "factor column dimension %d does not match the polynomial "
                "dimension %d" % (f.shape[1], q.shape[1]))
        if isinstance(f, MatrixPoly2) != isinstance(q, MatrixPoly2):
            raise ValueError("factor/polynomial variable counts differ")

    off = 0.5 if offset else 0.0
    if isinstance(q, MatrixPoly2):
        d1, d2 = q.degree
        if grid is None:
            grid = (64, 64)
        n1 = max(int(grid[0]), 2 * d1 + 1)
        n2 = max(int(grid[1]), 2 * max(d2, 1) + 1)
        qs = sample_grid_2d(q, n1, n2, offset1=off, offset2=off)
        ss = _square_sum_2d(factors, n1, n2, off, off)
        resid = qs if ss is None else qs - ss
        norms = _spectral_norms(resid)
        box = (d1, 2 * d2 - 1) if d2 >= 1 else (d1, 0)
        degree_ok = _degree_box_ok_2d(factors, box)
        count_ok = len(factors) <= (2 * d2 if d2 >= 1 else 1)
    else:
        d = q.degree
        if grid is None:
            grid = 512
        n = max(int(grid), 2 * d + 1)
        qs = sample_grid_1d(q, n, offset=off)
        ss = _square_sum_1d(factors, n, off)
        resid = qs if ss is None else qs - ss
        norms = _spectral_norms(resid)
        degree_ok = _degree_box_ok_1d(factors, d)
        count_ok = len(factors) <= 1
    return {
        "residual_sup": float(norms.max()),
        "residual_rms": float(np.sqrt(np.mean(norms ** 2))),
        "degree_ok": bool(degree_ok),
        "count_ok": bool(count_ok),
    }


def psd_check_poly(q, grid=None):
    """Minimum eigenvalue of a hermitian polynomial over a torus grid.

    Parameters
    ----------
    q : MatrixPoly1 or MatrixPoly2
        Hermitian polynomial.
    grid : int or (int, int), optional
        Grid size(s); defaults resolve the degree with margin
        (max(512, 4d+1) in one variable, max(64, 4d+1) per variable in two).

    Returns
    -------
    dict
        ``{"min_eigenvalue": float, "argmin": [t1] or [t1, t2]}`` with the
        attaining grid point given by its angle(s) in [0, 2 pi).
    """
    if isinstance(q, MatrixPoly2):
        d1, d2 = q.degree
        if grid is None:
            grid = (max(64, 4 * d1 + 1), max(64, 4 * d2 + 1))
        n1, n2 = int(grid[0]), int(grid[1])
        vals = sample_grid_2d(q, n1, n2)
        eigs = np.linalg.eigvalsh(vals)
        mins = eigs[..., 0]
        j1, j2 = np.unravel_index(int(np.argmin(mins)), mins.shape)
        return {
            "min_eigenvalue": float(mins[j1, j2]),
            "argmin": [2.0 * np.pi * j1 / n1, 2.0 * np.pi * j2 / n2],
        }
    d = q.degree
    if grid is None:
        grid = max(512, 4 * d + 1)
    n = int(grid)
    vals = sample_grid_1d(q, n)
    eigs = np.linalg.eigvalsh(vals)
    mins = eigs[..., 0]
    j = int(np.argmin(mins))
    return {
        "min_eigenvalue": float(mins[j]),
        "argmin": [2.0 * np.pi * j / n],
    }


def cesaro_smooth(p, n):
    """Triangular-weight smoothing to degree at most n.

    Coefficient k of the output is max(0, (n + 1 - |k|)/(n + 1)) times
    coefficient k of the input.  The weights are the entries of a positive
    Toeplitz matrix acting by entrywise (Schur) product on the block
    Toeplitz form, so pointwise positivity is preserved.

    Parameters
    ----------
    p : MatrixPoly1
    n : int
        Target degree bound, n >= 0.

    Returns
    -------
    MatrixPoly1
        Polynomial of degree <= n with the same hermitian/analytic flags.
    """
    if not isinstance(p, MatrixPoly1):
        raise ValueError("cesaro_smooth expects a one-variable polynomial")
    n = int(n)
    if n < 0:
        raise ValueError("smoothing degree must be non-negative")
    coeffs = {}
    for k, mat in p.coeffs.items():
        if abs(k) > n:
            continue
        coeffs[k] = ((n + 1 - abs(k)) / (n + 1)) * mat
    return MatrixPoly1(coeffs, degree=min(n, p.degree),
                       hermitian=p.hermitian, analytic=p.analytic,
                       dim=p.shape)
