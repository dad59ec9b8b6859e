"""One-variable spectral factorization Q = P^* P with P analytic.

A Hermitian PSD trigonometric polynomial Q of degree d factors as
Q(z) = P(z)^* P(z) with P analytic of degree at most d (and outer, i.e.
det P root-free inside the open unit disk).  The factor is computed from
large banded Cholesky factorizations of block Toeplitz truncations of
Q + eps I: the middle block row of the (index-reversed) Cholesky factor
converges to the coefficients of P as the truncation grows and eps drives
to zero.  Acceptance is decided purely by the sup-norm residual of
Q - P^* P on an evaluation grid, measured against the ORIGINAL Q.

Convergence facts that shape the default schedules: strictly positive Q
converges geometrically in the truncation size, while a zero of det Q on
the torus slows the middle-row residual to ~1/n^2 (and det-root accuracy
to ~1/n), so boundary-singular instances need both a small residual
tolerance and a deep truncation schedule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import FactorizationError, NotPsdError
from .matpoly import MatrixPoly1, toeplitz_truncation
from .psdcore import schur_complement, spectral_norm


@dataclass
class Factor1dOptions:
    """Schedules and tolerances for the one-variable factorization.

    Attributes
    ----------
    n_blocks_schedule : tuple[int, ...]
        Ascending truncation sizes (block counts) to attempt.
    eps_schedule : tuple[float, ...]
        Non-increasing diagonal regularizations; the trailing 0.0 attempts
        the unregularized matrix (with a one-shot jitter retry if the
        Cholesky fails on an exactly singular truncation).
    residual_tol : float
        Grid sup-norm residual below which a factor is accepted.
    grid_size : int
        Number of evaluation points for the residual.
    psd_tol : float
        Relative negativity allowed on the input's grid eigenvalues before
        the polynomial is rejected as not positive semidefinite.
    """

    n_blocks_schedule: tuple = (32, 64, 128, 256, 512, 1024, 2048, 4096)
    eps_schedule: tuple = (1e-2, 1e-4, 1e-6, 0.0)
    residual_tol: float = 1e-6
    grid_size: int = 512
    psd_tol: float = 1e-8

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_blocks_schedule)
        if not ns or any(n < 1 for n in ns):
            raise ValueError("n_blocks_schedule must be nonempty and "
                             "positive")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("n_blocks_schedule must be strictly increasing")
        eps = tuple(float(e) for e in self.eps_schedule)
        if not eps or any(e < 0 for e in eps):
            raise ValueError("eps_schedule must be nonempty and "
                             "non-negative")
        if any(b > a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_schedule must be non-increasing")
        self.n_blocks_schedule = ns
        self.eps_schedule = eps
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")
        if self.grid_size < 1:
            raise ValueError("grid_size must be positive")
        if self.psd_tol <= 0:
            raise ValueError("psd_tol must be positive")


def corner_schur_sequence(q, n, rank_tol=1e-10):
    """Corner Schur complements M_1, ..., M_n of the (n+1)-block truncation.

    M_j is the generalized Schur complement of the (n+1)-block Toeplitz
    truncation of q onto its leading j-block corner.  For PSD q the sequence
    is the finite-section approximation of the nested completion problem:
    recomputing M_j from a truncation of M_{j+1}'s completion reproduces
    M_j (inheritance), which tests exercise directly.

    Parameters
    ----------
    q : MatrixPoly1
        Hermitian polynomial whose truncations are PSD.
    n : int
        Number of complements to return.

    Returns
    -------
    list[numpy.ndarray]
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    k = q.shape[0]
    trunc = toeplitz_truncation(q, n + 1).matrix
    return [schur_complement(trunc, j * k, rank_tol=rank_tol)
            for j in range(1, n + 1)]


def _grid_points(n_points):
    return np.exp(2j * np.pi * np.arange(n_points) / n_points)


def _eval_on_grid(coeffs, shape, zgrid):
    """Evaluate a coefficient map on a vector of torus points."""
    out = np.zeros((zgrid.size,) + shape, dtype=complex)
    for n, mat in coeffs.items():
        out += (zgrid ** n)[:, None, None] * mat
    return out


def _sup_norm_diff(lhs, rhs):
    """Largest spectral norm of lhs[i] - rhs[i] over the grid axis."""
    diff = lhs - rhs
    if diff.shape[1] == 1 and diff.shape[2] == 1:
        return float(np.abs(diff[:, 0, 0]).max())
    sv = np.linalg.svd(diff, compute_uv=False)
    return float(sv[:, 0].max())


def _flipped_band(q, eps, n_blocks):
    """Upper banded storage of the index-reversed Toeplitz truncation.

    Returns the (bandwidth+1) x M array for the matrix JTJ where T is the
    n_blocks truncation of q + eps*I and J the index reversal; the band of
    JTJ at offset r is the reversed conjugate of T's band at r.  Each band
    of T is periodic with period k, so only k values per offset are formed.
    """
    k = q.shape[0]
    d = q.degree
    m_total = n_blocks * k
    bw = (d + 1) * k - 1
    ab = np.zeros((bw + 1, m_total), dtype=complex)
    for r in range(bw + 1):
        vals = np.zeros(k, dtype=complex)
        for a in range(k):
            c = (a + r) % k
            m = (r + a - c) // k
            coef = q.coeffs.get(m)
            if coef is not None:
                # T[p, p+r] = Q_{-m}[a, c] = conj(Q_m[c, a])
                vals[a] = np.conj(coef[c, a])
            if m == 0 and a == c:
                vals[a] += eps
        if m_total - r <= 0:
            continue
        reps = m_total // k + 1
        diag_t = np.tile(vals, reps)[:m_total - r]
        ab[bw - r, r:] = np.conj(diag_t)[::-1]
    return ab


def _extract_middle_row(cb, n_blocks, k, degree):
    """Read the analytic factor coefficients from the banded Cholesky.

    With U the upper factor of JTJ (banded storage ``cb``), the factor
    C = JUJ is lower banded with T = C^* C; the middle block row i0 = n//2
    holds the stabilized coefficients:
    P_j[a, c] = U[q, q + r], r = j*k + a - c, q = M - 1 - i0*k - a.
    """
    m_total = n_blocks * k
    bw = cb.shape[0] - 1
    i0 = n_blocks // 2
    coeffs = {}
    for j in range(degree + 1):
        mat = np.zeros((k, k), dtype=complex)
        for a in range(k):
            qrow = m_total - 1 - i0 * k - a
            for c in range(k):
                r = j * k + a - c
                if 0 <= r <= bw:
                    mat[a, c] = cb[bw - r, qrow + r]
        coeffs[j] = mat
    return coeffs


def _polar_normalize(coeffs, k):
    """Left-multiply by a unitary so the constant coefficient is PSD.

    Uses the unitary polar factor of P_0; skipped when P_0 is numerically
    singular (the normalization is then not determined by P_0 alone).
    """
    p0 = coeffs.get(0)
    if p0 is None:
        return coeffs
    u, s, vh = np.linalg.svd(p0)
    if s.size == 0 or s[-1] <= 1e-8 * max(s[0], 1e-300):
        return coeffs
    w = vh.conj().T @ u.conj().T
    return {n: w @ mat for n, mat in coeffs.items()}


def outer_factor_1d(q, options=None):
    """Analytic (outer) factor P with Q = P^* P, accepted by grid residual.

    Parameters
    ----------
    q : MatrixPoly1
        Hermitian PSD polynomial (PSD is pre-checked on the residual grid).
    options : Factor1dOptions, optional

    Returns
    -------
    MatrixPoly1
        Analytic factor of degree at most q.degree, normalized so the
        constant coefficient is PSD whenever it is invertible.

    Raises
    ------
    NotPsdError
        If q fails the grid PSD pre-check.
    FactorizationError
        If every (eps, truncation) attempt leaves the sup-norm residual
        above ``residual_tol``; carries the best residual seen.
    """
    if options is None:
        options = Factor1dOptions()
    if q.shape[0] != q.shape[1]:
        raise ValueError("factorization needs a square polynomial")
    if not q.hermitian:
        q = MatrixPoly1(q.coeffs, degree=q.degree, hermitian=True,
                        dim=q.shape)
        if q.sym_correction > 1e-8 * max(q.norm_1(), 1.0):
            raise ValueError("input polynomial is not hermitian "
                             "(correction %.3e)" % q.sym_correction)
    k = q.shape[0]
    d = q.degree

    zgrid = _grid_points(options.grid_size)
    q_samples = _eval_on_grid(q.coeffs, q.shape, zgrid)
    herm_samples = 0.5 * (q_samples + np.conj(np.swapaxes(q_samples, 1, 2)))
    min_eigs = np.linalg.eigvalsh(herm_samples)[:, 0]
    argmin = int(np.argmin(min_eigs))
    scale = q.norm_1()
    if min_eigs[argmin] < -options.psd_tol * max(scale, 1.0):
        raise NotPsdError(
            "input not positive semidefinite, min eigenvalue %.6g at "
            "z = exp(2i pi %d/%d)"
            % (min_eigs[argmin], argmin, options.grid_size),
            min_eigenvalue=float(min_eigs[argmin]),
            where="exp(2i pi %d/%d)" % (argmin, options.grid_size))

    if not q.coeffs:
        return MatrixPoly1({}, degree=0, analytic=True, dim=(k, k))

    best_residual = np.inf
    n_min = 2 * d + 4
    for eps in options.eps_schedule:
        prev_residual = np.inf
        for n_blocks in options.n_blocks_schedule:
            if n_blocks < n_min:
                continue
            ab = _flipped_band(q, eps, n_blocks)
            try:
                cb = scipy.linalg.cholesky_banded(ab, lower=False,
                                                  check_finite=False)
            except np.linalg.LinAlgError:
                cb = None
            if cb is None and eps == 0.0:
                # Exactly singular truncation: retry once at jitter level.
                ab = _flipped_band(q, 1e-13 * max(scale, 1.0), n_blocks)
                try:
                    cb = scipy.linalg.cholesky_banded(ab, lower=False,
                                                      check_finite=False)
                except np.linalg.LinAlgError:
                    cb = None
            if cb is None:
                continue
            coeffs = _extract_middle_row(cb, n_blocks, k, d)
            p_samples = _eval_on_grid(coeffs, (k, k), zgrid)
            prod = np.conj(np.swapaxes(p_samples, 1, 2)) @ p_samples
            residual = _sup_norm_diff(q_samples, prod)
            best_residual = min(best_residual, residual)
            if residual <= options.residual_tol:
                coeffs = _polar_normalize(coeffs, k)
                return MatrixPoly1(coeffs, degree=d, analytic=True,
                                   dim=(k, k))
            if eps > 0.0 and residual <= 3.0 * eps:
                break  # at the regularization floor; deeper helps nothing
            if residual > 0.5 * prev_residual:
                break  # progress stalled at this eps
            prev_residual = residual
    raise FactorizationError(
        "no truncation reached residual %.3e (best %.3e)"
        % (options.residual_tol, best_residual),
        best_residual=float(best_residual))


def is_outer(p, tol=1e-6):
    """Check outerness of an analytic factor via its determinant roots.

    det P is interpolated on 2*k*d + 1 roots of unity, its coefficients
    recovered exactly by inverse FFT, and the polynomial roots computed via
    the companion matrix.  P is outer when no root lies inside the open
    unit disk (|root| >= 1 - tol).  An identically vanishing determinant is
    reported as not outer with witness "rank-deficient symbol".

    Parameters
    ----------
    p : MatrixPoly1
        Analytic square polynomial.
    tol : float
        Inward slack allowed on root moduli.

    Returns
    -------
    dict
        ``{"is_outer": bool, "witness": None or complex root or str}``.
    """
    if p.shape[0] != p.shape[1]:
        raise ValueError("outerness is defined for square factors")
    if any(n < 0 for n in p.coeffs):
        raise ValueError("outerness is defined for analytic factors")
    k = p.shape[0]
    d = p.degree
    n_points = 2 * k * d + 1
    zgrid = _grid_points(n_points)
    samples = _eval_on_grid(p.coeffs, p.shape, zgrid)
    dets = np.linalg.det(samples)
    coeff_scale = max((spectral_norm(m) for m in p.coeffs.values()),
                      default=0.0)
    det_floor = 1e-10 * max(1.0, coeff_scale) ** k
    if np.abs(dets).max() <= det_floor:
        return {"is_outer": False, "witness": "rank-deficient symbol"}
    # Coefficient of z**n is the forward FFT (negative exponent) over N.
    cpoly = np.fft.fft(dets) / n_points
    keep = np.abs(cpoly) > 1e-12 * np.abs(cpoly).max()
    top = int(np.nonzero(keep)[0].max())
    cpoly = cpoly[:top + 1]
    if cpoly.size <= 1:
        return {"is_outer": True, "witness": None}
    roots = np.roots(cpoly[::-1])
    if roots.size == 0:
        return {"is_outer": True, "witness": None}
    moduli = np.abs(roots)
    worst = int(np.argmin(moduli))
    if moduli[worst] >= 1.0 - tol:
        return {"is_outer": True, "witness": None}
    return {"is_outer": False, "witness": complex(roots[worst])}
