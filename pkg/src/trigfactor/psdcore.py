"""Positive semidefinite matrix primitives.

Deterministic Hermitian eigendecomposition helpers, PSD checks and thin
factorizations, corner Schur complements via pseudoinverse, and extraction
of the contraction G linking two PSD factor ranges.  Everything downstream
(the solution-set recursions, the factorization drivers) routes its linear
algebra through this module so that rank decisions and tie-breaking are made
in one place.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPsdError

RANK_TOL = 1e-10
PSD_TOL = 1e-8


def hermitian_part(mat):
    """Hermitian part (M + M^*)/2."""
    mat = np.asarray(mat, dtype=complex)
    return 0.5 * (mat + mat.conj().T)


def eigh_desc(mat):
    """Hermitian eigendecomposition with deterministic ordering.

    Eigenvalues are returned in descending order (stable sort) and each
    eigenvector is phase-normalized so its first component of significant
    magnitude is real positive.  This makes downstream factorizations
    reproducible bit-for-bit across runs.

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
        Eigenvalues (descending) and the matching eigenvector columns.
    """
    mat = hermitian_part(mat)
    vals, vecs = np.linalg.eigh(mat)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    for idx in range(vecs.shape[1]):
        col = vecs[:, idx]
        mags = np.abs(col)
        top = mags.max()
        if top == 0.0:
            continue
        lead = int(np.argmax(mags > 0.5 * top))
        phase = col[lead] / abs(col[lead])
        vecs[:, idx] = col * phase.conjugate()
    return vals, vecs


def spectral_norm(mat):
    """Largest singular value (0 for empty matrices)."""
    mat = np.asarray(mat, dtype=complex)
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def psd_project_check(mat, tol=PSD_TOL):
    """Check Hermitian positive semidefiniteness within a tolerance.

    Parameters
    ----------
    mat : array_like
        Square matrix; its anti-Hermitian part counts against the check.
    tol : float
        Allowed negativity (absolute, on eigenvalues) and asymmetry.

    Returns
    -------
    dict
        ``{"is_psd": bool, "min_eigenvalue": float}`` where the eigenvalue
        refers to the Hermitian part.
    """
    mat = np.asarray(mat, dtype=complex)
    herm = hermitian_part(mat)
    skew = spectral_norm(mat - herm)
    vals = np.linalg.eigvalsh(herm)
    min_eig = float(vals[0]) if vals.size else 0.0
    is_psd = bool(min_eig >= -tol and skew <= tol)
    return {"is_psd": is_psd, "min_eigenvalue": min_eig}


@dataclass
class PsdFactorization:
    """Thin factorization M = E^* E of a PSD matrix.

    Attributes
    ----------
    factor : numpy.ndarray
        E with shape (rank, n); rows scale the range eigenvectors.
    effective_rank : int
        Number of eigenvalues above the relative rank cutoff.
    range_basis : numpy.ndarray
        Orthonormal columns spanning range(M), shape (n, rank).
    """

    factor: np.ndarray
    effective_rank: int
    range_basis: np.ndarray


def psd_factor(mat, rank_tol=RANK_TOL, floor=0.0):
    """Thin PSD factorization M = E^* E via eigendecomposition.

    Parameters
    ----------
    mat : array_like
        Hermitian PSD matrix (within ``rank_tol`` relative negativity).
    rank_tol : float
        Relative eigenvalue cutoff below which directions are treated as
        null.  A zero matrix yields a factor with zero rows.
    floor : float
        Absolute eigenvalue floor; eigenvalues at or below it are treated as
        null regardless of the relative cutoff.  Callers that shrink
        matrices toward zero use this to keep rank decisions anchored to the
        original problem scale.

    Returns
    -------
    PsdFactorization

    Raises
    ------
    NotPsdError
        If the matrix has an eigenvalue below the allowed negativity; the
        exception carries the minimum eigenvalue.
    """
    mat = np.asarray(mat, dtype=complex)
    n = mat.shape[0]
    vals, vecs = eigh_desc(mat)
    if n == 0:
        return PsdFactorization(factor=np.zeros((0, 0), dtype=complex),
                                effective_rank=0,
                                range_basis=np.zeros((0, 0), dtype=complex))
    scale = max(float(vals[0]), 0.0)
    neg_allow = rank_tol * max(scale, 1.0) * 10.0
    if vals[-1] < -neg_allow:
        raise NotPsdError(
            "matrix is not positive semidefinite (min eigenvalue %.3e)"
            % vals[-1], min_eigenvalue=float(vals[-1]))
    keep = vals > max(rank_tol * max(scale, 0.0), floor)
    keep &= vals > 0.0
    rank = int(np.count_nonzero(keep))
    basis = vecs[:, keep]
    factor = (np.sqrt(vals[keep])[:, None] * basis.conj().T)
    return PsdFactorization(factor=factor, effective_rank=rank,
                            range_basis=basis)


def pinv_psd(mat, rank_tol=RANK_TOL):
    """Moore-Penrose pseudoinverse of a Hermitian PSD matrix.

    Eigenvalues below ``rank_tol`` times the largest are treated as zero.
    Small negative eigenvalues (within the same band) are clipped; larger
    negativity raises NotPsdError.
    """
    mat = np.asarray(mat, dtype=complex)
    if mat.shape[0] == 0:
        return mat.copy()
    vals, vecs = eigh_desc(mat)
    scale = max(float(vals[0]), 0.0)
    neg_allow = max(rank_tol * max(scale, 1.0) * 10.0, 1e-13)
    if vals[-1] < -neg_allow:
        raise NotPsdError(
            "pseudoinverse requested of a non-PSD matrix (min eigenvalue "
            "%.3e)" % vals[-1], min_eigenvalue=float(vals[-1]))
    inv = np.zeros_like(vals)
    keep = vals > rank_tol * scale
    inv[keep] = 1.0 / vals[keep]
    return (vecs * inv[None, :]) @ vecs.conj().T


def schur_complement(mat, corner_dim, rank_tol=RANK_TOL, psd_tol=PSD_TOL):
    """Generalized Schur complement onto the leading corner block.

    For the partition ``mat = [[A, B^*], [B, C]]`` with A of size
    ``corner_dim`` this returns A - B^* C^+ B (pseudoinverse).  For PSD
    input this is the unique maximal PSD matrix M such that replacing A by
    A - M keeps the whole matrix PSD; equivalently the variational values
    inf_g <T (f + g), (f + g)> over the complementary block.

    Parameters
    ----------
    mat : array_like
        Hermitian PSD matrix (checked within ``psd_tol`` relative).
    corner_dim : int
        Size of the leading corner.
    rank_tol : float
        Rank cutoff for the pseudoinverse of C.
    psd_tol : float
        Allowed relative negativity of the input.

    Returns
    -------
    numpy.ndarray
        The (Hermitian) Schur complement.

    Raises
    ------
    NotPsdError
        If the input fails the PSD check.  For PSD input the range condition
        range(B) within range(C) holds automatically; a numeric violation
        beyond tolerance also raises.
    """
    mat = np.asarray(mat, dtype=complex)
    n = mat.shape[0]
    corner_dim = int(corner_dim)
    if not 0 < corner_dim <= n:
        raise ValueError("corner_dim %d out of range for size %d"
                         % (corner_dim, n))
    herm = hermitian_part(mat)
    scale = max(spectral_norm(herm), 1.0)
    min_eig = float(np.linalg.eigvalsh(herm)[0])
    if min_eig < -psd_tol * scale:
        raise NotPsdError(
            "Schur complement of a non-PSD matrix (min eigenvalue %.3e)"
            % min_eig, min_eigenvalue=min_eig)
    a = herm[:corner_dim, :corner_dim]
    bstar = herm[:corner_dim, corner_dim:]
    b = herm[corner_dim:, :corner_dim]
    c = herm[corner_dim:, corner_dim:]
    if c.shape[0] == 0:
        return a.copy()
    cpinv = pinv_psd(c, rank_tol=rank_tol)
    # Range condition: for PSD input range(B) is inside range(C); report a
    # numeric violation instead of silently truncating a large component.
    proj_defect = spectral_norm(b - c @ cpinv @ b)
    if proj_defect > np.sqrt(psd_tol) * scale:
        raise NotPsdError(
            "column space of the coupling block escapes the corner "
            "complement (defect %.3e)" % proj_defect,
            min_eigenvalue=min_eig)
    out = a - bstar @ cpinv @ b
    return hermitian_part(out)


@dataclass
class ContractionData:
    """Contraction G with F^* G E = B for PSD factors E, F.

    Attributes
    ----------
    g : numpy.ndarray
        Matrix of shape (rank_F, rank_E).
    defect_isometry : float
        max |sigma_i(G) - 1| with the singular value list padded by zeros to
        rank_E (0 when rank_E is 0).
    defect_coisometry : float
        Same with padding to rank_F.
    """

    g: np.ndarray
    defect_isometry: float
    defect_coisometry: float


def contraction_g(b, e_fact, f_fact, tol=1e-8):
    """Solve F^* G E = B for the smallest-norm G and report unitarity defects.

    E and F are thin PSD factors (of A - M and M respectively, in the
    intended use); G = (F^*)^+ B E^+ is the minimum-norm solution.  If the
    equation is inconsistent beyond ``tol * ||B||`` the data does not come
    from a PSD 2x2 block structure and a ValueError is raised.

    Parameters
    ----------
    b : array_like
        Right-hand side, shape (n, n).
    e_fact, f_fact : PsdFactorization
        Factors with shapes (r_E, n) and (r_F, n).
    tol : float
        Relative consistency tolerance.

    Returns
    -------
    ContractionData
    """
    b = np.asarray(b, dtype=complex)
    e = e_fact.factor
    f = f_fact.factor
    r_e = e.shape[0]
    r_f = f.shape[0]
    e_pinv = np.linalg.pinv(e, rcond=RANK_TOL)
    f_star_pinv = np.linalg.pinv(f.conj().T, rcond=RANK_TOL)
    g = f_star_pinv @ b @ e_pinv
    bnorm = spectral_norm(b)
    resid = spectral_norm(f.conj().T @ g @ e - b)
    if bnorm > 0 and resid > tol * bnorm:
        raise ValueError(
            "no contraction G satisfies F^* G E = B (relative defect %.3e); "
            "the block data is inconsistent" % (resid / bnorm))
    if min(r_e, r_f) > 0:
        sigma = np.linalg.svd(g, compute_uv=False)
    else:
        sigma = np.zeros(0)
    padded_e = np.concatenate([sigma, np.zeros(max(r_e - sigma.size, 0))])
    padded_f = np.concatenate([sigma, np.zeros(max(r_f - sigma.size, 0))])
    defect_iso = float(np.max(np.abs(padded_e[:r_e] - 1.0))) if r_e else 0.0
    defect_co = float(np.max(np.abs(padded_f[:r_f] - 1.0))) if r_f else 0.0
    return ContractionData(g=g, defect_isometry=defect_iso,
                           defect_coisometry=defect_co)
