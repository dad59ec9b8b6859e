"""Solution set of the one-step positive block-completion problem.

For Hermitian PSD A and square B, the set studied here is

    M(A, B) = { M PSD : [[A - M, B^*], [B, M]] PSD }.

It is convex, compact, and (when the semi-infinite block tridiagonal
Toeplitz operator with diagonal A and subdiagonal B is PSD) non-empty, with
a maximal element M_plus and a minimal element M_minus = A - N_plus, where
N_plus is the maximal element for the reflected data (A, B^*).  M_plus is
the corner Schur complement of the semi-infinite operator and is computed
by the decreasing recursion

    S_1 = A,   S_{n+1} = A - B^* S_n^+ B,

which equals the corner Schur complement of the n-block truncation.  On
critical instances the recursion converges only like O(1/n), so after a
sub-geometric stretch we switch to the doubling (cyclic reduction) form

    K_{j+1} = K_j - B_j^* A_j^+ B_j,
    A_{j+1} = A_j - B_j^* A_j^+ B_j - B_j A_j^+ B_j^*,
    B_{j+1} = B_j A_j^+ B_j,

whose K_j is the corner Schur complement of the 2^j-block truncation, i.e.
the same limit reached quadratically.  The final value is always validated
against the fixed-point equation M = A - B^* M^+ B.

``extremalize`` iteratively shrinks A (keeping B) until M(A, B) collapses to
a single point, following the two update rules driven by the isometry /
co-isometry defects of the contraction G with F^* G E = B, where
E^* E = A - M and F^* F = M.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NotPsdError
from .psdcore import (RANK_TOL, contraction_g, hermitian_part, pinv_psd,
                      psd_factor, spectral_norm)

PSD_CHECK_BLOCKS = 24
PSD_CHECK_TOL = 1e-8


def tridiag_truncation(a, b, n_blocks):
    """Dense n-block truncation of tridiag(B; A; B^*)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    k = a.shape[0]
    mat = np.zeros((n_blocks * k, n_blocks * k), dtype=complex)
    for i in range(n_blocks):
        mat[i * k:(i + 1) * k, i * k:(i + 1) * k] = a
        if i + 1 < n_blocks:
            mat[(i + 1) * k:(i + 2) * k, i * k:(i + 1) * k] = b
            mat[i * k:(i + 1) * k, (i + 1) * k:(i + 2) * k] = b.conj().T
    return mat


def _clip_psd(mat):
    """Project a nearly-PSD Hermitian matrix onto the PSD cone."""
    mat = hermitian_part(mat)
    vals, vecs = np.linalg.eigh(mat)
    if vals.size == 0 or vals[0] >= 0.0:
        return mat
    vals = np.maximum(vals, 0.0)
    return hermitian_part((vecs * vals[None, :]) @ vecs.conj().T)


def mset_membership(a, b, m, tol=1e-8):
    """Test whether M belongs to M(A, B) within an absolute tolerance.

    Checks that M and the 2x2 block matrix [[A - M, B^*], [B, M]] are both
    PSD with eigenvalues above ``-tol * max(1, ||A||)``.

    Returns
    -------
    bool
    """
    a = hermitian_part(np.asarray(a, dtype=complex))
    b = np.asarray(b, dtype=complex)
    m = hermitian_part(np.asarray(m, dtype=complex))
    scale = max(1.0, spectral_norm(a))
    floor = -tol * scale
    if float(np.linalg.eigvalsh(m)[0]) < floor:
        return False
    block = np.block([[a - m, b.conj().T], [b, m]])
    return float(np.linalg.eigvalsh(hermitian_part(block))[0]) >= floor


def _recursion_phase(a, b, tol, max_iter, rank_tol):
    """Plain decreasing recursion; returns (S, converged, last_gap, iters)."""
    s = a.copy()
    gaps = []
    cap = min(max_iter, 64)
    bh = b.conj().T
    for it in range(cap):
        s_next = hermitian_part(a - bh @ pinv_psd(s, rank_tol=rank_tol) @ b)
        gap = spectral_norm(s_next - s)
        s = s_next
        gaps.append(gap)
        if gap <= tol:
            return s, True, gap, it + 1
        # Sub-geometric progress: project the remaining decay and bail out
        # to the doubling form early instead of burning the iteration budget.
        if it >= 47 and gaps[-17] > 0:
            rate = (gaps[-1] / gaps[-17]) ** (1.0 / 16.0)
            if rate > 0.999 or gaps[-1] * rate ** (max_iter - it) > tol:
                return s, False, gap, it + 1
    return s, False, gaps[-1] if gaps else 0.0, cap


def _cyclic_reduction(a, b, tol, rank_tol, max_sweeps=96):
    """Doubling recursion for the corner Schur complement limit.

    On critically conditioned instances the A_j blocks decay to zero with
    heavy cancellation, so the iteration is run with a clipped
    pseudoinverse and accepted once the per-sweep correction plateaus at
    the double-precision noise floor (about sqrt(eps) relative); the
    caller's fixed-point validation still gates the returned value.
    """
    scale0 = max(spectral_norm(a), spectral_norm(b), 1.0)
    noise_floor = 1e-7 * scale0
    aj = a.copy()
    bj = b.copy()
    k = a.copy()
    gap = spectral_norm(b)
    history = []
    for _ in range(max_sweeps):
        ainv = pinv_psd(_clip_psd(aj), rank_tol=rank_tol)
        bh_ainv = bj.conj().T @ ainv
        corr = bh_ainv @ bj
        k_next = hermitian_part(k - corr)
        a_next = hermitian_part(aj - corr - bj @ ainv @ bj.conj().T)
        b_next = bj @ ainv @ bj
        gap = spectral_norm(corr)
        k, aj, bj = k_next, a_next, b_next
        history.append(gap)
        if gap <= 0.1 * tol:
            return k, True, gap
        if (len(history) >= 9 and gap <= noise_floor
                and gap > 0.25 * history[-9]):
            return k, True, gap
    return k, False, gap


def m_plus(a, b, tol=1e-10, max_iter=500, rank_tol=RANK_TOL):
    """Maximal element of M(A, B).

    Runs the decreasing recursion S_{n+1} = A - B^* S_n^+ B (each S_n is the
    corner Schur complement of the n-block truncation) and accelerates with
    the doubling form when progress is sub-geometric.  The result is
    validated against the fixed-point equation.

    Parameters
    ----------
    a, b : array_like
        Hermitian PSD diagonal block and subdiagonal block.
    tol : float
        Absolute stopping tolerance on the iteration step.
    max_iter : int
        Cap on recursion steps.
    rank_tol : float
        Relative rank cutoff for the pseudoinverses.

    Returns
    -------
    numpy.ndarray

    Raises
    ------
    NotPsdError
        If the semi-infinite tridiagonal operator fails a PSD truncation
        check (so M(A, B) is empty).
    ConvergenceError
        If neither phase converges, carrying the last gap.

    Notes
    -----
    The problem is rescaled internally to max(||A||, ||B||) = 1 (the set is
    exactly scale-equivariant), so ``tol`` acts relative to the data norm.
    On critically conditioned instances (contraction of norm one) the
    achievable accuracy in double precision is about sqrt(eps); the doubling
    phase accepts at that noise floor rather than iterating forever.
    """
    a = hermitian_part(np.asarray(a, dtype=complex))
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError("A and B must be square matrices of equal size")
    norm_scale = max(spectral_norm(a), spectral_norm(b))
    if norm_scale == 0.0:
        return np.zeros_like(a)
    a_n = a / norm_scale
    b_n = b / norm_scale
    trunc = tridiag_truncation(a_n, b_n, PSD_CHECK_BLOCKS)
    min_eig = float(np.linalg.eigvalsh(hermitian_part(trunc))[0])
    if min_eig < -PSD_CHECK_TOL:
        raise NotPsdError(
            "the block tridiagonal operator is not PSD (truncation min "
            "eigenvalue %.3e relative); the solution set is empty" % min_eig,
            min_eigenvalue=min_eig * norm_scale)

    s, converged, gap, _ = _recursion_phase(a_n, b_n, tol, max_iter,
                                            rank_tol)
    if not converged:
        s, converged, gap = _cyclic_reduction(a_n, b_n, tol, rank_tol)
    if not converged:
        raise ConvergenceError(
            "maximal-element recursion did not converge (last gap %.3e)"
            % gap, last_gap=gap)
    s = _clip_psd(s)
    fixed = spectral_norm(
        s - hermitian_part(a_n - b_n.conj().T
                           @ pinv_psd(s, rank_tol=rank_tol) @ b_n))
    if fixed > max(1e-6, 1000.0 * tol):
        raise ConvergenceError(
            "maximal element failed fixed-point validation (residual %.3e)"
            % fixed, last_gap=fixed)
    return norm_scale * s


def m_minus(a, b, tol=1e-10, max_iter=500, rank_tol=RANK_TOL):
    """Minimal element of M(A, B), computed as A - N_plus(A, B^*)."""
    a = hermitian_part(np.asarray(a, dtype=complex))
    b = np.asarray(b, dtype=complex)
    n_plus = m_plus(a, b.conj().T, tol=tol, max_iter=max_iter,
                    rank_tol=rank_tol)
    return _clip_psd(a - n_plus)


@dataclass
class MSetReport:
    """Extremal elements of M(A, B) and their contraction defects.

    Attributes
    ----------
    m_plus, m_minus, m_star : numpy.ndarray
        Maximal, minimal, and midpoint elements.
    gap : float
        Spectral norm of m_plus - m_minus.
    defects : tuple
        Three (isometry, co-isometry) defect pairs for the contractions of
        m_plus, m_minus, and m_star, in that order.
    is_singleton : bool
        True when the gap and every defect are within tolerance.
    tol : float
        Tolerance the verdict was taken at.
    """

    m_plus: np.ndarray
    m_minus: np.ndarray
    m_star: np.ndarray
    gap: float
    defects: tuple
    is_singleton: bool
    tol: float


@dataclass
class ExtremalizationResult:
    """Outcome of the shrink-A-to-singleton iteration.

    Attributes
    ----------
    a_hat : numpy.ndarray
        Final shrunken diagonal block.
    m_hat : numpy.ndarray
        The single element of M(a_hat, B) (midpoint of the final report).
    iterations : int
        Number of shrink steps applied (0 if already a singleton).
    trace_log : list
        One (step_kind, decrement_norm) pair per step, step_kind in
        {"shrink_E_side", "shrink_F_side"}.
    final_report : MSetReport or None
        Extremality report of (a_hat, B) at termination (in original units;
        the defects are dimensionless).  None only for zero input data.
    """

    a_hat: np.ndarray
    m_hat: np.ndarray
    iterations: int
    trace_log: list = field(default_factory=list)
    final_report: MSetReport = None


def _analyze(a, b, m0, floor):
    """Factor A - m0 and m0 and extract the contraction and its defects."""
    e_fact = psd_factor(_clip_psd(a - m0), floor=floor)
    f_fact = psd_factor(_clip_psd(m0), floor=floor)
    # The rank floor cuts directions of magnitude ~sqrt(floor) out of E
    # and F, so near-singular data shows a least-squares defect of that
    # size even when the equation is exactly consistent; gate there.
    tol = max(1e-6, 10.0 * np.sqrt(floor))
    data = contraction_g(b, e_fact, f_fact, tol=tol)
    return e_fact, f_fact, data


def _report_with_analyses(a, b, tol, max_iter, rank_tol, floor):
    inner_tol = min(tol * 1e-3, 1e-10)
    mp = m_plus(a, b, tol=inner_tol, max_iter=max_iter, rank_tol=rank_tol)
    mm = m_minus(a, b, tol=inner_tol, max_iter=max_iter, rank_tol=rank_tol)
    ms = _clip_psd(0.5 * (mp + mm))
    gap = spectral_norm(mp - mm)
    analyses = {}
    defects = []
    for name, m0 in (("plus", mp), ("minus", mm), ("star", ms)):
        e_fact, f_fact, data = _analyze(a, b, m0, floor)
        analyses[name] = (m0, e_fact, f_fact, data)
        defects.append((data.defect_isometry, data.defect_coisometry))
    worst = max(max(pair) for pair in defects)
    report = MSetReport(m_plus=mp, m_minus=mm, m_star=ms, gap=float(gap),
                        defects=tuple(defects),
                        is_singleton=bool(gap <= tol and worst <= tol),
                        tol=tol)
    return report, analyses


def extremality_report(a, b, tol=1e-7, max_iter=500, rank_tol=RANK_TOL):
    """Extremal elements of M(A, B) with contraction defects.

    The problem is rescaled internally to max(||A||, ||B||) = 1, so the
    singleton tolerance is relative to the data norm; the reported elements
    and gap are in the original units.

    Parameters
    ----------
    a, b : array_like
    tol : float
        Singleton tolerance for the (relative) gap and unitarity defects.
    max_iter, rank_tol :
        Passed to the element recursions.

    Returns
    -------
    MSetReport
    """
    a = hermitian_part(np.asarray(a, dtype=complex))
    b = np.asarray(b, dtype=complex)
    norm_scale = max(spectral_norm(a), spectral_norm(b))
    if norm_scale == 0.0:
        zero = np.zeros_like(a)
        return MSetReport(m_plus=zero, m_minus=zero.copy(),
                          m_star=zero.copy(), gap=0.0,
                          defects=((0.0, 0.0), (0.0, 0.0), (0.0, 0.0)),
                          is_singleton=True, tol=tol)
    floor = 0.1 * tol
    report, _ = _report_with_analyses(a / norm_scale, b / norm_scale, tol,
                                      max_iter, rank_tol, floor)
    return MSetReport(m_plus=norm_scale * report.m_plus,
                      m_minus=norm_scale * report.m_minus,
                      m_star=norm_scale * report.m_star,
                      gap=norm_scale * report.gap,
                      defects=report.defects,
                      is_singleton=report.is_singleton, tol=tol)


def extremalize(a, b, tol=1e-7, max_iter=500, rank_tol=RANK_TOL):
    """Shrink A until the solution set M(A, B) collapses to one point.

    Per iteration the extremal elements of the current set are computed and
    the first of (m_star, m_plus, m_minus) whose contraction G fails
    unitarity drives one of two updates:

    * G not an isometry:  A <- E^* G^* G E + M0  (keeps M0 a member),
    * G isometry but not a co-isometry: A <- A - F^* (I - G G^*) F.

    Both moves are monotone (the new A is dominated by the old one) and the
    decrement norm is logged.  As elsewhere in this module the problem is
    rescaled internally to max(||A||, ||B||) = 1, making the tolerance
    relative to the data norm; returned matrices are in original units.

    Parameters
    ----------
    a, b : array_like
    tol : float
        Singleton tolerance (relative).
    max_iter : int
        Cap on shrink steps.

    Returns
    -------
    ExtremalizationResult

    Raises
    ------
    ConvergenceError
        If the cap is reached before the set collapses; carries the trace.
    """
    a_cur = hermitian_part(np.asarray(a, dtype=complex))
    b = np.asarray(b, dtype=complex)
    norm_scale = max(spectral_norm(a_cur), spectral_norm(b))
    if norm_scale == 0.0:
        return ExtremalizationResult(a_hat=np.zeros_like(a_cur),
                                     m_hat=np.zeros_like(a_cur),
                                     iterations=0, trace_log=[])
    a_cur = a_cur / norm_scale
    b = b / norm_scale
    floor = 0.1 * tol
    # The defect driving a step is quadratic in the gap (a gap of 1e-7 shows
    # up as a defect near 5e-15), so the floor separating signal from noise
    # must sit barely above machine epsilon or the final step cannot fire.
    step_floor = 4.0 * np.finfo(float).eps
    trace = []
    last_gap = None
    best_gap = np.inf
    stagnant = 0
    for it in range(max_iter + 1):
        report, analyses = _report_with_analyses(a_cur, b, tol, max_iter,
                                                 rank_tol, floor)
        last_gap = report.gap
        if report.is_singleton:
            scaled = MSetReport(m_plus=norm_scale * report.m_plus,
                                m_minus=norm_scale * report.m_minus,
                                m_star=norm_scale * report.m_star,
                                gap=norm_scale * report.gap,
                                defects=report.defects,
                                is_singleton=True, tol=tol)
            return ExtremalizationResult(a_hat=norm_scale * a_cur,
                                         m_hat=norm_scale * report.m_star,
                                         iterations=it, trace_log=trace,
                                         final_report=scaled)
        # Noise-level defects can keep firing no-op steps; require the gap
        # to keep moving or give up promptly instead of burning the budget.
        if report.gap < 0.97 * best_gap:
            best_gap = report.gap
            stagnant = 0
        else:
            stagnant += 1
            if stagnant >= 6:
                raise ConvergenceError(
                    "extremalization stalled with gap %.3e (no progress "
                    "over %d iterations)" % (report.gap, stagnant),
                    last_gap=report.gap, iterations=it, trace_log=trace)
        stepped = False
        for name in ("star", "plus", "minus"):
            m0, e_fact, f_fact, data = analyses[name]
            iso, co = data.defect_isometry, data.defect_coisometry
            if iso <= step_floor and co <= step_floor:
                continue
            if iso > step_floor:
                ge = data.g @ e_fact.factor
                a_next = _clip_psd(ge.conj().T @ ge + m0)
                kind = "shrink_E_side"
            else:
                f = f_fact.factor
                gh_f = data.g.conj().T @ f
                a_next = _clip_psd(a_cur - f.conj().T @ f
                                   + gh_f.conj().T @ gh_f)
                kind = "shrink_F_side"
            decrement = spectral_norm(a_cur - a_next)
            trace.append((kind, float(decrement) * norm_scale))
            a_cur = a_next
            stepped = True
            break
        if not stepped:
            # Every contraction is unitary at machine level but the gap
            # persists: no update rule applies.
            raise ConvergenceError(
                "extremalization stalled with gap %.3e and unitary "
                "contractions" % report.gap, last_gap=report.gap,
                iterations=it, trace_log=trace)
    raise ConvergenceError(
        "extremalization did not reach a singleton in %d iterations"
        % max_iter, last_gap=last_gap, iterations=max_iter, trace_log=trace)
