"""Two-variable sum-of-squares factorization pipeline.

A hermitian matrix trigonometric polynomial Q(z1, z2) of degree (d1, d2)
that is positive semidefinite on the two-torus is decomposed into at most
2*d2 hermitian squares of analytic polynomials of degree at most
(d1, 2*d2 - 1).  The stages are:

1. regroup Q into a one-variable block pencil (A(z1), B(z1)) whose
   tridiagonal block Toeplitz operator represents Q in the z2 direction;
2. at every node of a frequency grid, shrink A(w) until the solution set
   M(A(w), B(w)) collapses to a single element M-hat(w);
3. convert the pointwise fields to Fourier coefficients; use them
   directly when everything beyond degree d1 is relative noise, and
   otherwise refine them by alternating projections into a hermitian
   polynomial field of degree <= d1 that stays inside the solution sets
   (the finite-degree witness either way);
4. assemble the degree-d1 hermitian block symbol
   H = [[A - M-hat, B*], [B, M-hat]] (with the original A) and factor it
   with the one-variable routine;
5. unpack the analytic factor of H into two-variable certificate factors
   and verify the certificate on an offset grid.

Degree conventions: when d2 = 0 the input does not depend on z2 and is
routed directly through the one-variable factorization (single factor).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .certify import verify_certificate
from .errors import ConvergenceError, EmptySetError, FactorizationError, \
    NotPsdError
from .fr1d import Factor1dOptions, outer_factor_1d
from .matpoly import (MatrixPoly1, MatrixPoly2, PencilPair, regroup_blocks,
                      sample_grid_1d, sample_grid_2d)
from .mset import extremalize, m_minus, m_plus
from .psdcore import hermitian_part, spectral_norm

__all__ = [
    "Factor2dOptions",
    "ExtremalSymbolPair",
    "SosCertificate",
    "compute_extremal_pair",
    "assemble_H",
    "unpack_factors",
    "factor_2d",
    "swap_variables",
]


@dataclass
class Factor2dOptions:
    """Tolerances and schedules for the two-variable pipeline.

    Attributes
    ----------
    certificate_tol : float
        Acceptance threshold for the final sup-norm residual.
    extremalize_tol : float
        Singleton tolerance for the pointwise collapse (relative to the
        local data norm).
    degree_tol : float
        Relative Fourier-tail bound beyond degree d1 for the computed
        symbols (the finite-degree witness).
    feasibility_tol : float or None
        Relative negativity accepted for the refined degree-d1 member on
        the fine validation grid.  None derives it from the certificate
        tolerance as max(1e-9, certificate_tol / 100): the defect feeds
        the final residual roughly one-to-one, so two orders of margin
        keep the certificate comfortably inside its own tolerance.
    grid_size : int or None
        Frequency grid for the pointwise stage; None means
        max(64, 8 * d1).  Doubled up to ``max_grid_doublings`` times when
        the degree validation fails.
    max_iter : int
        Iteration budget per pointwise collapse.
    residual_tol_1d : float
        Residual target passed to the one-variable factorization of H.
    n_blocks_schedule, eps_schedule : tuple
        Passed through to the one-variable factorization.
    verify_grid : tuple
        (n1, n2) verification grid; the certificate residual is taken on
        this grid offset by half a step in both variables.
    max_grid_doublings : int
        Attempts allowed for the degree validation.
    """

    certificate_tol: float = 1e-5
    extremalize_tol: float = 1e-7
    degree_tol: float = 1e-6
    feasibility_tol: float | None = None
    grid_size: int | None = None
    max_iter: int = 500
    residual_tol_1d: float = 1e-7
    n_blocks_schedule: tuple = (32, 64, 128, 256, 512, 1024, 2048, 4096)
    eps_schedule: tuple = (1e-2, 1e-4, 1e-6, 0.0)
    verify_grid: tuple = (64, 64)
    max_grid_doublings: int = 4

    def __post_init__(self):
        for name in ("certificate_tol", "extremalize_tol", "degree_tol",
                     "residual_tol_1d"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        if self.feasibility_tol is None:
            self.feasibility_tol = max(1e-9, self.certificate_tol / 100.0)
        if self.feasibility_tol <= 0:
            raise ValueError("feasibility_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.max_grid_doublings < 0:
            raise ValueError("max_grid_doublings must be non-negative")


@dataclass
class ExtremalSymbolPair:
    """Degree-validated symbols of the pointwise-collapsed pencil.

    Attributes
    ----------
    a_hat, m_hat : MatrixPoly1
        Hermitian symbols of degree <= d1 (the shrunken diagonal block and
        the single solution-set element).
    decay_report : dict
        ``{"a_hat": [[degree, norm], ...], "m_hat": [[degree, norm], ...],
        "tail_relative": float, "leading_norm": float,
        "snapped_to_zero": [names], "degree_tol": float}`` — per-degree
        coefficient norms beyond d1 before truncation.  When the
        feasibility refinement produced the pair, additional keys
        ``refined`` (True), ``pre_refinement_tail``, ``refine_sweeps``
        and ``refine_min_eig_rel`` record the path taken and the
        final tail is 0 by construction.
    grid_size : int
        Frequency grid size that passed the degree validation.
    stats : dict
        Pointwise iteration counters and the number of grid doublings.
    """

    a_hat: MatrixPoly1
    m_hat: MatrixPoly1
    decay_report: dict
    grid_size: int
    stats: dict = field(default_factory=dict)


@dataclass
class SosCertificate:
    """Sum-of-hermitian-squares certificate for a two-variable polynomial.

    Attributes
    ----------
    factors : list of MatrixPoly2
        Analytic factors F_m with Q ~= sum F_m* F_m.
    degrees : list of tuple
        Degree of each factor.
    residual : float
        Sup-norm residual over the offset verification grid.
    accepted : bool
        True when the residual is within tolerance and the structural
        checks (degree box, factor count) pass.
    rejection_reason : str or None
        Populated when accepted is False.
    pipeline_metadata : dict
        Grid sizes, tolerances, iteration counts, stage timings.
    """

    factors: list
    degrees: list
    residual: float
    accepted: bool
    rejection_reason: str | None = None
    pipeline_metadata: dict = field(default_factory=dict)


def _field_degree_norms(samples):
    """FFT a (N, r, c) field over axis 0 and return {degree: coeff norm}.

    The coefficient of z**n is np.fft.fft(samples, axis=0)[n]/N; index i
    is reported as degree i for i <= N//2 and i - N otherwise.
    """
    n_grid = samples.shape[0]
    spec = np.fft.fft(samples, axis=0) / n_grid
    norms = {}
    for i in range(n_grid):
        deg = i if i <= n_grid // 2 else i - n_grid
        norms[deg] = float(spectral_norm(spec[i]))
    return spec, norms


def _truncate_field(spec, d1, n_grid, dim):
    """Build a hermitian MatrixPoly1 of degree <= d1 from an FFT stack."""
    coeffs = {}
    for n in range(-d1, d1 + 1):
        mat = spec[n % n_grid]
        if spectral_norm(mat) > 0.0:
            coeffs[n] = mat.copy()
    return MatrixPoly1(coeffs, degree=d1, hermitian=True, dim=dim)


def _pointwise_collapse(pair, n_grid, tol, max_iter):
    """Run the singleton collapse at every frequency node.

    Returns (a_field, m_field, iterations list, failures list).  An empty
    solution set aborts immediately (the input cannot be positive
    semidefinite); a node that merely fails to collapse is recorded in
    ``failures`` so the caller can fall back to the feasibility
    refinement.
    """
    asamp = sample_grid_1d(pair.a, n_grid)
    bsamp = sample_grid_1d(pair.b, n_grid)
    dim = pair.a.shape[0]
    a_field = np.zeros((n_grid, dim, dim), dtype=complex)
    m_field = np.zeros((n_grid, dim, dim), dtype=complex)
    iters = []
    failures = []
    for j in range(n_grid):
        omega = 2.0 * np.pi * j / n_grid
        try:
            res = extremalize(asamp[j], bsamp[j], tol=tol, max_iter=max_iter)
        except NotPsdError as exc:
            raise EmptySetError(
                "solution set is empty at frequency index %d "
                "(omega = %.6f): %s" % (j, omega, exc),
                where=omega) from exc
        except (ConvergenceError, ValueError) as exc:
            # Non-convergence, or rank decisions at a near-singular node
            # leaving the contraction equation inconsistent: both are
            # node-local defects the refinement stage absorbs.
            failures.append((j, omega, str(exc)))
            continue
        a_field[j] = res.a_hat
        m_field[j] = res.m_hat
        iters.append(res.iterations)
    return a_field, m_field, iters, failures


def _midpoint_field(pair, n_grid, tol=1e-10):
    """Sample the midpoint (M_plus + M_minus)/2 of the solution intervals.

    The midpoint at each node belongs to the solution set of the original
    pencil, making it a robust interior starting point for the
    feasibility refinement.
    """
    asamp = sample_grid_1d(pair.a, n_grid)
    bsamp = sample_grid_1d(pair.b, n_grid)
    dim = pair.a.shape[0]
    field = np.zeros((n_grid, dim, dim), dtype=complex)
    for j in range(n_grid):
        try:
            top = m_plus(asamp[j], bsamp[j], tol=tol)
            bot = m_minus(asamp[j], bsamp[j], tol=tol)
        except NotPsdError as exc:
            omega = 2.0 * np.pi * j / n_grid
            raise EmptySetError(
                "solution set is empty at frequency index %d "
                "(omega = %.6f): %s" % (j, omega, exc),
                where=omega) from exc
        except ConvergenceError:
            # Any hermitian start works for the projection refinement;
            # halve the diagonal block when the extremes are unavailable.
            field[j] = 0.5 * hermitian_part(asamp[j])
            continue
        field[j] = 0.5 * (top + bot)
    return asamp, bsamp, field


def _project_band(field, d1):
    """Project a hermitian field onto polynomials of degree <= d1.

    Orthogonal projection in the grid L2 metric: hermitize each node,
    then zero every Fourier coefficient beyond the symmetric degree band.
    """
    n_grid = field.shape[0]
    herm = 0.5 * (field + np.conj(np.transpose(field, (0, 2, 1))))
    spec = np.fft.fft(herm, axis=0)
    keep = np.zeros(n_grid, dtype=bool)
    for n in range(-min(d1, n_grid // 2), min(d1, n_grid // 2) + 1):
        keep[n % n_grid] = True
    spec[~keep] = 0.0
    return np.fft.ifft(spec, axis=0)


def _pack_coeffs(gammas, dim, d1):
    """Real parameter vector for hermitian polynomial coefficients.

    gamma_0 is hermitian (real diagonal, complex strict upper triangle);
    gamma_n for n >= 1 is an arbitrary complex matrix (real and imaginary
    parts); gamma_{-n} = gamma_n^H is implicit.
    """
    iu = np.triu_indices(dim, k=1)
    parts = [np.real(np.diag(gammas[0])),
             np.real(gammas[0][iu]), np.imag(gammas[0][iu])]
    for n in range(1, d1 + 1):
        parts.append(np.real(gammas[n]).ravel())
        parts.append(np.imag(gammas[n]).ravel())
    return np.concatenate(parts) if parts else np.zeros(0)


def _unpack_coeffs(x, dim, d1):
    iu = np.triu_indices(dim, k=1)
    n_off = iu[0].size
    g0 = np.zeros((dim, dim), dtype=complex)
    g0[np.diag_indices(dim)] = x[:dim]
    upper = x[dim:dim + n_off] + 1j * x[dim + n_off:dim + 2 * n_off]
    g0[iu] = upper
    g0[(iu[1], iu[0])] = np.conj(upper)
    gammas = [g0]
    pos = dim + 2 * n_off
    for _ in range(d1):
        re = x[pos:pos + dim * dim].reshape(dim, dim)
        im = x[pos + dim * dim:pos + 2 * dim * dim].reshape(dim, dim)
        gammas.append(re + 1j * im)
        pos += 2 * dim * dim
    return gammas


def _coeffs_to_field(gammas, n_grid, d1):
    dim = gammas[0].shape[0]
    field = np.zeros((n_grid, dim, dim), dtype=complex)
    phases = np.exp(2j * np.pi * np.arange(n_grid) / n_grid)
    field += gammas[0][None, :, :]
    for n in range(1, d1 + 1):
        pn = phases ** n
        field += np.multiply.outer(pn, gammas[n])
        field += np.multiply.outer(np.conj(pn), gammas[n].conj().T)
    return field


def _refine_polynomial_member(asamp, bsamp, m_seed, d1, max_sweeps=400,
                              target_rel=1e-10):
    """Find a degree-d1 hermitian polynomial m inside the solution sets.

    Two phases on the same convex feasibility problem, whose solution set
    is nonempty whenever the input admits a certificate.  First,
    alternating projections between (a) the affine set of block fields
    [[A - m, B*], [B, m]] with m a hermitian polynomial of degree <= d1
    (projection: hermitize and band-limit ((A - X11) + X22)/2) and (b)
    the cone of pointwise positive semidefinite fields (projection:
    eigenvalue clipping) — fast global progress.  Second, because the
    projections crawl when the intersection has empty interior (inputs
    with zeros on the torus), minimize the smooth convex merit function
    f(m) = sum_w dist^2(H(w), PSD cone) with its analytic gradient
    (2 * (neg-part_22 - neg-part_11) pushed onto the coefficients).

    Returns (m_field, min_eig_rel, evals) for the best iterate seen.
    """
    from scipy.optimize import minimize

    n_grid, dim = asamp.shape[0], asamp.shape[1]
    scale = max(1.0, float(np.abs(asamp).max()), float(np.abs(bsamp).max()))
    bstar = np.conj(np.transpose(bsamp, (0, 2, 1)))
    phases = np.exp(2j * np.pi * np.arange(n_grid) / n_grid)

    def block(m_field):
        h = np.empty((n_grid, 2 * dim, 2 * dim), dtype=complex)
        h[:, :dim, :dim] = asamp - m_field
        h[:, :dim, dim:] = bstar
        h[:, dim:, :dim] = bsamp
        h[:, dim:, dim:] = m_field
        return h

    def min_eig_rel(m_field):
        return float(np.linalg.eigvalsh(block(m_field)).min()) / scale

    m_field = _project_band(m_seed, d1)
    best_m = m_field
    best_eig = -np.inf
    evals = 0
    for _ in range(max_sweeps):
        evals += 1
        h = block(m_field)
        eigvals, eigvecs = np.linalg.eigh(h)
        cur = float(eigvals.min()) / scale
        if cur > best_eig:
            best_eig = cur
            best_m = m_field
        if cur >= -target_rel:
            return best_m, best_eig, evals
        clipped = np.einsum("jab,jb,jcb->jac", eigvecs,
                            np.clip(eigvals, 0.0, None), eigvecs.conj())
        midpoint = 0.5 * ((asamp - clipped[:, :dim, :dim])
                          + clipped[:, dim:, dim:])
        m_field = _project_band(midpoint, d1)

    # Gradient phase.  neg(H) is the matrix of negative eigenvalue parts;
    # d f / d H = 2 neg(H) and H depends on m through -m in the (1,1)
    # block and +m in the (2,2) block.
    def merit(x):
        gammas = _unpack_coeffs(x, dim, d1)
        fld = _coeffs_to_field(gammas, n_grid, d1)
        eigvals, eigvecs = np.linalg.eigh(block(fld))
        neg = np.clip(eigvals, None, 0.0)
        f = float(np.sum(neg ** 2)) / scale ** 2
        negmat = np.einsum("jab,jb,jcb->jac", eigvecs, neg, eigvecs.conj())
        g_field = 2.0 * (negmat[:, dim:, dim:]
                         - negmat[:, :dim, :dim]) / scale ** 2
        grads = []
        for n in range(d1 + 1):
            pn = phases ** n
            grads.append(np.einsum("j,jab->ab", pn, g_field))
        iu = np.triu_indices(dim, k=1)
        w0 = grads[0]
        gparts = [np.real(np.diag(w0)),
                  2.0 * np.real(w0.T[iu]), -2.0 * np.imag(w0.T[iu])]
        for n in range(1, d1 + 1):
            wn = grads[n]
            gparts.append(2.0 * np.real(wn.T).ravel())
            gparts.append(-2.0 * np.imag(wn.T).ravel())
        return f, np.concatenate(gparts)

    x0_spec = np.fft.fft(best_m, axis=0) / n_grid
    gammas0 = [0.5 * (x0_spec[0] + x0_spec[0].conj().T)]
    for n in range(1, d1 + 1):
        gammas0.append(0.5 * (x0_spec[n % n_grid]
                              + x0_spec[(-n) % n_grid].conj().T))
    x0 = _pack_coeffs(gammas0, dim, d1)
    res = minimize(merit, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "ftol": 1e-18, "gtol": 1e-16,
                            "maxcor": 30})
    evals += int(res.nfev)
    m_opt = _coeffs_to_field(_unpack_coeffs(res.x, dim, d1), n_grid, d1)
    opt_eig = min_eig_rel(m_opt)
    if opt_eig > best_eig:
        best_eig = opt_eig
        best_m = m_opt
    return best_m, best_eig, evals


def compute_extremal_pair(pair, n_grid=None, extremalize_tol=1e-7,
                          degree_tol=1e-6, max_iter=500,
                          max_grid_doublings=4, feasibility_tol=1e-8):
    """Collapse the pencil pointwise and validate the symbol degrees.

    At each node w of an N-point frequency grid the solution set
    M(A(w), B(w)) is shrunk to a single element; the fields w -> A-hat(w)
    and w -> M-hat(w) are then converted to Fourier coefficients.  When
    all coefficient mass beyond degree d1 is relative noise the truncated
    fields are returned directly (this covers inputs whose collapsed
    symbols are genuinely polynomial, e.g. critical instances).

    The pointwise-collapsed fields are in general NOT polynomials — their
    Fourier coefficients merely decay geometrically — so when the tail
    test fails, the pair is refined instead of rejected: alternating
    projections move the interval midpoint field onto a hermitian
    polynomial m of degree <= d1 satisfying [[A - m, B*], [B, m]] >= 0
    pointwise.  Any such member certifies the factorization; the
    finite-degree theorem guarantees one exists.  Feasibility is
    re-checked on a 4x finer grid (polynomials can dip between nodes),
    escalating the refinement grid and then the sampling grid, and after
    ``max_grid_doublings`` failures an error is raised.

    The per-node feasibility check (the truncated tridiagonal operator
    must be positive semidefinite) doubles as the sampled positivity
    precondition on the regrouped polynomial.

    Parameters
    ----------
    pair : PencilPair
        Regrouped polynomial (see ``regroup_blocks``).
    n_grid : int, optional
        Starting grid size; defaults to max(64, 8 * d1).
    extremalize_tol, max_iter :
        Passed to the pointwise collapse.
    degree_tol : float
        Relative tail bound beyond degree d1.
    max_grid_doublings : int
        Grid-doubling budget for the degree validation.
    feasibility_tol : float
        Relative negativity accepted for a refined member on the fine
        validation grid.

    Returns
    -------
    ExtremalSymbolPair

    Raises
    ------
    FactorizationError
        If neither the pointwise fields nor the refinement produce a
        validated degree-d1 pair at the largest grid ("degree validation
        failed").
    EmptySetError
        Propagated from the pointwise stage with the frequency attached
        (the input cannot be positive semidefinite there).
    """
    d1 = pair.d1
    dim = pair.a.shape[0]
    if n_grid is None:
        n_grid = max(64, 8 * d1)
    n_grid = int(n_grid)
    if n_grid < 2 * d1 + 2:
        n_grid = 2 * d1 + 2

    a_scale = float(max(spectral_norm(m) for m in pair.a.coeffs.values())) \
        if pair.a.coeffs else 0.0
    snap_level = 10.0 * extremalize_tol * (1.0 + a_scale)

    best_tail = np.inf
    best_refine_eig = -np.inf
    for doubling in range(max_grid_doublings + 1):
        a_field, m_field, iters, failures = _pointwise_collapse(
            pair, n_grid, extremalize_tol, max_iter)
        stats = {
            "iterations_total": int(np.sum(iters)) if iters else 0,
            "iterations_max": int(np.max(iters)) if iters else 0,
            "grid_doublings": doubling,
            "pointwise_failures": len(failures),
        }
        report = {"degree_tol": degree_tol, "snapped_to_zero": []}
        tail_rel = np.inf
        if not failures:
            tail_rel = 0.0
            specs = {}
            leading_norm = 0.0
            for name, fld in (("a_hat", a_field), ("m_hat", m_field)):
                sup = float(np.abs(fld).max()) if fld.size else 0.0
                if sup <= snap_level:
                    fld[:] = 0.0
                    report["snapped_to_zero"].append(name)
                spec, norms = _field_degree_norms(fld)
                specs[name] = spec
                lead = max((v for k, v in norms.items() if abs(k) <= d1),
                           default=0.0)
                leading_norm = max(leading_norm, lead)
                beyond = sorted(
                    (k, v) for k, v in norms.items() if abs(k) > d1)
                report[name] = [[k, v] for k, v in beyond]
                tail = max((v for _, v in beyond), default=0.0)
                tail_rel = max(tail_rel,
                               tail / max(lead, snap_level))
            report["tail_relative"] = float(tail_rel)
            report["leading_norm"] = float(leading_norm)
            best_tail = min(best_tail, tail_rel)
            if tail_rel <= degree_tol:
                a_hat = _truncate_field(specs["a_hat"], d1, n_grid, dim)
                m_hat = _truncate_field(specs["m_hat"], d1, n_grid, dim)
                return ExtremalSymbolPair(a_hat=a_hat, m_hat=m_hat,
                                          decay_report=report,
                                          grid_size=n_grid, stats=stats)

        # The pointwise fields are not a degree-d1 polynomial pair (the
        # limiting symbols generically are not), so refine to a nearby
        # interior member: any hermitian polynomial m of degree <= d1
        # with [[A - m, B*], [B, m]] >= 0 pointwise certifies equally.
        refine_grid = n_grid
        asamp, bsamp, seed = _midpoint_field(pair, refine_grid)
        sweeps_total = 0
        for _ in range(3):
            m_ref, min_eig, sweeps = _refine_polynomial_member(
                asamp, bsamp, seed, d1)
            sweeps_total += sweeps
            n_fine = 4 * refine_grid
            afine = sample_grid_1d(pair.a, n_fine)
            bfine = sample_grid_1d(pair.b, n_fine)
            spec = np.fft.fft(m_ref, axis=0) / refine_grid
            mfine = np.zeros((n_fine, dim, dim), dtype=complex)
            phases = np.exp(2j * np.pi * np.arange(n_fine) / n_fine)
            for n in range(-d1, d1 + 1):
                mfine += np.multiply.outer(phases ** n,
                                           spec[n % refine_grid])
            hfine = np.empty((n_fine, 2 * dim, 2 * dim), dtype=complex)
            hfine[:, :dim, :dim] = afine - mfine
            hfine[:, :dim, dim:] = np.conj(np.transpose(bfine, (0, 2, 1)))
            hfine[:, dim:, :dim] = bfine
            hfine[:, dim:, dim:] = mfine
            scale = max(1.0, float(np.abs(afine).max()),
                        float(np.abs(bfine).max()))
            fine_eig = float(np.linalg.eigvalsh(hfine).min()) / scale
            best_refine_eig = max(best_refine_eig, fine_eig)
            if fine_eig >= -feasibility_tol:
                m_hat = _truncate_field(spec, d1, refine_grid, dim)
                a_hat = MatrixPoly1(
                    {n: c.copy() for n, c in pair.a.coeffs.items()},
                    degree=pair.a.degree, hermitian=True, dim=dim)
                report["tail_relative"] = 0.0
                report["a_hat"] = []
                report["m_hat"] = []
                report["leading_norm"] = float(
                    max((spectral_norm(c) for c in m_hat.coeffs.values()),
                        default=0.0))
                report["refined"] = True
                report["pre_refinement_tail"] = (
                    float(tail_rel) if np.isfinite(tail_rel) else None)
                report["refine_sweeps"] = sweeps_total
                report["refine_min_eig_rel"] = fine_eig
                stats["refine_sweeps"] = sweeps_total
                return ExtremalSymbolPair(a_hat=a_hat, m_hat=m_hat,
                                          decay_report=report,
                                          grid_size=refine_grid,
                                          stats=stats)
            # Feasible on the working grid but dipping between nodes:
            # move the refinement to the finer grid and try again.
            asamp, bsamp = afine, bfine
            seed = mfine
            refine_grid = n_fine
        n_grid *= 2
    raise FactorizationError(
        "degree validation failed, increase N or inspect continuity "
        "(relative tail %.3e > %.3e, refined feasibility %.3e, at grid %d)"
        % (best_tail, degree_tol, best_refine_eig, n_grid // 2),
        best_residual=float(best_tail), stage="compute_extremal_pair")


def assemble_H(pair, m_hat, psd_tol=1e-7, n_check=None):
    """Assemble the hermitian block symbol H = [[A - M, B*], [B, M]].

    Parameters
    ----------
    pair : PencilPair
        Provides the original A and B.
    m_hat : MatrixPoly1
        Collapsed-set element symbol, hermitian, degree <= d1.
    psd_tol : float
        The assembled symbol must be positive semidefinite on the check
        grid down to -psd_tol * max(1, sup-norm).
    n_check : int, optional
        Check grid size (default max(64, 8*d1+1)).

    Returns
    -------
    MatrixPoly1
        Hermitian polynomial of dimension 2 * d2 * k and degree <= d1.

    Raises
    ------
    NotPsdError
        When the assembled symbol fails the grid check, which signals a
        defective extremal pair upstream.
    """
    dim = pair.a.shape[0]
    if m_hat.shape != (dim, dim):
        raise ValueError("collapsed symbol dimension %s does not match the "
                         "pencil dimension %d" % (m_hat.shape, dim))
    if m_hat.degree > pair.d1:
        raise ValueError("collapsed symbol degree %d exceeds d1 = %d"
                         % (m_hat.degree, pair.d1))
    degrees = set(pair.a.coeffs) | set(pair.b.coeffs) | set(m_hat.coeffs)
    degrees |= {-n for n in pair.b.coeffs}
    coeffs = {}
    zero = np.zeros((dim, dim), dtype=complex)
    for n in sorted(degrees):
        a_n = pair.a.coeffs.get(n, zero)
        b_n = pair.b.coeffs.get(n, zero)
        bstar_n = pair.b.coeffs.get(-n, zero).conj().T
        m_n = m_hat.coeffs.get(n, zero)
        top = np.hstack([a_n - m_n, bstar_n])
        bot = np.hstack([b_n, m_n])
        coeffs[n] = np.vstack([top, bot])
    h = MatrixPoly1(coeffs, degree=pair.d1, hermitian=True, dim=2 * dim)

    if n_check is None:
        n_check = max(64, 8 * pair.d1 + 1)
    vals = sample_grid_1d(h, n_check)
    eigs = np.linalg.eigvalsh(vals)
    scale = max(1.0, float(np.abs(eigs).max()))
    j = int(np.argmin(eigs[:, 0]))
    min_eig = float(eigs[j, 0])
    if min_eig < -psd_tol * scale:
        raise NotPsdError(
            "assembled block symbol is not positive semidefinite "
            "(min eigenvalue %.6g at z = exp(2i pi %d/%d)); the extremal "
            "pair upstream is defective" % (min_eig, j, n_check),
            min_eigenvalue=min_eig,
            where="exp(2i pi %d/%d)" % (j, n_check))
    return h


def unpack_factors(p_h, d1, d2, k, drop_tol=0.0):
    """Unpack the analytic factor of H into two-variable factors.

    The 2*d2*k columns of ``p_h`` are read as 2*d2 column groups of width
    k.  Column group m yields the factor

        F_m(z1, z2) = c(d2) * sum_{j=0}^{2*d2-1} blk(p_h; j, m)(z1) z2^j,

    where blk(p_h; j, m) is the k x k block of p_h in block-row j, column
    group m (a z1-polynomial of degree <= d1) and the scaling constant is
    c(d2) = 1/sqrt(d2), calibrated so the identity input returns the
    identity factor.  Factors whose coefficients all vanish (below
    drop_tol relative to the largest factor) are omitted.

    Parameters
    ----------
    p_h : MatrixPoly1
        Analytic factor of the assembled block symbol, arranged so that
        block (j, m) holds the z2^j contribution of factor m.
    d1, d2, k : int
        Degree box and coefficient dimension of the original polynomial.
    drop_tol : float
        Relative threshold below which a factor is treated as zero
        (0.0 keeps everything that is not exactly zero).

    Returns
    -------
    list of MatrixPoly2
        At most 2*d2 analytic factors of degree <= (d1, 2*d2 - 1).
    """
    dim = 2 * d2 * k
    if p_h.shape != (dim, dim):
        raise ValueError("factor dimension %s does not match 2*d2*k = %d"
                         % (p_h.shape, dim))
    if p_h.degree > d1:
        raise ValueError("factor degree %d exceeds d1 = %d"
                         % (p_h.degree, d1))
    if any(n < 0 for n in p_h.coeffs):
        raise ValueError("the factor of the block symbol must be analytic")
    scale = 1.0 / np.sqrt(d2)
    raw = []
    sups = []
    for m in range(2 * d2):
        coeffs = {}
        sup = 0.0
        for n, mat in p_h.coeffs.items():
            for j in range(2 * d2):
                blk = mat[j * k:(j + 1) * k, m * k:(m + 1) * k]
                nrm = float(np.abs(blk).max())
                if nrm == 0.0:
                    continue
                coeffs[(n, j)] = scale * blk
                sup = max(sup, scale * nrm)
        raw.append(coeffs)
        sups.append(sup)
    top = max(sups, default=0.0)
    out = []
    for coeffs, sup in zip(raw, sups):
        if sup == 0.0 or sup <= drop_tol * top:
            continue
        out.append(MatrixPoly2(coeffs, analytic=True, dim=(k, k)))
    return out


def _psd_precheck_2d(q, tol=1e-8):
    d1, d2 = q.degree
    n1 = max(4 * d1 + 1, 8)
    n2 = max(4 * d2 + 1, 8)
    vals = sample_grid_2d(q, n1, n2)
    eigs = np.linalg.eigvalsh(vals)
    mins = eigs[..., 0]
    scale = max(1.0, float(np.abs(eigs).max()))
    j1, j2 = np.unravel_index(int(np.argmin(mins)), mins.shape)
    min_eig = float(mins[j1, j2])
    if min_eig < -tol * scale:
        raise NotPsdError(
            "input not positive semidefinite, min eigenvalue %.6g at "
            "(z1, z2) = (exp(2i pi %d/%d), exp(2i pi %d/%d))"
            % (min_eig, j1, n1, j2, n2),
            min_eigenvalue=min_eig,
            where="(exp(2i pi %d/%d), exp(2i pi %d/%d))" % (j1, n1, j2, n2))


def _poly1_to_poly2(p):
    """Lift a z1-only polynomial to two variables."""
    return MatrixPoly2({(n, 0): mat for n, mat in p.coeffs.items()},
                       degree=(p.degree, 0), hermitian=p.hermitian,
                       analytic=p.analytic, dim=p.shape)


def _factor_1d_route(q, opts, meta):
    """Handle inputs that do not depend on z2 (d2 = 0)."""
    d1 = q.degree[0]
    coeffs = {n1: mat for (n1, _), mat in q.coeffs.items()}
    q1 = MatrixPoly1(coeffs, degree=d1, hermitian=True, dim=q.shape)
    opts1d = Factor1dOptions(
        n_blocks_schedule=opts.n_blocks_schedule,
        eps_schedule=opts.eps_schedule,
        residual_tol=opts.residual_tol_1d,
        psd_tol=max(1e-8, 2.0 * opts.feasibility_tol))
    t0 = time.perf_counter()
    try:
        p1 = outer_factor_1d(q1, opts1d)
    except FactorizationError as exc:
        # Same fallback as the pencil route: boundary zeros converge
        # slowly through the truncation schedule, so accept any residual
        # that still fits inside the certificate tolerance.
        relaxed = opts.certificate_tol / 4.0
        if exc.best_residual is None or exc.best_residual > relaxed:
            raise FactorizationError(str(exc),
                                     best_residual=exc.best_residual,
                                     stage="factor-1d-route") from exc
        opts1d_relaxed = Factor1dOptions(
            n_blocks_schedule=opts.n_blocks_schedule,
            eps_schedule=opts.eps_schedule,
            residual_tol=relaxed,
            psd_tol=max(1e-8, 2.0 * opts.feasibility_tol))
        p1 = outer_factor_1d(q1, opts1d_relaxed)
        meta["factor_h_relaxed_tol"] = relaxed
    meta["stage_seconds"]["factor_h"] = time.perf_counter() - t0
    factors = [] if not p1.coeffs else [_poly1_to_poly2(p1)]
    return factors


def factor_2d(q, opts=None):
    """Factor a PSD two-variable polynomial into hermitian squares.

    Runs the full pipeline (regroup, pointwise collapse, degree
    validation, block-symbol assembly, one-variable factorization,
    unpacking) and independently verifies the result on an offset grid.
    A residual above tolerance yields a certificate flagged as rejected
    rather than an exception, so the data remains inspectable.

    Parameters
    ----------
    q : MatrixPoly2
        Hermitian polynomial, positive semidefinite on the two-torus
        (checked on a (4*d1+1) x (4*d2+1) grid).
    opts : Factor2dOptions, optional

    Returns
    -------
    SosCertificate

    Raises
    ------
    NotPsdError
        If the input fails the positivity pre-check, or the assembled
        block symbol does (stage-tagged message).
    EmptySetError, FactorizationError
        Stage failures, each carrying the stage in its message or tag.
    """
    if opts is None:
        opts = Factor2dOptions()
    if not isinstance(q, MatrixPoly2):
        raise ValueError("factor_2d expects a two-variable polynomial")
    if q.shape[0] != q.shape[1]:
        raise ValueError("factor_2d expects a square polynomial")
    if not q.hermitian:
        raise ValueError("factor_2d expects a hermitian polynomial "
                         "(construct it with hermitian=True)")

    t_start = time.perf_counter()
    meta = {
        "certificate_tol": opts.certificate_tol,
        "extremalize_tol": opts.extremalize_tol,
        "degree_tol": opts.degree_tol,
        "residual_tol_1d": opts.residual_tol_1d,
        "verify_grid": list(opts.verify_grid),
        "stage_seconds": {},
    }
    _psd_precheck_2d(q)
    d1, d2 = q.degree
    k = q.shape[0]

    if d2 == 0:
        factors = _factor_1d_route(q, opts, meta)
        meta["route"] = "one-variable"
    else:
        meta["route"] = "pencil"
        t0 = time.perf_counter()
        pair = regroup_blocks(q)
        esp = compute_extremal_pair(
            pair, n_grid=opts.grid_size,
            extremalize_tol=opts.extremalize_tol,
            degree_tol=opts.degree_tol, max_iter=opts.max_iter,
            max_grid_doublings=opts.max_grid_doublings,
            feasibility_tol=opts.feasibility_tol)
        meta["stage_seconds"]["extremal_pair"] = time.perf_counter() - t0
        meta["grid_size"] = esp.grid_size
        meta["decay_tail_relative"] = esp.decay_report["tail_relative"]
        meta["pointwise_iterations"] = esp.stats

        t0 = time.perf_counter()
        h = assemble_H(pair, esp.m_hat,
                       psd_tol=max(1e-7, 2.0 * opts.feasibility_tol))
        opts1d = Factor1dOptions(
            n_blocks_schedule=opts.n_blocks_schedule,
            eps_schedule=opts.eps_schedule,
            residual_tol=opts.residual_tol_1d,
            psd_tol=max(1e-8, 2.0 * opts.feasibility_tol))
        try:
            p_h = outer_factor_1d(h, opts1d)
        except FactorizationError as exc:
            # Singular block symbols (e.g. rank-deficient Q) converge
            # slowly in the truncation schedule; a residual that still
            # fits inside the certificate tolerance is good enough for
            # the end-to-end check, so retry once with that target.
            relaxed = opts.certificate_tol / 4.0
            if exc.best_residual is None or exc.best_residual > relaxed:
                raise FactorizationError(str(exc),
                                         best_residual=exc.best_residual,
                                         stage="factor-H") from exc
            opts1d_relaxed = Factor1dOptions(
                n_blocks_schedule=opts.n_blocks_schedule,
                eps_schedule=opts.eps_schedule,
                residual_tol=relaxed,
                psd_tol=max(1e-8, 2.0 * opts.feasibility_tol))
            p_h = outer_factor_1d(h, opts1d_relaxed)
            meta["factor_h_relaxed_tol"] = relaxed
        meta["stage_seconds"]["factor_h"] = time.perf_counter() - t0

        h_vals = sample_grid_1d(h, 256, offset=0.5)
        p_vals = sample_grid_1d(p_h, 256, offset=0.5)
        h_resid = h_vals - np.einsum("jba,jbc->jac", p_vals.conj(), p_vals)
        meta["h_residual_sup"] = float(
            np.linalg.svd(h_resid, compute_uv=False)[:, 0].max())

        # The unpacking contract reads the z2^j contribution of factor m
        # from block (j, m); the factor of H carries that block at
        # (m, 2*d2 - 1 - j), so rearrange before unpacking.
        rearranged = {}
        for n, mat in p_h.coeffs.items():
            out = np.zeros_like(mat)
            for j in range(2 * d2):
                rows = slice(j * k, (j + 1) * k)
                for m in range(2 * d2):
                    cols = slice(m * k, (m + 1) * k)
                    src_rows = slice(m * k, (m + 1) * k)
                    src_cols = slice((2 * d2 - 1 - j) * k,
                                     (2 * d2 - j) * k)
                    out[rows, cols] = mat[src_rows, src_cols]
            rearranged[n] = out
        p_tilde = MatrixPoly1(rearranged, degree=p_h.degree, analytic=True,
                              dim=2 * d2 * k)
        factors = unpack_factors(p_tilde, d1, d2, k, drop_tol=1e-6)

    t0 = time.perf_counter()
    report = verify_certificate(q, factors, grid=opts.verify_grid,
                                offset=True)
    meta["stage_seconds"]["verify"] = time.perf_counter() - t0
    meta["stage_seconds"]["total"] = time.perf_counter() - t_start
    meta["verify_report"] = report

    residual = report["residual_sup"]
    reason = None
    if residual > opts.certificate_tol:
        reason = ("residual %.3e exceeds certificate tolerance %.3e"
                  % (residual, opts.certificate_tol))
    elif not report["degree_ok"]:
        reason = "a factor has coefficients outside the degree box"
    elif not report["count_ok"]:
        reason = "too many factors"
    return SosCertificate(
        factors=factors,
        degrees=[f.degree for f in factors],
        residual=residual,
        accepted=reason is None,
        rejection_reason=reason,
        pipeline_metadata=meta)


def swap_variables(q):
    """Exchange the roles of the two variables: (n1, n2) -> (n2, n1).

    An involution; factoring the swapped polynomial yields the alternate
    bound of at most 2*d1 factors of degree at most (d2, 2*d1 - 1).

    Parameters
    ----------
    q : MatrixPoly2

    Returns
    -------
    MatrixPoly2
    """
    if not isinstance(q, MatrixPoly2):
        raise ValueError("swap_variables expects a two-variable polynomial")
    coeffs = {(n2, n1): mat.copy() for (n1, n2), mat in q.coeffs.items()}
    return MatrixPoly2(coeffs, degree=(q.degree[1], q.degree[0]),
                       hermitian=q.hermitian, analytic=q.analytic,
                       dim=q.shape)
