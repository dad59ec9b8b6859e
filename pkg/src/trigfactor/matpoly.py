"""Matrix-valued trigonometric polynomials on the torus.

A one-variable polynomial is a finite sum Q(z) = sum_n Q_n z^n with matrix
coefficients Q_n and z on the unit circle; a two-variable polynomial uses
monomials z1^n1 z2^n2 on the two-torus.  This module provides the coefficient
container types, evaluation, grid sampling and Fourier recovery, block
Toeplitz truncations, coefficient arithmetic, the one-to-two variable
regrouping used by the two-variable factorization, and JSON serialization.

Conventions
-----------
* ``hermitian`` means Q_{-n} = Q_n^* (so Q(z) is a Hermitian matrix for every
  z on the torus).  The constructor enforces the symmetry exactly and records
  the size of the correction it applied.
* ``analytic`` means all coefficients have non-negative indices.
* Block Toeplitz truncations place Q_{i-j} at block (i, j), so analytic
  factors correspond to lower block triangular Toeplitz matrices.

All containers are treated as immutable after construction; operations
return new objects.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

TORUS_TOL = 1e-12
ALGEBRAIC_TOL = 1e-10


def default_grid_size(degree):
    """Power-of-two grid size, at least max(64, 4 * degree + 1)."""
    n = max(64, 4 * int(degree) + 1)
    return 1 << (n - 1).bit_length()


def _as_shape(dim):
    """Normalize a dimension spec (int or pair) to a (rows, cols) tuple."""
    if dim is None:
        return None
    if np.isscalar(dim):
        k = int(dim)
        return (k, k)
    r, c = dim
    return (int(r), int(c))


def _norm(mat):
    """Spectral norm of a matrix (largest singular value)."""
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


class MatrixPoly1:
    """Matrix trigonometric polynomial in one variable.

    Parameters
    ----------
    coeffs : mapping int -> array_like
        Coefficient matrices keyed by monomial index.  All matrices must
        share one shape.  Exactly-zero matrices are stripped.
    degree : int, optional
        Declared degree.  Defaults to the largest |n| with a nonzero
        coefficient.  A nonzero coefficient beyond the declared degree is an
        error.
    hermitian : bool
        If True the coefficients are symmetrized (Q_{-n} <- conj pair
        average) at construction; the spectral norm of the largest applied
        correction is recorded in ``sym_correction``.
    analytic : bool
        If True, negative indices are rejected.
    dim : int or (int, int), optional
        Matrix shape, required only when ``coeffs`` is empty.

    Attributes
    ----------
    coeffs : dict[int, numpy.ndarray]
    shape : tuple[int, int]
    degree : int
    hermitian, analytic : bool
    sym_correction : float
    """

    def __init__(self, coeffs, degree=None, hermitian=False, analytic=False,
                 dim=None):
        cleaned = {}
        shape = _as_shape(dim)
        for n, mat in coeffs.items():
            n = int(n)
            mat = np.asarray(mat, dtype=complex)
            if mat.ndim == 0:
                mat = mat.reshape(1, 1)
            if mat.ndim != 2:
                raise ValueError("coefficient %d is not a matrix" % n)
            if shape is None:
                shape = mat.shape
            elif mat.shape != shape:
                raise ValueError(
                    "coefficient %d has shape %r, expected %r"
                    % (n, mat.shape, shape))
            if np.any(mat != 0):
                cleaned[n] = mat.copy()
        if shape is None:
            raise ValueError("empty coefficient map needs an explicit dim")

        inferred = max((abs(n) for n in cleaned), default=0)
        if degree is None:
            degree = inferred
        else:
            degree = int(degree)
            if degree < 0:
                raise ValueError("degree must be non-negative")
            if inferred > degree:
                raise ValueError(
                    "nonzero coefficient at index beyond declared degree %d"
                    % degree)
        if analytic and any(n < 0 for n in cleaned):
            raise ValueError("analytic polynomial has a negative-index "
                             "coefficient")

        correction = 0.0
        if hermitian:
            if shape[0] != shape[1]:
                raise ValueError("hermitian polynomial must be square")
            sym = {}
            for n in sorted(cleaned):
                if n < 0:
                    continue
                pos = cleaned.get(n, np.zeros(shape, dtype=complex))
                neg = cleaned.get(-n, np.zeros(shape, dtype=complex))
                avg = 0.5 * (pos + neg.conj().T)
                correction = max(correction, _norm(pos - avg))
                if n == 0:
                    sym[0] = avg
                else:
                    sym[n] = avg
                    sym[-n] = avg.conj().T
            for n in cleaned:
                if n < 0 and -n not in cleaned:
                    avg = 0.5 * cleaned[n].conj().T
                    correction = max(correction, _norm(cleaned[n] - avg.conj().T))
                    sym[-n] = avg
                    sym[n] = avg.conj().T
            cleaned = {n: m for n, m in sym.items() if np.any(m != 0)}

        self.coeffs = cleaned
        self.shape = shape
        self.degree = degree
        self.hermitian = bool(hermitian)
        self.analytic = bool(analytic)
        self.sym_correction = correction

    @property
    def dim(self):
        """Row dimension (equals column dimension for square polynomials)."""
        return self.shape[0]

    def coeff(self, n):
        """Coefficient matrix at index n (zeros if absent)."""
        mat = self.coeffs.get(int(n))
        if mat is None:
            return np.zeros(self.shape, dtype=complex)
        return mat.copy()

    def norm_1(self):
        """Sum of spectral norms of the coefficients (bounds sup norm)."""
        return float(sum(_norm(m) for m in self.coeffs.values()))

    def __repr__(self):
        return ("MatrixPoly1(shape=%r, degree=%d, nnz=%d, hermitian=%r, "
                "analytic=%r)" % (self.shape, self.degree, len(self.coeffs),
                                  self.hermitian, self.analytic))


class MatrixPoly2:
    """Matrix trigonometric polynomial in two variables.

    Same conventions as :class:`MatrixPoly1` with coefficient keys
    ``(n1, n2)`` and a declared degree box ``(d1, d2)``.
    """

    def __init__(self, coeffs, degree=None, hermitian=False, analytic=False,
                 dim=None):
        cleaned = {}
        shape = _as_shape(dim)
        for key, mat in coeffs.items():
            n1, n2 = int(key[0]), int(key[1])
            mat = np.asarray(mat, dtype=complex)
            if mat.ndim == 0:
                mat = mat.reshape(1, 1)
            if mat.ndim != 2:
                raise ValueError("coefficient %r is not a matrix" % ((n1, n2),))
            if shape is None:
                shape = mat.shape
            elif mat.shape != shape:
                raise ValueError(
                    "coefficient %r has shape %r, expected %r"
                    % ((n1, n2), mat.shape, shape))
            if np.any(mat != 0):
                cleaned[(n1, n2)] = mat.copy()
        if shape is None:
            raise ValueError("empty coefficient map needs an explicit dim")

        inf1 = max((abs(k[0]) for k in cleaned), default=0)
        inf2 = max((abs(k[1]) for k in cleaned), default=0)
        if degree is None:
            degree = (inf1, inf2)
        else:
            degree = (int(degree[0]), int(degree[1]))
            if degree[0] < 0 or degree[1] < 0:
                raise ValueError("degree box must be non-negative")
            if inf1 > degree[0] or inf2 > degree[1]:
                raise ValueError(
                    "nonzero coefficient beyond declared degree box %r"
                    % (degree,))
        if analytic and any(k[0] < 0 or k[1] < 0 for k in cleaned):
            raise ValueError("analytic polynomial has a negative-index "
                             "coefficient")

        correction = 0.0
        if hermitian:
            if shape[0] != shape[1]:
                raise ValueError("hermitian polynomial must be square")
            sym = {}
            seen = set()
            for key in sorted(cleaned):
                if key in seen:
                    continue
                mkey = (-key[0], -key[1])
                seen.add(key)
                seen.add(mkey)
                pos = cleaned.get(key, np.zeros(shape, dtype=complex))
                neg = cleaned.get(mkey, np.zeros(shape, dtype=complex))
                avg = 0.5 * (pos + neg.conj().T)
                correction = max(correction, _norm(pos - avg))
                if key == mkey:
                    sym[key] = avg
                else:
                    sym[key] = avg
                    sym[mkey] = avg.conj().T
            cleaned = {k: m for k, m in sym.items() if np.any(m != 0)}

        self.coeffs = cleaned
        self.shape = shape
        self.degree = degree
        self.hermitian = bool(hermitian)
        self.analytic = bool(analytic)
        self.sym_correction = correction

    @property
    def dim(self):
        return self.shape[0]

    def coeff(self, key):
        """Coefficient matrix at index (n1, n2) (zeros if absent)."""
        mat = self.coeffs.get((int(key[0]), int(key[1])))
        if mat is None:
            return np.zeros(self.shape, dtype=complex)
        return mat.copy()

    def norm_1(self):
        """Sum of spectral norms of the coefficients (bounds sup norm)."""
        return float(sum(_norm(m) for m in self.coeffs.values()))

    def __repr__(self):
        return ("MatrixPoly2(shape=%r, degree=%r, nnz=%d, hermitian=%r, "
                "analytic=%r)" % (self.shape, self.degree, len(self.coeffs),
                                  self.hermitian, self.analytic))


@dataclass
class ToeplitzTruncation:
    """Dense block Toeplitz truncation of a one-variable polynomial.

    Attributes
    ----------
    matrix : numpy.ndarray
        Dense (n_blocks*k1) x (n_blocks*k2) matrix with block (i, j) equal
        to the coefficient Q_{i-j}.
    n_blocks : int
    block_shape : tuple[int, int]
    """

    matrix: np.ndarray
    n_blocks: int
    block_shape: tuple


@dataclass
class PencilPair:
    """Regrouped one-variable pencil (A, B) of a two-variable polynomial.

    The doubly infinite block Toeplitz operator of Q(z1, z2) in the z2
    direction, grouped into d2 x d2 super-blocks, is block tridiagonal with
    diagonal symbol A(z1) and subdiagonal symbol B(z1); both are one-variable
    polynomials of degree d1 with (d2*k) x (d2*k) coefficients.

    Attributes
    ----------
    a : MatrixPoly1
        Hermitian diagonal symbol.
    b : MatrixPoly1
        Subdiagonal symbol.
    block_dim : int
        Size k of the original coefficients.
    d1, d2 : int
        Degree box of the source polynomial.
    """

    a: MatrixPoly1
    b: MatrixPoly1
    block_dim: int
    d1: int
    d2: int


def _check_torus(z, what="z"):
    z = complex(z)
    if abs(abs(z) - 1.0) > TORUS_TOL:
        raise DomainError("%s = %r is off the unit circle (|%s| - 1 = %.3e)"
                          % (what, z, what, abs(z) - 1.0))
    return z


def eval_1d(p, z):
    """Evaluate a one-variable polynomial at a point of the unit circle.

    Parameters
    ----------
    p : MatrixPoly1
    z : complex
        Point with |z| = 1 (within 1e-12, else a DomainError is raised).

    Returns
    -------
    numpy.ndarray
        The matrix value sum_n Q_n z^n.
    """
    z = _check_torus(z)
    out = np.zeros(p.shape, dtype=complex)
    for n, mat in p.coeffs.items():
        out += mat * (z ** n)
    return out


def eval_2d(p, z1, z2):
    """Evaluate a two-variable polynomial at a point of the two-torus."""
    z1 = _check_torus(z1, "z1")
    z2 = _check_torus(z2, "z2")
    out = np.zeros(p.shape, dtype=complex)
    for (n1, n2), mat in p.coeffs.items():
        out += mat * (z1 ** n1) * (z2 ** n2)
    return out


def sample_grid_1d(p, n_points=None, offset=0.0):
    """Sample a one-variable polynomial on the uniform grid z_j = e^{2pi i j/N}.

    Parameters
    ----------
    p : MatrixPoly1
    n_points : int, optional
        Grid size N; defaults to ``default_grid_size(p.degree)``.
    offset : float, optional
        Fraction of a grid step added to every node, z_j =
        e^{2 pi i (j + offset)/N}.  Half-step offsets give verification
        grids disjoint from construction grids.

    Returns
    -------
    numpy.ndarray
        Array of shape (N, rows, cols) with the matrix values.
    """
    if n_points is None:
        n_points = default_grid_size(p.degree)
    n_points = int(n_points)
    if n_points < 1:
        raise ValueError("grid needs at least one point")
    j = np.arange(n_points) + float(offset)
    out = np.zeros((n_points,) + p.shape, dtype=complex)
    for n, mat in p.coeffs.items():
        phase = np.exp(2j * np.pi * n * j / n_points)
        out += phase[:, None, None] * mat
    return out


def sample_grid_2d(p, n1, n2, offset1=0.0, offset2=0.0):
    """Sample a two-variable polynomial on an (n1 x n2) torus grid.

    Node (j1, j2) is (e^{2 pi i (j1 + offset1)/n1}, e^{2 pi i (j2 + offset2)/n2}).

    Parameters
    ----------
    p : MatrixPoly2
    n1, n2 : int
        Grid sizes in the two variables.
    offset1, offset2 : float, optional
        Fractions of a grid step added to every node.

    Returns
    -------
    numpy.ndarray
        Array of shape (n1, n2, rows, cols) with the matrix values.
    """
    n1 = int(n1)
    n2 = int(n2)
    if n1 < 1 or n2 < 1:
        raise ValueError("grid needs at least one point per variable")
    j1 = np.arange(n1) + float(offset1)
    j2 = np.arange(n2) + float(offset2)
    out = np.zeros((n1, n2) + p.shape, dtype=complex)
    for (m, n), mat in p.coeffs.items():
        ph1 = np.exp(2j * np.pi * m * j1 / n1)
        ph2 = np.exp(2j * np.pi * n * j2 / n2)
        out += (ph1[:, None] * ph2[None, :])[:, :, None, None] * mat
    return out


def fourier_coeffs_1d(samples, max_degree):
    """Recover Fourier coefficients from uniform grid samples.

    Parameters
    ----------
    samples : numpy.ndarray
        Shape (N, rows, cols), values on z_j = e^{2pi i j/N}.
    max_degree : int
        Coefficients are returned for indices |n| <= max_degree.  The grid
        must satisfy N >= 2*max_degree + 1; smaller grids alias and raise a
        ValueError.

    Returns
    -------
    dict[int, numpy.ndarray]
        Coefficient map c_n = (1/N) sum_j samples_j e^{-2pi i n j / N}.
    """
    samples = np.asarray(samples, dtype=complex)
    n_points = samples.shape[0]
    max_degree = int(max_degree)
    if n_points < 2 * max_degree + 1:
        raise ValueError(
            "grid size %d aliases degree %d (need N >= 2*degree + 1)"
            % (n_points, max_degree))
    # Coefficient of z**n from uniform torus samples: (1/N) * sum_j f_j * z_j**(-n),
    # which is the forward FFT (negative exponent) divided by N.
    spec = np.fft.fft(samples, axis=0) / n_points
    out = {}
    for n in range(-max_degree, max_degree + 1):
        out[n] = spec[n % n_points].copy()
    return out


def toeplitz_truncation(p, n_blocks):
    """Dense block Toeplitz truncation with block (i, j) = Q_{i-j}.

    Parameters
    ----------
    p : MatrixPoly1
    n_blocks : int
        Number of block rows/columns (must be positive).

    Returns
    -------
    ToeplitzTruncation
    """
    n_blocks = int(n_blocks)
    if n_blocks < 1:
        raise ValueError("n_blocks must be positive")
    r, c = p.shape
    mat = np.zeros((n_blocks * r, n_blocks * c), dtype=complex)
    for n, coef in p.coeffs.items():
        if abs(n) >= n_blocks:
            continue
        for i in range(n_blocks):
            j = i - n
            if 0 <= j < n_blocks:
                mat[i * r:(i + 1) * r, j * c:(j + 1) * c] = coef
    return ToeplitzTruncation(matrix=mat, n_blocks=n_blocks, block_shape=(r, c))


def adjoint(p):
    """Pointwise adjoint polynomial p*(z) = sum_n Q_n^* z^{-n} (per variable)."""
    if isinstance(p, MatrixPoly1):
        coeffs = {-n: m.conj().T for n, m in p.coeffs.items()}
        return MatrixPoly1(coeffs, degree=p.degree, hermitian=p.hermitian,
                           analytic=False, dim=(p.shape[1], p.shape[0]))
    coeffs = {(-k[0], -k[1]): m.conj().T for k, m in p.coeffs.items()}
    return MatrixPoly2(coeffs, degree=p.degree, hermitian=p.hermitian,
                       analytic=False, dim=(p.shape[1], p.shape[0]))


def add(p, q):
    """Coefficient-wise sum of two polynomials of matching kind and shape."""
    if type(p) is not type(q):
        raise ValueError("cannot add polynomials in different variable counts")
    if p.shape != q.shape:
        raise ValueError("shape mismatch: %r vs %r" % (p.shape, q.shape))
    coeffs = {k: m.copy() for k, m in p.coeffs.items()}
    for k, m in q.coeffs.items():
        coeffs[k] = coeffs.get(k, 0) + m
    if isinstance(p, MatrixPoly1):
        return MatrixPoly1(coeffs, degree=max(p.degree, q.degree),
                           hermitian=p.hermitian and q.hermitian,
                           analytic=p.analytic and q.analytic, dim=p.shape)
    degree = (max(p.degree[0], q.degree[0]), max(p.degree[1], q.degree[1]))
    return MatrixPoly2(coeffs, degree=degree,
                       hermitian=p.hermitian and q.hermitian,
                       analytic=p.analytic and q.analytic, dim=p.shape)


def multiply(p, q):
    """Pointwise product (coefficient convolution) of two polynomials."""
    if type(p) is not type(q):
        raise ValueError("cannot multiply polynomials in different variable "
                         "counts")
    if p.shape[1] != q.shape[0]:
        raise ValueError("inner dimension mismatch: %r x %r"
                         % (p.shape, q.shape))
    out_shape = (p.shape[0], q.shape[1])
    coeffs = {}
    if isinstance(p, MatrixPoly1):
        for n1, m1 in p.coeffs.items():
            for n2, m2 in q.coeffs.items():
                key = n1 + n2
                coeffs[key] = coeffs.get(key, 0) + m1 @ m2
        return MatrixPoly1(coeffs, degree=p.degree + q.degree,
                           analytic=p.analytic and q.analytic, dim=out_shape)
    for k1, m1 in p.coeffs.items():
        for k2, m2 in q.coeffs.items():
            key = (k1[0] + k2[0], k1[1] + k2[1])
            coeffs[key] = coeffs.get(key, 0) + m1 @ m2
    degree = (p.degree[0] + q.degree[0], p.degree[1] + q.degree[1])
    return MatrixPoly2(coeffs, degree=degree,
                       analytic=p.analytic and q.analytic, dim=out_shape)


def hermitian_square_sum(factors):
    """Exact coefficient-level sum of hermitian squares sum_i P_i^* P_i.

    Parameters
    ----------
    factors : sequence of MatrixPoly1 or MatrixPoly2
        Factors with a common column dimension (row dimensions may differ).

    Returns
    -------
    MatrixPoly1 or MatrixPoly2
        Hermitian polynomial, exactly symmetric by construction (the
        non-negative-index half is computed and mirrored).
    """
    factors = list(factors)
    if not factors:
        raise ValueError("need at least one factor")
    two_var = isinstance(factors[0], MatrixPoly2)
    k = factors[0].shape[1]
    for f in factors:
        if isinstance(f, MatrixPoly2) != two_var:
            raise ValueError("mixed variable counts in factor list")
        if f.shape[1] != k:
            raise ValueError("factors must share the column dimension")

    half = {}
    if not two_var:
        for f in factors:
            for m, cm in f.coeffs.items():
                for n, cn in f.coeffs.items():
                    d = n - m
                    if d < 0:
                        continue
                    half[d] = half.get(d, 0) + cm.conj().T @ cn
        coeffs = {}
        for d, mat in half.items():
            if d == 0:
                coeffs[0] = 0.5 * (mat + mat.conj().T)
            else:
                coeffs[d] = mat
                coeffs[-d] = mat.conj().T
        degree = max((f.degree for f in factors), default=0)
        return MatrixPoly1(coeffs, degree=degree, hermitian=True, dim=(k, k))

    for f in factors:
        for m, cm in f.coeffs.items():
            for n, cn in f.coeffs.items():
                d = (n[0] - m[0], n[1] - m[1])
                if d < (0, 0):
                    continue
                half[d] = half.get(d, 0) + cm.conj().T @ cn
    coeffs = {}
    for d, mat in half.items():
        if d == (0, 0):
            coeffs[d] = 0.5 * (mat + mat.conj().T)
        else:
            coeffs[d] = mat
            coeffs[(-d[0], -d[1])] = mat.conj().T
    d1 = max((f.degree[0] for f in factors), default=0)
    d2 = max((f.degree[1] for f in factors), default=0)
    return MatrixPoly2(coeffs, degree=(d1, d2), hermitian=True, dim=(k, k))


def regroup_blocks(q):
    """Regroup a two-variable polynomial into a one-variable block pencil.

    Write R_m(z1) = sum_{n} Q_{(n, m)} z1^n for the z2-slices of Q.  The
    doubly infinite Toeplitz operator of Q in the z2 direction, partitioned
    into d2 x d2 super-blocks, is block tridiagonal; its diagonal symbol A
    and subdiagonal symbol B are returned:

        A(i, j) = R_{i - j}                 (0 <= i, j < d2)
        B(i, j) = R_{d2 + i - j}   whenever 1 <= d2 + i - j <= d2.

    Parameters
    ----------
    q : MatrixPoly2
        Hermitian polynomial with declared degree (d1, d2), d2 >= 1.

    Returns
    -------
    PencilPair
    """
    if not isinstance(q, MatrixPoly2):
        raise ValueError("regroup_blocks expects a two-variable polynomial")
    if q.shape[0] != q.shape[1]:
        raise ValueError("regroup_blocks expects a square polynomial")
    d1, d2 = q.degree
    if d2 < 1:
        raise ValueError("regrouping needs z2-degree at least 1 "
                         "(treat d2 = 0 inputs as one-variable)")
    k = q.shape[0]
    dim = d2 * k

    acoeffs = {}
    bcoeffs = {}
    for n in range(-d1, d1 + 1):
        amat = np.zeros((dim, dim), dtype=complex)
        bmat = np.zeros((dim, dim), dtype=complex)
        a_nonzero = b_nonzero = False
        for i in range(d2):
            for j in range(d2):
                m = i - j
                key = (n, m)
                if key in q.coeffs:
                    amat[i * k:(i + 1) * k, j * k:(j + 1) * k] = q.coeffs[key]
                    a_nonzero = True
                mb = d2 + i - j
                if 1 <= mb <= d2 and (n, mb) in q.coeffs:
                    bmat[i * k:(i + 1) * k, j * k:(j + 1) * k] = \
                        q.coeffs[(n, mb)]
                    b_nonzero = True
        if a_nonzero:
            acoeffs[n] = amat
        if b_nonzero:
            bcoeffs[n] = bmat

    a = MatrixPoly1(acoeffs, degree=d1, hermitian=q.hermitian, dim=dim)
    b = MatrixPoly1(bcoeffs, degree=d1, dim=dim)
    return PencilPair(a=a, b=b, block_dim=k, d1=d1, d2=d2)


# ---------------------------------------------------------------------------
# JSON serialization
#
# Schema: {"vars": 1 or 2, "dim": [rows, cols], "degree": d or [d1, d2],
#          "flags": {"hermitian": bool, "analytic": bool},
#          "coeffs": [{"k": n or [n1, n2], "re": [[...]], "im": [[...]]}]}
# Hermitian files may list only one of each +-k pair; the loader synthesizes
# the mirror.  Floats are written with 17 significant digits so numeric
# round-trips are bit-faithful.
# ---------------------------------------------------------------------------

def _format_float(x):
    if not np.isfinite(x):
        raise ValueError("cannot serialize non-finite float %r" % x)
    return format(float(x), ".17g")


def json_dumps(obj, indent=0):
    """Serialize a document of dicts/lists/scalars with 17-digit floats."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key, val in obj.items():
            if not isinstance(key, str):
                raise ValueError("JSON object keys must be strings")
            items.append("%s%s: %s" % (inner, json.dumps(key),
                                       json_dumps(val, indent + 2)))
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        flat = all(isinstance(v, (int, float, np.integer, np.floating))
                   and not isinstance(v, bool) for v in obj)
        parts = [json_dumps(v, indent + 2) for v in obj]
        if flat:
            return "[" + ", ".join(parts) + "]"
        return ("[\n" + ",\n".join(inner + s for s in parts) + "\n" + pad
                + "]")
    raise ValueError("cannot serialize %r" % type(obj))


def _matrix_to_lists(mat):
    re = [[_float(v) for v in row] for row in mat.real]
    im = [[_float(v) for v in row] for row in mat.imag]
    return re, im


def _float(x):
    return float(x)


def poly_to_dict(p):
    """JSON-ready dictionary for a polynomial (canonical coefficient order).

    Hermitian polynomials store only the canonical half of each +-k pair.
    """
    if isinstance(p, MatrixPoly1):
        nvars = 1
        degree = p.degree
        keys = sorted(p.coeffs)
        if p.hermitian:
            keys = [n for n in keys if n >= 0]
        entries = []
        for n in keys:
            re, im = _matrix_to_lists(p.coeffs[n])
            entries.append({"k": n, "re": re, "im": im})
    elif isinstance(p, MatrixPoly2):
        nvars = 2
        degree = list(p.degree)
        keys = sorted(p.coeffs)
        if p.hermitian:
            keys = [k for k in keys if k > (-k[0], -k[1]) or k == (0, 0)]
        entries = []
        for key in keys:
            re, im = _matrix_to_lists(p.coeffs[key])
            entries.append({"k": list(key), "re": re, "im": im})
    else:
        raise ValueError("not a polynomial: %r" % (p,))
    return {
        "vars": nvars,
        "dim": [p.shape[0], p.shape[1]],
        "degree": degree,
        "flags": {"hermitian": p.hermitian, "analytic": p.analytic},
        "coeffs": entries,
    }


def poly_from_dict(doc):
    """Reconstruct a polynomial from its JSON dictionary.

    Raises ValueError naming the offending field on malformed input.
    """
    if not isinstance(doc, dict):
        raise ValueError("polynomial document must be a JSON object")
    for field in ("vars", "dim", "degree", "coeffs"):
        if field not in doc:
            raise ValueError("polynomial document missing field %r" % field)
    nvars = doc["vars"]
    if nvars not in (1, 2):
        raise ValueError("field 'vars' must be 1 or 2, got %r" % (nvars,))
    dim = doc["dim"]
    shape = _as_shape(dim)
    flags = doc.get("flags", {})
    if not isinstance(flags, dict):
        raise ValueError("field 'flags' must be an object")
    hermitian = bool(flags.get("hermitian", False))
    analytic = bool(flags.get("analytic", False))
    entries = doc["coeffs"]
    if not isinstance(entries, list):
        raise ValueError("field 'coeffs' must be a list")

    coeffs = {}
    for idx, entry in enumerate(entries):
        if not isinstance(entry, dict) or "k" not in entry:
            raise ValueError("coeffs[%d] missing field 'k'" % idx)
        try:
            re = np.asarray(entry["re"], dtype=float)
            im = np.asarray(entry["im"], dtype=float)
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError("coeffs[%d] has malformed 're'/'im': %s"
                             % (idx, exc)) from None
        if re.shape != tuple(shape) or im.shape != tuple(shape):
            raise ValueError("coeffs[%d] matrix shape %r does not match dim %r"
                             % (idx, re.shape, shape))
        mat = re + 1j * im
        if nvars == 1:
            key = int(entry["k"])
        else:
            kk = entry["k"]
            if not isinstance(kk, (list, tuple)) or len(kk) != 2:
                raise ValueError("coeffs[%d] field 'k' must be a pair" % idx)
            key = (int(kk[0]), int(kk[1]))
        if key in coeffs:
            raise ValueError("coeffs[%d] duplicates index %r" % (idx, key))
        coeffs[key] = mat

    if hermitian:
        if nvars == 1:
            for n in list(coeffs):
                if -n not in coeffs:
                    coeffs[-n] = coeffs[n].conj().T
        else:
            for key in list(coeffs):
                mkey = (-key[0], -key[1])
                if mkey not in coeffs:
                    coeffs[mkey] = coeffs[key].conj().T

    if nvars == 1:
        degree = int(doc["degree"])
        return MatrixPoly1(coeffs, degree=degree, hermitian=hermitian,
                           analytic=analytic, dim=shape)
    deg = doc["degree"]
    if not isinstance(deg, (list, tuple)) or len(deg) != 2:
        raise ValueError("field 'degree' must be a pair for vars = 2")
    return MatrixPoly2(coeffs, degree=(int(deg[0]), int(deg[1])),
                       hermitian=hermitian, analytic=analytic, dim=shape)


def save_poly(p, path):
    """Write a polynomial to a JSON file."""
    with open(path, "w") as fh:
        fh.write(json_dumps(poly_to_dict(p)) + "\n")


def load_poly(path):
    """Read a polynomial from a JSON file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError("invalid JSON in %s: %s" % (path, exc)) from None
    return poly_from_dict(doc)
