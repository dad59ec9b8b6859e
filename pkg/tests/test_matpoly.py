"""Tests for matpoly: polynomial containers, grids, algebra, serialization."""

import numpy as np
import pytest

from trigfactor.errors import DomainError
from trigfactor.matpoly import (
    MatrixPoly1,
    MatrixPoly2,
    add,
    adjoint,
    default_grid_size,
    eval_1d,
    eval_2d,
    fourier_coeffs_1d,
    hermitian_square_sum,
    load_poly,
    multiply,
    poly_from_dict,
    poly_to_dict,
    regroup_blocks,
    sample_grid_1d,
    sample_grid_2d,
    save_poly,
    toeplitz_truncation,
)


def random_poly_1d(rng, dim, degree, hermitian=False, analytic=False):
    lo = 0 if analytic else -degree
    coeffs = {}
    for n in range(lo, degree + 1):
        coeffs[n] = (rng.uniform(-1, 1, (dim, dim))
                     + 1j * rng.uniform(-1, 1, (dim, dim)))
    return MatrixPoly1(coeffs, hermitian=hermitian, analytic=analytic)


def random_poly_2d(rng, dim, d1, d2, hermitian=False):
    coeffs = {}
    for n1 in range(-d1, d1 + 1):
        for n2 in range(-d2, d2 + 1):
            coeffs[(n1, n2)] = (rng.uniform(-1, 1, (dim, dim))
                                + 1j * rng.uniform(-1, 1, (dim, dim)))
    return MatrixPoly2(coeffs, hermitian=hermitian)


class TestConstruction:
    def test_zero_coefficients_stripped(self):
        p = MatrixPoly1({0: np.eye(2), 3: np.zeros((2, 2))})
        assert set(p.coeffs) == {0}
        assert p.degree == 0

    def test_degree_inferred(self):
        p = MatrixPoly1({-2: np.eye(1), 1: np.eye(1)})
        assert p.degree == 2

    def test_degree_declared_too_small_rejected(self):
        with pytest.raises(ValueError):
            MatrixPoly1({3: np.eye(1)}, degree=2)

    def test_analytic_rejects_negative_index(self):
        with pytest.raises(ValueError):
            MatrixPoly1({-1: np.eye(1)}, analytic=True)

    def test_empty_needs_dim(self):
        with pytest.raises(ValueError):
            MatrixPoly1({})
        p = MatrixPoly1({}, dim=3)
        assert p.shape == (3, 3)
        assert p.degree == 0

    def test_hermitian_symmetrizes_pairs(self):
        rng = np.random.default_rng(11)
        c1 = rng.uniform(-1, 1, (2, 2)) + 1j * rng.uniform(-1, 1, (2, 2))
        p = MatrixPoly1({1: c1}, hermitian=True)
        err = np.abs(p.coeff(-1) - p.coeff(1).conj().T).max()
        assert err < 1e-14
        # value is hermitian on the circle
        val = eval_1d(p, np.exp(0.37j))
        assert np.abs(val - val.conj().T).max() < 1e-12

    def test_hermitian_correction_recorded(self):
        p = MatrixPoly1({1: [[1.0]], -1: [[3.0]]}, hermitian=True)
        assert p.sym_correction > 0.5
        assert abs(p.coeff(1)[0, 0] - 2.0) < 1e-14

    def test_coeff_returns_zeros_when_absent(self):
        p = MatrixPoly1({0: np.eye(2)})
        assert np.all(p.coeff(5) == 0)
        assert p.coeff(5).shape == (2, 2)

    def test_norm_1_bounds_sup_norm(self):
        rng = np.random.default_rng(5)
        for trial in range(10):
            p = random_poly_1d(rng, 2, 3)
            bound = p.norm_1()
            for z in np.exp(2j * np.pi * rng.uniform(0, 1, 8)):
                val = np.linalg.norm(eval_1d(p, z), 2)
                assert val <= bound + 1e-10

    def test_default_grid_size_resolves_degree(self):
        for d in range(0, 7):
            n = default_grid_size(d)
            assert n >= 2 * d + 1


class TestEvaluation:
    def test_eval_1d_matches_direct_sum(self):
        rng = np.random.default_rng(21)
        for trial in range(20):
            p = random_poly_1d(rng, 3, 4)
            z = np.exp(2j * np.pi * rng.uniform())
            direct = np.zeros((3, 3), dtype=complex)
            for n in range(-4, 5):
                direct += p.coeff(n) * z ** n
            assert np.abs(eval_1d(p, z) - direct).max() < 1e-12

    def test_eval_2d_matches_direct_sum(self):
        rng = np.random.default_rng(22)
        for trial in range(10):
            p = random_poly_2d(rng, 2, 2, 3)
            z1 = np.exp(2j * np.pi * rng.uniform())
            z2 = np.exp(2j * np.pi * rng.uniform())
            direct = np.zeros((2, 2), dtype=complex)
            for n1 in range(-2, 3):
                for n2 in range(-3, 4):
                    direct += p.coeff((n1, n2)) * z1 ** n1 * z2 ** n2
            assert np.abs(eval_2d(p, z1, z2) - direct).max() < 1e-12

    def test_eval_rejects_off_torus(self):
        p = MatrixPoly1({0: np.eye(1)})
        with pytest.raises(DomainError):
            eval_1d(p, 0.5)
        q = MatrixPoly2({(0, 0): np.eye(1)})
        with pytest.raises(DomainError):
            eval_2d(q, 1.0, 2.0)

    def test_sample_grid_1d_matches_eval(self):
        rng = np.random.default_rng(23)
        p = random_poly_1d(rng, 2, 3)
        n = 16
        samples = sample_grid_1d(p, n)
        for j in range(n):
            z = np.exp(2j * np.pi * j / n)
            assert np.abs(samples[j] - eval_1d(p, z)).max() < 1e-12

    def test_sample_grid_1d_offset(self):
        rng = np.random.default_rng(24)
        p = random_poly_1d(rng, 2, 2)
        n = 8
        samples = sample_grid_1d(p, n, offset=0.5)
        for j in range(n):
            z = np.exp(2j * np.pi * (j + 0.5) / n)
            assert np.abs(samples[j] - eval_1d(p, z)).max() < 1e-12

    def test_sample_grid_2d_matches_eval(self):
        rng = np.random.default_rng(25)
        p = random_poly_2d(rng, 2, 1, 2)
        n1, n2 = 5, 7
        samples = sample_grid_2d(p, n1, n2, offset1=0.25)
        for j1 in range(n1):
            for j2 in range(n2):
                z1 = np.exp(2j * np.pi * (j1 + 0.25) / n1)
                z2 = np.exp(2j * np.pi * j2 / n2)
                got = samples[j1, j2]
                assert np.abs(got - eval_2d(p, z1, z2)).max() < 1e-12


class TestFourierRecovery:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(31)
        for trial in range(20):
            d = int(rng.integers(0, 5))
            p = random_poly_1d(rng, 2, d)
            n = 2 * d + 1 + int(rng.integers(0, 6))
            coeffs = fourier_coeffs_1d(sample_grid_1d(p, n), d)
            for m in range(-d, d + 1):
                assert np.abs(coeffs[m] - p.coeff(m)).max() < 1e-10

    def test_aliasing_raises(self):
        rng = np.random.default_rng(32)
        p = random_poly_1d(rng, 1, 3)
        samples = sample_grid_1d(p, 6)
        with pytest.raises(ValueError):
            fourier_coeffs_1d(samples, 3)

    def test_aliasing_folds_high_modes(self):
        # degree-3 polynomial sampled on 4 points: z^3 and z^{-1} collide
        p = MatrixPoly1({3: [[1.0]], -1: [[2.0]]})
        samples = sample_grid_1d(p, 4)
        coeffs = fourier_coeffs_1d(samples, 1)
        assert abs(coeffs[-1][0, 0] - 3.0) < 1e-12


class TestAlgebra:
    def test_add_pointwise(self):
        rng = np.random.default_rng(41)
        p = random_poly_1d(rng, 2, 2)
        q = random_poly_1d(rng, 2, 3)
        s = add(p, q)
        for z in np.exp(2j * np.pi * rng.uniform(0, 1, 6)):
            want = eval_1d(p, z) + eval_1d(q, z)
            assert np.abs(eval_1d(s, z) - want).max() < 1e-12

    def test_multiply_pointwise(self):
        rng = np.random.default_rng(42)
        p = random_poly_1d(rng, 2, 2)
        q = random_poly_1d(rng, 2, 3)
        prod = multiply(p, q)
        assert prod.degree <= 5
        for z in np.exp(2j * np.pi * rng.uniform(0, 1, 6)):
            want = eval_1d(p, z) @ eval_1d(q, z)
            assert np.abs(eval_1d(prod, z) - want).max() < 1e-12

    def test_adjoint_pointwise(self):
        rng = np.random.default_rng(43)
        p = random_poly_1d(rng, 3, 3)
        pa = adjoint(p)
        for z in np.exp(2j * np.pi * rng.uniform(0, 1, 6)):
            want = eval_1d(p, z).conj().T
            assert np.abs(eval_1d(pa, z) - want).max() < 1e-12

    def test_adjoint_involution(self):
        rng = np.random.default_rng(44)
        p = random_poly_1d(rng, 2, 2)
        paa = adjoint(adjoint(p))
        for n in range(-2, 3):
            assert np.abs(paa.coeff(n) - p.coeff(n)).max() < 1e-14

    def test_hermitian_square_single_factor(self):
        # |1 - z|^2 = 2 - z - 1/z
        f = MatrixPoly1({0: [[1.0]], 1: [[-1.0]]}, analytic=True)
        q = hermitian_square_sum([f])
        assert q.hermitian
        assert abs(q.coeff(0)[0, 0] - 2.0) < 1e-14
        assert abs(q.coeff(1)[0, 0] + 1.0) < 1e-14
        assert abs(q.coeff(-1)[0, 0] + 1.0) < 1e-14

    def test_hermitian_square_sum_pointwise(self):
        rng = np.random.default_rng(45)
        factors = [random_poly_1d(rng, 2, 2, analytic=True)
                   for _ in range(3)]
        q = hermitian_square_sum(factors)
        for z in np.exp(2j * np.pi * rng.uniform(0, 1, 8)):
            want = np.zeros((2, 2), dtype=complex)
            for f in factors:
                val = eval_1d(f, z)
                want += val.conj().T @ val
            got = eval_1d(q, z)
            assert np.abs(got - want).max() < 1e-11
            vals = np.linalg.eigvalsh(got)
            assert vals.min() > -1e-10


class TestToeplitzTruncation:
    def test_small_example(self):
        p = MatrixPoly1({0: [[2.0]], 1: [[-1.0]], -1: [[-1.0]]},
                        hermitian=True)
        t = toeplitz_truncation(p, 3)
        want = np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]], dtype=complex)
        assert np.abs(t.matrix - want).max() < 1e-14
        assert t.n_blocks == 3
        assert t.block_shape == (1, 1)

    def test_block_placement(self):
        a0 = np.array([[1.0, 2.0], [3.0, 4.0]])
        a1 = np.array([[5.0, 6.0], [7.0, 8.0]])
        p = MatrixPoly1({0: a0, 1: a1})
        t = toeplitz_truncation(p, 2).matrix
        assert np.abs(t[0:2, 0:2] - a0).max() < 1e-14
        assert np.abs(t[2:4, 2:4] - a0).max() < 1e-14
        assert np.abs(t[2:4, 0:2] - a1).max() < 1e-14
        assert np.abs(t[0:2, 2:4]).max() < 1e-14

    def test_hermitian_truncations_psd(self):
        rng = np.random.default_rng(51)
        f = random_poly_1d(rng, 2, 2, analytic=True)
        q = hermitian_square_sum([f])
        for n in (1, 3, 6):
            t = toeplitz_truncation(q, n).matrix
            assert np.abs(t - t.conj().T).max() < 1e-12
            vals = np.linalg.eigvalsh(t)
            assert vals.min() > -1e-10


class TestRegroupBlocks:
    def oracle_pencil(self, q, n_super):
        """Build the z2-direction Toeplitz operator of q two ways.

        Direct: entry super-block (I, J) of the (n_super x d2*k) operator is
        the z2-slice polynomial R_{i-j} evaluated coefficient-wise; regrouped:
        the block tridiagonal pencil with diagonal A and subdiagonal B.  Both
        give functions of z1; compare their coefficient tensors exactly.
        """
        d1, d2 = q.degree
        k = q.shape[0]
        dim = d2 * k
        pair = regroup_blocks(q)
        for n in range(-d1, d1 + 1):
            amat = pair.a.coeff(n)
            bmat = pair.b.coeff(n)
            for i in range(d2):
                for j in range(d2):
                    want_a = q.coeff((n, i - j))
                    got_a = amat[i * k:(i + 1) * k, j * k:(j + 1) * k]
                    assert np.abs(got_a - want_a).max() == 0.0
                    m = d2 + i - j
                    want_b = (q.coeff((n, m)) if 1 <= m <= d2
                              else np.zeros((k, k)))
                    got_b = bmat[i * k:(i + 1) * k, j * k:(j + 1) * k]
                    assert np.abs(got_b - want_b).max() == 0.0
        return pair

    def test_structure_exact(self):
        rng = np.random.default_rng(61)
        for trial in range(5):
            k = int(rng.integers(1, 3))
            d1 = int(rng.integers(0, 3))
            d2 = int(rng.integers(1, 4))
            q = random_poly_2d(rng, k, d1, d2, hermitian=True)
            pair = self.oracle_pencil(q, 4)
            assert pair.block_dim == k
            assert (pair.d1, pair.d2) == (d1, d2)
            assert pair.a.hermitian

    def test_pencil_reproduces_values(self):
        # Tridiagonal operator built from (A, B) agrees with the permuted
        # two-variable Toeplitz operator in the z2 direction.
        rng = np.random.default_rng(62)
        q = random_poly_2d(rng, 2, 1, 2, hermitian=True)
        d1, d2 = q.degree
        k = q.shape[0]
        pair = regroup_blocks(q)
        n_super = 4
        z1 = np.exp(0.31j)
        aval = eval_1d(pair.a, z1)
        bval = eval_1d(pair.b, z1)
        dim = d2 * k
        big = np.zeros((n_super * dim, n_super * dim), dtype=complex)
        for idx in range(n_super):
            big[idx * dim:(idx + 1) * dim, idx * dim:(idx + 1) * dim] = aval
            if idx + 1 < n_super:
                big[(idx + 1) * dim:(idx + 2) * dim,
                    idx * dim:(idx + 1) * dim] = bval
                big[idx * dim:(idx + 1) * dim,
                    (idx + 1) * dim:(idx + 2) * dim] = bval.conj().T
        # oracle: z2-direction Toeplitz truncation of Q(z1, .) with
        # n_super*d2 block rows
        slice_coeffs = {}
        for (n1, n2), mat in q.coeffs.items():
            slice_coeffs.setdefault(n2, np.zeros((k, k), dtype=complex))
            slice_coeffs[n2] = slice_coeffs[n2] + mat * z1 ** n1
        n_rows = n_super * d2
        want = np.zeros((n_rows * k, n_rows * k), dtype=complex)
        for n2, mat in slice_coeffs.items():
            for i in range(n_rows):
                j = i - n2
                if 0 <= j < n_rows:
                    want[i * k:(i + 1) * k, j * k:(j + 1) * k] = mat
        assert np.abs(big - want).max() < 1e-12

    def test_rejects_one_variable_shape(self):
        q = MatrixPoly2({(1, 0): np.eye(2), (-1, 0): np.eye(2)},
                        hermitian=True)
        with pytest.raises(ValueError):
            regroup_blocks(q)


class TestSerialization:
    def test_dict_round_trip_1d(self):
        rng = np.random.default_rng(71)
        for hermitian in (False, True):
            p = random_poly_1d(rng, 2, 3, hermitian=hermitian)
            q = poly_from_dict(poly_to_dict(p))
            assert q.shape == p.shape
            assert q.degree == p.degree
            assert q.hermitian == p.hermitian
            for n in range(-3, 4):
                assert np.abs(q.coeff(n) - p.coeff(n)).max() < 1e-15

    def test_dict_round_trip_2d(self):
        rng = np.random.default_rng(72)
        p = random_poly_2d(rng, 2, 2, 2, hermitian=True)
        q = poly_from_dict(poly_to_dict(p))
        assert isinstance(q, MatrixPoly2)
        assert q.degree == p.degree
        for key, mat in p.coeffs.items():
            assert np.abs(q.coeff(key) - mat).max() < 1e-15

    def test_file_round_trip_identity(self, tmp_path):
        rng = np.random.default_rng(73)
        p = random_poly_1d(rng, 3, 2, hermitian=True)
        path = tmp_path / "poly.json"
        save_poly(p, path)
        q = load_poly(path)
        assert set(q.coeffs) == set(p.coeffs)
        for n, mat in p.coeffs.items():
            assert np.abs(q.coeff(n) - mat).max() == 0.0

    def test_save_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(74)
        p = random_poly_1d(rng, 2, 2)
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_poly(p, p1)
        save_poly(p, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_analytic_flag_preserved(self, tmp_path):
        p = MatrixPoly1({0: [[1.0]], 2: [[0.5]]}, analytic=True)
        path = tmp_path / "f.json"
        save_poly(p, path)
        q = load_poly(path)
        assert q.analytic
        assert not q.hermitian
