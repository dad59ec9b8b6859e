"""Tests for fr2d: pencil collapse, block factorization, 2-var certificates."""

import numpy as np
import pytest

from trigfactor.errors import EmptySetError, NotPsdError
from trigfactor.fr2d import (
    ExtremalSymbolPair,
    Factor2dOptions,
    _pack_coeffs,
    _project_band,
    _unpack_coeffs,
    assemble_H,
    compute_extremal_pair,
    factor_2d,
    swap_variables,
    unpack_factors,
)
from trigfactor.matpoly import (
    MatrixPoly1,
    MatrixPoly2,
    eval_2d,
    hermitian_square_sum,
    regroup_blocks,
    sample_grid_2d,
)
from trigfactor.certify import verify_certificate


def random_analytic_2d(rng, dim, d1, d2):
    coeffs = {}
    for n1 in range(d1 + 1):
        for n2 in range(d2 + 1):
            coeffs[(n1, n2)] = (rng.uniform(-1, 1, (dim, dim))
                                + 1j * rng.uniform(-1, 1, (dim, dim)))
    return MatrixPoly2(coeffs, analytic=True)


def critical_square(k, d1, d2, seed):
    """Square of G(z1, z2) * (1 - z1 z2): vanishes on the anti-diagonal.

    The collapsed symbols of these instances are genuinely polynomial, so
    they exercise the direct (unrefined) path.
    """
    rng = np.random.default_rng(seed)
    coeffs = {}
    for n1 in range(d1):
        for n2 in range(d2):
            coeffs[(n1, n2)] = (rng.uniform(-1, 1, (k, k))
                                + 1j * rng.uniform(-1, 1, (k, k)))
    g = MatrixPoly2(coeffs, degree=(d1 - 1, d2 - 1), analytic=True,
                    dim=(k, k))
    prod = {}
    for (n1, n2), mat in g.coeffs.items():
        prod[(n1, n2)] = prod.get((n1, n2), 0) + mat
        prod[(n1 + 1, n2 + 1)] = prod.get((n1 + 1, n2 + 1), 0) - mat
    f = MatrixPoly2(prod, degree=(d1, d2), analytic=True, dim=(k, k))
    return hermitian_square_sum([f])


class TestCoefficientPacking:
    def test_pack_unpack_round_trip(self):
        rng = np.random.default_rng(1)
        for dim, d1 in ((1, 0), (2, 1), (3, 2)):
            gammas = []
            g0 = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            gammas.append(0.5 * (g0 + g0.conj().T))
            for n in range(d1):
                gammas.append(rng.normal(size=(dim, dim))
                              + 1j * rng.normal(size=(dim, dim)))
            x = _pack_coeffs(gammas, dim, d1)
            back = _unpack_coeffs(x, dim, d1)
            assert len(back) == d1 + 1
            for want, got in zip(gammas, back):
                assert np.abs(want - got).max() == 0.0

    def test_vector_length(self):
        rng = np.random.default_rng(2)
        dim, d1 = 3, 2
        g0 = np.eye(dim, dtype=complex)
        gammas = [g0] + [np.zeros((dim, dim), dtype=complex)
                         for _ in range(d1)]
        x = _pack_coeffs(gammas, dim, d1)
        assert x.size == dim * dim + d1 * 2 * dim * dim
        assert x.dtype == np.float64


class TestProjectBand:
    def test_idempotent_and_hermitian(self):
        rng = np.random.default_rng(3)
        field = (rng.normal(size=(16, 2, 2))
                 + 1j * rng.normal(size=(16, 2, 2)))
        proj = _project_band(field, 1)
        again = _project_band(proj, 1)
        assert np.abs(proj - again).max() < 1e-12
        herm_err = np.abs(proj - np.conj(np.transpose(proj, (0, 2, 1)))).max()
        assert herm_err < 1e-12

    def test_band_limit_enforced(self):
        rng = np.random.default_rng(4)
        field = (rng.normal(size=(16, 2, 2))
                 + 1j * rng.normal(size=(16, 2, 2)))
        proj = _project_band(field, 1)
        spec = np.fft.fft(proj, axis=0) / 16
        for n in range(2, 15):
            assert np.abs(spec[n]).max() < 1e-12

    def test_fixes_degree_limited_hermitian_fields(self):
        # a field that is already a hermitian degree-1 polynomial passes
        # through unchanged
        rng = np.random.default_rng(5)
        g1 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        g0 = rng.normal(size=(2, 2))
        g0 = g0 + g0.T
        n_grid = 16
        phases = np.exp(2j * np.pi * np.arange(n_grid) / n_grid)
        field = (g0[None, :, :]
                 + np.multiply.outer(phases, g1)
                 + np.multiply.outer(phases.conj(), g1.conj().T))
        proj = _project_band(field, 1)
        assert np.abs(proj - field).max() < 1e-12


class TestComputeExtremalPair:
    def test_critical_instance_direct_path(self):
        q = critical_square(1, 1, 1, 42)
        pair = regroup_blocks(q)
        esp = compute_extremal_pair(pair)
        assert esp.decay_report["tail_relative"] <= 1e-6
        assert not esp.decay_report.get("refined", False)
        assert esp.a_hat.degree <= pair.d1
        assert esp.m_hat.degree <= pair.d1

    def test_generic_instance_refined_path(self):
        rng = np.random.default_rng(6)
        q = hermitian_square_sum([random_analytic_2d(rng, 1, 1, 1)
                                  for _ in range(2)])
        pair = regroup_blocks(q)
        esp = compute_extremal_pair(pair)
        assert esp.m_hat.degree <= pair.d1
        assert esp.decay_report["tail_relative"] <= 1e-6
        if esp.decay_report.get("refined"):
            assert esp.decay_report["refine_min_eig_rel"] >= -1e-7
            # refined path keeps the original diagonal symbol
            for n, mat in pair.a.coeffs.items():
                assert np.abs(esp.a_hat.coeff(n) - mat).max() == 0.0

    def test_empty_set_aborts(self):
        # indefinite polynomial: 2-var symbol dips below zero
        q = MatrixPoly2({(0, 0): [[1.0]], (0, 1): [[1.0]],
                         (0, -1): [[1.0]]}, hermitian=True)
        pair = regroup_blocks(q)
        with pytest.raises(EmptySetError):
            compute_extremal_pair(pair)


class TestAssembleH:
    def test_block_layout(self):
        q = critical_square(1, 1, 1, 43)
        pair = regroup_blocks(q)
        esp = compute_extremal_pair(pair)
        h = assemble_H(pair, esp.m_hat)
        dim = pair.a.shape[0]
        assert h.shape == (2 * dim, 2 * dim)
        assert h.hermitian
        for n in range(-pair.d1, pair.d1 + 1):
            hmat = h.coeff(n)
            want11 = pair.a.coeff(n) - esp.m_hat.coeff(n)
            assert np.abs(hmat[:dim, :dim] - want11).max() < 1e-12
            assert np.abs(hmat[dim:, :dim] - pair.b.coeff(n)).max() < 1e-12
            assert np.abs(hmat[dim:, dim:] - esp.m_hat.coeff(n)).max() < 1e-12

    def test_rejects_infeasible_member(self):
        q = critical_square(1, 1, 1, 44)
        pair = regroup_blocks(q)
        dim = pair.a.shape[0]
        bad = MatrixPoly1({0: 100.0 * np.eye(dim)}, hermitian=True)
        with pytest.raises(NotPsdError):
            assemble_H(pair, bad)

    def test_rejects_overdegree_member(self):
        q = critical_square(1, 1, 1, 45)
        pair = regroup_blocks(q)
        dim = pair.a.shape[0]
        over = MatrixPoly1({0: np.eye(dim), 2: 0.01 * np.eye(dim),
                            -2: 0.01 * np.eye(dim)}, hermitian=True)
        with pytest.raises(ValueError):
            assemble_H(pair, over)


class TestUnpackFactors:
    def test_identity_block_factor(self):
        # d2 = 1, k = 1: P_H = I_2 unpacks to F_0 = 1 and F_1 = z2
        p_h = MatrixPoly1({0: np.eye(2)}, analytic=True)
        factors = unpack_factors(p_h, d1=0, d2=1, k=1)
        assert len(factors) == 2
        f0, f1 = factors
        assert np.abs(f0.coeff((0, 0)) - 1.0).max() < 1e-14
        assert f0.degree == (0, 0)
        assert np.abs(f1.coeff((0, 1)) - 1.0).max() < 1e-14
        assert f1.degree == (0, 1)

    def test_degree_box(self):
        rng = np.random.default_rng(7)
        d1, d2, k = 2, 2, 1
        dim = 2 * d2 * k
        coeffs = {n: rng.normal(size=(dim, dim)) for n in range(d1 + 1)}
        p_h = MatrixPoly1(coeffs, analytic=True)
        factors = unpack_factors(p_h, d1, d2, k)
        assert len(factors) <= 2 * d2
        for f in factors:
            e1, e2 = f.degree
            assert e1 <= d1
            assert e2 <= 2 * d2 - 1

    def test_square_sum_matches_block_identity(self):
        # sum_m F_m(z1,z2)* F_m(z1,z2) equals the z2-compression identity:
        # with P_H analytic in z1 only, the factors carry (1/d2) sum_j
        # blk(j,m)* blk(j',m) z2^{j'-j}; verify against a direct expansion
        rng = np.random.default_rng(8)
        d1, d2, k = 1, 2, 1
        dim = 2 * d2 * k
        coeffs = {n: rng.normal(size=(dim, dim))
                  + 1j * rng.normal(size=(dim, dim))
                  for n in range(d1 + 1)}
        p_h = MatrixPoly1(coeffs, analytic=True)
        factors = unpack_factors(p_h, d1, d2, k)
        q = hermitian_square_sum(factors)
        z1 = np.exp(0.41j)
        z2 = np.exp(1.13j)
        got = eval_2d(q, z1, z2)
        # direct: F_m = c sum_j blk(j, m)(z1) z2^j
        ph_val = np.zeros((dim, dim), dtype=complex)
        for n, mat in p_h.coeffs.items():
            ph_val += mat * z1 ** n
        c = 1.0 / np.sqrt(d2)
        want = np.zeros((k, k), dtype=complex)
        for m in range(2 * d2):
            fval = np.zeros((k, k), dtype=complex)
            for j in range(2 * d2):
                blk = ph_val[j * k:(j + 1) * k, m * k:(m + 1) * k]
                fval += blk * z2 ** j
            fval *= c
            want += fval.conj().T @ fval
        assert np.abs(got - want).max() < 1e-12

    def test_dimension_mismatch_rejected(self):
        p_h = MatrixPoly1({0: np.eye(3)}, analytic=True)
        with pytest.raises(ValueError):
            unpack_factors(p_h, d1=0, d2=1, k=1)


class TestFactor2d:
    def test_critical_flagship(self):
        # |1 - z1 z2|^2 admits an exact two-factor certificate
        q = MatrixPoly2({(0, 0): [[2.0]], (1, 1): [[-1.0]],
                         (-1, -1): [[-1.0]]}, hermitian=True)
        cert = factor_2d(q)
        assert cert.accepted
        assert cert.residual <= 1e-10
        assert len(cert.factors) <= 2
        for (e1, e2) in cert.degrees:
            assert e1 <= 1 and e2 <= 1

    def test_scalar_refined_example(self):
        # 4 + (1 + 0.5 z1) z2 + conj: strictly positive, generic z1-z2
        # coupling forces the feasibility refinement
        q = MatrixPoly2({(0, 0): [[4.0]], (0, 1): [[1.0]], (1, 1): [[0.5]],
                         (0, -1): [[1.0]], (-1, -1): [[0.5]]},
                        hermitian=True)
        cert = factor_2d(q)
        assert cert.accepted
        assert cert.residual <= 1e-5
        assert len(cert.factors) <= 2
        report = verify_certificate(q, cert.factors)
        assert report["residual_sup"] <= 1e-5
        assert report["degree_ok"]
        assert report["count_ok"]

    def test_planted_instances(self):
        rng = np.random.default_rng(9)
        for trial in range(3):
            k = int(rng.integers(1, 3))
            d1 = int(rng.integers(1, 3))
            d2 = int(rng.integers(1, 3))
            fs = [random_analytic_2d(rng, k, d1, d2) for _ in range(2)]
            q = hermitian_square_sum(fs)
            cert = factor_2d(q)
            assert cert.accepted
            assert cert.residual <= 1e-5
            assert len(cert.factors) <= 2 * d2
            for (e1, e2) in cert.degrees:
                assert e1 <= d1
                assert e2 <= 2 * d2 - 1

    def test_pure_z2_route(self):
        # no z1 dependence: still factors with degree box (0, 2 d2 - 1)
        q = MatrixPoly2({(0, 0): [[2.0]], (0, 1): [[-1.0]],
                         (0, -1): [[-1.0]]}, hermitian=True)
        cert = factor_2d(q)
        assert cert.accepted
        for (e1, e2) in cert.degrees:
            assert e1 == 0

    def test_one_variable_route(self):
        # d2 = 0 inputs use the one-variable factorization directly
        q = MatrixPoly2({(0, 0): [[2.0]], (1, 0): [[-1.0]],
                         (-1, 0): [[-1.0]]}, hermitian=True)
        cert = factor_2d(q)
        assert cert.accepted
        assert cert.pipeline_metadata["route"] == "one-variable"
        assert len(cert.factors) == 1

    def test_indefinite_rejected(self):
        q = MatrixPoly2({(0, 0): [[1.0]], (0, 1): [[1.0]],
                         (0, -1): [[1.0]]}, hermitian=True)
        with pytest.raises((EmptySetError, NotPsdError)):
            factor_2d(q)

    def test_metadata_recorded(self):
        q = MatrixPoly2({(0, 0): [[2.0]], (1, 1): [[-1.0]],
                         (-1, -1): [[-1.0]]}, hermitian=True)
        cert = factor_2d(q)
        meta = cert.pipeline_metadata
        assert meta["route"] == "pencil"
        assert "stage_seconds" in meta
        assert "grid_size" in meta
        assert meta["decay_tail_relative"] <= 1e-6


class TestSwapVariables:
    def test_involution(self):
        rng = np.random.default_rng(10)
        q = hermitian_square_sum([random_analytic_2d(rng, 2, 2, 1)])
        back = swap_variables(swap_variables(q))
        assert back.degree == q.degree
        for key, mat in q.coeffs.items():
            assert np.abs(back.coeff(key) - mat).max() == 0.0

    def test_values_transpose_arguments(self):
        rng = np.random.default_rng(11)
        q = hermitian_square_sum([random_analytic_2d(rng, 1, 2, 1)])
        s = swap_variables(q)
        assert s.degree == (q.degree[1], q.degree[0])
        z1 = np.exp(0.7j)
        z2 = np.exp(1.9j)
        assert np.abs(eval_2d(s, z2, z1) - eval_2d(q, z1, z2)).max() < 1e-12

    def test_swapped_factorization_bounds(self):
        # factoring swap(Q) gives <= 2 d1 factors of degree <= (d2, 2 d1 - 1)
        rng = np.random.default_rng(12)
        f = random_analytic_2d(rng, 1, 2, 1)
        q = hermitian_square_sum([f])
        d1, d2 = q.degree
        cert = factor_2d(swap_variables(q))
        assert cert.accepted
        assert cert.residual <= 1e-5
        assert len(cert.factors) <= 2 * d1
        for (e1, e2) in cert.degrees:
            assert e1 <= d2
            assert e2 <= 2 * d1 - 1
