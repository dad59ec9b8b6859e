"""End-to-end tests for the command line interface."""

import json
import subprocess
import sys

import numpy as np
import pytest

from trigfactor.matpoly import (
    MatrixPoly1,
    MatrixPoly2,
    load_poly,
    poly_from_dict,
    save_poly,
)


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "trigfactor.cli"] + [str(a) for a in args],
        capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def write_poly(path, poly):
    save_poly(poly, path)
    return str(path)


@pytest.fixture
def boundary_scalar(tmp_path):
    q = MatrixPoly1({0: [[2.0]], 1: [[-1.0]], -1: [[-1.0]]}, hermitian=True)
    return write_poly(tmp_path / "q1.json", q)


@pytest.fixture
def critical_2d(tmp_path):
    q = MatrixPoly2({(0, 0): [[2.0]], (1, 1): [[-1.0]], (-1, -1): [[-1.0]]},
                    hermitian=True)
    return write_poly(tmp_path / "q2.json", q)


class TestFactor1d:
    def test_success_exit_zero(self, boundary_scalar, tmp_path):
        out = tmp_path / "cert.json"
        code, stdout, stderr = run_cli("factor1d", boundary_scalar,
                                       "--out", out)
        assert code == 0, stderr
        doc = json.loads(out.read_text())
        assert doc["certificate"]["accepted"]
        assert doc["certificate"]["residual"] <= 1e-6
        assert len(doc["certificate"]["factors"]) == 1

    def test_certificate_factors_load(self, boundary_scalar, tmp_path):
        out = tmp_path / "cert.json"
        code, _, _ = run_cli("factor1d", boundary_scalar, "--out", out)
        assert code == 0
        doc = json.loads(out.read_text())
        factor = poly_from_dict(doc["certificate"]["factors"][0])
        assert factor.analytic
        assert factor.degree <= 1

    def test_indefinite_exit_two(self, tmp_path):
        q = MatrixPoly1({0: [[-1.0]]}, hermitian=True)
        path = write_poly(tmp_path / "neg.json", q)
        code, stdout, stderr = run_cli("factor1d", path)
        assert code == 2
        assert "rejected:" in stderr
        assert "not positive semidefinite" in stderr

    def test_unreachable_tolerance_exit_two(self, boundary_scalar):
        code, stdout, stderr = run_cli("factor1d", boundary_scalar,
                                       "--tol", "1e-13")
        assert code == 2
        assert "rejected:" in stderr

    def test_missing_file_exit_one(self):
        code, stdout, stderr = run_cli("factor1d", "/nonexistent/q.json")
        assert code == 1
        assert "error:" in stderr

    def test_stdout_when_no_out(self, boundary_scalar):
        code, stdout, _ = run_cli("factor1d", boundary_scalar)
        assert code == 0
        doc = json.loads(stdout)
        assert doc["certificate"]["accepted"]


class TestFactor2d:
    def test_success_exit_zero(self, critical_2d, tmp_path):
        out = tmp_path / "cert2.json"
        code, stdout, stderr = run_cli("factor2d", critical_2d, "--out", out)
        assert code == 0, stderr
        doc = json.loads(out.read_text())
        assert doc["certificate"]["accepted"]
        assert doc["certificate"]["residual"] <= 1e-5
        assert doc["certificate"]["count"] <= 2

    def test_swap_vars(self, tmp_path):
        q = MatrixPoly2({(0, 0): [[3.0]], (1, 1): [[-1.0]],
                         (-1, -1): [[-1.0]]}, hermitian=True)
        path = write_poly(tmp_path / "q.json", q)
        out = tmp_path / "cert.json"
        code, _, stderr = run_cli("factor2d", path, "--swap-vars",
                                  "--out", out)
        assert code == 0, stderr
        doc = json.loads(out.read_text())
        assert doc["certificate"]["accepted"]

    def test_indefinite_exit_two(self, tmp_path):
        q = MatrixPoly2({(0, 0): [[1.0]], (0, 1): [[1.0]], (0, -1): [[1.0]]},
                        hermitian=True)
        path = write_poly(tmp_path / "bad.json", q)
        code, stdout, stderr = run_cli("factor2d", path)
        assert code == 2
        assert "rejected:" in stderr

    def test_wrong_variable_count_exit_one(self, boundary_scalar):
        code, stdout, stderr = run_cli("factor2d", boundary_scalar)
        assert code == 1
        assert "error:" in stderr


class TestVerify:
    def test_round_trip_exit_zero(self, critical_2d, tmp_path):
        cert = tmp_path / "cert.json"
        code, _, _ = run_cli("factor2d", critical_2d, "--out", cert)
        assert code == 0
        code, stdout, _ = run_cli("verify", critical_2d, cert)
        assert code == 0
        doc = json.loads(stdout)
        assert doc["residual_sup"] <= 1e-5
        assert doc["accepted"]

    def test_corrupted_certificate_exit_two(self, critical_2d, tmp_path):
        cert = tmp_path / "cert.json"
        run_cli("factor2d", critical_2d, "--out", cert)
        doc = json.loads(cert.read_text())
        factor = doc["certificate"]["factors"][0]
        factor["coeffs"][0]["re"][0][0] += 0.25
        cert.write_text(json.dumps(doc))
        code, stdout, stderr = run_cli("verify", critical_2d, cert)
        assert code == 2
        out = json.loads(stdout)
        assert out["residual_sup"] > 0.01

    def test_missing_certificate_file(self, critical_2d):
        code, _, stderr = run_cli("verify", critical_2d, "/nonexistent.json")
        assert code == 1
        assert "error:" in stderr


class TestAnalyzeMset:
    def test_polynomial_input(self, critical_2d):
        code, stdout, stderr = run_cli("analyze-mset", critical_2d,
                                       "--grid-size", "16")
        assert code == 0, stderr
        doc = json.loads(stdout)
        assert len(doc["frequencies"]) == 16
        for row in doc["frequencies"]:
            assert row["gap"] >= 0.0
        assert "aggregate" in doc
        assert doc["aggregate"]["max_gap"] >= 0.0

    def test_pencil_input_b_zero(self, tmp_path):
        # A(z) = 3 + z + 1/z, B = 0: the set is [0, A(w)] pointwise, so
        # the gap field equals A and max_gap = max(3 + 2 cos) = 5
        a = MatrixPoly1({0: [[3.0]], 1: [[1.0]], -1: [[1.0]]},
                        hermitian=True)
        b = MatrixPoly1({}, dim=1)
        from trigfactor.matpoly import poly_to_dict
        doc = {"a": poly_to_dict(a), "b": poly_to_dict(b)}
        path = tmp_path / "pencil.json"
        path.write_text(json.dumps(doc))
        code, stdout, stderr = run_cli("analyze-mset", path,
                                       "--grid-size", "64")
        assert code == 0, stderr
        out = json.loads(stdout)
        assert abs(out["aggregate"]["max_gap"] - 5.0) < 1e-8

    def test_empty_set_exit_two(self, tmp_path):
        q = MatrixPoly2({(0, 0): [[1.0]], (0, 1): [[1.0]], (0, -1): [[1.0]]},
                        hermitian=True)
        path = write_poly(tmp_path / "bad.json", q)
        code, stdout, stderr = run_cli("analyze-mset", path,
                                       "--grid-size", "16")
        assert code == 2
        assert "frequency index" in stderr

    def test_extremalize_flag(self, critical_2d):
        code, stdout, stderr = run_cli("analyze-mset", critical_2d,
                                       "--grid-size", "16", "--extremalize")
        assert code == 0, stderr
        doc = json.loads(stdout)
        assert "extremal_pair" in doc
        report = doc["extremal_pair"]["decay_report"]
        assert report["tail_relative"] <= 1e-6


class TestGenerate:
    def test_deterministic_output(self, tmp_path):
        f1 = tmp_path / "a.json"
        f2 = tmp_path / "b.json"
        code1, _, _ = run_cli("generate", "--kind", "sos2d", "--k", "1",
                              "--d1", "1", "--d2", "1", "--seed", "7",
                              "--out", f1)
        code2, _, _ = run_cli("generate", "--kind", "sos2d", "--k", "1",
                              "--d1", "1", "--d2", "1", "--seed", "7",
                              "--out", f2)
        assert code1 == 0 and code2 == 0
        assert f1.read_bytes() == f2.read_bytes()

    def test_generated_sos1d_factors(self, tmp_path):
        out = tmp_path / "q.json"
        code, _, stderr = run_cli("generate", "--kind", "sos1d", "--k", "2",
                                  "--d", "2", "--seed", "3", "--out", out)
        assert code == 0, stderr
        q = load_poly(out)
        assert isinstance(q, MatrixPoly1)
        assert q.hermitian
        code, _, _ = run_cli("factor1d", out)
        assert code == 0

    def test_generated_boundary1d(self, tmp_path):
        out = tmp_path / "q.json"
        code, _, stderr = run_cli("generate", "--kind", "boundary1d",
                                  "--k", "1", "--d", "1", "--seed", "0",
                                  "--out", out)
        assert code == 0, stderr
        q = load_poly(out)
        assert q.degree == 1


class TestBench:
    def test_bench_with_config(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "instances": [{"id": "c0", "kind": "sos1d", "k": 1, "d": 2,
                           "n_factors": 2, "seed": 4}],
        }))
        csv_path = tmp_path / "report.csv"
        code, stdout, stderr = run_cli("bench", config, "--csv", csv_path)
        assert code == 0, stderr
        assert csv_path.exists()
        assert "c0" in stdout


class TestBadUsage:
    def test_unknown_command(self):
        code, _, _ = run_cli("frobnicate")
        assert code != 0

    def test_malformed_json_exit_one(self, tmp_path):
        path = tmp_path / "garbage.json"
        path.write_text("{not json")
        code, _, stderr = run_cli("factor1d", path)
        assert code == 1
        assert "error:" in stderr
