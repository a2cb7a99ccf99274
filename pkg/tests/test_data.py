import numpy as np
import pytest
import scipy.sparse as sp

from l1pca.data import (
    FixedEffectSpec,
    gen_fixed_effect,
    read_dense_matrix,
    read_sparse_labeled,
    read_trace,
    write_dense_matrix,
    write_sparse_labeled,
    write_trace,
)
from l1pca.errors import InvalidInputError, ParseError, PreconditionError
from l1pca.solvers import IterateTrace


class TestFixedEffect:
    def test_centering_and_span(self):
        X, U, Z = gen_fixed_effect(FixedEffectSpec(n=80, d=30, K=4, sigma=0.3, seed=1))
        assert np.abs(Z.sum(axis=1)).max() <= 1e-10 * 80
        assert np.linalg.norm(Z - U @ (U.T @ Z)) <= 1e-10
        assert np.linalg.norm(U.T @ U - np.eye(4)) <= 1e-10

    def test_noiseless(self):
        X, _, Z = gen_fixed_effect(FixedEffectSpec(n=20, d=10, K=2, sigma=0.0, seed=2))
        assert np.array_equal(X, Z)

    def test_deterministic(self):
        spec = FixedEffectSpec(n=30, d=12, K=3, sigma=0.7, seed=3)
        X1, U1, Z1 = gen_fixed_effect(spec)
        X2, U2, Z2 = gen_fixed_effect(spec)
        assert np.array_equal(X1, X2) and np.array_equal(U1, U2) and np.array_equal(Z1, Z2)

    def test_noise_stream_independent_of_sigma(self):
        _, U1, Z1 = gen_fixed_effect(FixedEffectSpec(n=30, d=12, K=3, sigma=0.1, seed=4))
        _, U2, Z2 = gen_fixed_effect(FixedEffectSpec(n=30, d=12, K=3, sigma=2.0, seed=4))
        assert np.array_equal(U1, U2) and np.array_equal(Z1, Z2)

    def test_laplace_variance(self):
        sigma = 0.8
        X, _, Z = gen_fixed_effect(FixedEffectSpec(n=1000, d=1000, K=3, sigma=sigma, seed=5))
        noise = X - Z
        assert noise.size >= 10**6
        assert abs(noise.var() - sigma**2) <= 0.05 * sigma**2

    def test_bad_spec(self):
        with pytest.raises(PreconditionError):
            FixedEffectSpec(n=5, d=5, K=9, sigma=0.1)
        with pytest.raises(PreconditionError):
            FixedEffectSpec(n=5, d=5, K=2, sigma=-0.5)


class TestSparseLabeled:
    def test_walkthrough_line(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("+1 1:0.5 3:-2\n")
        inst = read_sparse_labeled(p)
        assert inst.X.shape == (3, 1)
        assert np.allclose(inst.X.toarray().ravel(), [0.5, 0.0, -2.0])
        assert inst.labels[0] == 1.0

    def test_disjoint_indices(self, tmp_path):
        p = tmp_path / "b.txt"
        p.write_text("1 1:2.0\n-1 2:3.0\n")
        inst = read_sparse_labeled(p)
        assert inst.X.shape == (2, 2)
        assert np.allclose(inst.X.toarray(), [[2.0, 0.0], [0.0, 3.0]])

    def test_empty_feature_list(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("1 1:1.0\n-1\n")
        inst = read_sparse_labeled(p)
        assert np.allclose(inst.X.toarray()[:, 1], 0.0)
        assert inst.labels[1] == -1.0

    def test_malformed_token_has_line_number(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("1 1:1.0\n1 2:abc\n")
        with pytest.raises(ParseError) as err:
            read_sparse_labeled(p)
        assert err.value.line_number == 2

    def test_non_ascending_rejected(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("1 1:1.0\n1 1:1.0\n1 3:1.0 2:4.0\n")
        with pytest.raises(ParseError) as err:
            read_sparse_labeled(p)
        assert err.value.line_number == 3

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "f.txt"
        p.write_text("")
        with pytest.raises(ParseError):
            read_sparse_labeled(p)

    def test_feature_override(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("1 1:1.0\n")
        inst = read_sparse_labeled(p, n_features=5)
        assert inst.X.shape == (5, 1)
        with pytest.raises(PreconditionError):
            read_sparse_labeled(p, n_features=0)

    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        dense = rng.standard_normal((7, 9))
        dense[np.abs(dense) < 0.9] = 0.0
        X = sp.csc_matrix(dense)
        labels = np.where(rng.random(9) < 0.5, -1.0, 1.0)
        p = tmp_path / "h.txt"
        write_sparse_labeled(p, X, labels)
        inst = read_sparse_labeled(p, n_features=7)
        assert (inst.X != X).nnz == 0
        assert np.array_equal(inst.labels, labels)


class TestTraceIO:
    def _trace(self):
        tr = IterateTrace()
        tr.append(0, -1.2345678901234567, -1.2, 0.0, 0.0, 0.0, 0.0)
        tr.append(1, -2.3456789012345678e-05, -2.4, 0.1, 0.25, 0.3333333333333333, 0.001234)
        return tr

    def test_csv_schema(self, tmp_path):
        p = tmp_path / "t.csv"
        write_trace(self._trace(), p, "csv")
        lines = p.read_text().splitlines()
        assert lines[0] == "k,h_value,psi_value,delta_P_norm,delta_Q_norm,delta_C_norm,wall_time_seconds"
        assert len(lines) == 3

    def test_empty_trace_header_only(self, tmp_path):
        p = tmp_path / "empty.csv"
        write_trace(IterateTrace(), p, "csv")
        assert p.read_text().splitlines() == [
            "k,h_value,psi_value,delta_P_norm,delta_Q_norm,delta_C_norm,wall_time_seconds"
        ]

    def test_json_roundtrip_bit_exact(self, tmp_path):
        tr = self._trace()
        p = tmp_path / "t.json"
        write_trace(tr, p, "json")
        back = read_trace(p)
        assert back.k == tr.k
        assert back.h_value == tr.h_value
        assert back.psi_value == tr.psi_value
        assert back.delta_P_norm == tr.delta_P_norm
        assert back.delta_Q_norm == tr.delta_Q_norm
        assert back.delta_C_norm == tr.delta_C_norm
        assert back.wall_time == tr.wall_time

    def test_csv_roundtrip_bit_exact(self, tmp_path):
        tr = self._trace()
        p = tmp_path / "t2.csv"
        write_trace(tr, p, "csv")
        back = read_trace(p)
        assert back.h_value == tr.h_value and back.wall_time == tr.wall_time

    def test_unknown_format(self, tmp_path):
        with pytest.raises(PreconditionError):
            write_trace(self._trace(), tmp_path / "t.x", "xml")


class TestDenseBinary:
    def test_roundtrip(self, tmp_path):
        M = np.random.default_rng(7).standard_normal((5, 8))
        p = tmp_path / "m.bin"
        write_dense_matrix(p, M)
        assert np.array_equal(read_dense_matrix(p), M)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"NOTAMTRX" + b"\x00" * 16)
        with pytest.raises(InvalidInputError):
            read_dense_matrix(p)

    def test_truncated(self, tmp_path):
        M = np.ones((4, 4))
        p = tmp_path / "m.bin"
        write_dense_matrix(p, M)
        data = p.read_bytes()
        p.write_bytes(data[:-8])
        with pytest.raises(InvalidInputError):
            read_dense_matrix(p)
