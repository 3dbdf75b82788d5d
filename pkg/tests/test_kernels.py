import numpy as np
import pytest

from blocksvd import (RankDeficiencyWarning, ShapeError, gaussian_matrix,
                      gemm, small_svd, tsqr, tsqr_factor)


def gemm_oracle(a, b):
    """Triple-loop scalar reference product."""
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n), dtype=a.dtype)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


class TestGemm:
    def test_identity(self):
        m = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(gemm(1.0, np.eye(3), m), m)

    def test_zero_scale(self):
        m = np.arange(6.0).reshape(3, 2)
        a = np.ones((3, 4))
        b = np.ones((4, 2))
        assert np.array_equal(gemm(0.0, a, b, beta=1.0, c=m), m)

    def test_against_triple_loop(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((4, 3))
        got = gemm(1.0, a, b)
        want = gemm_oracle(a, b)
        bound = 8 * np.finfo(np.float64).eps * np.linalg.norm(a) * np.linalg.norm(b)
        assert np.max(np.abs(got - want)) <= bound

    def test_transposes(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((4, 5))
        b = rng.standard_normal((3, 4))
        got = gemm(2.0, a, b, transpose_a=True, transpose_b=True)
        assert np.allclose(got, 2.0 * a.T @ b.T)

    def test_shape_error_names_shapes(self):
        with pytest.raises(ShapeError, match=r"\(3, 4\).*\(3, 2\)"):
            gemm(1.0, np.ones((3, 4)), np.ones((3, 2)))

    def test_inputs_unmodified(self):
        a = np.ones((3, 3))
        b = np.ones((3, 3))
        a0, b0 = a.copy(), b.copy()
        gemm(2.0, a, b)
        assert np.array_equal(a, a0) and np.array_equal(b, b0)


class TestGaussianMatrix:
    def test_deterministic(self):
        g1 = gaussian_matrix(50, 7, 123, stream_index=4)
        g2 = gaussian_matrix(50, 7, 123, stream_index=4)
        assert np.array_equal(g1, g2)

    def test_moments(self):
        g = gaussian_matrix(10000, 100, 99)
        assert abs(g.mean()) <= 0.01
        assert abs(g.var() - 1.0) <= 0.01

    def test_stream_independence(self):
        a = gaussian_matrix(10000, 10, 5, stream_index=0).ravel()
        b = gaussian_matrix(10000, 10, 5, stream_index=1).ravel()
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) <= 0.01

    def test_row_offset_slices(self):
        full = gaussian_matrix(200, 5, 11)
        part = gaussian_matrix(60, 5, 11, row_offset=140)
        assert np.array_equal(full[140:], part)

    def test_rejects_degenerate_shape(self):
        with pytest.raises(ShapeError):
            gaussian_matrix(0, 3, 1)

    def test_float32(self):
        g = gaussian_matrix(100, 4, 0, dtype=np.float32)
        assert g.dtype == np.float32


class TestTsqr:
    def test_already_orthonormal(self):
        y = np.zeros((4, 2))
        y[0, 0] = 1.0
        y[1, 1] = 1.0
        q = tsqr(y)
        assert np.allclose(np.abs(q), y)

    def test_orthogonality_and_range(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal((4096, 34))
        q = tsqr(y)
        l = 34
        eps = np.finfo(np.float64).eps
        assert np.linalg.norm(q.T @ q - np.eye(l)) <= 100 * l * eps
        resid = np.linalg.norm(y - q @ (q.T @ y)) / np.linalg.norm(y)
        assert resid <= 1e-13

    def test_projector_matches_householder(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal((1000, 12))
        q_tree = tsqr(y, block_rows=100)
        q_hh, _ = np.linalg.qr(y)
        diff = q_tree @ q_tree.T - q_hh @ q_hh.T
        assert np.linalg.norm(diff) <= 1e-12

    def test_uses_reduction_tree(self):
        # Block height forces multiple leaves; result still reproduces a
        # one-shot QR's range.
        rng = np.random.default_rng(5)
        y = rng.standard_normal((300, 8))
        q = tsqr(y, block_rows=50)
        assert np.allclose(q.T @ q, np.eye(8), atol=1e-12)

    def test_wide_input_rejected(self):
        with pytest.raises(ShapeError):
            tsqr(np.ones((3, 5)))

    def test_rank_deficiency_warns_with_rank(self):
        rng = np.random.default_rng(6)
        u = rng.standard_normal((200, 2))
        v = rng.standard_normal((2, 5))
        with pytest.warns(RankDeficiencyWarning) as rec:
            q, r = tsqr_factor(u @ v)
        assert rec[0].message.detected_rank == 2
        assert np.allclose(q.T @ q, np.eye(5), atol=1e-12)


class TestSmallSvd:
    def test_diagonal(self):
        b = np.zeros((3, 5))
        b[0, 0], b[1, 1], b[2, 2] = 3.0, 2.0, 1.0
        f = small_svd(b)
        assert np.allclose(f.sigma, [3.0, 2.0, 1.0])
        assert np.allclose(np.abs(f.U), np.eye(3), atol=1e-14)

    def test_gram_eigenvalue_oracle(self):
        rng = np.random.default_rng(9)
        b = rng.standard_normal((8, 20))
        f = small_svd(b)
        evals = np.linalg.eigvalsh(b @ b.T)[::-1]
        assert np.allclose(f.sigma ** 2, evals, rtol=1e-10)

    def test_reconstruction(self):
        rng = np.random.default_rng(10)
        b = rng.standard_normal((6, 30))
        f = small_svd(b)
        err = np.linalg.norm(b - f.compose()) / np.linalg.norm(b)
        assert err <= 6 * 100 * np.finfo(np.float64).eps

    def test_rank_deficient_tail(self):
        rng = np.random.default_rng(11)
        b = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 12))
        with pytest.warns(RankDeficiencyWarning):
            f = small_svd(b)
        assert f.sigma[2] <= 1e-12 * f.sigma[0]
        assert f.sigma[3] <= 1e-12 * f.sigma[0]

    def test_sorted_spectrum(self):
        rng = np.random.default_rng(12)
        b = rng.standard_normal((7, 15))
        f = small_svd(b)
        assert np.all(np.diff(f.sigma) <= 0)
        assert np.all(f.sigma >= 0)

    def test_tall_input_rejected(self):
        with pytest.raises(ShapeError):
            small_svd(np.ones((5, 3)))


def test_gemm_block_distributivity():
    # The identity the block sketch rests on: summing per-block products
    # over a column partition reproduces the one-shot product.
    rng = np.random.default_rng(13)
    a = rng.standard_normal((40, 33))
    omega = rng.standard_normal((33, 6))
    whole = a @ omega
    for s in (2, 3, 7):
        n_prime = -(-33 // s)
        acc = np.zeros((40, 6))
        for j0 in range(0, 33, n_prime):
            j1 = min(j0 + n_prime, 33)
            acc += a[:, j0:j1] @ omega[j0:j1]
        bound = s * np.finfo(np.float64).eps * np.linalg.norm(a) * np.linalg.norm(omega)
        assert np.max(np.abs(acc - whole)) <= bound


def test_kernels_deterministic():
    rng = np.random.default_rng(14)
    y = rng.standard_normal((256, 10))
    assert np.array_equal(tsqr(y), tsqr(y))
    b = rng.standard_normal((5, 12))
    f1, f2 = small_svd(b), small_svd(b)
    assert np.array_equal(f1.U, f2.U)
    assert np.array_equal(f1.sigma, f2.sigma)
    assert np.array_equal(f1.Vt, f2.Vt)
