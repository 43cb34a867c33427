import numpy as np
import pytest

from dlcstc.corelin import convolve, hermitian_solve, matrix_rank, toeplitz_of, two_row_full_rank


def naive_convolve(a, b):
    """Direct double-sum oracle, O(nm)."""
    out = np.zeros(len(a) + len(b) - 1, dtype=np.complex128)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def cn(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class TestConvolve:
    def test_delta_identity(self):
        out = convolve([1], [2 + 3j, 4])
        np.testing.assert_allclose(out, [2 + 3j, 4])

    def test_zero_annihilation(self):
        np.testing.assert_array_equal(convolve([0, 0], [1, 1]), np.zeros(3))

    def test_matches_double_sum_oracle(self):
        rng = np.random.default_rng(7)
        a, b = cn(rng, 5), cn(rng, 7)
        np.testing.assert_allclose(convolve(a, b), naive_convolve(a, b), atol=1e-12)

    def test_commutative_and_bilinear(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a, b, c = cn(rng, 4), cn(rng, 6), cn(rng, 6)
            np.testing.assert_allclose(convolve(a, b), convolve(b, a), atol=1e-12)
            np.testing.assert_allclose(
                convolve(a, b + 2j * c), convolve(a, b) + 2j * convolve(a, c), atol=1e-12
            )

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            convolve([], [1])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            convolve([np.nan], [1])


class TestToeplitz:
    def test_identity_kernel(self):
        np.testing.assert_array_equal(toeplitz_of([1], 3), np.eye(3))

    def test_banded_layout(self):
        np.testing.assert_array_equal(toeplitz_of([1, 2], 2), [[1, 0], [2, 1], [0, 2]])

    def test_matches_convolve(self):
        rng = np.random.default_rng(9)
        h, s = cn(rng, 4), cn(rng, 6)
        np.testing.assert_allclose(toeplitz_of(h, 6) @ s, convolve(h, s), atol=1e-12)

    def test_zero_len_rejected(self):
        with pytest.raises(ValueError):
            toeplitz_of([1], 0)


class TestRank:
    def test_identity(self):
        assert matrix_rank(np.eye(2)) == 2

    def test_equal_rows(self):
        assert matrix_rank(np.array([[1, 2 + 1j], [1, 2 + 1j]])) == 1

    def test_zero_matrix(self):
        assert matrix_rank(np.zeros((3, 4))) == 0

    def test_random_two_row_gram_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            m = cn(rng, 12).reshape(2, 6)
            gram = m @ m.conj().T
            full = abs(np.linalg.det(gram)) > 1e-12
            assert (matrix_rank(m) == 2) == full
            assert two_row_full_rank(m[0], m[1]) == full

    def test_row_swap_and_scale_invariance(self):
        rng = np.random.default_rng(11)
        m = cn(rng, 10).reshape(2, 5)
        r = matrix_rank(m)
        assert matrix_rank(m[::-1]) == r
        scaled = m.copy()
        scaled[0] *= 3.7j
        assert matrix_rank(scaled) == r

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            matrix_rank(np.eye(2), rel_tol=0.0)


class TestHermitianSolve:
    def test_identity(self):
        rng = np.random.default_rng(12)
        b = cn(rng, 6).reshape(3, 2)
        np.testing.assert_allclose(hermitian_solve(np.eye(3), b), b, atol=1e-12)

    def test_scaled_identity(self):
        np.testing.assert_allclose(hermitian_solve(2 * np.eye(3), np.eye(3)), 0.5 * np.eye(3), atol=1e-12)

    def test_residual_bound(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            g = cn(rng, 36).reshape(6, 6)
            a = g @ g.conj().T + np.eye(6)
            b = cn(rng, 18).reshape(6, 3)
            x = hermitian_solve(a, b)
            resid = np.linalg.norm(a @ x - b)
            bound = 1e-10 * (np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b))
            assert resid <= bound

    def test_non_pd_rejected(self):
        with pytest.raises(ValueError):
            hermitian_solve(-np.eye(2), np.eye(2))
