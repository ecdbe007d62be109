import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from digitnet.linalg import ShapeError, affine, identity, map_elementwise, matmul, matrix, outer, vector, zeros


def brute_matmul(a, b):
    out = [[0.0] * len(b[0]) for _ in a]
    for i in range(len(a)):
        for j in range(len(b[0])):
            s = 0.0
            for t in range(len(b)):
                s += a[i][t] * b[t][j]
            out[i][j] = s
    return out


def square(n):
    return arrays(np.float64, (n, n), elements=st.floats(-1, 1))


class TestMatmul:
    def test_identity_left(self):
        b = matrix([[5, 6], [7, 8]])
        np.testing.assert_array_equal(matmul(identity(2), b), b)

    def test_hand_product(self):
        out = matmul(matrix([[1, 2], [3, 4]]), matrix([[5, 6], [7, 8]]))
        np.testing.assert_array_equal(out, [[19, 22], [43, 50]])

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"2x3.*2x2"):
            matmul(zeros(2, 3), zeros(2, 2))

    def test_rejects_vectors(self):
        with pytest.raises(ShapeError):
            matmul(vector([1, 2]), zeros(2, 2))

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(3)
        a, b = rng.uniform(-1, 1, (4, 7)), rng.uniform(-1, 1, (7, 3))
        np.testing.assert_allclose(matmul(a, b), brute_matmul(a.tolist(), b.tolist()), atol=1e-14)

    @given(st.integers(1, 8).flatmap(square))
    def test_identity_exact(self, a):
        n = a.shape[0]
        assert np.array_equal(matmul(identity(n), a), a)
        assert np.array_equal(matmul(a, identity(n)), a)

    @settings(max_examples=50)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_distributive(self, m, k, n, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-1, 1, (m, k))
        b, c = rng.uniform(-1, 1, (k, n)), rng.uniform(-1, 1, (k, n))
        np.testing.assert_allclose(matmul(a, b + c), matmul(a, b) + matmul(a, c), rtol=0, atol=1e-12)


class TestAffine:
    def test_zero_weights_pass_bias(self):
        np.testing.assert_array_equal(affine(zeros(2, 2), vector([3, 4]), vector([1, -1])), [1, -1])

    def test_cancellation(self):
        np.testing.assert_array_equal(affine(matrix([[1, 1]]), vector([1, 1]), vector([-2])), [0])

    def test_diagonal(self):
        np.testing.assert_array_equal(affine(matrix([[2, 0], [0, 3]]), vector([1, 2]), vector([0, 0])), [2, 6])

    @pytest.mark.parametrize("w,a,b", [((2, 3), 2, 2), ((2, 3), 3, 3)])
    def test_mismatch(self, w, a, b):
        with pytest.raises(ShapeError):
            affine(zeros(*w), zeros(a), zeros(b))

    @settings(max_examples=50)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_equals_column_matmul(self, j, k, seed):
        rng = np.random.default_rng(seed)
        w, a, b = rng.uniform(-1, 1, (j, k)), rng.uniform(-1, 1, k), rng.uniform(-1, 1, j)
        expected = matmul(w, a.reshape(k, 1))[:, 0] + b
        np.testing.assert_allclose(affine(w, a, b), expected, rtol=0, atol=1e-12)


class TestOuter:
    def test_zero(self):
        np.testing.assert_array_equal(outer(vector([0, 0]), vector([1, 2])), zeros(2, 2))

    def test_unit(self):
        np.testing.assert_array_equal(outer(vector([1]), vector([1, 2, 3])), [[1, 2, 3]])

    def test_hand(self):
        np.testing.assert_array_equal(outer(vector([2, 3]), vector([4, 5])), [[8, 10], [12, 15]])

    @given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-1e3, 1e3)),
           arrays(np.float64, st.integers(1, 6), elements=st.floats(-1e3, 1e3)))
    def test_brute_force(self, u, v):
        out = outer(u, v)
        for j in range(len(u)):
            for k in range(len(v)):
                assert out[j, k] == u[j] * v[k]


class TestMapElementwise:
    def test_identity(self):
        m = matrix([[1.5, -2], [0, 3]])
        np.testing.assert_array_equal(map_elementwise(lambda x: x, m), m)

    def test_square(self):
        np.testing.assert_array_equal(map_elementwise(lambda x: x * x, vector([1, -2, 3])), [1, 4, 9])

    def test_constant_keeps_shape(self):
        out = map_elementwise(lambda x: 0.0, matrix([[1, 2, 3], [4, 5, 6]]))
        np.testing.assert_array_equal(out, zeros(2, 3))
