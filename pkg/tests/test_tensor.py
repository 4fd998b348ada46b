import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from swinprobe.tensor import as_tensor, gelu, layer_norm, matmul, softmax_rows

# Phi(1): standard normal CDF at 1, frozen from quadrature of the normal pdf
# (scipy.integrate.quad of exp(-t^2/2)/sqrt(2*pi) over (-inf, 1]).
PHI_1 = 0.8413447460685429


class TestMatmul:
    def test_identity(self):
        eye = np.eye(2, dtype=np.float32)
        b = np.array([[5, 6], [7, 8]], dtype=np.float32)
        assert np.array_equal(matmul(eye, b), b)

    def test_hand_computed_dot(self):
        a = np.array([[1.0, 2.0]], dtype=np.float32)
        b = np.array([[3.0], [4.0]], dtype=np.float32)
        assert matmul(a, b) == np.array([[11.0]], dtype=np.float32)

    def test_zero_annihilator(self):
        a = np.zeros((3, 4), dtype=np.float32)
        b = np.arange(8, dtype=np.float32).reshape(4, 2)
        assert np.array_equal(matmul(a, b), np.zeros((3, 2), dtype=np.float32))

    def test_shape_mismatch_reports_both_shapes(self):
        a = np.zeros((2, 3), dtype=np.float32)
        b = np.zeros((4, 2), dtype=np.float32)
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 2\)"):
            matmul(a, b)

    def test_deterministic_accumulation(self, rng):
        a = rng.normal(size=(64, 64)).astype(np.float32)
        b = rng.normal(size=(64, 64)).astype(np.float32)
        assert np.array_equal(matmul(a, b), matmul(a, b))

    def test_associative_with_identity_on_chains(self, rng):
        for _ in range(5):
            a, b, c = (rng.normal(size=(16, 16)).astype(np.float32) for _ in range(3))
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            denom = np.maximum(np.abs(left), np.abs(right)).max()
            assert np.abs(left - right).max() / denom < 1e-4
            eye = np.eye(16, dtype=np.float32)
            assert np.allclose(matmul(a, eye), a, rtol=1e-6)


class TestSoftmaxRows:
    def test_symmetry(self):
        out = softmax_rows(np.zeros((1, 3), dtype=np.float32))
        assert np.allclose(out, 1.0 / 3.0, atol=1e-7)

    def test_stability_under_max_shift(self):
        out = softmax_rows(np.array([[1000.0, 0.0]], dtype=np.float32))
        assert np.isfinite(out).all()
        assert out[0, 0] > 1.0 - 1e-6 and out[0, 1] < 1e-6

    def test_log_ratios(self):
        row = np.log(np.array([[1.0, 2.0, 3.0]])).astype(np.float32)
        assert np.allclose(softmax_rows(row), [[1 / 6, 2 / 6, 3 / 6]], atol=1e-6)

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            softmax_rows(np.array([[np.nan, 1.0]], dtype=np.float32))

    @settings(max_examples=60, deadline=None)
    @given(
        arrays(
            np.float32,
            st.tuples(st.integers(1, 5), st.integers(1, 7)),
            elements=st.floats(-80, 80, width=32),
        )
    )
    def test_rows_sum_to_one(self, x):
        sums = softmax_rows(x).sum(axis=1)
        assert np.abs(sums - 1.0).max() <= 1e-5

    def test_rows_sum_under_extreme_spread(self):
        x = np.array([[-3e4, 0.0, 4e4], [1e4, 1e4, -1e4]], dtype=np.float32)
        assert np.abs(softmax_rows(x).sum(axis=1) - 1.0).max() <= 1e-5


class TestLayerNorm:
    def test_constant_vector_zero_out(self):
        x = np.full((4,), 3.5, dtype=np.float32)
        out = layer_norm(x, np.ones(4), np.zeros(4))
        assert np.allclose(out, 0.0, atol=1e-6)

    def test_two_point_case(self):
        out = layer_norm(
            np.array([1.0, 3.0], dtype=np.float32),
            np.ones(2),
            np.zeros(2),
            eps=1e-12,
        )
        assert np.allclose(out, [-1.0, 1.0], atol=1e-6)

    def test_affine_dominance(self, rng):
        x = rng.normal(size=(3, 5)).astype(np.float32)
        out = layer_norm(x, np.zeros(5), np.full(5, 5.0))
        assert np.allclose(out, 5.0)

    def test_mismatched_affine_rejected(self):
        with pytest.raises(ValueError, match="affine shape"):
            layer_norm(np.zeros((2, 4), dtype=np.float32), np.ones(3), np.zeros(3))

    def test_pre_affine_statistics(self, rng):
        x = rng.normal(2.0, 3.0, size=(6, 32)).astype(np.float32)
        out = layer_norm(x, np.ones(32), np.zeros(32), eps=1e-12).astype(np.float64)
        assert np.abs(out.mean(axis=-1)).max() < 1e-5
        assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-3


class TestGelu:
    def test_zero(self):
        assert gelu(np.zeros(3, dtype=np.float32)) == pytest.approx(0.0)

    def test_asymptotes(self):
        x = np.array([30.0, -30.0], dtype=np.float32)
        out = gelu(x)
        assert out[0] == pytest.approx(30.0, rel=1e-6)
        assert out[1] == pytest.approx(0.0, abs=1e-6)

    def test_at_one_matches_normal_cdf(self):
        assert gelu(np.array([1.0], dtype=np.float32))[0] == pytest.approx(
            PHI_1, rel=1e-6
        )

    def test_against_quadrature_oracle(self):
        # independent oracle: x * integral of the standard normal pdf
        from scipy.integrate import quad

        for x in (-1.7, -0.3, 0.4, 2.2):
            cdf, _ = quad(
                lambda t: math.exp(-t * t / 2.0) / math.sqrt(2.0 * math.pi),
                -12.0,
                x,
            )
            got = gelu(np.array([x], dtype=np.float32))[0]
            assert got == pytest.approx(x * cdf, abs=1e-6)
