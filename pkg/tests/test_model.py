import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from onebit_mimo.model import (
    constellation,
    lift_matrix,
    lift_vector,
    one_bit_quantize,
    random_symbols,
    sample_channel,
    snr_db_to_noise_var,
    transmit,
    unlift_vector,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestConstellation:
    def test_qpsk_alphabet(self):
        c = constellation("QPSK")
        np.testing.assert_allclose(c.real_alphabet, [-0.70710678, 0.70710678], atol=1e-8)
        np.testing.assert_array_equal(c.boundaries, [0.0])

    def test_16qam_boundaries(self):
        c = constellation("16-QAM")
        np.testing.assert_allclose(c.boundaries, np.array([-2, 0, 2]) / np.sqrt(10))
        np.testing.assert_allclose(c.real_alphabet, np.array([-3, -1, 1, 3]) / np.sqrt(10))

    @pytest.mark.parametrize("kind", ["QPSK", "16QAM"])
    def test_unit_power(self, kind):
        c = constellation(kind)
        assert np.mean(np.abs(c.complex_points) ** 2) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("kind", ["QPSK", "16QAM"])
    def test_boundaries_interleave_levels(self, kind):
        c = constellation(kind)
        M, B = c.real_alphabet, c.boundaries
        assert np.all(np.diff(M) > 0) and np.all(np.diff(B) > 0)
        assert len(B) == len(M) - 1
        assert np.all((M[:-1] < B) & (B < M[1:]))

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown modulation"):
            constellation("8PSK")

    @pytest.mark.parametrize("kind", ["QPSK", "16QAM"])
    def test_slice_idempotent(self, kind):
        c = constellation(kind)
        np.testing.assert_array_equal(c.slice(c.complex_points), c.complex_points)

    def test_slice_tie_goes_to_larger_level(self):
        c = constellation("16QAM")
        np.testing.assert_array_equal(c.slice_real(c.boundaries), c.real_alphabet[1:])

    def test_gray_labels_differ_by_one_bit(self):
        bits = constellation("16QAM").gray_bits
        assert np.all(np.abs(np.diff(bits, axis=0)).sum(axis=1) == 1)


class TestChannel:
    def test_seeded_determinism(self):
        a = sample_channel(1, 1, seed=11).complex_
        b = sample_channel(1, 1, seed=11).complex_
        assert a.shape == (1, 1) and a[0, 0] == b[0, 0]

    def test_entry_variance(self):
        H = sample_channel(2, 4, seed=3, size=100_000).complex_
        var_re = H.real.var(axis=0)
        np.testing.assert_allclose(var_re, 0.5, atol=0.01)
        np.testing.assert_allclose(H.imag.var(axis=0), 0.5, atol=0.01)

    def test_lifted_block_structure(self):
        ch = sample_channel(3, 5, seed=1)
        H, R = ch.complex_, ch.real
        assert R.shape == (10, 6)
        np.testing.assert_array_equal(R[:5, :3], H.real)
        np.testing.assert_array_equal(R[:5, 3:], -H.imag)
        np.testing.assert_array_equal(R[5:, :3], H.imag)
        np.testing.assert_array_equal(R[5:, 3:], H.real)

    @pytest.mark.parametrize("K,N", [(0, 4), (5, 4), (-1, 1)])
    def test_invalid_dimensions(self, K, N):
        with pytest.raises(ValueError):
            sample_channel(K, N, seed=0)


class TestLifting:
    def test_simple_vectors(self):
        np.testing.assert_array_equal(lift_vector([1 + 0j]), [1.0, 0.0])
        np.testing.assert_array_equal(lift_vector([1j]), [0.0, 1.0])

    def test_product_matches_complex_arithmetic(self):
        rng = np.random.default_rng(5)
        H = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        # complex oracle: explicit sums
        prod = np.array([sum(H[i, k] * v[k] for k in range(3)) for i in range(3)])
        assert np.max(np.abs(lift_matrix(H) @ lift_vector(v) - lift_vector(prod))) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (4, 3, 2), elements=finite), arrays(np.float64, (3, 2, 2), elements=finite))
    def test_homomorphism(self, a, b):
        A = a[..., 0] + 1j * a[..., 1]
        B = b[..., 0] + 1j * b[..., 1]
        lhs = lift_matrix(A) @ lift_matrix(B)
        rhs = lift_matrix(A @ B)
        scale = max(1.0, np.abs(rhs).max())
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale * 10

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (6,), elements=finite))
    def test_unlift_inverts_lift(self, x):
        np.testing.assert_array_equal(lift_vector(unlift_vector(x)), x)


class TestQuantizer:
    def test_examples(self):
        assert one_bit_quantize(0.3 - 0.2j) == 1 - 1j
        assert one_bit_quantize(0 + 0j) == 1 + 1j
        np.testing.assert_array_equal(one_bit_quantize([-1 + 2j, 3]), [-1 + 1j, 1 + 1j])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, (8, 2), elements=finite))
    def test_idempotent(self, a):
        r = a[:, 0] + 1j * a[:, 1]
        once = one_bit_quantize(r)
        np.testing.assert_array_equal(one_bit_quantize(once), once)

    def test_negative_zero_maps_to_plus_one(self):
        assert one_bit_quantize(complex(-0.0, -0.0)) == 1 + 1j


class TestTransmit:
    def test_noiseless_identity_channel(self):
        c = constellation("QPSK")
        x = c.complex_points
        s = transmit(np.eye(4), x, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(s.y, np.sign(x.real) + 1j * np.sign(x.imag))
        np.testing.assert_array_equal(s.r, x)

    def test_fields_consistent(self):
        rng = np.random.default_rng(2)
        H = sample_channel(2, 6, seed=rng).complex_
        x = random_symbols(constellation("16QAM"), 2, rng)
        s = transmit(H, x, 0.1, rng)
        np.testing.assert_allclose(s.r, H @ x + s.z, rtol=0, atol=1e-14)
        y = s.y_real
        assert y.shape == (12,) and set(np.unique(y)) <= {-1.0, 1.0}
        assert s.snr == pytest.approx(10.0)

    def test_seeded(self):
        H = sample_channel(2, 4, seed=0).complex_
        x = constellation("QPSK").complex_points[:2]
        a = transmit(H, x, 0.5, 42)
        b = transmit(H, x, 0.5, 42)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.z, b.z)

    def test_noise_dominated_output_is_fair_coin(self):
        rng = np.random.default_rng(9)
        H = sample_channel(1, 1, seed=rng).complex_
        x = np.full((100_000, 1), constellation("QPSK").complex_points[3])
        s = transmit(H, x, 1e6, rng)
        assert np.mean(s.y.real > 0) == pytest.approx(0.5, abs=0.01)

    def test_noise_variance(self):
        s = transmit(np.zeros((1, 1)), np.zeros((200_000, 1)), 0.25, np.random.default_rng(4))
        assert np.var(s.z) == pytest.approx(0.25, rel=0.02)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="users"):
            transmit(np.eye(3), np.ones(2), 1.0, 0)

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            transmit(np.eye(2), np.ones(2), -1.0, 0)


def test_snr_conversion():
    assert snr_db_to_noise_var(10) == pytest.approx(0.1)
    assert snr_db_to_noise_var(0) == 1.0
