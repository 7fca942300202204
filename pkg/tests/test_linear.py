import numpy as np
import pytest

from onebit_mimo.linear import (
    AQNM_ALPHA,
    KINDS,
    build_combiner,
    bussgang_model,
    combine,
    complex_arcsin,
    detect_linear,
    received_covariance,
    rescale,
)
from onebit_mimo.model import complex_normal, constellation, one_bit_quantize, sample_channel, transmit

QPSK = constellation("QPSK")


def _random_H(rng, K, N):
    return complex_normal(rng, (N, K))


class TestReceivedCovariance:
    def test_scalar(self):
        np.testing.assert_array_equal(received_covariance(np.ones((1, 1)), 1.0), [[2.0]])

    def test_zero_channel(self):
        np.testing.assert_array_equal(received_covariance(np.zeros((3, 2)), 0.5), 0.5 * np.eye(3))

    def test_hermitian_positive_definite(self):
        rng = np.random.default_rng(0)
        S = received_covariance(_random_H(rng, 3, 6), 0.1)
        np.testing.assert_allclose(S, S.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(S).min() > 0

    def test_matches_sample_covariance(self):
        rng = np.random.default_rng(1)
        H = _random_H(rng, 2, 3)
        n = 100_000
        x = QPSK.complex_points[rng.integers(4, size=(n, 2))]
        r = x @ H.T + complex_normal(rng, (n, 3), 0.5)
        terms = r[:, :, None] * r[:, None, :].conj()
        est = terms.mean(axis=0)
        se = terms.std(axis=0) / np.sqrt(n)
        diff = np.abs(est - received_covariance(H, 0.5))
        assert np.all(diff < 3 * np.abs(se) + 1e-12)


class TestBussgang:
    def test_scalar_closed_form(self):
        bm = bussgang_model(np.ones((1, 1)), 1.0)
        assert bm.gain[0] == pytest.approx(0.5641895835477563, abs=1e-15)
        assert bm.A[0, 0] == pytest.approx(0.5641895835477563, abs=1e-15)
        assert bm.sigma_n[0, 0].real == pytest.approx(0.6816901138162093, abs=1e-15)

    def test_output_covariance_unit_diagonal(self):
        rng = np.random.default_rng(2)
        bm = bussgang_model(_random_H(rng, 3, 8), 0.3)
        np.testing.assert_array_equal(np.diagonal(bm.normalized_sigma_r).real, 1.0)
        np.testing.assert_allclose(np.diagonal(bm.output_covariance), 1.0, atol=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_identity(self, seed):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(1, 5))
        N = int(rng.integers(K, 17))
        bm = bussgang_model(_random_H(rng, K, N), 10 ** rng.uniform(-3, 1))
        lhs = bm.A @ bm.A.conj().T + bm.sigma_n
        assert np.max(np.abs(lhs - bm.output_covariance)) < 1e-9

    def test_complex_arcsin_is_elementwise(self):
        C = np.array([[0.5 + 0.25j]])
        np.testing.assert_allclose(complex_arcsin(C), [[np.arcsin(0.5) + 1j * np.arcsin(0.25)]])

    def test_zero_diagonal_is_singular(self):
        with pytest.raises(np.linalg.LinAlgError, match="diag"):
            bussgang_model(np.zeros((2, 1)), 0.0)

    def test_empirical_output_covariance(self):
        # Gaussian inputs, as the arcsin law assumes.  The formula describes
        # y / sqrt(2), since each entry of y = +-1 +- 1j has |y|^2 = 2.
        rng = np.random.default_rng(3)
        H = _random_H(rng, 2, 4)
        n0 = 0.2
        ref = bussgang_model(H, n0).output_covariance
        n = 400_000
        x = complex_normal(rng, (n, 2))
        y = one_bit_quantize(x @ H.T + complex_normal(rng, (n, 4), n0)) / np.sqrt(2)
        terms = y[:, :, None] * y[:, None, :].conj()
        est = terms.mean(axis=0)
        se_re = terms.real.std(axis=0) / np.sqrt(n)
        se_im = terms.imag.std(axis=0) / np.sqrt(n)
        np.testing.assert_allclose(np.diagonal(est), 1.0, atol=1e-12)
        assert np.all(np.abs(est.real - ref.real) <= 3 * se_re + 1e-12)
        assert np.all(np.abs(est.imag - ref.imag) <= 3 * se_im + 1e-12)


class TestCombiners:
    def test_mrc_identity_channel(self):
        np.testing.assert_array_equal(build_combiner("MRC", np.eye(3), 0.1).W, np.eye(3))

    def test_zf_left_inverse(self):
        rng = np.random.default_rng(4)
        H = _random_H(rng, 3, 8)
        W = build_combiner("ZF", H, 0.1).W
        assert W.shape == (3, 8)
        assert np.max(np.abs(W @ H - np.eye(3))) < 1e-10

    def test_zf_square(self):
        rng = np.random.default_rng(5)
        H = _random_H(rng, 3, 3)
        assert np.max(np.abs(build_combiner("ZF", H, 0.0).W @ H - np.eye(3))) < 1e-10

    def test_bzf_left_inverse(self):
        rng = np.random.default_rng(6)
        comb = build_combiner("BZF", _random_H(rng, 4, 16), 0.05)
        assert np.max(np.abs(comb.W @ comb.effective_channel - np.eye(4))) < 1e-10

    def test_bmmse_scalar(self):
        W = build_combiner("BMMSE", np.ones((1, 1)), 1.0).W
        assert W[0, 0] == pytest.approx(0.5641895835477563, abs=1e-15)

    @pytest.mark.parametrize("kind", KINDS)
    def test_shapes_and_batching(self, kind):
        rng = np.random.default_rng(7)
        Hs = complex_normal(rng, (5, 12, 3))
        batched = build_combiner(kind, Hs, 0.1).W
        assert batched.shape == (5, 3, 12)
        single = build_combiner(kind, Hs[2], 0.1).W
        np.testing.assert_allclose(batched[2], single, atol=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown linear receiver"):
            build_combiner("LMMSE", np.eye(2), 0.1)

    def test_rank_deficient_zf(self):
        H = np.ones((4, 2), dtype=complex)
        with pytest.raises(np.linalg.LinAlgError, match="ZF"):
            build_combiner("ZF", H, 0.1)

    def test_aqnm_constant(self):
        assert AQNM_ALPHA == 0.3634

    @pytest.mark.parametrize("pair", [("BMRC", "MRC"), ("BZF", "ZF")])
    def test_equal_row_norm_equivalence(self, pair):
        rng = np.random.default_rng(8)
        H = _random_H(rng, 2, 6)
        H = H / np.linalg.norm(H, axis=1, keepdims=True)  # every row has unit norm
        Wb = build_combiner(pair[0], H, 0.2).W
        Wc = build_combiner(pair[1], H, 0.2).W
        ratio = Wb / Wc
        np.testing.assert_allclose(ratio, ratio.flat[0], rtol=1e-10)
        assert abs(ratio.flat[0].imag) < 1e-12 and ratio.flat[0].real > 0
        Y = one_bit_quantize(complex_normal(rng, (200, 6)))
        xb = detect_linear(build_combiner(pair[0], H, 0.2), Y, QPSK)[1]
        xc = detect_linear(build_combiner(pair[1], H, 0.2), Y, QPSK)[1]
        np.testing.assert_array_equal(xb, xc)


class TestDetection:
    def test_rescale_example(self):
        out = rescale(np.array([1 + 1j, 1 - 1j]))
        np.testing.assert_allclose(out, np.array([1 + 1j, 1 - 1j]) / np.sqrt(2), atol=1e-15)

    def test_rescale_zero_vector(self):
        np.testing.assert_array_equal(rescale(np.zeros(3, complex)), np.zeros(3))

    def test_noiseless_identity_recovery(self):
        x = np.array([(1 + 1j) / np.sqrt(2)])
        y = one_bit_quantize(x)
        _, x_hat = detect_linear(build_combiner("ZF", np.eye(1), 0.0), y, QPSK)
        np.testing.assert_allclose(x_hat, x)

    @pytest.mark.parametrize("kind", ["MRC", "BMRC", "MMSE", "BMMSE"])
    def test_equalized_gain_is_one(self, kind):
        rng = np.random.default_rng(9)
        comb = build_combiner(kind, _random_H(rng, 3, 10), 0.1)
        # feeding column k of the effective channel recovers a unit gain for user k
        out = combine(comb, comb.effective_channel.T)
        np.testing.assert_allclose(np.diagonal(out), 1.0, atol=1e-12)

    def test_aqnm_and_wfq_agree(self):
        rng = np.random.default_rng(10)
        n, K, N = 2000, 2, 16
        H = complex_normal(rng, (n, N, K))
        x = QPSK.complex_points[rng.integers(4, size=(n, K))]
        n0 = 0.01
        y = one_bit_quantize(np.einsum("tnk,tk->tn", H, x) + complex_normal(rng, (n, N), n0))
        a = QPSK.slice(rescale(combine(build_combiner("AQNM_MMSE", H, n0), y)))
        w = QPSK.slice(rescale(combine(build_combiner("WFQ", H, n0), y)))
        assert np.mean(np.all(a == w, axis=1)) >= 0.99

    def test_bzf_beats_zf_at_high_snr(self):
        rng = np.random.default_rng(11)
        n, K, N = 20_000, 2, 16
        H = complex_normal(rng, (n, N, K))
        x = QPSK.complex_points[rng.integers(4, size=(n, K))]
        y = one_bit_quantize(np.einsum("tnk,tk->tn", H, x) + complex_normal(rng, (n, N), 1e-3))
        err = {}
        for kind in ("ZF", "BZF"):
            x_hat = QPSK.slice(rescale(combine(build_combiner(kind, H, 1e-3), y)))
            err[kind] = np.count_nonzero(x_hat != x)
        assert err["BZF"] < err["ZF"]

    def test_single_sample_through_transmit(self):
        ch = sample_channel(2, 16, seed=12)
        x = QPSK.complex_points[[0, 3]]
        s = transmit(ch.complex_, x, 1e-4, 13)
        _, x_hat = detect_linear(build_combiner("BMMSE", ch.complex_, 1e-4), s.y, QPSK)
        np.testing.assert_allclose(x_hat, x)
