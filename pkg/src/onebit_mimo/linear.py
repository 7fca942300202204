"""Linear first-stage receivers for one-bit massive MIMO.

Conventional combiners (MRC, ZF, MMSE), the AQNM-based ones (AQNM-MMSE,
WFQ) and the Bussgang-based ones (BMRC, BZF, BMMSE).  Everything accepts a
stack of channels ``(..., N, K)`` and returns stacked combiners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Constellation

KINDS = ("MRC", "ZF", "MMSE", "AQNM_MMSE", "WFQ", "BMRC", "BZF", "BMMSE")
BUSSGANG_KINDS = frozenset({"BMRC", "BZF", "BMMSE"})

# inverse signal-to-quantization-noise ratio of a one-bit ADC
AQNM_ALPHA = 0.3634
AQNM_KAPPA = 1.0 - AQNM_ALPHA


def canonical_kind(kind: str) -> str:
    key = str(kind).strip().upper().replace("-", "_")
    if key not in KINDS:
        raise ValueError(f"unknown linear receiver {kind!r}; expected one of {', '.join(KINDS)}")
    return key


def _herm(A: np.ndarray) -> np.ndarray:
    return np.swapaxes(A.conj(), -1, -2)


def _eye_like(n: int, batch: tuple) -> np.ndarray:
    return np.broadcast_to(np.eye(n), batch + (n, n))


def complex_arcsin(C: np.ndarray) -> np.ndarray:
    """Element-wise ``arcsin(Re C) + j arcsin(Im C)``."""
    return np.arcsin(np.clip(C.real, -1.0, 1.0)) + 1j * np.arcsin(np.clip(C.imag, -1.0, 1.0))


def received_covariance(H, noise_var: float) -> np.ndarray:
    """Covariance ``H H^H + N0 I`` of the unquantized received signal."""
    H = np.asarray(H)
    if noise_var < 0:
        raise ValueError("noise variance must be non-negative")
    N = H.shape[-2]
    return H @ _herm(H) + noise_var * np.eye(N)


@dataclass(frozen=True, eq=False)
class BussgangModel:
    """Bussgang linearization ``y = A x + n`` of the one-bit receiver.

    ``gain`` holds the diagonal of the Bussgang gain matrix; the full matrix
    is available as :attr:`gain_matrix`.
    """

    sigma_r: np.ndarray
    gain: np.ndarray
    A: np.ndarray
    sigma_n: np.ndarray
    normalized_sigma_r: np.ndarray
    noise_var: float

    @property
    def gain_matrix(self) -> np.ndarray:
        return self.gain[..., :, None] * np.eye(self.gain.shape[-1])

    @property
    def output_covariance(self) -> np.ndarray:
        """``(2/pi) arcsin`` of the normalized covariance (per unit-power real pair)."""
        return (2.0 / np.pi) * complex_arcsin(self.normalized_sigma_r)


def bussgang_model(H, noise_var: float) -> BussgangModel:
    H = np.asarray(H)
    sigma_r = received_covariance(H, noise_var)
    d = np.real(np.diagonal(sigma_r, axis1=-2, axis2=-1))
    if np.any(d <= 0):
        raise np.linalg.LinAlgError(
            "diag(Sigma_r) has a zero entry; Bussgang gain needs N0 > 0 or non-zero channel rows"
        )
    inv_sqrt = 1.0 / np.sqrt(d)
    C = inv_sqrt[..., :, None] * sigma_r * inv_sqrt[..., None, :]
    # unit diagonal by construction; rounding there would be amplified by arcsin near 1
    N = H.shape[-2]
    C = np.where(np.eye(N, dtype=bool), 1.0 + 0j, C)
    gain = np.sqrt(2.0 / np.pi) * inv_sqrt
    A = gain[..., :, None] * H
    sigma_n = (2.0 / np.pi) * (
        complex_arcsin(C) - C + noise_var * (inv_sqrt**2)[..., :, None] * np.eye(N)
    )
    return BussgangModel(sigma_r, gain, A, sigma_n, C, float(noise_var))


@dataclass(frozen=True, eq=False)
class Combiner:
    """Combining matrix ``W`` (``K x N``) together with the channel it equalizes."""

    kind: str
    W: np.ndarray
    effective_channel: np.ndarray

    def equalizer_gains(self) -> np.ndarray:
        """Per-user gains ``w_k^T c_k`` (diagonal of ``W @ effective_channel``)."""
        return np.einsum("...kn,...nk->...k", self.W, self.effective_channel)


def _left_pinv(F: np.ndarray, kind: str) -> np.ndarray:
    Fh = _herm(F)
    try:
        return np.linalg.solve(Fh @ F, Fh)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"{kind}: channel Gram matrix is singular") from exc


def _right_solve(Fh: np.ndarray, R: np.ndarray, kind: str) -> np.ndarray:
    # Fh @ inv(R) for Hermitian R, via solve(R, F)^H
    try:
        return _herm(np.linalg.solve(R, _herm(Fh)))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"{kind}: covariance matrix is singular") from exc


def build_combiner(kind: str, H, noise_var: float) -> Combiner:
    """Build the combining matrix of the given receiver ``kind``."""
    kind = canonical_kind(kind)
    H = np.asarray(H, dtype=complex)
    N, K = H.shape[-2:]
    Hh = _herm(H)

    if kind in BUSSGANG_KINDS:
        bm = bussgang_model(H, noise_var)
        A = bm.A
        if kind == "BMRC":
            W = _herm(A)
        elif kind == "BZF":
            W = _left_pinv(A, kind)
        else:
            W = _right_solve(_herm(A), bm.output_covariance, kind)
        return Combiner(kind, W, A)

    if kind == "MRC":
        W = Hh
    elif kind == "ZF":
        W = _left_pinv(H, kind)
    elif kind == "MMSE":
        R = Hh @ H + noise_var * np.eye(K)
        try:
            W = np.linalg.solve(R, Hh)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("MMSE: regularized Gram matrix is singular") from exc
    else:
        sigma_r = received_covariance(H, noise_var)
        diag_r = np.real(np.diagonal(sigma_r, axis1=-2, axis2=-1))[..., :, None] * np.eye(N)
        if kind == "AQNM_MMSE":
            sigma_d = AQNM_ALPHA * AQNM_KAPPA * diag_r
            R = H @ Hh + sigma_d / AQNM_KAPPA**2 + noise_var * np.eye(N)
        else:  # WFQ
            R = AQNM_KAPPA * sigma_r + AQNM_ALPHA * diag_r
        W = _right_solve(Hh, R, kind)
    return Combiner(kind, W, H)


def rescale(x_check) -> np.ndarray:
    """Scale each vector to squared norm ``K``; zero vectors pass through."""
    x_check = np.asarray(x_check)
    K = x_check.shape[-1]
    norm = np.linalg.norm(x_check, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm > 0, np.sqrt(K) * x_check / safe, x_check)


def combine(combiner: Combiner, y) -> np.ndarray:
    """Demultiplex and equalize: returns the unscaled estimate for each user."""
    x_acute = np.einsum("...kn,...n->...k", combiner.W, np.asarray(y))
    if combiner.kind in ("ZF", "BZF"):
        return x_acute
    return x_acute / combiner.equalizer_gains()


def detect_linear(combiner: Combiner, y, const: Constellation):
    """Return ``(x_tilde, x_hat)``: rescaled soft estimate and sliced symbols."""
    x_tilde = rescale(combine(combiner, y))
    return x_tilde, const.slice(x_tilde)
