"""Input checks shared by the estimator classes."""

from __future__ import annotations

import numbers

import numpy as np


def check_channel(H, *, allow_batch: bool = False) -> np.ndarray:
    """Return ``H`` as a complex array of shape ``(N, K)`` (or ``(B, N, K)``)."""
    H = np.asarray(H)
    if not np.issubdtype(H.dtype, np.number):
        raise TypeError(f"channel must be numeric, got dtype {H.dtype}")
    ndim_ok = H.ndim == 2 or (allow_batch and H.ndim == 3)
    if not ndim_ok:
        raise ValueError(f"channel must be 2-D (N, K){' or 3-D (B, N, K)' if allow_batch else ''}, got shape {H.shape}")
    N, K = H.shape[-2:]
    if K < 1 or N < K:
        raise ValueError(f"channel needs N >= K >= 1, got N={N}, K={K}")
    if not np.all(np.isfinite(H)):
        raise ValueError("channel contains NaN or inf")
    return H.astype(complex, copy=False)


def check_received(Y, n_antennas: int | None = None) -> np.ndarray:
    """Return one-bit observations as a complex ``(n_samples, N)`` array.

    A single vector is promoted to one row.  Every real and imaginary part
    must be exactly +1 or -1.
    """
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.ndim != 2:
        raise ValueError(f"received signals must be 1-D or 2-D, got shape {Y.shape}")
    if n_antennas is not None and Y.shape[1] != n_antennas:
        raise ValueError(f"expected {n_antennas} antennas, got {Y.shape[1]}")
    Y = Y.astype(complex, copy=False)
    if not (np.all(np.abs(Y.real) == 1) and np.all(np.abs(Y.imag) == 1)):
        raise ValueError("received signals must take values in {+-1 +- 1j}")
    return Y


def check_noise_var(noise_var, *, strictly_positive: bool = False) -> float:
    if not isinstance(noise_var, numbers.Real) or isinstance(noise_var, bool):
        raise TypeError(f"noise variance must be a real number, got {type(noise_var).__name__}")
    value = float(noise_var)
    if not np.isfinite(value) or value < 0 or (strictly_positive and value == 0):
        bound = "> 0" if strictly_positive else ">= 0"
        raise ValueError(f"noise variance must be finite and {bound}, got {noise_var}")
    return value


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
