"""System model: constellations, Rayleigh channels, one-bit quantization and
the complex-to-real lifting shared by every detector.

Arrays follow the convention that leading axes are batch axes, so a stack of
channels has shape ``(..., N, K)`` and a stack of symbol vectors ``(..., K)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MODULATIONS = ("QPSK", "16QAM")

_ALIASES = {
    "QPSK": "QPSK",
    "4QAM": "QPSK",
    "16QAM": "16QAM",
    "16-QAM": "16QAM",
    "QAM16": "16QAM",
}


def canonical_modulation(kind: str) -> str:
    try:
        return _ALIASES[str(kind).strip().upper()]
    except KeyError:
        raise ValueError(
            f"unknown modulation {kind!r}; expected one of {', '.join(MODULATIONS)}"
        ) from None


@dataclass(frozen=True, eq=False)
class Constellation:
    """Square QAM constellation described per real dimension.

    Attributes
    ----------
    kind : str
        ``"QPSK"`` or ``"16QAM"``.
    real_alphabet : ndarray
        Ascending real levels ``M`` taken by each real coordinate.
    boundaries : ndarray
        Ascending decision-boundary levels ``B`` between adjacent levels.
    complex_points : ndarray
        All complex symbols, ordered real-part major then imaginary part.
    gray_bits : ndarray
        ``(len(real_alphabet), bits_per_level)`` Gray labels of each level.
    """

    kind: str
    real_alphabet: np.ndarray
    boundaries: np.ndarray
    complex_points: np.ndarray = field(repr=False)
    gray_bits: np.ndarray = field(repr=False)

    @property
    def bits_per_level(self) -> int:
        return self.gray_bits.shape[1]

    @property
    def bits_per_symbol(self) -> int:
        return 2 * self.bits_per_level

    @property
    def min_spacing(self) -> float:
        return float(self.real_alphabet[1] - self.real_alphabet[0])

    def level_index(self, values) -> np.ndarray:
        """Index of the nearest real level; exact ties go to the larger level."""
        return np.searchsorted(self.boundaries, np.asarray(values, dtype=float), side="right")

    def slice_real(self, values) -> np.ndarray:
        """Symbol-by-symbol detection on real coordinates."""
        return self.real_alphabet[self.level_index(values)]

    def slice(self, symbols) -> np.ndarray:
        """Nearest constellation point for each complex entry."""
        symbols = np.asarray(symbols)
        return self.slice_real(symbols.real) + 1j * self.slice_real(symbols.imag)

    def bits(self, values) -> np.ndarray:
        """Gray bits of real coordinates, shape ``values.shape + (bits_per_level,)``."""
        return self.gray_bits[self.level_index(values)]


def _gray_labels(levels: int) -> np.ndarray:
    width = max(1, int(np.log2(levels)))
    codes = [i ^ (i >> 1) for i in range(levels)]
    return np.array([[(c >> (width - 1 - b)) & 1 for b in range(width)] for c in codes], dtype=np.int8)


@lru_cache(maxsize=None)
def constellation(kind: str = "QPSK") -> Constellation:
    """Return the unit-average-power constellation for ``kind``."""
    kind = canonical_modulation(kind)
    if kind == "QPSK":
        levels = np.array([-1.0, 1.0]) / np.sqrt(2.0)
        bounds = np.array([0.0])
    else:
        levels = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
        bounds = np.array([-2.0, 0.0, 2.0]) / np.sqrt(10.0)
    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    for arr in (levels, bounds, points):
        arr.setflags(write=False)
    gray = _gray_labels(len(levels))
    gray.setflags(write=False)
    return Constellation(kind, levels, bounds, points, gray)


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Complex ``N x K`` flat-fading channel and its real lifting."""

    complex_: np.ndarray

    @property
    def N(self) -> int:
        return self.complex_.shape[-2]

    @property
    def K(self) -> int:
        return self.complex_.shape[-1]

    @property
    def real(self) -> np.ndarray:
        return lift_matrix(self.complex_)


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """i.i.d. CN(0, variance) samples."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channel(K: int, N: int, seed=None, size=None) -> ChannelMatrix:
    """Draw an i.i.d. CN(0, 1) channel; ``size`` prepends batch axes."""
    K, N = int(K), int(N)
    if K < 1 or N < K:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    rng = as_generator(seed)
    shape = (N, K) if size is None else tuple(np.atleast_1d(size)) + (N, K)
    return ChannelMatrix(complex_normal(rng, shape))


def lift_vector(v) -> np.ndarray:
    """``[Re v; Im v]`` along the last axis."""
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag], axis=-1).astype(float)


def unlift_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    half = x.shape[-1] // 2
    return x[..., :half] + 1j * x[..., half:]


def lift_matrix(H) -> np.ndarray:
    """Real ``2N x 2K`` block form ``[[Re H, -Im H], [Im H, Re H]]``."""
    H = np.asarray(H)
    top = np.concatenate([H.real, -H.imag], axis=-1)
    bottom = np.concatenate([H.imag, H.real], axis=-1)
    return np.concatenate([top, bottom], axis=-2).astype(float)


def sign(a) -> np.ndarray:
    # sign(0) = +1 keeps the quantizer total
    return np.where(np.asarray(a) >= 0, 1.0, -1.0)


def one_bit_quantize(r) -> np.ndarray:
    r = np.asarray(r)
    return sign(r.real) + 1j * sign(r.imag)


def snr_db_to_noise_var(snr_db) -> np.ndarray | float:
    out = 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class TxRxSample:
    """One (or a batch of) transmitted/received vectors."""

    x: np.ndarray
    z: np.ndarray
    r: np.ndarray
    y: np.ndarray
    noise_var: float

    @property
    def snr(self) -> float:
        return np.inf if self.noise_var == 0 else 1.0 / self.noise_var

    @property
    def x_real(self) -> np.ndarray:
        return lift_vector(self.x)

    @property
    def y_real(self) -> np.ndarray:
        return lift_vector(self.y)


def random_symbols(const: Constellation, K: int, rng, size=None) -> np.ndarray:
    rng = as_generator(rng)
    shape = (K,) if size is None else tuple(np.atleast_1d(size)) + (K,)
    return const.complex_points[rng.integers(len(const.complex_points), size=shape)]


def transmit(H, x, noise_var: float, rng) -> TxRxSample:
    """Pass ``x`` through ``H`` with CN(0, noise_var) noise and one-bit ADCs."""
    H = np.asarray(getattr(H, "complex_", H))
    x = np.asarray(x, dtype=complex)
    if noise_var < 0:
        raise ValueError("noise variance must be non-negative")
    if H.shape[-1] != x.shape[-1]:
        raise ValueError(f"channel has {H.shape[-1]} users but x has {x.shape[-1]} entries")
    rng = as_generator(rng)
    batch = np.broadcast_shapes(H.shape[:-2], x.shape[:-1])
    z = complex_normal(rng, batch + (H.shape[-2],), noise_var)
    r = np.einsum("...nk,...k->...n", H, x) + z
    return TxRxSample(x=x, z=z, r=r, y=one_bit_quantize(r), noise_var=float(noise_var))
