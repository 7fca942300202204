"""OBMNet: gradient descent on the robust ML objective unfolded into layers.

Layer ``l`` maps ``x -> x + alpha_l * G^T sigmoid(-G x)`` where
``G = diag(y) H_hat``; the only trainable parameters are the step sizes
``alpha_1..alpha_L``. The network output is rescaled to squared norm ``K``.

Training differentiates the normalized-output loss with respect to the step
sizes by hand (reverse accumulation through the layers) and runs Adam on
freshly simulated mini-batches.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import expit

from .model import (
    as_generator,
    canonical_modulation,
    complex_normal,
    constellation,
    lift_matrix,
    lift_vector,
    one_bit_quantize,
    random_symbols,
    unlift_vector,
)

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12
HEADER_TAG = "obmnet v1"


@dataclass(frozen=True)
class ObmnetParams:
    alphas: tuple
    modulation: str = "QPSK"
    K: int | None = None
    N: int | None = None
    seed: int | None = None
    epochs: int | None = None

    def __post_init__(self):
        alphas = tuple(float(a) for a in np.ravel(self.alphas))
        if len(alphas) < 1:
            raise ValueError("OBMNet needs at least one layer")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "modulation", canonical_modulation(self.modulation))

    @property
    def L(self) -> int:
        return len(self.alphas)


@dataclass
class TrainConfig:
    K: int = 4
    N: int = 32
    modulation: str = "QPSK"
    L: int = 10
    batch_size: int = 1000
    learning_rate: float = 1e-2
    num_batches: int = 10_000
    snr_range_db: tuple | None = None
    seed: int = 0
    init_alpha: float = 0.1
    early_stop_window: int = 100
    early_stop_tol: float = 1e-3
    divergence_factor: float = 10.0
    betas: tuple = field(default=(0.9, 0.999))
    eps: float = 1e-8

    def __post_init__(self):
        self.modulation = canonical_modulation(self.modulation)
        if self.snr_range_db is None:
            self.snr_range_db = (0.0, 15.0) if self.modulation == "QPSK" else (10.0, 30.0)
        lo, hi = (float(v) for v in self.snr_range_db)
        self.snr_range_db = (lo, hi)
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if lo > hi:
            raise ValueError(f"snr_range_db low {lo} exceeds high {hi}")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if not 1 <= self.K <= self.N:
            raise ValueError(f"need 1 <= K <= N, got K={self.K}, N={self.N}")


class TrainingDiverged(RuntimeError):
    pass


def _alphas(params) -> np.ndarray:
    return np.asarray(getattr(params, "alphas", params), dtype=float).ravel()


def _matvec(G, x):
    return np.einsum("...ij,...j->...i", G, x)


def _rmatvec(G, v):
    return np.einsum("...ij,...i->...j", G, v)


def forward(G, params, return_trace: bool = False):
    """Run the ``L`` layers from the zero vector.

    ``G`` may be ``(2N, 2K)`` or a batch ``(B, 2N, 2K)``.  With
    ``return_trace`` the list of layer inputs and sigmoid activations is also
    returned for back-propagation.
    """
    G = np.asarray(G, dtype=float)
    x = np.zeros(G.shape[:-2] + G.shape[-1:])
    xs, ss = [], []
    for alpha in _alphas(params):
        s = expit(-_matvec(G, x))
        if return_trace:
            xs.append(x)
            ss.append(s)
        x = x + alpha * _rmatvec(G, s)
    if return_trace:
        return x, xs, ss
    return x


def normalize_output(x, K: int | None = None) -> np.ndarray:
    """Scale to ``||x|| = sqrt(K)``; near-zero vectors are returned as is."""
    x = np.asarray(x, dtype=float)
    if K is None:
        K = x.shape[-1] // 2
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    ok = norm >= NORM_EPS
    return np.where(ok, np.sqrt(K) * x / np.where(ok, norm, 1.0), x)


def loss(x_tilde, x_target):
    """Squared Euclidean distance (per sample for batches)."""
    d = np.asarray(x_tilde, dtype=float) - np.asarray(x_target, dtype=float)
    return np.sum(d * d, axis=-1)


def loss_and_grad(G, params, x_target):
    """Mean loss over the batch and its gradient with respect to the step sizes."""
    G = np.asarray(G, dtype=float)
    x_target = np.asarray(x_target, dtype=float)
    alphas = _alphas(params)
    K = G.shape[-1] // 2
    xL, xs, ss = forward(G, alphas, return_trace=True)
    norm = np.linalg.norm(xL, axis=-1, keepdims=True)
    ok = norm >= NORM_EPS
    safe = np.where(ok, norm, 1.0)
    x_tilde = np.where(ok, np.sqrt(K) * xL / safe, xL)
    per_sample = loss(x_tilde, x_target)
    batch = per_sample.size
    g = 2.0 * (x_tilde - x_target) / batch

    # d x_tilde / d xL = sqrt(K)/|x| (I - x x^T/|x|^2)
    radial = np.sum(xL * g, axis=-1, keepdims=True) / safe**2
    lam = np.where(ok, np.sqrt(K) / safe * (g - xL * radial), g)

    grad = np.empty(len(alphas))
    for ell in range(len(alphas) - 1, -1, -1):
        s = ss[ell]
        step = _rmatvec(G, s)
        grad[ell] = np.sum(lam * step)
        # Jacobian of G^T sigmoid(-G x) is -G^T diag(s(1-s)) G
        lam = lam - alphas[ell] * _rmatvec(G, s * (1.0 - s) * _matvec(G, lam))
    return float(per_sample.mean()), grad


def grad_alphas(G, params, x_target) -> np.ndarray:
    """Gradient of the (batch-mean) training loss with respect to each step size."""
    return loss_and_grad(G, params, x_target)[1]


def observation_matrix(y, H_hat) -> np.ndarray:
    """``G = diag(y) H`` from complex one-bit outputs and a complex channel estimate."""
    y_real = lift_vector(y)
    H_real = lift_matrix(H_hat)
    return y_real[..., :, None] * H_real


def simulate_batch(cfg: TrainConfig, rng: np.random.Generator):
    """Fresh training batch: returns ``(G, x_target)``."""
    const = constellation(cfg.modulation)
    B = cfg.batch_size
    H = complex_normal(rng, (B, cfg.N, cfg.K))
    x = random_symbols(const, cfg.K, rng, size=B)
    snr_db = rng.uniform(*cfg.snr_range_db, size=B)
    noise_var = 10.0 ** (-snr_db / 10.0)
    z = complex_normal(rng, (B, cfg.N)) * np.sqrt(noise_var)[:, None]
    y = one_bit_quantize(np.einsum("bnk,bk->bn", H, x) + z)
    return observation_matrix(y, H), lift_vector(x)


class Adam:
    def __init__(self, lr=1e-2, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = self.v = None
        self.t = 0

    def step(self, theta, grad):
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(cfg: TrainConfig, callback=None) -> ObmnetParams:
    """Fit the step sizes with Adam on simulated data; deterministic per ``cfg.seed``.

    Stops after ``cfg.num_batches`` batches, or earlier once the moving-average
    loss over ``early_stop_window`` batches improves by less than
    ``early_stop_tol`` (relative) between consecutive windows.
    """
    rng = as_generator(cfg.seed)
    alphas = np.full(cfg.L, cfg.init_alpha)
    opt = Adam(cfg.learning_rate, cfg.betas, cfg.eps)
    window = max(1, cfg.early_stop_window)
    history = []
    initial = None
    prev_avg = None
    done = 0
    for b in range(cfg.num_batches):
        G, x = simulate_batch(cfg, rng)
        value, grad = loss_and_grad(G, alphas, x)
        if initial is None:
            initial = value
        history.append(value)
        running = float(np.mean(history[-window:]))
        if not np.isfinite(value) or running > cfg.divergence_factor * initial:
            raise TrainingDiverged(
                f"batch {b}: running loss {running:.4g} vs initial {initial:.4g}"
            )
        alphas = opt.step(alphas, grad)
        done = b + 1
        if callback is not None:
            callback(b, value, alphas)
        if done % window == 0:
            if prev_avg is not None and prev_avg - running < cfg.early_stop_tol * prev_avg:
                logger.info("early stop after %d batches (loss %.5f)", done, running)
                break
            prev_avg = running
    return ObmnetParams(
        alphas=tuple(alphas), modulation=cfg.modulation, K=cfg.K, N=cfg.N,
        seed=cfg.seed, epochs=done,
    )


def soft_estimate(y, H_hat, params) -> np.ndarray:
    """Normalized real-domain output ``x_tilde`` for one or many received vectors."""
    G = observation_matrix(y, H_hat)
    return normalize_output(forward(G, params))


def detect_batch(y, H_hat, params, const=None) -> np.ndarray:
    """Sliced complex symbol decisions for a batch of received vectors.

    ``y`` is ``(B, N)``; ``H_hat`` is a shared ``(N, K)`` estimate or a
    per-sample ``(B, N, K)`` stack.
    """
    if const is None:
        const = constellation(getattr(params, "modulation", "QPSK"))
    x_tilde = soft_estimate(y, H_hat, params)
    return unlift_vector(const.slice_real(x_tilde))


def save_params(params: ObmnetParams, path) -> None:
    lines = [f"{HEADER_TAG} {params.modulation} K={params.K} N={params.N} L={params.L}"]
    lines += [repr(a) for a in params.alphas]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_params(text: str, source: str = "<string>") -> ObmnetParams:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(HEADER_TAG + " "):
        raise ValueError(f"{source}: line 1: expected header starting with '{HEADER_TAG}'")
    tokens = lines[0][len(HEADER_TAG):].split()
    meta = {}
    for tok in tokens[1:]:
        key, _, value = tok.partition("=")
        meta[key] = value
    try:
        L = int(meta["L"])
        K = None if meta.get("K", "None") == "None" else int(meta["K"])
        N = None if meta.get("N", "None") == "None" else int(meta["N"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{source}: line 1: malformed header {lines[0]!r}") from exc
    alphas = []
    for i, ln in enumerate(lines[1:], start=2):
        try:
            alphas.append(float(ln))
        except ValueError:
            raise ValueError(f"{source}: line {i}: not a number: {ln!r}") from None
    if len(alphas) != L:
        raise ValueError(f"{source}: header declares L={L} but {len(alphas)} step sizes follow")
    return ObmnetParams(alphas=tuple(alphas), modulation=tokens[0], K=K, N=N)


def load_params(path) -> ObmnetParams:
    path = Path(path)
    return parse_params(path.read_text(encoding="utf-8"), str(path))


PUBLISHED_FIXTURES = {
    "QPSK": "obmnet_qpsk_k4_n32.txt",
    "16QAM": "obmnet_16qam_k8_n128.txt",
}


def paper_params(modulation: str = "QPSK") -> ObmnetParams:
    """Published step sizes (QPSK K=4 N=32, or 16-QAM K=8 N=128)."""
    name = PUBLISHED_FIXTURES[canonical_modulation(modulation)]
    text = resources.files("onebit_mimo").joinpath("data", name).read_text(encoding="utf-8")
    return parse_params(text, name)
