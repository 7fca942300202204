"""Maximum-likelihood detection for one-bit observations.

Two objectives over real-lifted symbol vectors ``x`` (length ``2K``):

* the conventional log-likelihood ``sum_n log Phi(sqrt(2 rho) y_n h_n^T x)``
  (maximized), and
* the robust surrogate obtained with ``Phi(t) ~ sigmoid(1.702 t)``, a sum of
  softplus terms (minimized).

Objectives accept a single vector ``(2K,)`` or a stack of candidates
``(C, 2K)`` and return a scalar or ``(C,)`` array respectively.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_ndtr

from .model import Constellation, lift_matrix, lift_vector

SIGMOID_C = 1.702
MAX_SEARCH = 2**20


def log_phi(t):
    """Natural log of the standard normal CDF, accurate far into the lower tail."""
    return log_ndtr(t)


def softplus(t):
    """``log(1 + exp(t))`` without overflow."""
    return np.logaddexp(0.0, t)


def sigmoid(t):
    return expit(t)


@dataclass(frozen=True, eq=False)
class MlProblem:
    """Observation-dependent data of the ML problem.

    ``G = diag(y) H_hat`` stacks the sign-adjusted rows of the lifted channel
    estimate; ``rho`` is the SNR ``1/N0``.
    """

    G: np.ndarray
    H_hat: np.ndarray
    y: np.ndarray
    rho: float
    c: float = SIGMOID_C

    @property
    def scale(self) -> float:
        """``sqrt(2 rho)``."""
        return float(np.sqrt(2.0 * self.rho))

    @classmethod
    def from_complex(cls, y, H_hat, rho: float) -> "MlProblem":
        return cls.from_real(lift_vector(y), lift_matrix(H_hat), rho)

    @classmethod
    def from_real(cls, y, H_hat, rho: float) -> "MlProblem":
        y = np.asarray(y, dtype=float)
        H_hat = np.asarray(H_hat, dtype=float)
        if H_hat.shape[-2] != y.shape[-1]:
            raise ValueError(f"y has {y.shape[-1]} entries but H_hat has {H_hat.shape[-2]} rows")
        return cls(G=y[..., :, None] * H_hat, H_hat=H_hat, y=y, rho=float(rho))


def _margins(x, problem: MlProblem) -> np.ndarray:
    # G x for a single x -> (2N,), for candidates (C, 2K) -> (C, 2N)
    return np.asarray(x, dtype=float) @ problem.G.T


def conventional_ml_objective(x, problem: MlProblem):
    """Log-likelihood ``sum_n log Phi(sqrt(2 rho) g_n^T x)``; larger is better."""
    return log_phi(problem.scale * _margins(x, problem)).sum(axis=-1)


def robust_ml_objective(x, problem: MlProblem):
    """``P_robust(x) = sum_n softplus(-c sqrt(2 rho) g_n^T x)``; smaller is better."""
    return softplus(-problem.c * problem.scale * _margins(x, problem)).sum(axis=-1)


def robust_gradient(x, problem: MlProblem) -> np.ndarray:
    a = problem.c * problem.scale
    s = sigmoid(-a * _margins(x, problem))
    return -a * (s @ problem.G)


def candidate_vectors(const: Constellation, K: int) -> np.ndarray:
    """All ``|M|^K`` symbol vectors in real-lifted form, shape ``(|M|^K, 2K)``.

    Rows follow lexicographic order over the complex points of ``const``.
    """
    count = len(const.complex_points) ** K
    if count > MAX_SEARCH:
        raise ValueError(f"search space of {count} vectors exceeds the limit of {MAX_SEARCH}")
    idx = np.array(list(itertools.product(range(len(const.complex_points)), repeat=K)), dtype=int)
    return lift_vector(const.complex_points[idx.reshape(count, K)])


def exact_search(objective, const: Constellation, K: int, maximize: bool = False) -> np.ndarray:
    """Exhaustive search of ``objective`` over the full symbol space.

    ``objective`` receives the ``(C, 2K)`` candidate stack and returns ``C``
    scores. The first optimum in enumeration order wins ties.
    """
    cands = candidate_vectors(const, K)
    scores = np.asarray(objective(cands), dtype=float)
    best = np.argmax(scores) if maximize else np.argmin(scores)
    return cands[best]


def exact_search_batch(G, rho, cands, robust: bool = True, chunk: int = 256) -> np.ndarray:
    """Vectorized exact search for a stack of problems.

    ``G`` is ``(T, 2N, 2K)`` and ``rho`` a scalar or ``(T,)``; returns the
    index into ``cands`` of the optimum for every problem.
    """
    G = np.asarray(G, dtype=float)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), G.shape[:1])
    scale = np.sqrt(2.0 * rho)
    out = np.empty(G.shape[0], dtype=int)
    for lo in range(0, G.shape[0], chunk):
        hi = min(lo + chunk, G.shape[0])
        m = (G[lo:hi] @ cands.T) * scale[lo:hi, None, None]
        if robust:
            out[lo:hi] = np.argmin(softplus(-SIGMOID_C * m).sum(axis=1), axis=1)
        else:
            out[lo:hi] = np.argmax(log_phi(m).sum(axis=1), axis=1)
    return out


def gd_solve(problem: MlProblem, n_steps: int, step_sizes) -> np.ndarray:
    """Gradient descent on ``P_robust`` from the origin; returns the last iterate."""
    step_sizes = np.asarray(step_sizes, dtype=float).ravel()
    if len(step_sizes) != n_steps:
        raise ValueError(f"expected {n_steps} step sizes, got {len(step_sizes)}")
    x = np.zeros(problem.G.shape[-1])
    for alpha in step_sizes:
        x = x - alpha * robust_gradient(x, problem)
    return x
