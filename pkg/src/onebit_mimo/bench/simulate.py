"""Monte Carlo BER sweeps and run-time measurements.

Every trial draws a fresh channel, symbol vector and noise vector (or, with
``block_len > 1``, a channel shared by ``block_len`` consecutive trials).
Random numbers come from a generator seeded by ``(seed, snr index, chunk
index)`` with a fixed chunk size, so a report depends only on the
configuration and never on how the work is scheduled.  All receivers in one
run see exactly the same trials.
"""

from __future__ import annotations

import logging
import math
import time
from pathlib import Path

import numpy as np

from .. import linear, ml, obmnet
from ..model import (
    complex_normal,
    lift_matrix,
    lift_vector,
    one_bit_quantize,
    snr_db_to_noise_var,
)
from ..nn_search import nn_search
from .config import HARD_RECEIVERS, ExperimentConfig, snr_grid
from .report import BerReport, BerRow, TimingReport, TimingRow

logger = logging.getLogger(__name__)

CHUNK = 1000


def trial_rng(seed: int, snr_index: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(snr_index, chunk_index)))


def perturb_csi(H, tau: float, rng) -> np.ndarray:
    """Imperfect channel knowledge ``sqrt(1 - tau^2) H + tau E`` with ``E ~ CN(0, 1)``.

    The error term is always drawn so the generator state does not depend on
    ``tau``; ``tau = 0`` returns ``H`` unchanged.
    """
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    H = np.asarray(H)
    E = complex_normal(rng, H.shape)
    if tau == 0.0:
        return H.copy()
    return np.sqrt(1.0 - tau**2) * H + tau * E


def resolve_obmnet_params(cfg: ExperimentConfig) -> obmnet.ObmnetParams:
    spec = cfg.obmnet_params
    if spec is None or spec.lower() == "paper":
        params = obmnet.paper_params(cfg.modulation) if cfg.modulation in obmnet.PUBLISHED_FIXTURES else None
        if spec is None and (params is None or (params.K, params.N) != (cfg.K, cfg.N)):
            raise FileNotFoundError(
                f"no OBMNet parameter file given and no published step sizes for "
                f"{cfg.modulation} K={cfg.K} N={cfg.N}; set obmnet_params"
            )
        return params
    path = Path(spec)
    if not path.is_file():
        raise FileNotFoundError(f"OBMNet parameter file not found: {spec}")
    return obmnet.load_params(path)


class _Trials:
    """One chunk of simulated trials."""

    def __init__(self, cfg: ExperimentConfig, noise_var: float, rng: np.random.Generator, count: int):
        const = cfg.constellation
        blocks = -(-count // cfg.block_len)
        H = complex_normal(rng, (blocks, cfg.N, cfg.K))
        self.x = const.complex_points[rng.integers(len(const.complex_points), size=(count, cfg.K))]
        z = complex_normal(rng, (count, cfg.N), noise_var)
        H_hat = perturb_csi(H, cfg.tau, rng)
        if cfg.block_len > 1:
            H = np.repeat(H, cfg.block_len, axis=0)[:count]
            H_hat = np.repeat(H_hat, cfg.block_len, axis=0)[:count]
        self.H = H
        self.H_hat = H_hat
        self.y = one_bit_quantize(np.einsum("tnk,tk->tn", H, self.x) + z)
        self.x_real = lift_vector(self.x)
        self.noise_var = noise_var
        self._G = None

    @property
    def G(self) -> np.ndarray:
        if self._G is None:
            self._G = obmnet.observation_matrix(self.y, self.H_hat)
        return self._G


def first_stage(receiver: str, trials: _Trials, cfg: ExperimentConfig, params=None, cands=None):
    """Return ``(soft, hard)`` real-domain estimates; ``soft`` is None for ML."""
    const = cfg.constellation
    if receiver in linear.KINDS:
        comb = linear.build_combiner(receiver, trials.H_hat, trials.noise_var)
        soft = lift_vector(linear.rescale(linear.combine(comb, trials.y)))
    elif receiver == "OBMNET":
        soft = obmnet.normalize_output(obmnet.forward(trials.G, params))
    elif receiver in HARD_RECEIVERS:
        idx = ml.exact_search_batch(
            trials.G, 1.0 / trials.noise_var, cands, robust=receiver == "ML_ROBUST"
        )
        return None, cands[idx]
    else:
        raise ValueError(f"unknown receiver {receiver!r}")
    return soft, const.slice_real(soft)


def second_stage(soft: np.ndarray, trials: _Trials, cfg: ExperimentConfig, M: int) -> np.ndarray:
    """Nearest-neighbor refinement of every trial with ``P_robust`` on the estimate."""
    const = cfg.constellation
    gamma = cfg.gamma_value
    a = ml.SIGMOID_C * math.sqrt(2.0 / trials.noise_var)
    G = trials.G
    out = np.empty_like(soft)
    for t in range(soft.shape[0]):
        Gt = G[t]

        def objective(V, Gt=Gt):
            return ml.softplus(-a * (V @ Gt.T)).sum(axis=-1)

        out[t] = nn_search(soft[t], gamma, M, objective, const)
    return out


def bit_errors(decisions: np.ndarray, x_real: np.ndarray, const) -> int:
    return int(np.count_nonzero(const.bits(decisions) != const.bits(x_real)))


def run_ber(cfg: ExperimentConfig, progress=None) -> BerReport:
    """Monte Carlo BER of every configured receiver (and stage-2 ``M``) per SNR point."""
    const = cfg.constellation
    bits_per_vector = cfg.K * const.bits_per_symbol
    params = resolve_obmnet_params(cfg) if "OBMNET" in cfg.receivers else None
    cands = None
    if any(r in HARD_RECEIVERS for r in cfg.receivers):
        cands = ml.candidate_vectors(const, cfg.K)
    report = BerReport(seed=cfg.seed, bits_per_vector=bits_per_vector)

    for si, snr_db in enumerate(snr_grid(cfg)):
        noise_var = snr_db_to_noise_var(snr_db)
        keys = []
        for r in cfg.receivers:
            keys.append((r, 1, 1))
            if cfg.stage2 and r not in HARD_RECEIVERS:
                keys.extend((r, 2, M) for M in cfg.M)
        errors = dict.fromkeys(keys, 0)
        elapsed = dict.fromkeys(keys, 0.0)

        for ci, lo in enumerate(range(0, cfg.trials, CHUNK)):
            count = min(CHUNK, cfg.trials - lo)
            trials = _Trials(cfg, noise_var, trial_rng(cfg.seed, si, ci), count)
            for r in cfg.receivers:
                t0 = time.perf_counter()
                soft, hard = first_stage(r, trials, cfg, params, cands)
                t1 = time.perf_counter()
                errors[(r, 1, 1)] += bit_errors(hard, trials.x_real, const)
                elapsed[(r, 1, 1)] += t1 - t0
                if soft is None or not cfg.stage2:
                    continue
                for M in cfg.M:
                    t2 = time.perf_counter()
                    refined = second_stage(soft, trials, cfg, M)
                    elapsed[(r, 2, M)] += (t1 - t0) + time.perf_counter() - t2
                    errors[(r, 2, M)] += bit_errors(refined, trials.x_real, const)
            if progress is not None:
                progress(si, lo + count)

        for key in keys:
            r, stage, M = key
            mean_time = elapsed[key] / cfg.trials if cfg.record_timing else math.nan
            report.rows.append(BerRow(
                snr_db=float(snr_db), receiver=r, stage=stage, M=M, trials=cfg.trials,
                bit_errors=errors[key], ber=errors[key] / (cfg.trials * bits_per_vector),
                mean_detect_time_s=mean_time,
            ))
    return report


def _detect_block(receiver, y, H, noise_var, const, params=None, cands=None):
    """Detect a block of received vectors that share one channel."""
    if receiver in linear.KINDS:
        comb = linear.build_combiner(receiver, H, noise_var)
        soft = lift_vector(linear.rescale(linear.combine(comb, y)))
    elif receiver == "OBMNET":
        soft = obmnet.normalize_output(obmnet.forward(obmnet.observation_matrix(y, H), params))
    else:
        G = obmnet.observation_matrix(y, H)
        idx = ml.exact_search_batch(G, 1.0 / noise_var, cands, robust=receiver == "ML_ROBUST")
        return None, cands[idx]
    return soft, const.slice_real(soft)


def run_timing(cfg: ExperimentConfig) -> TimingReport:
    """Median per-vector detection time for each receiver and batch size.

    A batch of ``B`` vectors shares one channel; linear receivers rebuild
    their combiner for every batch, so small batches carry the set-up cost.
    """
    const = cfg.constellation
    noise_var = snr_db_to_noise_var(cfg.snr_db[0] if cfg.snr_db else 10.0)
    params = resolve_obmnet_params(cfg) if "OBMNET" in cfg.receivers else None
    cands = ml.candidate_vectors(const, cfg.K) if any(r in HARD_RECEIVERS for r in cfg.receivers) else None
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2**31,)))
    report = TimingReport(seed=cfg.seed)
    gamma = cfg.gamma_value
    a = ml.SIGMOID_C * math.sqrt(2.0 / noise_var)

    for r in cfg.receivers:
        for B in cfg.batch_sizes:
            stage1, stage2 = [], {M: [] for M in cfg.M}
            for rep in range(cfg.repetitions + 1):
                H = complex_normal(rng, (cfg.N, cfg.K))
                x = const.complex_points[rng.integers(len(const.complex_points), size=(B, cfg.K))]
                y = one_bit_quantize(x @ H.T + complex_normal(rng, (B, cfg.N), noise_var))
                t0 = time.perf_counter()
                soft, _ = _detect_block(r, y, H, noise_var, const, params, cands)
                dt = time.perf_counter() - t0
                if rep == 0:
                    continue  # warm-up
                stage1.append(dt / B)
                if soft is None:
                    continue
                G = obmnet.observation_matrix(y, H)
                for M in cfg.M:
                    t0 = time.perf_counter()
                    for t in range(B):
                        Gt = G[t]
                        nn_search(soft[t], gamma, M,
                                  lambda V, Gt=Gt: ml.softplus(-a * (V @ Gt.T)).sum(axis=-1), const)
                    stage2[M].append(dt / B + (time.perf_counter() - t0) / B)
            report.rows.append(TimingRow(r, 1, 1, B, cfg.repetitions, float(np.median(stage1))))
            for M, times in stage2.items():
                if times:
                    report.rows.append(TimingRow(r, 2, M, B, cfg.repetitions, float(np.median(times))))
    return report
