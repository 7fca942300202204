"""scikit-learn style front end.

The detectors follow the estimator conventions (constructor arguments stored
verbatim, learned state in trailing-underscore attributes, ``fit`` returns
``self``) so they work with ``clone``, ``get_params`` and ``set_params``.

Channel-dependent receivers are fitted to a channel; OBMNet is fitted once
(trained on simulated data) and then applied to any channel.

>>> from onebit_mimo import sample_channel
>>> H = sample_channel(2, 16, seed=0).complex_
>>> det = LinearDetector("BZF").fit(H, noise_var=1e-3)
>>> det.get_params()
{'kind': 'BZF', 'modulation': 'QPSK'}
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from . import linear, ml, nn_search as nn, obmnet
from .model import constellation, lift_vector, unlift_vector
from .validation import check_channel, check_noise_var, check_positive_int, check_received


class LinearDetector(BaseEstimator):
    """Linear one-bit receiver (MRC, ZF, MMSE, AQNM_MMSE, WFQ, BMRC, BZF, BMMSE)."""

    def __init__(self, kind="BZF", modulation="QPSK"):
        self.kind = kind
        self.modulation = modulation

    def fit(self, H, noise_var):
        kind = linear.canonical_kind(self.kind)
        H = check_channel(H)
        noise_var = check_noise_var(noise_var, strictly_positive=kind in linear.BUSSGANG_KINDS)
        self.constellation_ = constellation(self.modulation)
        self.combiner_ = linear.build_combiner(kind, H, noise_var)
        self.channel_ = H
        self.noise_var_ = noise_var
        self.n_antennas_, self.n_users_ = H.shape
        return self

    def transform(self, Y):
        """Rescaled soft estimates, complex ``(n_samples, K)``."""
        check_is_fitted(self, "combiner_")
        Y = check_received(Y, self.n_antennas_)
        return linear.rescale(linear.combine(self.combiner_, Y))

    def predict(self, Y):
        soft = self.transform(Y)
        return self.constellation_.slice(soft)


class OBMNetDetector(BaseEstimator):
    """Deep-unfolded one-bit ML detector with trainable step sizes.

    Pass ``step_sizes`` to use fixed (e.g. published) values; otherwise
    :meth:`fit` trains them with Adam on simulated data.
    """

    def __init__(self, n_layers=10, modulation="QPSK", n_users=4, n_antennas=32,
                 batch_size=1000, learning_rate=1e-2, num_batches=10_000,
                 snr_range_db=None, random_state=0, step_sizes=None):
        self.n_layers = n_layers
        self.modulation = modulation
        self.n_users = n_users
        self.n_antennas = n_antennas
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.num_batches = num_batches
        self.snr_range_db = snr_range_db
        self.random_state = random_state
        self.step_sizes = step_sizes

    @classmethod
    def from_params(cls, params: obmnet.ObmnetParams) -> "OBMNetDetector":
        det = cls(n_layers=params.L, modulation=params.modulation,
                  n_users=params.K or 4, n_antennas=params.N or 32,
                  step_sizes=list(params.alphas))
        return det.fit()

    def fit(self, X=None, y=None):
        if self.step_sizes is not None:
            self.params_ = obmnet.ObmnetParams(
                alphas=tuple(np.ravel(self.step_sizes)), modulation=self.modulation,
                K=self.n_users, N=self.n_antennas,
            )
        else:
            cfg = obmnet.TrainConfig(
                K=check_positive_int(self.n_users, "n_users"),
                N=check_positive_int(self.n_antennas, "n_antennas"),
                modulation=self.modulation,
                L=check_positive_int(self.n_layers, "n_layers"),
                batch_size=check_positive_int(self.batch_size, "batch_size"),
                learning_rate=self.learning_rate,
                num_batches=check_positive_int(self.num_batches, "num_batches"),
                snr_range_db=self.snr_range_db,
                seed=self.random_state,
            )
            self.params_ = obmnet.train(cfg)
        self.step_sizes_ = np.array(self.params_.alphas)
        self.constellation_ = constellation(self.modulation)
        return self

    def transform(self, Y, H):
        """Normalized network output as complex ``(n_samples, K)`` estimates."""
        check_is_fitted(self, "params_")
        H = check_channel(H, allow_batch=True)
        Y = check_received(Y, H.shape[-2])
        return unlift_vector(obmnet.soft_estimate(Y, H, self.params_))

    def predict(self, Y, H):
        soft = self.transform(Y, H)
        return self.constellation_.slice(soft)

    def save(self, path):
        check_is_fitted(self, "params_")
        obmnet.save_params(self.params_, path)


class TwoStageDetector(BaseEstimator):
    """First-stage detector followed by nearest-neighbor refinement.

    ``n_candidates`` is the number ``M`` of nearest symbol vectors searched;
    ``gamma`` defaults to a quarter of the level spacing.
    """

    def __init__(self, first_stage=None, n_candidates=2, gamma=None):
        self.first_stage = first_stage
        self.n_candidates = n_candidates
        self.gamma = gamma

    def fit(self, H, noise_var):
        H = check_channel(H)
        noise_var = check_noise_var(noise_var, strictly_positive=True)
        check_positive_int(self.n_candidates, "n_candidates")
        first = LinearDetector() if self.first_stage is None else self.first_stage
        if isinstance(first, OBMNetDetector):
            self.first_stage_ = first if hasattr(first, "params_") else clone(first).fit()
        else:
            self.first_stage_ = clone(first).fit(H, noise_var)
        self.constellation_ = constellation(self.first_stage_.modulation)
        self.gamma_ = nn.default_gamma(self.constellation_) if self.gamma is None else float(self.gamma)
        self.channel_ = H
        self.noise_var_ = noise_var
        return self

    def _soft(self, Y):
        if isinstance(self.first_stage_, OBMNetDetector):
            return self.first_stage_.transform(Y, self.channel_)
        return self.first_stage_.transform(Y)

    def predict(self, Y):
        check_is_fitted(self, "first_stage_")
        Y = check_received(Y, self.channel_.shape[0])
        soft = lift_vector(self._soft(Y))
        out = np.empty_like(soft)
        for t, (y_t, x_t) in enumerate(zip(Y, soft)):
            problem = ml.MlProblem.from_complex(y_t, self.channel_, 1.0 / self.noise_var_)
            out[t] = nn.nn_search(
                x_t, self.gamma_, self.n_candidates,
                lambda V, p=problem: ml.robust_ml_objective(V, p), self.constellation_,
            )
        return unlift_vector(out)
