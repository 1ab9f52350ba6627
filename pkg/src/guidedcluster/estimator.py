"""Scikit-learn style front end for the guided clustering engine.

``GuidedClusterVAE`` behaves like any sklearn clusterer: ``fit(X, y)`` learns
the model (``y`` is the guiding variable, not a prediction target),
``predict`` assigns clusters to feature-only inputs, ``transform`` exposes the
latent means, and ``get_params``/``set_params``/``clone`` work for pipelines
and searches. Inputs are Min-Max scaled internally by default, mirroring the
CLI's CSV handling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import Dataset
from .training import TrainConfig, infer, run_pipeline


class GuidedClusterVAE(ClusterMixin, TransformerMixin, BaseEstimator):
    """Clustering of X steered by a guiding variable y.

    The model learns a latent representation of X shaped as a Gaussian
    mixture and optimized to reconstruct y, so the discovered clusters are
    the ones that matter for y -- while inference never sees y.

    Parameters
    ----------
    n_clusters : int, number of mixture components.
    latent_dim : int, width of the latent representation.
    mc_samples : int, Monte-Carlo draws per objective evaluation.
    beta : float, weight of the mixture-prior regularizer during training.
    beta_pretrain : float, regularizer weight during pretraining.
    beta_schedule : "constant" or ("linear_ramp", start_epoch, end_epoch).
    learning_rate, pretrain_learning_rate, gmm_learning_rate : Adam step sizes.
    epochs, pretrain_epochs, batch_size : optimization schedule.
    encoder_hidden, decoder_hidden : tuples of hidden-layer widths.
    activation : "tanh" or "relu" hidden activation.
    tau : float, temperature for stochastic assignment sampling.
    var_floor : float, minimum variance anywhere in the model.
    scale_inputs : bool, Min-Max scale X and y internally (recommended).
    random_state : int, master seed; every fit is fully reproducible.

    Attributes
    ----------
    labels_ : cluster assignment of the training rows.
    checkpoint_ : the trained model bundle (networks + mixture + config).
    metrics_ : per-epoch objective/metric records from the fit.
    """

    def __init__(
        self,
        n_clusters: int = 3,
        latent_dim: int = 3,
        mc_samples: int = 1,
        beta: float = 0.01,
        beta_pretrain: float = 0.001,
        beta_schedule="constant",
        learning_rate: float = 0.0001,
        pretrain_learning_rate: float = 0.0005,
        gmm_learning_rate: float = 0.00001,
        epochs: int = 50,
        pretrain_epochs: int = 5,
        batch_size: int = 16,
        encoder_hidden=(64, 64),
        decoder_hidden=(64, 64),
        activation: str = "tanh",
        tau: float = 0.5,
        var_floor: float = 1e-4,
        scale_inputs: bool = True,
        random_state: int = 0,
    ):
        self.n_clusters = n_clusters
        self.latent_dim = latent_dim
        self.mc_samples = mc_samples
        self.beta = beta
        self.beta_pretrain = beta_pretrain
        self.beta_schedule = beta_schedule
        self.learning_rate = learning_rate
        self.pretrain_learning_rate = pretrain_learning_rate
        self.gmm_learning_rate = gmm_learning_rate
        self.epochs = epochs
        self.pretrain_epochs = pretrain_epochs
        self.batch_size = batch_size
        self.encoder_hidden = encoder_hidden
        self.decoder_hidden = decoder_hidden
        self.activation = activation
        self.tau = tau
        self.var_floor = var_floor
        self.scale_inputs = scale_inputs
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        config = TrainConfig(
            n_clusters=self.n_clusters,
            latent_dim=self.latent_dim,
            mc_samples=self.mc_samples,
            beta_pretrain=self.beta_pretrain,
            beta_train=self.beta,
            beta_schedule=self.beta_schedule,
            lr_net_pretrain=self.pretrain_learning_rate,
            lr_net=self.learning_rate,
            lr_gmm=self.gmm_learning_rate,
            epochs_pretrain=self.pretrain_epochs,
            epochs_train=self.epochs,
            batch_size=self.batch_size,
            seed=int(self.random_state),
            encoder_hidden=tuple(self.encoder_hidden),
            decoder_hidden=tuple(self.decoder_hidden),
            activation=self.activation,
            tau=self.tau,
            var_floor=self.var_floor,
            mode="guided",
        )
        config.validate()
        return config

    @staticmethod
    def _scale_bounds(values: np.ndarray, enabled: bool):
        if not enabled:
            return np.zeros(values.shape[1]), np.ones(values.shape[1])
        return values.min(axis=0), values.max(axis=0)

    @staticmethod
    def _apply_scale(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        span = hi - lo
        return np.where(span > 0.0, (values - lo) / np.where(span > 0.0, span, 1.0), 0.5)

    def fit(self, X, y=None):
        """Learn the guided clustering from features X and guiding variable y."""
        X = check_array(X, dtype=np.float64)
        if y is None:
            raise ValueError("a guiding variable y is required to fit")
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        y = check_array(y, dtype=np.float64)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y must have the same number of rows")

        self.x_min_, self.x_max_ = self._scale_bounds(X, self.scale_inputs)
        self.y_min_, self.y_max_ = self._scale_bounds(y, self.scale_inputs)
        xs = self._apply_scale(X, self.x_min_, self.x_max_)
        ys = self._apply_scale(y, self.y_min_, self.y_max_)

        ds = Dataset(
            X=xs,
            Y=ys,
            labels=None,
            feature_names=[f"f{i}" for i in range(X.shape[1])],
            guide_names=[f"g{i}" for i in range(y.shape[1])],
            x_min=self.x_min_,
            x_max=self.x_max_,
            y_min=self.y_min_,
            y_max=self.y_max_,
        )
        # Per-epoch metrics are computed on the training rows themselves; pass
        # an explicit validation split through the training module if needed.
        self.checkpoint_, self.metrics_ = run_pipeline(self._config(), ds, ds)
        self.n_features_in_ = X.shape[1]
        self.labels_ = infer(self.checkpoint_, xs)[1]
        return self

    def _scaled_features(self, X) -> np.ndarray:
        check_is_fitted(self, "checkpoint_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but the model was fit with {self.n_features_in_}"
            )
        return self._apply_scale(X, self.x_min_, self.x_max_)

    def predict(self, X) -> np.ndarray:
        """Hard cluster assignment for new feature rows (no y involved)."""
        xs = self._scaled_features(X)
        return infer(self.checkpoint_, xs)[1]

    def predict_proba(self, X) -> np.ndarray:
        """Cluster membership probabilities q(c|x)."""
        xs = self._scaled_features(X)
        return infer(self.checkpoint_, xs)[0].q

    def transform(self, X) -> np.ndarray:
        """Latent-mean coordinates of each row."""
        xs = self._scaled_features(X)
        return infer(self.checkpoint_, xs)[2]

    def fit_predict(self, X, y=None, **kwargs) -> np.ndarray:
        """Fit on (X, y) and return the training-row cluster assignments.

        Overrides the mixin, which would silently drop the guiding variable.
        """
        return self.fit(X, y, **kwargs).labels_

    def score(self, X, y) -> float:
        """Per-sample objective value on held-out (X, y); higher is better."""
        from .numerics import STREAM_INFER, make_rng
        from .training import evaluate_split

        xs = self._scaled_features(X)
        y = check_array(np.asarray(y, dtype=np.float64).reshape(len(xs), -1), dtype=np.float64)
        ys = self._apply_scale(y, self.y_min_, self.y_max_)
        ds = Dataset(
            X=xs, Y=ys, labels=None,
            feature_names=[f"f{i}" for i in range(xs.shape[1])],
            guide_names=[f"g{i}" for i in range(ys.shape[1])],
            x_min=self.x_min_, x_max=self.x_max_, y_min=self.y_min_, y_max=self.y_max_,
        )
        config = self.checkpoint_.config
        terms, _, _ = evaluate_split(
            self.checkpoint_.encoder, self.checkpoint_.decoder, self.checkpoint_.gmm,
            ds, config.beta_train, config.mc_samples,
            make_rng(config.seed, STREAM_INFER), config.var_floor,
        )
        return terms["total"]
