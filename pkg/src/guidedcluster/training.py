"""Two-phase training: clusterless pretraining, mixture initialization from
the latent cloud, then guided training with separate learning rates for the
networks and the mixture prior.

Every run is a pure function of (config, data): shuffling, noise and
initialization all derive from the master seed through fixed stream ids, and
checkpoints serialize floats at full round-trip precision.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from collections.abc import Callable

import numpy as np

from .data import Dataset
from .errors import ConfigError, NumericalError
from .gmm import GmmParams, gmm_fit_em
from .nn import AdamState, MlpParams, adam_step_arrays, mlp_init
from .numerics import (
    STREAM_EVAL,
    STREAM_GMM_INIT,
    STREAM_INFER,
    STREAM_INIT,
    STREAM_PRETRAIN,
    STREAM_TRAIN,
    make_rng,
)
from .objective import (
    ClusterPosterior,
    cluster_posterior,
    elbo,
    elbo_backward,
    encode,
    hard_assign,
    pretrain_backward,
    pretrain_elbo,
    reparameterize,
)

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = "1"

MODES = ("guided", "unguided_joint")
EMPTY_CLUSTER_FRACTION = 0.01
EMPTY_CLUSTER_PATIENCE = 5


@dataclass
class TrainConfig:
    """Every knob of a run. Defaults follow the tabular-data regime:
    5 pretraining epochs at lr 5e-4 / beta 1e-3, then 50 training epochs at
    lr 1e-4 for the networks and 1e-5 for the mixture, beta 1e-2."""

    n_clusters: int = 3
    latent_dim: int = 3
    mc_samples: int = 1
    beta_pretrain: float = 0.001
    beta_train: float = 0.01
    beta_schedule: str | tuple = "constant"  # or ("linear_ramp", start_epoch, end_epoch)
    lr_net_pretrain: float = 0.0005
    lr_net: float = 0.0001
    lr_gmm: float = 0.00001
    epochs_pretrain: int = 5
    epochs_train: int = 50
    batch_size: int = 16
    seed: int = 0
    encoder_hidden: tuple = (64, 64)
    decoder_hidden: tuple = (64, 64)
    activation: str = "tanh"
    tau: float = 0.5
    var_floor: float = 1e-4
    mode: str = "guided"

    def validate(self) -> None:
        positive = {
            "n_clusters": self.n_clusters,
            "latent_dim": self.latent_dim,
            "mc_samples": self.mc_samples,
            "lr_net_pretrain": self.lr_net_pretrain,
            "lr_net": self.lr_net,
            "lr_gmm": self.lr_gmm,
            "epochs_pretrain": self.epochs_pretrain,
            "epochs_train": self.epochs_train,
            "batch_size": self.batch_size,
            "tau": self.tau,
            "var_floor": self.var_floor,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.beta_pretrain < 0 or self.beta_train < 0:
            raise ConfigError("beta values must be >= 0")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.activation not in ("tanh", "relu"):
            raise ConfigError(f"activation must be 'tanh' or 'relu', got {self.activation!r}")
        if isinstance(self.beta_schedule, str):
            if self.beta_schedule != "constant":
                raise ConfigError(f"unknown beta schedule {self.beta_schedule!r}")
        else:
            kind, start, end = self.beta_schedule
            if kind != "linear_ramp" or end <= start or start < 0:
                raise ConfigError(f"bad beta schedule {self.beta_schedule!r}")
        if any(h < 1 for h in self.encoder_hidden) or any(h < 1 for h in self.decoder_hidden):
            raise ConfigError("hidden layer sizes must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_hidden"] = list(self.encoder_hidden)
        d["decoder_hidden"] = list(self.decoder_hidden)
        if not isinstance(self.beta_schedule, str):
            d["beta_schedule"] = list(self.beta_schedule)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(d)
        if "encoder_hidden" in kwargs:
            kwargs["encoder_hidden"] = tuple(kwargs["encoder_hidden"])
        if "decoder_hidden" in kwargs:
            kwargs["decoder_hidden"] = tuple(kwargs["decoder_hidden"])
        sched = kwargs.get("beta_schedule")
        if isinstance(sched, list):
            kwargs["beta_schedule"] = (sched[0], int(sched[1]), int(sched[2]))
        config = cls(**kwargs)
        config.validate()
        return config


def beta_effective(config: TrainConfig, epoch: int) -> float:
    """Beta for a given training epoch (0-indexed): constant or a linear ramp
    from 0 at start_epoch up to beta_train at end_epoch. Non-decreasing."""
    if isinstance(config.beta_schedule, str):
        return config.beta_train
    _, start, end = config.beta_schedule
    frac = min(max((epoch - start) / (end - start), 0.0), 1.0)
    return config.beta_train * frac


@dataclass
class EpochMetrics:
    """One record per epoch: per-sample objective terms on both splits,
    the validation occupancy histogram, and labeled metrics when available."""

    epoch: int
    phase: str  # "pretrain" | "train"
    beta_effective: float
    train_terms: dict[str, float]
    val_terms: dict[str, float]
    occupancy: list[int] = field(default_factory=list)
    acc: float | None = None
    nmi: float | None = None

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "phase": self.phase,
            "beta_effective": self.beta_effective,
            "train": self.train_terms,
            "val": self.val_terms,
            "occupancy": self.occupancy,
            "acc": self.acc,
            "nmi": self.nmi,
        }


@dataclass
class Checkpoint:
    version: str
    config: TrainConfig
    encoder: MlpParams
    decoder: MlpParams
    gmm: GmmParams
    epoch: int
    rng_state: dict


def _mlp_to_dict(params: MlpParams) -> dict:
    return {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in params.layers
        ]
    }


def _mlp_from_dict(d: dict) -> MlpParams:
    from .nn import Layer

    return MlpParams(
        [
            Layer(
                np.asarray(l["weights"], dtype=np.float64),
                np.asarray(l["bias"], dtype=np.float64),
                l["activation"],
            )
            for l in d["layers"]
        ]
    )


def checkpoint_to_dict(ckpt: Checkpoint) -> dict:
    return {
        "version": ckpt.version,
        "config": ckpt.config.to_dict(),
        "encoder": _mlp_to_dict(ckpt.encoder),
        "decoder": _mlp_to_dict(ckpt.decoder),
        "gmm": {
            "pi_logits": ckpt.gmm.pi_logits.tolist(),
            "mu": ckpt.gmm.mu.tolist(),
            "log_var": ckpt.gmm.log_var.tolist(),
        },
        "epoch": ckpt.epoch,
        "rng_state": ckpt.rng_state,
    }


def checkpoint_from_dict(d: dict) -> Checkpoint:
    if d.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {d.get('version')!r}")
    return Checkpoint(
        version=d["version"],
        config=TrainConfig.from_dict(d["config"]),
        encoder=_mlp_from_dict(d["encoder"]),
        decoder=_mlp_from_dict(d["decoder"]),
        gmm=GmmParams(
            np.asarray(d["gmm"]["pi_logits"], dtype=np.float64),
            np.asarray(d["gmm"]["mu"], dtype=np.float64),
            np.asarray(d["gmm"]["log_var"], dtype=np.float64),
        ),
        epoch=int(d["epoch"]),
        rng_state=d["rng_state"],
    )


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_to_dict(ckpt), fh, separators=(",", ":"))


def load_checkpoint(path) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        return checkpoint_from_dict(json.load(fh))


def _infer_rng_state(config: TrainConfig) -> dict:
    """State of the stream every post-training inference draws its noise from."""
    return make_rng(config.seed, STREAM_INFER).bit_generator.state


def _rng_from_state(state: dict) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)


def evaluate_split(
    encoder: MlpParams,
    decoder: MlpParams,
    gmm: GmmParams | None,
    ds: Dataset,
    beta: float,
    n_samples: int,
    rng: np.random.Generator,
    var_floor: float,
) -> tuple[dict[str, float], ClusterPosterior | None, np.ndarray | None]:
    """Frozen-parameter evaluation: per-sample objective terms, and (when a
    mixture is given) the cluster posterior and hard assignments."""
    enc_out = encode(encoder, ds.X, var_floor)
    samples = reparameterize(rng, enc_out, n_samples)
    if gmm is None:
        breakdown = pretrain_elbo(decoder, ds.Y, enc_out, samples, beta)
        return breakdown.scaled(1.0 / ds.n).terms(), None, None
    posterior = cluster_posterior(gmm, samples)
    breakdown = elbo(decoder, gmm, ds.Y, enc_out, samples, posterior, beta)
    return breakdown.scaled(1.0 / ds.n).terms(), posterior, hard_assign(posterior)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _negate(grads: list[np.ndarray]) -> list[np.ndarray]:
    return [-g for g in grads]


def pretrain(
    config: TrainConfig,
    train_ds: Dataset,
    val_ds: Dataset,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
) -> tuple[MlpParams, MlpParams, list[EpochMetrics]]:
    """Phase one: maximize the clusterless objective over shuffled mini-batches."""
    config.validate()
    d_x = train_ds.X.shape[1]
    d_y = train_ds.Y.shape[1]
    encoder = mlp_init(
        make_rng(config.seed, STREAM_INIT, 0),
        [d_x, *config.encoder_hidden, 2 * config.latent_dim],
        config.activation,
    )
    decoder = mlp_init(
        make_rng(config.seed, STREAM_INIT, 1),
        [config.latent_dim, *config.decoder_hidden, d_y],
        config.activation,
    )
    adam_enc = AdamState.for_arrays(encoder.arrays(), config.lr_net_pretrain)
    adam_dec = AdamState.for_arrays(decoder.arrays(), config.lr_net_pretrain)

    metrics: list[EpochMetrics] = []
    for epoch in range(config.epochs_pretrain):
        rng = make_rng(config.seed, STREAM_PRETRAIN, epoch)
        for b, batch in enumerate(_batches(train_ds.n, config.batch_size, rng)):
            try:
                g_phi, g_theta, _ = pretrain_backward(
                    encoder, decoder, train_ds.X[batch], train_ds.Y[batch],
                    config.beta_pretrain, config.mc_samples, rng,
                    var_floor=config.var_floor,
                )
                adam_step_arrays(adam_enc, encoder.arrays(), _negate(g_phi),
                                 encoder.array_labels("encoder layer"))
                adam_step_arrays(adam_dec, decoder.arrays(), _negate(g_theta),
                                 decoder.array_labels("decoder layer"))
            except NumericalError as err:
                raise NumericalError(f"pretrain epoch {epoch} batch {b}: {err}") from err

        train_terms, _, _ = evaluate_split(
            encoder, decoder, None, train_ds, config.beta_pretrain,
            config.mc_samples, make_rng(config.seed, STREAM_EVAL), config.var_floor)
        val_terms, _, _ = evaluate_split(
            encoder, decoder, None, val_ds, config.beta_pretrain,
            config.mc_samples, make_rng(config.seed, STREAM_INFER), config.var_floor)
        record = EpochMetrics(epoch, "pretrain", config.beta_pretrain, train_terms, val_terms)
        metrics.append(record)
        if on_epoch:
            on_epoch(record)
    return encoder, decoder, metrics


def init_gmm_from_latent(
    encoder: MlpParams,
    ds: Dataset,
    n_clusters: int,
    seed: int,
    var_floor: float = 1e-4,
) -> GmmParams:
    """Fit the mixture prior to the cloud of latent means of the training set."""
    if ds.n <= n_clusters:
        raise ValueError(f"need more than {n_clusters} points to fit {n_clusters} components")
    latents = encode(encoder, ds.X, var_floor).mu
    return gmm_fit_em(
        make_rng(seed, STREAM_GMM_INIT), latents, n_clusters, var_floor=var_floor
    )


def _update_empty_streaks(
    streaks: np.ndarray, occupancy: np.ndarray, val_n: int
) -> tuple[np.ndarray, list[int]]:
    """Consecutive-epoch counters for clusters below the occupancy threshold;
    returns the clusters that just hit the patience limit."""
    low = occupancy < EMPTY_CLUSTER_FRACTION * val_n
    streaks = np.where(low, streaks + 1, 0)
    return streaks, [int(c) for c in np.flatnonzero(streaks == EMPTY_CLUSTER_PATIENCE)]


def train(
    config: TrainConfig,
    train_ds: Dataset,
    val_ds: Dataset,
    encoder: MlpParams,
    decoder: MlpParams,
    gmm: GmmParams,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
) -> tuple[Checkpoint, list[EpochMetrics]]:
    """Phase two: joint gradient ascent on the full objective.

    Networks and mixture parameters get their own Adam states and learning
    rates; the mixture's log-variances are floored after every step so the
    prior can never collapse.
    """
    config.validate()
    from .evaluation import clustering_accuracy, nmi as nmi_score

    adam_enc = AdamState.for_arrays(encoder.arrays(), config.lr_net)
    adam_dec = AdamState.for_arrays(decoder.arrays(), config.lr_net)
    adam_gmm = AdamState.for_arrays(gmm.arrays(), config.lr_gmm)
    log_floor = np.log(config.var_floor)

    metrics: list[EpochMetrics] = []
    streaks = np.zeros(config.n_clusters, dtype=np.int64)
    for epoch in range(config.epochs_train):
        beta = beta_effective(config, epoch)
        rng = make_rng(config.seed, STREAM_TRAIN, epoch)
        for b, batch in enumerate(_batches(train_ds.n, config.batch_size, rng)):
            try:
                g_phi, g_theta, g_gmm, _ = elbo_backward(
                    encoder, decoder, gmm, train_ds.X[batch], train_ds.Y[batch],
                    beta, config.mc_samples, rng, var_floor=config.var_floor,
                )
                adam_step_arrays(adam_enc, encoder.arrays(), _negate(g_phi),
                                 encoder.array_labels("encoder layer"))
                adam_step_arrays(adam_dec, decoder.arrays(), _negate(g_theta),
                                 decoder.array_labels("decoder layer"))
                adam_step_arrays(adam_gmm, gmm.arrays(), _negate(g_gmm), gmm.array_labels())
            except NumericalError as err:
                raise NumericalError(f"train epoch {epoch} batch {b}: {err}") from err
            np.clip(gmm.log_var, log_floor, None, out=gmm.log_var)

        train_terms, _, _ = evaluate_split(
            encoder, decoder, gmm, train_ds, beta, config.mc_samples,
            make_rng(config.seed, STREAM_EVAL), config.var_floor)
        val_terms, _, val_assign = evaluate_split(
            encoder, decoder, gmm, val_ds, beta, config.mc_samples,
            make_rng(config.seed, STREAM_INFER), config.var_floor)
        occupancy = np.bincount(val_assign, minlength=config.n_clusters)

        acc_val = nmi_val = None
        if val_ds.labels is not None:
            acc_val = clustering_accuracy(val_assign, val_ds.labels)
            nmi_val = nmi_score(val_assign, val_ds.labels)

        streaks, warn_clusters = _update_empty_streaks(streaks, occupancy, val_ds.n)
        for c in warn_clusters:
            logger.warning(
                "cluster %d occupies < %.0f%% of the validation set for %d consecutive epochs "
                "(epoch %d)", c, 100 * EMPTY_CLUSTER_FRACTION, EMPTY_CLUSTER_PATIENCE, epoch,
            )

        record = EpochMetrics(
            epoch, "train", beta, train_terms, val_terms,
            [int(v) for v in occupancy], acc_val, nmi_val,
        )
        metrics.append(record)
        if on_epoch:
            on_epoch(record)

    checkpoint = Checkpoint(
        version=CHECKPOINT_VERSION,
        config=config,
        encoder=encoder,
        decoder=decoder,
        gmm=gmm,
        epoch=config.epochs_train,
        rng_state=_infer_rng_state(config),
    )
    return checkpoint, metrics


def joined_dataset(ds: Dataset) -> Dataset:
    """Features and guides concatenated on both sides, for the joint baseline
    that clusters (x, y) by reconstructing (x, y)."""
    joint = np.concatenate([ds.X, ds.Y], axis=1)
    names = list(ds.feature_names) + list(ds.guide_names)
    return Dataset(
        X=joint,
        Y=joint.copy(),
        labels=ds.labels,
        feature_names=names,
        guide_names=names,
        x_min=np.concatenate([ds.x_min, ds.y_min]),
        x_max=np.concatenate([ds.x_max, ds.y_max]),
        y_min=np.concatenate([ds.x_min, ds.y_min]),
        y_max=np.concatenate([ds.x_max, ds.y_max]),
    )


def run_pipeline(
    config: TrainConfig,
    train_ds: Dataset,
    val_ds: Dataset,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
) -> tuple[Checkpoint, list[EpochMetrics]]:
    """Pretrain, initialize the mixture in latent space, then train."""
    encoder, decoder, pre_metrics = pretrain(config, train_ds, val_ds, on_epoch=on_epoch)
    gmm = init_gmm_from_latent(
        encoder, train_ds, config.n_clusters, config.seed, config.var_floor
    )
    checkpoint, train_metrics = train(
        config, train_ds, val_ds, encoder, decoder, gmm, on_epoch=on_epoch
    )
    return checkpoint, pre_metrics + train_metrics


def run_unguided_baseline(
    config: TrainConfig,
    train_ds: Dataset,
    val_ds: Dataset,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
) -> tuple[Checkpoint, list[EpochMetrics]]:
    """The ablation pipeline: cluster the concatenated (x, y) by reconstructing
    itself, so the guide is an input rather than a target."""
    if config.mode != "unguided_joint":
        raise ConfigError("run_unguided_baseline requires mode='unguided_joint'")
    return run_pipeline(config, joined_dataset(train_ds), joined_dataset(val_ds),
                        on_epoch=on_epoch)


def infer(
    checkpoint: Checkpoint,
    x: np.ndarray,
) -> tuple[ClusterPosterior, np.ndarray, np.ndarray]:
    """Cluster new inputs: (posterior q, hard assignments, latent means).

    Consumes features only; noise comes from the checkpoint's stored inference
    stream, so repeated calls give identical outputs.
    """
    x = np.asarray(x, dtype=np.float64)
    config = checkpoint.config
    if x.ndim != 2 or x.shape[1] != checkpoint.encoder.in_dim:
        raise ValueError(
            f"expected {checkpoint.encoder.in_dim} feature columns, got {x.shape[1] if x.ndim == 2 else x.shape}"
        )
    rng = _rng_from_state(checkpoint.rng_state)
    enc_out = encode(checkpoint.encoder, x, config.var_floor)
    samples = reparameterize(rng, enc_out, config.mc_samples)
    posterior = cluster_posterior(checkpoint.gmm, samples)
    return posterior, hard_assign(posterior), enc_out.mu
