"""Guided clustering: learn a Gaussian-mixture latent representation of X
that is maximally informative about a guiding variable y."""

__version__ = "0.1.0"

from .data import Dataset, SyntheticSpec, generate_synthetic, load_csv, save_csv, split
from .estimator import GuidedClusterVAE
from .evaluation import cluster_profiles, clustering_accuracy, hungarian, nmi
from .gmm import GmmParams, gmm_fit_em, gmm_log_joint, gmm_responsibilities
from .objective import (
    ElboBreakdown,
    cluster_posterior,
    elbo,
    elbo_backward,
    encode,
    gumbel_softmax_assign,
    hard_assign,
    pretrain_elbo,
    reparameterize,
)
from .training import (
    Checkpoint,
    EpochMetrics,
    TrainConfig,
    infer,
    init_gmm_from_latent,
    load_checkpoint,
    pretrain,
    run_pipeline,
    run_unguided_baseline,
    save_checkpoint,
    train,
)

__all__ = [
    "Checkpoint",
    "Dataset",
    "ElboBreakdown",
    "EpochMetrics",
    "GmmParams",
    "GuidedClusterVAE",
    "SyntheticSpec",
    "TrainConfig",
    "cluster_posterior",
    "cluster_profiles",
    "clustering_accuracy",
    "elbo",
    "elbo_backward",
    "encode",
    "generate_synthetic",
    "gmm_fit_em",
    "gmm_log_joint",
    "gmm_responsibilities",
    "gumbel_softmax_assign",
    "hard_assign",
    "hungarian",
    "infer",
    "init_gmm_from_latent",
    "load_checkpoint",
    "load_csv",
    "nmi",
    "pretrain",
    "pretrain_elbo",
    "reparameterize",
    "run_pipeline",
    "run_unguided_baseline",
    "save_checkpoint",
    "save_csv",
    "split",
    "train",
]
