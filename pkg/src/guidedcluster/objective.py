"""The guided-clustering objective: encoder heads, latent sampling, the
five-term evidence lower bound, its clusterless pretraining variant, and the
full analytic gradient with respect to both networks and the mixture prior.

Sign conventions: every term in :class:`ElboBreakdown` is the signed
contribution as it enters the objective, so

    total = recon + beta * (cross_entropy_zc + log_prior_c + entropy_z + entropy_c)

and the beta-weighted group equals minus the KL divergence between the
variational posterior over (z, c) and the mixture prior, up to additive
constants that cancel between ``cross_entropy_zc`` and ``entropy_z`` (both are
stated with their dimension * log(2*pi)/2 constants dropped). The
reconstruction term likewise drops its constant and 1/2 factor, keeping only
the mean squared residual sum.

The cluster posterior q(c|x) is a Monte-Carlo average of prior
responsibilities at the sampled latents; gradients treat it as a constant
(it is the objective-maximizing fixed point, recomputed every step), so
``elbo_backward`` differentiates through means, log-variances and sampled
latents only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .gmm import DEFAULT_VAR_FLOOR, GmmParams, gmm_responsibilities, standard_gmm
from .nn import MlpParams, add_grads, mlp_backward, mlp_forward, zero_grads_like
from .numerics import LOG_TWO_PI, gaussian_expected_logpdf

LOG_VAR_MAX = 10.0

_TERM_NAMES = ("recon", "cross_entropy_zc", "log_prior_c", "entropy_z", "entropy_c")


@dataclass
class EncoderOutput:
    """Per-sample latent mean and (clamped) log-variance heads."""

    mu: np.ndarray  # (n, J)
    log_var: np.ndarray  # (n, J)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.mu.shape[1]


@dataclass
class LatentSample:
    """One reparameterized draw z = mu + exp(log_var/2) * eps, with its noise."""

    z: np.ndarray  # (n, J)
    eps: np.ndarray  # (n, J)


@dataclass
class ClusterPosterior:
    q: np.ndarray  # (n, K), rows sum to 1


@dataclass
class ElboBreakdown:
    recon: float
    cross_entropy_zc: float
    log_prior_c: float
    entropy_z: float
    entropy_c: float
    beta: float
    total: float

    def terms(self) -> dict[str, float]:
        return {
            "recon": self.recon,
            "cross_entropy_zc": self.cross_entropy_zc,
            "log_prior_c": self.log_prior_c,
            "entropy_z": self.entropy_z,
            "entropy_c": self.entropy_c,
            "total": self.total,
        }

    def scaled(self, factor: float) -> "ElboBreakdown":
        """Same breakdown with every term multiplied by ``factor`` (e.g. 1/n)."""
        return ElboBreakdown(
            self.recon * factor,
            self.cross_entropy_zc * factor,
            self.log_prior_c * factor,
            self.entropy_z * factor,
            self.entropy_c * factor,
            self.beta,
            self.total * factor,
        )


def encode(encoder: MlpParams, x: np.ndarray, var_floor: float = DEFAULT_VAR_FLOOR) -> EncoderOutput:
    """Run the encoder and split its 2J-wide output into mean and log-variance heads."""
    out, _ = mlp_forward(encoder, x)
    enc, _, _ = _split_heads(out, var_floor)
    return enc


def _split_heads(raw: np.ndarray, var_floor: float):
    if raw.shape[1] % 2 != 0:
        raise ValueError(f"encoder output width {raw.shape[1]} is not an even 2*J")
    latent_dim = raw.shape[1] // 2
    mu = raw[:, :latent_dim]
    log_var_raw = raw[:, latent_dim:]
    lo = np.log(var_floor)
    log_var = np.clip(log_var_raw, lo, LOG_VAR_MAX)
    pass_through = (log_var_raw > lo) & (log_var_raw < LOG_VAR_MAX)
    return EncoderOutput(mu, log_var), pass_through, latent_dim


def reparameterize(
    rng: np.random.Generator,
    enc_out: EncoderOutput,
    n_samples: int,
    eps: list[np.ndarray] | None = None,
) -> list[LatentSample]:
    """Draw ``n_samples`` latent batches via z = mu + sigma * eps.

    ``eps`` overrides the noise (one (n, J) array per draw), which freezes the
    stochastic path for gradient checking.
    """
    if n_samples < 1:
        raise ValueError("need at least one Monte Carlo sample")
    sigma = np.exp(0.5 * enc_out.log_var)
    if eps is None:
        eps = [rng.standard_normal(enc_out.mu.shape) for _ in range(n_samples)]
    elif len(eps) != n_samples:
        raise ValueError("eps override does not match the number of samples")
    return [LatentSample(enc_out.mu + sigma * e, e) for e in eps]


def cluster_posterior(gmm: GmmParams, samples: list[LatentSample]) -> ClusterPosterior:
    """q(c|x): average the prior responsibilities over the latent draws."""
    if not samples:
        raise ValueError("need at least one latent sample")
    q = np.mean([gmm_responsibilities(gmm, s.z) for s in samples], axis=0)
    q /= q.sum(axis=1, keepdims=True)
    return ClusterPosterior(q)


def hard_assign(posterior: ClusterPosterior | np.ndarray) -> np.ndarray:
    """Row-wise argmax cluster ids; ties break toward the lowest index."""
    q = posterior.q if isinstance(posterior, ClusterPosterior) else np.asarray(posterior)
    return np.argmax(q, axis=1)


def gumbel_softmax_assign(
    rng: np.random.Generator,
    q_row: np.ndarray,
    tau: float,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Temperature-controlled stochastic relaxation of sampling from q.

    ``noise=0`` recovers softmax(log q / tau); small ``tau`` pushes the output
    toward a one-hot vector at the sampled class.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    q_row = np.asarray(q_row, dtype=np.float64).ravel()
    if noise is None:
        from .numerics import sample_gumbel

        noise = sample_gumbel(rng, q_row.size)
    logits = (np.log(np.clip(q_row, 1e-300, None)) + noise) / tau
    logits -= np.max(logits)
    w = np.exp(logits)
    return w / w.sum()


def _recon_term(decoder: MlpParams, y: np.ndarray, samples: list[LatentSample]) -> float:
    y = np.asarray(y, dtype=np.float64)
    if decoder.out_dim != y.shape[1]:
        raise ValueError(f"decoder emits {decoder.out_dim} values but targets have {y.shape[1]}")
    total = 0.0
    for s in samples:
        y_hat, _ = mlp_forward(decoder, s.z)
        total -= float(np.sum((y - y_hat) ** 2))
    return total / len(samples)


def _check_q(q: np.ndarray, n: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != n:
        raise ValueError("cluster posterior shape does not match the batch")
    if not np.allclose(q.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("cluster posterior rows must sum to 1")
    return q


def _assemble(recon: float, enc_out: EncoderOutput, q: np.ndarray, gmm: GmmParams, beta: float) -> ElboBreakdown:
    latent_dim = enc_out.latent_dim
    with np.errstate(over="ignore", invalid="ignore"):  # finiteness checked below
        expected_logp = gaussian_expected_logpdf(
            enc_out.mu[:, None, :],
            enc_out.log_var[:, None, :],
            gmm.mu[None, :, :],
            gmm.log_var[None, :, :],
        )  # (n, K)
        cross_entropy_zc = float(np.sum(q * (expected_logp + 0.5 * latent_dim * LOG_TWO_PI)))
        log_prior_c = float(np.sum(q @ gmm.log_pi))
        entropy_z = float(0.5 * np.sum(1.0 + enc_out.log_var))
        q_log_q = np.where(q > 0.0, q * np.log(np.clip(q, 1e-300, None)), 0.0)
        entropy_c = float(-np.sum(q_log_q))
        total = recon + beta * (cross_entropy_zc + log_prior_c + entropy_z + entropy_c)
    breakdown = ElboBreakdown(recon, cross_entropy_zc, log_prior_c, entropy_z, entropy_c, beta, total)
    for name, value in breakdown.terms().items():
        if not np.isfinite(value):
            raise NumericalError(f"non-finite objective term: {name}")
    return breakdown


def elbo(
    decoder: MlpParams,
    gmm: GmmParams,
    y: np.ndarray,
    enc_out: EncoderOutput,
    samples: list[LatentSample],
    q: ClusterPosterior | np.ndarray,
    beta: float,
) -> ElboBreakdown:
    """The developed objective for one batch, as signed term contributions."""
    q = _check_q(q.q if isinstance(q, ClusterPosterior) else q, enc_out.n)
    recon = _recon_term(decoder, y, samples)
    return _assemble(recon, enc_out, q, gmm, beta)


def pretrain_elbo(
    decoder: MlpParams,
    y: np.ndarray,
    enc_out: EncoderOutput,
    samples: list[LatentSample],
    beta: float,
) -> ElboBreakdown:
    """Clusterless objective: reconstruction minus beta * KL to a standard normal.

    The KL is written in its direct closed form rather than through the mixture
    machinery; algebraically it equals the full objective with a single
    standard-normal component (the categorical terms vanish).
    """
    recon = _recon_term(decoder, y, samples)
    var = np.exp(enc_out.log_var)
    kl = 0.5 * float(np.sum(var + enc_out.mu**2 - 1.0 - enc_out.log_var))
    cross_entropy_zc = -0.5 * float(np.sum(var + enc_out.mu**2))
    entropy_z = float(0.5 * np.sum(1.0 + enc_out.log_var))
    total = recon - beta * kl
    breakdown = ElboBreakdown(recon, cross_entropy_zc, 0.0, entropy_z, 0.0, beta, total)
    for name, value in breakdown.terms().items():
        if not np.isfinite(value):
            raise NumericalError(f"non-finite objective term: {name}")
    return breakdown


def elbo_backward(
    encoder: MlpParams,
    decoder: MlpParams,
    gmm: GmmParams,
    x: np.ndarray,
    y: np.ndarray,
    beta: float,
    n_samples: int,
    rng: np.random.Generator,
    eps: list[np.ndarray] | None = None,
    var_floor: float = DEFAULT_VAR_FLOOR,
) -> tuple[list[np.ndarray], list[np.ndarray], list[np.ndarray], ElboBreakdown]:
    """Analytic gradients of the objective ``total`` for one batch.

    Returns (encoder grads, decoder grads, mixture grads, breakdown), with
    gradients in ascent direction and aligned with the owners' ``arrays()``
    layout. The mixture grads cover [pi logits, means, log-variances]. q(c|x)
    is recomputed from the drawn latents and then held constant, so its own
    parameter dependence contributes nothing.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    raw, enc_cache = mlp_forward(encoder, x)
    enc_out, pass_through, latent_dim = _split_heads(raw, var_floor)
    if latent_dim != gmm.latent_dim or latent_dim != decoder.in_dim:
        raise ValueError(
            f"latent width mismatch: encoder head {latent_dim}, "
            f"prior {gmm.latent_dim}, decoder input {decoder.in_dim}"
        )
    if decoder.out_dim != y.shape[1]:
        raise ValueError(f"decoder emits {decoder.out_dim} values but targets have {y.shape[1]}")

    n = x.shape[0]
    samples = reparameterize(rng, enc_out, n_samples, eps=eps)
    q = cluster_posterior(gmm, samples).q  # stop-gradient from here on

    sigma = np.exp(0.5 * enc_out.log_var)
    d_mu = np.zeros_like(enc_out.mu)
    d_log_var = np.zeros_like(enc_out.log_var)
    grads_theta = zero_grads_like(decoder)
    recon = 0.0
    for s in samples:
        y_hat, dec_cache = mlp_forward(decoder, s.z)
        resid = y - y_hat
        recon -= float(np.sum(resid**2))
        d_y_hat = (2.0 / n_samples) * resid
        d_z, g_theta = mlp_backward(decoder, dec_cache, d_y_hat)
        add_grads(grads_theta, g_theta)
        d_mu += d_z
        d_log_var += d_z * s.eps * 0.5 * sigma
    recon /= n_samples

    inv_var_c = np.exp(-gmm.log_var)  # (K, J)
    resp_inv_var = q @ inv_var_c  # (n, J): sum_c q_ic / var_cj
    resp_mean = q @ (gmm.mu * inv_var_c)  # (n, J): sum_c q_ic mu_cj / var_cj
    d_mu += beta * (resp_mean - enc_out.mu * resp_inv_var)
    d_log_var += beta * (0.5 - 0.5 * np.exp(enc_out.log_var) * resp_inv_var)

    d_raw = np.concatenate([d_mu, d_log_var * pass_through], axis=1)
    _, grads_phi = mlp_backward(encoder, enc_cache, d_raw)

    # Mixture gradients. Weights enter through the log-prior term only; means
    # and log-variances through the cross-entropy term only.
    mass = q.sum(axis=0)  # (K,)
    d_pi_logits = beta * (mass - n * gmm.pi)
    weighted_mu = q.T @ enc_out.mu  # (K, J)
    d_mu_c = beta * inv_var_c * (weighted_mu - mass[:, None] * gmm.mu)
    weighted_var = q.T @ np.exp(enc_out.log_var)  # (K, J)
    weighted_sq = q.T @ (enc_out.mu**2) - 2.0 * gmm.mu * weighted_mu + mass[:, None] * gmm.mu**2
    d_log_var_c = -0.5 * beta * (mass[:, None] - inv_var_c * (weighted_var + weighted_sq))

    breakdown = _assemble(recon, enc_out, q, gmm, beta)
    return grads_phi, grads_theta, [d_pi_logits, d_mu_c, d_log_var_c], breakdown


def pretrain_backward(
    encoder: MlpParams,
    decoder: MlpParams,
    x: np.ndarray,
    y: np.ndarray,
    beta: float,
    n_samples: int,
    rng: np.random.Generator,
    eps: list[np.ndarray] | None = None,
    var_floor: float = DEFAULT_VAR_FLOOR,
) -> tuple[list[np.ndarray], list[np.ndarray], ElboBreakdown]:
    """Gradients of the clusterless pretraining objective.

    Delegates to :func:`elbo_backward` with a frozen single standard-normal
    component, whose own gradients are discarded.
    """
    latent_dim = decoder.in_dim
    grads_phi, grads_theta, _, breakdown = elbo_backward(
        encoder, decoder, standard_gmm(latent_dim), x, y, beta, n_samples, rng,
        eps=eps, var_floor=var_floor,
    )
    return grads_phi, grads_theta, breakdown
