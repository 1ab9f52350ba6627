"""Diagonal-covariance Gaussian mixture over the latent space.

Mixture weights are stored as unconstrained logits and soft-maxed on read, so
gradient updates can never leave the simplex; EM writes log-probabilities
directly (softmax(log pi) == pi). Variances are carried as log-variance and
floored to keep every density and divergence finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import LOG_TWO_PI, log_sum_exp_rows

DEFAULT_VAR_FLOOR = 1e-4


@dataclass
class GmmParams:
    pi_logits: np.ndarray  # (K,)
    mu: np.ndarray  # (K, J)
    log_var: np.ndarray  # (K, J)

    @property
    def n_components(self) -> int:
        return self.pi_logits.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.mu.shape[1]

    @property
    def log_pi(self) -> np.ndarray:
        shifted = self.pi_logits - np.max(self.pi_logits)
        return shifted - np.log(np.sum(np.exp(shifted)))

    @property
    def pi(self) -> np.ndarray:
        return np.exp(self.log_pi)

    def copy(self) -> "GmmParams":
        return GmmParams(self.pi_logits.copy(), self.mu.copy(), self.log_var.copy())

    def arrays(self) -> list[np.ndarray]:
        return [self.pi_logits, self.mu, self.log_var]

    def array_labels(self) -> list[str]:
        return ["mixture logits", "component means", "component log-variances"]


def standard_gmm(latent_dim: int) -> GmmParams:
    """Single standard-normal component; the clusterless pretraining prior."""
    return GmmParams(np.zeros(1), np.zeros((1, latent_dim)), np.zeros((1, latent_dim)))


def _as_batch(z: np.ndarray, latent_dim: int) -> tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    if z.ndim != 2 or z.shape[1] != latent_dim:
        raise ValueError(f"latent input has shape {z.shape}, expected (*, {latent_dim})")
    return z, single


def gmm_log_joint(params: GmmParams, z: np.ndarray) -> np.ndarray:
    """log(pi_c) + log N(z; mu_c, diag var_c) for each component.

    Accepts a single latent vector (J,) -> (K,) or a batch (n, J) -> (n, K).
    """
    z, single = _as_batch(z, params.latent_dim)
    diff = z[:, None, :] - params.mu[None, :, :]  # (n, K, J)
    quad = diff * diff * np.exp(-params.log_var)[None, :, :]
    log_pdf = -0.5 * np.sum(LOG_TWO_PI + params.log_var[None, :, :] + quad, axis=2)
    out = params.log_pi[None, :] + log_pdf
    return out[0] if single else out


def gmm_responsibilities(params: GmmParams, z: np.ndarray) -> np.ndarray:
    """Posterior over components given z: softmax of the log joint, rows sum to 1."""
    z, single = _as_batch(z, params.latent_dim)
    lj = gmm_log_joint(params, z)
    r = np.exp(lj - log_sum_exp_rows(lj)[:, None])
    r /= r.sum(axis=1, keepdims=True)
    return r[0] if single else r


def gmm_log_likelihood(params: GmmParams, z: np.ndarray) -> float:
    """Total mixture log density of a batch of latent points."""
    z, _ = _as_batch(z, params.latent_dim)
    return float(np.sum(log_sum_exp_rows(gmm_log_joint(params, z))))


def kmeans_pp_centers(rng: np.random.Generator, points: np.ndarray, k: int) -> np.ndarray:
    """k-means++ seeding: first center uniform, the rest proportional to squared distance."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest_sq = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            # all remaining mass on duplicated points; pick uniformly
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest_sq / total)
        centers[c] = points[idx]
        closest_sq = np.minimum(closest_sq, np.sum((points - centers[c]) ** 2, axis=1))
    return centers


def gmm_fit_em(
    rng: np.random.Generator,
    z: np.ndarray,
    k: int,
    max_iters: int = 200,
    tol: float = 1e-6,
    var_floor: float = DEFAULT_VAR_FLOOR,
    return_history: bool = False,
):
    """Fit a diagonal GMM by EM from k-means++ initialization.

    Stops when the data log-likelihood improves by less than ``tol`` or after
    ``max_iters`` iterations. A component whose responsibility mass collapses
    is re-seeded at the datum with the smallest maximum responsibility, which
    keeps K fixed. With ``return_history`` the per-iteration log-likelihoods
    are returned as a second value.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError("latent data must be 2-D")
    n = z.shape[0]
    if n < k:
        raise ValueError(f"need at least {k} points to fit {k} components, got {n}")
    if k < 1:
        raise ValueError("k must be >= 1")

    log_floor = np.log(var_floor)
    global_var = np.maximum(z.var(axis=0), var_floor)
    params = GmmParams(
        pi_logits=np.log(np.full(k, 1.0 / k)),
        mu=kmeans_pp_centers(rng, z, k),
        log_var=np.tile(np.log(global_var), (k, 1)),
    )

    history: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iters):
        resp = gmm_responsibilities(params, z)  # (n, K)
        mass = resp.sum(axis=0)

        empties = np.flatnonzero(mass < 1e-6)
        if empties.size:
            worst = int(np.argmin(resp.max(axis=1)))
            for c in empties:
                params.mu[c] = z[worst]
                params.log_var[c] = np.log(global_var)
            resp = gmm_responsibilities(params, z)
            mass = resp.sum(axis=0)

        pi = np.maximum(mass / n, 1e-12)
        pi /= pi.sum()
        params.pi_logits = np.log(pi)
        params.mu = (resp.T @ z) / mass[:, None]
        diff_sq = (z[:, None, :] - params.mu[None, :, :]) ** 2
        var = np.einsum("nk,nkj->kj", resp, diff_sq) / mass[:, None]
        params.log_var = np.log(np.maximum(var, var_floor))

        ll = gmm_log_likelihood(params, z)
        history.append(ll)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll

    if return_history:
        return params, history
    return params
