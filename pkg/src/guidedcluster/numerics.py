"""Numeric substrate: stable log-space kernels, seeded sampling, finite differences.

All data lives in plain float64 numpy arrays. Randomness flows through
explicitly passed ``numpy.random.Generator`` objects; :func:`make_rng` derives
independent, reproducible streams from a single master seed so that data
generation, pretraining, training and inference never share a stream.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from .errors import NumericalError

LOG_TWO_PI = float(np.log(2.0 * np.pi))

# Stream ids used with make_rng to derive independent generators from one seed.
STREAM_DATA = 1
STREAM_SPLIT = 2
STREAM_INIT = 3
STREAM_PRETRAIN = 4
STREAM_GMM_INIT = 5
STREAM_TRAIN = 6
STREAM_EVAL = 7
STREAM_INFER = 8

_UNIFORM_CLAMP = 1e-12


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded PCG64 generator; distinct ``stream`` ids yield independent streams.

    The same (seed, stream) pair always produces the bit-identical sequence.
    Negative seeds are folded into the unsigned 64-bit range.
    """
    entropy = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=stream)))


def log_sum_exp(v: np.ndarray) -> float:
    """log(sum(exp(v))) via max-shift; tolerates -inf entries."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("empty vector")
    m = float(np.max(v))
    if not np.isfinite(m):
        return m  # all entries -inf (or a NaN snuck in)
    return m + float(np.log(np.sum(np.exp(v - m))))


def log_sum_exp_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp of a 2-D array."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] == 0:
        raise ValueError("expected a non-empty 2-D array")
    shift = np.max(m, axis=1, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    return (shift + np.log(np.sum(np.exp(m - shift), axis=1, keepdims=True)))[:, 0]


def gaussian_diag_logpdf(x: np.ndarray, mu: np.ndarray, log_var: np.ndarray) -> float:
    """Log density of a diagonal Gaussian, parameterized by log-variance."""
    x = np.asarray(x, dtype=np.float64).ravel()
    mu = np.asarray(mu, dtype=np.float64).ravel()
    log_var = np.asarray(log_var, dtype=np.float64).ravel()
    if not (x.shape == mu.shape == log_var.shape):
        raise ValueError(f"length mismatch: x {x.shape}, mu {mu.shape}, log_var {log_var.shape}")
    quad = (x - mu) ** 2 * np.exp(-log_var)
    return float(np.sum(-0.5 * (LOG_TWO_PI + log_var + quad)))


def gaussian_expected_logpdf(
    mu_q: np.ndarray,
    log_var_q: np.ndarray,
    mu_p: np.ndarray,
    log_var_p: np.ndarray,
) -> np.ndarray:
    """Closed form of E_{z ~ N(mu_q, diag e^{log_var_q})}[log N(z; mu_p, diag e^{log_var_p})].

    Broadcasts over leading axes; the trailing axis is the dimension that is
    integrated (and summed) out. Returns a scalar array when inputs are 1-D.
    """
    mu_q, log_var_q, mu_p, log_var_p = np.broadcast_arrays(
        np.asarray(mu_q, dtype=np.float64),
        np.asarray(log_var_q, dtype=np.float64),
        np.asarray(mu_p, dtype=np.float64),
        np.asarray(log_var_p, dtype=np.float64),
    )
    dim = mu_q.shape[-1]
    per_dim = log_var_p + np.exp(log_var_q - log_var_p) + (mu_q - mu_p) ** 2 * np.exp(-log_var_p)
    return -0.5 * dim * LOG_TWO_PI - 0.5 * np.sum(per_dim, axis=-1)


def sample_standard_normal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """i.i.d. N(0,1) matrix; deterministic given the generator state."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    return rng.standard_normal((rows, cols))


def gumbel_from_uniform(u: np.ndarray) -> np.ndarray:
    """-log(-log(u)) with u clamped away from {0, 1} so outputs stay finite."""
    u = np.clip(np.asarray(u, dtype=np.float64), _UNIFORM_CLAMP, 1.0 - _UNIFORM_CLAMP)
    return -np.log(-np.log(u))


def sample_gumbel(rng: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. standard Gumbel draws."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return gumbel_from_uniform(rng.random(n))


def finite_diff_grad(
    f: Callable[[np.ndarray], float],
    p: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time.

    The workhorse oracle for checking analytic backward passes; keep it free of
    any shortcut shared with the code under test.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    p = np.asarray(p, dtype=np.float64).ravel()
    grad = np.empty_like(p)
    for j in range(p.size):
        step = np.zeros_like(p)
        step[j] = h
        f_plus = float(f(p + step))
        f_minus = float(f(p - step))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericalError(f"non-finite function evaluation at index {j}")
        grad[j] = (f_plus - f_minus) / (2.0 * h)
    return grad
