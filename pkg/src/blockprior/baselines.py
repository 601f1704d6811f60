"""Comparison priors: rescaled Gaussian processes and sieve priors.

Rescaled GP
    ``W_{t/c}`` with ``E W_s W_t = exp(-(s - t)^2)``, hence covariance
    ``exp(-(s - t)^2 / c^2)``, projected on the trigonometric basis
    ``phi_1 = 1, phi_{2m} = sqrt2 cos(2 pi m t), phi_{2m+1} = sqrt2 sin(2 pi m t)``.
    ``RGPF`` fixes ``c = (n / log(n)^2)^{-1/(2 alpha + 1)} / 2``; ``RGPG``
    puts a Gamma prior on ``c``, discretized on a log grid.

Sieve priors
    Fixed dimension ``J`` with ``sqrt(n) theta_j ~ N(0, 1)`` (conjugate), and
    the adaptive version with ``pi(k) ~ e^{-D k}`` and
    ``sqrt(n) theta_j ~ Laplace(1)`` whose posterior over ``k`` is computed
    exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special, stats

from .gibbs import ChainConfig
from .model import Dataset
from .numerics import make_stream

__all__ = [
    "RGPConfig",
    "SieveConfig",
    "trig_basis",
    "gp_prior_covariance",
    "rgpf_scale",
    "GaussianPosterior",
    "rgpf_posterior",
    "rgpg_chain",
    "c_grid_posterior",
    "fixed_sieve_posterior",
    "adaptive_sieve_posterior",
    "log_laplace_marginal",
    "laplace_coordinate_posterior",
    "sieve_dimension_posterior",
]


# --------------------------------------------------------------------------
# rescaled Gaussian processes


@dataclass(frozen=True)
class RGPConfig:
    mode: str = "fixed_c"
    alpha: float = 1.0
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0
    c_grid: tuple = tuple(np.geomspace(1e-3, 10.0, 40))
    quadrature_points: int = 1024
    jitter: float = 1e-8
    basis_cut: int | None = None
    estimator: str = "single_draw"
    c: float | None = None  # overrides the default fixed scale

    def __post_init__(self):
        if self.mode not in ("fixed_c", "gamma_c"):
            raise ValueError(f"unknown RGP mode {self.mode!r}")
        grid = np.asarray(self.c_grid, dtype=float)
        if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("c_grid must be positive and strictly increasing")
        if min(self.gamma_shape, self.gamma_rate, self.quadrature_points, self.jitter) <= 0:
            raise ValueError("RGP parameters must be positive")


def trig_basis(t, m: int) -> np.ndarray:
    """First ``m`` trigonometric basis functions at points ``t``; shape (len(t), m)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((t.shape[0], m))
    out[:, 0] = 1.0
    idx = np.arange(1, m)
    freq = 2.0 * np.pi * ((idx + 1) // 2)
    arg = t[:, None] * freq[None, :]
    out[:, 1:] = math.sqrt(2.0) * np.where(idx % 2 == 1, np.cos(arg), np.sin(arg))
    return out


@lru_cache(maxsize=8)
def _weighted_basis(m, points):
    x, w = np.polynomial.legendre.leggauss(points)
    t = (x + 1.0) / 2.0
    return t, (w / 2.0)[:, None] * trig_basis(t, m)


@lru_cache(maxsize=128)
def _covariance_cached(c, m, points, jitter):
    t, wb = _weighted_basis(m, points)
    kern = np.exp(-((t[:, None] - t[None, :]) ** 2) / (c * c))
    sigma = wb.T @ kern @ wb
    sigma = 0.5 * (sigma + sigma.T)
    sigma[np.diag_indices(m)] += jitter
    sigma.setflags(write=False)
    return sigma


def gp_prior_covariance(c: float, basis_cut: int, quadrature_points: int = 1024, jitter: float = 1e-8) -> np.ndarray:
    """Prior covariance of the basis coefficients of ``W_{t/c}`` on [0, 1].

    ``Sigma_ij = int int phi_i(s) phi_j(t) exp(-(s-t)^2/c^2) ds dt`` by
    tensor Gauss-Legendre quadrature, symmetrized, with ``jitter`` on the
    diagonal. Returned arrays are cached and read-only.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    return _covariance_cached(float(c), int(basis_cut), int(quadrature_points), float(jitter))


@lru_cache(maxsize=128)
def _eig_cached(c, m, points, jitter):
    lam, vec = np.linalg.eigh(_covariance_cached(c, m, points, jitter))
    lam = np.clip(lam, 0.0, None)
    return lam, vec


def rgpf_scale(n: int, alpha: float, constant: float = 0.5) -> float:
    """``constant * (n / log(n)^2)^{-1/(2 alpha + 1)}``."""
    return constant * (n / math.log(n) ** 2) ** (-1.0 / (2.0 * alpha + 1.0))


@dataclass
class GaussianPosterior:
    """``theta | X ~ N(mean, V diag(var) V^T)`` in the prior's eigenbasis."""

    mean: np.ndarray
    var: np.ndarray
    vectors: np.ndarray

    @property
    def cov(self) -> np.ndarray:
        return (self.vectors * self.var) @ self.vectors.T

    def sample(self, rng, size=None):
        shape = (self.var.shape[0],) if size is None else (size, self.var.shape[0])
        z = rng.standard_normal(shape) * np.sqrt(self.var)
        return self.mean + z @ self.vectors.T


def _gp_posterior(x, n, lam, vec):
    # (Sigma^{-1} + n I)^{-1} = V diag(lam / (1 + n lam)) V^T
    shrink = n * lam / (1.0 + n * lam)
    mean = vec @ (shrink * (vec.T @ x))
    return GaussianPosterior(mean=mean, var=lam / (1.0 + n * lam), vectors=vec)


def _basis_cut(data: Dataset, cfg: RGPConfig) -> int:
    m = cfg.basis_cut or data.j_trunc
    return min(m, data.j_trunc)


def _pad(vec, j):
    out = np.zeros(j)
    out[: vec.shape[0]] = vec
    return out


def rgpf_posterior(data: Dataset, cfg: RGPConfig, rng=None, sigma=None, return_posterior=False):
    """Conjugate posterior under the fixed-scale rescaled GP.

    ``sigma`` replaces the GP covariance (a test hook, e.g. the identity).
    Returns a draw or the mean per ``cfg.estimator``; with
    ``return_posterior`` the :class:`GaussianPosterior` itself.
    """
    if cfg.mode != "fixed_c":
        raise ValueError("rgpf_posterior needs mode='fixed_c'")
    m = _basis_cut(data, cfg)
    if sigma is None:
        c = cfg.c if cfg.c is not None else rgpf_scale(data.n, cfg.alpha)
        lam, vec = _eig_cached(float(c), m, cfg.quadrature_points, cfg.jitter)
    else:
        sigma = np.asarray(sigma, dtype=float)
        if not np.all(np.isfinite(sigma)):
            raise np.linalg.LinAlgError("prior covariance is not finite")
        lam, vec = np.linalg.eigh(0.5 * (sigma + sigma.T))
        lam = np.clip(lam, 0.0, None)
        m = sigma.shape[0]
    post = _gp_posterior(data.x[:m], data.n, lam, vec)
    if return_posterior:
        return post
    if cfg.estimator == "posterior_mean":
        return _pad(post.mean, data.j_trunc)
    if rng is None:
        raise ValueError("a random stream is needed for single_draw")
    return _pad(post.sample(rng), data.j_trunc)


def _c_log_prior(grid, shape, rate):
    # Gamma density evaluated at the grid nodes, times the log-grid spacing
    # (nodes are equally spaced in log c, so dc = c dlog c)
    return stats.gamma.logpdf(grid, shape, scale=1.0 / rate) + np.log(grid)


def rgpg_chain(data: Dataset, cfg: RGPConfig, chain: ChainConfig | None = None, rng=None, return_trace=False):
    """Gibbs sampler for the rescaled GP with a Gamma prior on ``c``.

    Alternates ``theta | c, X`` (conjugate Gaussian) and ``c | theta`` on the
    discrete grid ``cfg.c_grid`` with probabilities proportional to
    ``Gamma(c) dc * N(theta; 0, Sigma(c))``. Eigendecompositions are
    computed once per grid point.

    ``c | theta`` is very sticky: a draw of theta under one ``c`` is
    essentially impossible under a much smoother one. The chain is therefore
    started from an exact draw of ``c`` from its collapsed posterior
    ``X ~ N(0, Sigma(c) + I/n)``; every later step leaves the posterior
    invariant, so the draws are exact however slowly ``c`` moves.
    """
    if cfg.mode != "gamma_c":
        raise ValueError("rgpg_chain needs mode='gamma_c'")
    chain = chain or ChainConfig()
    if rng is None:
        rng = make_stream(chain.seed, chain.stream_id)
    m = _basis_cut(data, cfg)
    grid = np.asarray(cfg.c_grid, dtype=float)
    lam, vecs, vecs_t, lam_f, log_det = _grid_eigen(tuple(cfg.c_grid), m, cfg.quadrature_points, cfg.jitter)
    log_prior = _c_log_prior(grid, cfg.gamma_shape, cfg.gamma_rate)
    x = data.x[:m]
    n = data.n

    shrink = n * lam / (1.0 + n * lam)
    post_sd = np.sqrt(lam / (1.0 + n * lam))
    x_rot = (vecs_t @ x).reshape(len(grid), m)

    g = 0
    if len(grid) > 1:
        v = lam + 1.0 / n
        logp = log_prior - 0.5 * np.sum(np.log(v), axis=1) - 0.5 * np.sum(x_rot**2 / v, axis=1)
        g = _draw_index(logp, rng)
    total = np.zeros(m)
    trace = []
    theta = None
    for it in range(chain.sweeps):
        z = rng.standard_normal(m)
        theta = vecs[g] @ (shrink[g] * x_rot[g] + post_sd[g] * z)
        if len(grid) > 1:
            proj = (vecs_t @ theta).reshape(len(grid), m)
            logp = log_prior - 0.5 * log_det - 0.5 * np.sum(proj**2 / lam_f, axis=1)
            g = _draw_index(logp, rng)
        if it >= chain.burn_in:
            total += theta
            trace.append(grid[g])
    kept = chain.sweeps - chain.burn_in
    est = total / kept if chain.estimator == "posterior_mean" else theta
    est = _pad(est, data.j_trunc)
    if return_trace:
        return est, np.asarray(trace)
    return est


@lru_cache(maxsize=4)
def _grid_eigen(c_grid, m, points, jitter):
    """Stacked eigendecompositions over the c grid, shared by every trial."""
    eig = [_eig_cached(float(c), m, points, jitter) for c in c_grid]
    lam = np.stack([e[0] for e in eig])  # (G, m)
    vecs = np.stack([e[1] for e in eig])  # (G, m, m)
    vecs_t = np.ascontiguousarray(vecs.transpose(0, 2, 1)).reshape(-1, m)
    lam_f = np.maximum(lam, jitter * 1e-3)
    log_det = np.sum(np.log(lam_f), axis=1)
    for arr in (lam, vecs, vecs_t, lam_f, log_det):
        arr.setflags(write=False)
    return lam, vecs, vecs_t, lam_f, log_det


def _draw_index(logp, rng):
    p = np.exp(logp - special.logsumexp(logp))
    g = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
    return min(g, len(p) - 1)


def c_grid_posterior(theta, cfg: RGPConfig, m: int) -> np.ndarray:
    """Normalized grid probabilities of ``c | theta`` (used by the sampler's c-step)."""
    grid = np.asarray(cfg.c_grid, dtype=float)
    floor = cfg.jitter * 1e-3
    logp = _c_log_prior(grid, cfg.gamma_shape, cfg.gamma_rate)
    for i, c in enumerate(grid):
        lam, vec = _eig_cached(float(c), m, cfg.quadrature_points, cfg.jitter)
        lam = np.maximum(lam, floor)
        proj = vec.T @ theta[:m]
        logp[i] += -0.5 * np.sum(np.log(lam)) - 0.5 * np.sum(proj**2 / lam)
    return np.exp(logp - special.logsumexp(logp))


# --------------------------------------------------------------------------
# sieve priors


@dataclass(frozen=True)
class SieveConfig:
    mode: str = "fixed_J"
    alpha: float = 1.0
    J: int | None = None
    D: float = 1.0
    k_max: int | None = None
    estimator: str = "single_draw"

    def __post_init__(self):
        if self.mode not in ("fixed_J", "adaptive"):
            raise ValueError(f"unknown sieve mode {self.mode!r}")
        if self.J is not None and self.J < 0:
            raise ValueError("J must be >= 0")
        if not self.D > 0:
            raise ValueError("D must be positive")
        if self.k_max is not None and self.k_max < 1:
            raise ValueError("k_max must be >= 1")

    def dimension(self, n: int) -> int:
        if self.J is not None:
            return self.J
        return int(math.floor(n ** (1.0 / (2.0 * self.alpha + 1.0))))


def fixed_sieve_posterior(data: Dataset, cfg: SieveConfig, rng=None, return_moments=False):
    """Exact posterior for the fixed-dimension sieve.

    For ``j <= J``: ``theta_j | X ~ N(n X_j / (n + 1), 1 / (n + 1))``; zero beyond.
    """
    if cfg.mode != "fixed_J":
        raise ValueError("fixed_sieve_posterior needs mode='fixed_J'")
    n, j = data.n, data.j_trunc
    dim = min(cfg.dimension(n), j)
    mean = np.zeros(j)
    mean[:dim] = n * data.x[:dim] / (n + 1.0)
    var = np.zeros(j)
    var[:dim] = 1.0 / (n + 1.0)
    if return_moments:
        return mean, var
    if cfg.estimator == "posterior_mean":
        return mean
    if rng is None:
        raise ValueError("a random stream is needed for single_draw")
    return mean + np.sqrt(var) * rng.standard_normal(j)


def log_laplace_marginal(x, n):
    """log density of ``X = theta + Z/sqrt(n)`` when ``sqrt(n) theta ~ Laplace(1)``.

    With ``y = sqrt(n) x``:
    ``h(y) = e^{1/2} / 2 * (e^{-y} Phi(y - 1) + e^{y} Phi(-y - 1))``
    and the density of ``x`` is ``sqrt(n) h(sqrt(n) x)``.
    """
    y = math.sqrt(n) * np.asarray(x, dtype=float)
    la = -y + special.log_ndtr(y - 1.0)
    lb = y + special.log_ndtr(-y - 1.0)
    return 0.5 * math.log(n) + 0.5 - math.log(2.0) + np.logaddexp(la, lb)


def _log_noise_density(x, n):
    y = math.sqrt(n) * np.asarray(x, dtype=float)
    return 0.5 * math.log(n) - 0.5 * math.log(2 * math.pi) - 0.5 * y * y


def sieve_dimension_posterior(x, n, D=1.0, k_max=None) -> np.ndarray:
    """Posterior probabilities of ``k = 0..k_max`` under ``pi(k) ~ e^{-D k}``."""
    x = np.asarray(x, dtype=float)
    k_max = min(k_max or x.shape[0], x.shape[0])
    diff = log_laplace_marginal(x[:k_max], n) - _log_noise_density(x[:k_max], n)
    ks = np.arange(k_max + 1)
    logp = -D * ks + np.concatenate([[0.0], np.cumsum(diff)])
    return np.exp(logp - special.logsumexp(logp))


def laplace_coordinate_posterior(x, n):
    """Two-piece posterior of ``u = sqrt(n) theta`` given ``y = sqrt(n) x``.

    ``u | y`` is ``N(y - 1, 1)`` restricted to ``u > 0`` with probability
    ``p_plus`` and ``N(y + 1, 1)`` restricted to ``u < 0`` otherwise.
    Returns ``(p_plus, y)``.
    """
    y = math.sqrt(n) * np.asarray(x, dtype=float)
    la = -y + special.log_ndtr(y - 1.0)
    lb = y + special.log_ndtr(-y - 1.0)
    p_plus = np.exp(la - np.logaddexp(la, lb))
    return p_plus, y


def laplace_posterior_cdf(u, y):
    """CDF of the two-piece posterior of ``u`` (on the ``sqrt(n) theta`` scale)."""
    u = np.asarray(u, dtype=float)
    la = -y + special.log_ndtr(y - 1.0)
    lb = y + special.log_ndtr(-y - 1.0)
    p_plus = math.exp(la - np.logaddexp(la, lb))
    neg = special.ndtr(np.minimum(u, 0.0) - (y + 1.0)) / special.ndtr(-(y + 1.0))
    pos = (special.ndtr(np.maximum(u, 0.0) - (y - 1.0)) - special.ndtr(-(y - 1.0))) / special.ndtr(y - 1.0)
    return np.where(u < 0, (1 - p_plus) * neg, (1 - p_plus) + p_plus * pos)


def sample_laplace_coordinates(x, n, rng):
    """Exact draws of ``theta_j | X_j`` under the Laplace coordinate prior."""
    p_plus, y = laplace_coordinate_posterior(x, n)
    y = np.atleast_1d(y)
    pick = rng.random(y.shape) < p_plus
    u = rng.random(y.shape)
    lo = np.where(pick, -(y - 1.0), -np.inf)
    hi = np.where(pick, np.inf, -(y + 1.0))
    loc = np.where(pick, y - 1.0, y + 1.0)
    draws = stats.truncnorm.ppf(u, lo, hi, loc=loc, scale=1.0)
    return draws / math.sqrt(n)


def adaptive_sieve_posterior(data: Dataset, cfg: SieveConfig, rng=None, return_dimension=False):
    """Exact draw from the adaptive sieve posterior.

    The dimension ``k`` is drawn from its exact discrete posterior, then each
    ``theta_j, j <= k`` from its two-piece truncated-normal posterior. With
    ``estimator='posterior_mean'`` the exact mean is returned instead.
    """
    if cfg.mode != "adaptive":
        raise ValueError("adaptive_sieve_posterior needs mode='adaptive'")
    n, j = data.n, data.j_trunc
    probs = sieve_dimension_posterior(data.x, n, cfg.D, cfg.k_max)
    if cfg.estimator == "posterior_mean":
        inclusion = 1.0 - np.cumsum(probs)[:-1]  # P(k >= j) for j = 1..k_max
        est = np.zeros(j)
        km = inclusion.shape[0]
        est[:km] = inclusion * _laplace_coordinate_mean(data.x[:km], n)
        return (est, probs) if return_dimension else est
    if rng is None:
        raise ValueError("a random stream is needed for single_draw")
    k = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
    k = min(k, probs.shape[0] - 1)
    est = np.zeros(j)
    if k > 0:
        est[:k] = sample_laplace_coordinates(data.x[:k], n, rng)
    return (est, k) if return_dimension else est


def _laplace_coordinate_mean(x, n):
    p_plus, y = laplace_coordinate_posterior(x, n)
    # means of N(mu, 1) truncated to (0, inf) and (-inf, 0)
    mu_p, mu_m = y - 1.0, y + 1.0
    m_plus = mu_p + np.exp(_log_phi(mu_p) - special.log_ndtr(mu_p))
    m_minus = mu_m - np.exp(_log_phi(mu_m) - special.log_ndtr(-mu_m))
    return (p_plus * m_plus + (1 - p_plus) * m_minus) / math.sqrt(n)


def _log_phi(z):
    return -0.5 * z * z - 0.5 * math.log(2 * math.pi)
