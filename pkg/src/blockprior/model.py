"""Gaussian sequence experiment: truth, observations and loss.

Observations follow ``X_j = theta_j + Z_j / sqrt(n)`` for ``j = 1..J``, with
``theta_{0j} = amplitude * xi_j * j**(-beta)`` and Rademacher signs ``xi_j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import make_stream

__all__ = [
    "SignalSpec",
    "TruthSequence",
    "Dataset",
    "make_truth",
    "gen_data",
    "l2_risk",
    "sobolev_norm_sq",
    "tail_energy",
    "minimax_rate",
]


@dataclass(frozen=True)
class SignalSpec:
    alpha: float
    beta: float | None = None
    amplitude: float = 5.0
    sign_seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta is None:
            object.__setattr__(self, "beta", self.alpha + 0.6)
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")


@dataclass(frozen=True, eq=False)
class TruthSequence:
    coeffs: np.ndarray
    spec: SignalSpec

    @property
    def j_trunc(self) -> int:
        return self.coeffs.shape[0]


@dataclass(frozen=True, eq=False)
class Dataset:
    n: int
    x: np.ndarray
    truth: TruthSequence
    noise_seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def j_trunc(self) -> int:
        return self.x.shape[0]


def make_truth(spec: SignalSpec, j_trunc: int, rng: np.random.Generator | None = None) -> TruthSequence:
    """Polynomially decaying truth with random signs.

    Signs come from ``rng`` when given, otherwise from a stream keyed by
    ``spec.sign_seed``; either way the result is a pure function of the inputs.
    """
    if j_trunc < 1:
        raise ValueError("j_trunc must be >= 1")
    if spec.beta <= 0.5:
        raise ValueError(
            f"beta={spec.beta} <= 1/2: the coefficient sequence is not square-summable"
        )
    if rng is None:
        rng = make_stream(spec.sign_seed, 0)
    signs = rng.choice(np.array([-1.0, 1.0]), size=j_trunc)
    j = np.arange(1, j_trunc + 1, dtype=float)
    coeffs = spec.amplitude * signs * j ** (-spec.beta)
    coeffs.setflags(write=False)
    return TruthSequence(coeffs=coeffs, spec=spec)


def gen_data(truth: TruthSequence, n: int, rng: np.random.Generator | int) -> Dataset:
    """Draw ``X = theta_0 + Z / sqrt(n)``. An int ``rng`` is used as the noise seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = make_stream(seed, 0)
    z = rng.standard_normal(truth.j_trunc)
    x = truth.coeffs + z / math.sqrt(n)
    x.setflags(write=False)
    return Dataset(n=int(n), x=x, truth=truth, noise_seed=seed)


def l2_risk(estimate, truth: TruthSequence | np.ndarray) -> float:
    """Squared l2 distance between an estimate and the (truncated) truth."""
    target = truth.coeffs if isinstance(truth, TruthSequence) else np.asarray(truth, dtype=float)
    est = np.asarray(estimate, dtype=float)
    if est.shape != target.shape:
        raise ValueError(f"estimate has shape {est.shape}, truth has {target.shape}")
    diff = est - target
    return float(np.dot(diff, diff))


def sobolev_norm_sq(truth: TruthSequence | np.ndarray, alpha: float) -> float:
    """sum_j j^(2 alpha) theta_j^2 over the stored coordinates."""
    c = truth.coeffs if isinstance(truth, TruthSequence) else np.asarray(truth, dtype=float)
    j = np.arange(1, c.shape[0] + 1, dtype=float)
    return float(np.sum(j ** (2.0 * alpha) * c**2))


def tail_energy(spec: SignalSpec, j_trunc: int) -> float:
    """Exact sum_{j > j_trunc} theta_{0j}^2 (sign-free), via the Hurwitz zeta function."""
    from scipy.special import zeta

    return float(spec.amplitude**2 * zeta(2.0 * spec.beta, j_trunc + 1))


def minimax_rate(n: int, alpha: float) -> float:
    """eps_n = n^(-alpha / (2 alpha + 1))."""
    return n ** (-alpha / (2.0 * alpha + 1.0))
