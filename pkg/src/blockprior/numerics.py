"""Special functions and random streams used by the samplers.

The incomplete-gamma family is backed by ``scipy.special``; the only piece
written here is the log-space upper tail, which scipy does not expose and
which the mixture weights need once ``Q(a, x)`` underflows.

Random streams are Philox4x64 generators (a counter-based 64-bit bit
generator) keyed by ``(seed, stream_id)``.
"""
from __future__ import annotations

import hashlib

import numpy as np
from scipy import special

__all__ = [
    "make_stream",
    "derive_stream_id",
    "log_gamma",
    "reg_inc_gamma_lower",
    "reg_inc_gamma_upper",
    "log_reg_inc_gamma_upper",
    "inv_reg_inc_gamma_lower",
    "inv_reg_inc_gamma_upper",
    "normal_cdf",
    "log_normal_cdf",
    "sample_std_normal",
    "sample_gamma",
]

_MASK64 = (1 << 64) - 1


def make_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return an independent Philox generator for ``(seed, stream_id)``.

    Identical arguments always yield the identical sequence. Distinct
    ``stream_id`` values go through ``SeedSequence`` spawn keys, so streams
    derived from one seed do not overlap.
    """
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(stream_id) & _MASK64,))
    return np.random.Generator(np.random.Philox(ss))


def derive_stream_id(*parts) -> int:
    """Stable 64-bit id from arbitrary printable parts (blake2b of their repr)."""
    text = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def log_gamma(a):
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("log_gamma requires a > 0")
    out = special.gammaln(a)
    return float(out) if out.ndim == 0 else out


def _check_ax(a, x):
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0):
        raise ValueError("shape a must be positive")
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    return a, x


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def reg_inc_gamma_lower(a, x):
    """P(a, x) = gamma(a, x) / Gamma(a)."""
    a, x = _check_ax(a, x)
    return _scalar(special.gammainc(a, x))


def reg_inc_gamma_upper(a, x):
    """Q(a, x) = 1 - P(a, x), computed without cancellation."""
    a, x = _check_ax(a, x)
    return _scalar(special.gammaincc(a, x))


def _log_q_contfrac(a, x, max_iter=300, tol=1e-15):
    # Modified Lentz evaluation of the continued fraction for Q(a, x); valid for x > a + 1.
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < tol):
            break
    return a * np.log(x) - x - special.gammaln(a) + np.log(h)


def log_reg_inc_gamma_upper(a, x):
    """log Q(a, x), finite even where Q(a, x) underflows double precision.

    ``x = 0`` gives 0 and ``x = inf`` gives ``-inf``.
    """
    a, x = _check_ax(a, x)
    a, x = np.broadcast_arrays(a, x)
    q = special.gammaincc(a, x)
    with np.errstate(divide="ignore"):
        out = np.log(q)
    # below ~1e-280 switch to the continued fraction evaluated in logs
    deep = (q < 1e-280) & np.isfinite(x) & (x > a + 1.0)
    if np.any(deep):
        out = np.array(out, dtype=float)
        out[deep] = _log_q_contfrac(a[deep], x[deep].astype(float))
    return _scalar(out)


def inv_reg_inc_gamma_lower(a, p):
    """x with P(a, x) = p, for 0 < p < 1."""
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(a <= 0):
        raise ValueError("shape a must be positive")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must lie in [0, 1]")
    return _scalar(special.gammaincinv(a, p))


def inv_reg_inc_gamma_upper(a, q):
    """x with Q(a, x) = q; accurate for q near 0 where the lower inverse loses digits."""
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(a <= 0):
        raise ValueError("shape a must be positive")
    if np.any((q < 0) | (q > 1)):
        raise ValueError("q must lie in [0, 1]")
    return _scalar(special.gammainccinv(a, q))


def normal_cdf(z):
    return _scalar(special.ndtr(np.asarray(z, dtype=float)))


def log_normal_cdf(z):
    return _scalar(special.log_ndtr(np.asarray(z, dtype=float)))


def sample_std_normal(rng: np.random.Generator, size=None):
    return rng.standard_normal(size)


def sample_gamma(shape, rng: np.random.Generator, size=None):
    """Gamma(shape, 1) draws (Marsaglia-Tsang in numpy, with the shape < 1 boost)."""
    if np.any(np.asarray(shape) <= 0):
        raise ValueError("gamma shape must be positive")
    return rng.standard_gamma(shape, size)
