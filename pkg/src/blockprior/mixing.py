"""Mixing densities g_k for the block scales A_k.

Two families, both supported on ``(0, e^{-k}]`` with a knot at
``delta_k = e^{-k^2}``:

``two_level``
    ``g_k(t) = T1 * 1{t <= delta_k} + T2 * 1{t <= e^{-k}}`` with
    ``T1 = e^{k^2} - e^{-e^k - k + k^2}`` and ``T2 = e^{-e^k}``.
``piecewise_linear``
    linear from ``T_k`` at 0 down to ``e^{-e^k}`` at the knot, then flat at
    ``e^{-e^k}`` up to ``e^{-k}``, with
    ``T_k = 2 e^{k^2} - 2 e^{-e^k + k^2 - k} + e^{-e^k}``.

Every constant is kept as a logarithm; ``T1 ~ e^{k^2}`` overflows a double
for k >= 27 and ``delta_k`` underflows a little after that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MixingDensity",
    "TwoLevelDensity",
    "PiecewiseLinearDensity",
    "mixing_density",
    "ConditionCheck",
    "verify_conditions",
    "FAMILIES",
]

FAMILIES = ("two_level", "piecewise_linear")
LOG2 = math.log(2.0)


def _log1mexp(x):
    """log(1 - e^{-x}) for x > 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > LOG2, np.log1p(-np.exp(-x)), np.log(-np.expm1(-x)))


def _invert_from_right(u, f_knot, inner, edge, log_height):
    """Use ``inner`` below the knot; above it solve ``1 - u = h (edge - t)``.

    ``u = 1`` maps to the support edge even when the knot's CDF value has
    rounded to 1.
    """
    u = np.asarray(u, dtype=float)
    out = np.array(inner, dtype=float)
    above = (u > f_knot) | (u >= 1.0)
    if np.any(above):
        with np.errstate(divide="ignore"):
            width = np.exp(np.log1p(-u[above]) - log_height)
        out[above] = edge - width
    return np.clip(out, 0.0, edge)


class MixingDensity:
    """Common interface. Subclasses fill in the log-space pieces."""

    family: str
    k: int

    @property
    def log_knot(self) -> float:
        return -float(self.k) ** 2

    @property
    def log_edge(self) -> float:
        return -float(self.k)

    @property
    def knot(self) -> float:
        return math.exp(self.log_knot)

    @property
    def edge(self) -> float:
        return math.exp(self.log_edge)

    def log_pdf_logt(self, log_t):
        raise NotImplementedError

    def log_pdf(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError("density is evaluated at t > 0 only")
        with np.errstate(divide="ignore"):
            out = self.log_pdf_logt(np.log(t))
        return float(out) if out.ndim == 0 else out

    def density(self, t):
        out = np.exp(self.log_pdf(t))
        return float(out) if np.ndim(out) == 0 else out

    def cdf(self, t):
        raise NotImplementedError

    def tail_mass(self, x):
        """Mass of ``(x, inf)``, computed without the ``1 - cdf`` cancellation."""
        raise NotImplementedError

    def log_mean(self) -> float:
        raise NotImplementedError

    def log_tail_mass(self, x: float) -> float:
        """log of :meth:`tail_mass`; exact in logs for ``x`` at or above the knot,
        where the flat level alone is left (its height ``e^{-e^k}`` underflows
        quickly)."""
        x = float(x)
        if x >= self.edge:
            return -math.inf
        if x >= self.knot:
            width = self.edge - x
            return self._log_outer_height + math.log(width) if width > 0 else -math.inf
        m = self.tail_mass(x)
        return math.log(m) if m > 0 else -math.inf

    @property
    def _log_outer_height(self) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        return math.exp(self.log_mean())

    def ppf(self, u):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        """Exact inverse-CDF draws."""
        u = 1.0 - rng.random(size)  # (0, 1], keeps draws off 0
        return self.ppf(u)


@dataclass(frozen=True)
class TwoLevelDensity(MixingDensity):
    k: int
    family: str = "two_level"

    @property
    def log_t1(self) -> float:
        k = float(self.k)
        # log(e^{k^2} - e^{-e^k - k + k^2}) = k^2 + log(1 - e^{-(e^k + k)})
        return k * k + float(_log1mexp(math.exp(k) + k))

    @property
    def log_t2(self) -> float:
        return -math.exp(self.k)

    @property
    def _log_outer_height(self) -> float:
        return self.log_t2

    @property
    def log_inner_height(self) -> float:
        return float(np.logaddexp(self.log_t1, self.log_t2))

    def log_pdf_logt(self, log_t):
        log_t = np.asarray(log_t, dtype=float)
        out = np.where(log_t <= self.log_knot, self.log_inner_height, self.log_t2)
        return np.where(log_t <= self.log_edge, out, -np.inf)

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, None)
        h1 = math.exp(self.log_inner_height)
        t2 = math.exp(self.log_t2)
        knot = self.knot
        inner = h1 * np.minimum(t, knot)
        outer = t2 * np.clip(t - knot, 0.0, self.edge - knot)
        out = np.where(t >= self.edge, 1.0, inner + outer)
        return float(out) if out.ndim == 0 else out

    def tail_mass(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, None)
        t2 = math.exp(self.log_t2)
        knot, edge = self.knot, self.edge
        h1 = math.exp(self.log_inner_height)
        out = np.where(
            x >= knot,
            t2 * np.clip(edge - x, 0.0, None),
            h1 * (knot - x) + t2 * (edge - knot),
        )
        return float(out) if out.ndim == 0 else out

    def log_mean(self) -> float:
        # T1 e^{-2k^2}/2 + T2 e^{-2k}/2
        k = float(self.k)
        return float(np.logaddexp(self.log_t1 - 2 * k * k, self.log_t2 - 2 * k) - LOG2)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        log_h1 = self.log_inner_height
        f_knot = math.exp(log_h1 + self.log_knot)
        inner = u * math.exp(-log_h1)
        # above the knot invert from the right: 1 - F(t) = T2 (e^{-k} - t)
        out = _invert_from_right(u, f_knot, inner, self.edge, self.log_t2)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PiecewiseLinearDensity(MixingDensity):
    k: int
    family: str = "piecewise_linear"

    @property
    def log_t(self) -> float:
        k = float(self.k)
        ek = math.exp(k)
        return k * k + math.log(2.0 - 2.0 * math.exp(-ek - k) + math.exp(-ek - k * k))

    @property
    def log_flat(self) -> float:
        return -math.exp(self.k)

    @property
    def _log_outer_height(self) -> float:
        return self.log_flat

    def log_pdf_logt(self, log_t):
        log_t = np.asarray(log_t, dtype=float)
        r = np.exp(np.minimum(log_t - self.log_knot, 0.0))  # t / knot on the linear piece
        with np.errstate(divide="ignore"):
            lin = np.logaddexp(self.log_t + np.log1p(-r), self.log_flat + np.log(r))
        out = np.where(log_t <= self.log_knot, lin, self.log_flat)
        return np.where(log_t <= self.log_edge, out, -np.inf)

    def _consts(self):
        knot = self.knot
        c = math.exp(self.log_t + self.log_knot)  # knot * T
        e = math.exp(self.log_flat + self.log_knot)  # knot * e^{-e^k}
        return knot, c, e

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, None)
        knot, c, e = self._consts()
        s = np.minimum(t, knot) / knot if knot > 0 else np.zeros_like(t)
        lin = c * s - (c - e) * s**2 / 2.0
        flat = math.exp(self.log_flat) * np.clip(t - knot, 0.0, self.edge - knot)
        out = np.where(t >= self.edge, 1.0, lin + flat)
        return float(out) if out.ndim == 0 else out

    def tail_mass(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, None)
        knot, c, e = self._consts()
        flat_h = math.exp(self.log_flat)
        s = np.minimum(x, knot) / knot if knot > 0 else np.zeros_like(x)
        # mass of the linear piece on (x, knot]
        lin_tail = (c - e) / 2.0 * (1.0 - s) ** 2 + e * (1.0 - s)
        out = np.where(
            x >= knot,
            flat_h * np.clip(self.edge - x, 0.0, None),
            lin_tail + flat_h * (self.edge - knot),
        )
        return float(out) if out.ndim == 0 else out

    def log_mean(self) -> float:
        # knot^2 (T/6 + E/3) + E (e^{-2k} - knot^2) / 2
        k = float(self.k)
        lk2 = 2.0 * self.log_knot
        lin = np.logaddexp(self.log_t - math.log(6.0), self.log_flat - math.log(3.0)) + lk2
        if k == 0:
            return float(lin)
        flat = self.log_flat - LOG2 + (-2.0 * k) + float(_log1mexp(2.0 * k * k - 2.0 * k))
        return float(np.logaddexp(lin, flat))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        knot, c, e = self._consts()
        f_knot = (c + e) / 2.0
        disc = np.sqrt(np.clip(c * c - 2.0 * (c - e) * np.minimum(u, f_knot), 0.0, None))
        inner = knot * 2.0 * u / (c + disc)
        out = _invert_from_right(u, f_knot, inner, self.edge, self.log_flat)
        return float(out) if out.ndim == 0 else out


def mixing_density(family: str, k: int) -> MixingDensity:
    if k < 0:
        raise ValueError("block index k must be >= 0")
    if family == "two_level":
        return TwoLevelDensity(int(k))
    if family == "piecewise_linear":
        return PiecewiseLinearDensity(int(k))
    raise ValueError(f"unknown mixing family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class ConditionCheck:
    """Outcome of the three mixing conditions for one k.

    Margins are log-scale differences ``log(value) - log(bound)`` with the sign
    arranged so that a nonnegative margin means the condition holds.
    """

    k: int
    mix1_margin: float
    mix2_margin: float
    mix3_margin: float
    mix1: bool
    mix2: bool
    mix3: bool

    @property
    def passed(self) -> bool:
        return self.mix1 and self.mix2 and self.mix3


def _holds(margin, scale):
    # equality is attained by construction for mix1, so allow rounding slack
    return margin >= -1e-12 * max(1.0, abs(scale))


def verify_conditions(family, k_range, c=(1.0, 1.0, 1.0), grid_points=1024) -> list[ConditionCheck]:
    """Check the three mixing conditions for each k in ``k_range``.

    ``family`` is a family name or a callable ``k -> MixingDensity``. The
    lower-bound condition is checked on ``grid_points`` log-spaced points of
    ``[e^{-k^2}, e^{-k}]`` plus both endpoints. Failures are reported, never
    raised.
    """
    make = family if callable(family) else (lambda k: mixing_density(family, k))
    c1, c2, c3 = c
    report = []
    for k in k_range:
        g = make(k)
        lo, hi = -float(k) ** 2, -float(k)
        log_grid = np.concatenate([[lo, hi], np.linspace(lo, hi, grid_points)])
        min_log_g = float(np.min(g.log_pdf_logt(log_grid)))
        bound1 = -c1 * math.exp(k)
        m1 = min_log_g - bound1

        bound2 = math.log(4.0) - c2 * k * k
        m2 = bound2 - g.log_mean()

        bound3 = -c3 * math.exp(k)
        m3 = bound3 - g.log_tail_mass(math.exp(lo))

        report.append(
            ConditionCheck(
                k=int(k),
                mix1_margin=m1,
                mix2_margin=m2,
                mix3_margin=m3,
                mix1=_holds(m1, bound1),
                mix2=_holds(m2, bound2),
                mix3=_holds(m3, bound3),
            )
        )
    return report
