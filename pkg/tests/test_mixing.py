import math

import mpmath
import numpy as np
import pytest
from conftest import ks_stat
from hypothesis import given, settings
from hypothesis import strategies as st

from blockprior.mixing import FAMILIES, MixingDensity, TwoLevelDensity, mixing_density, verify_conditions
from blockprior.numerics import make_stream

mpmath.mp.dps = 40


def _mp_density(family, k):
    """Closed-form density in extended precision (independent of the module)."""
    k = mpmath.mpf(k)
    knot, edge = mpmath.e ** (-(k**2)), mpmath.e ** (-k)
    flat = mpmath.e ** (-mpmath.e**k)
    if family == "two_level":
        t1 = mpmath.e ** (k**2) - mpmath.e ** (-mpmath.e**k - k + k**2)
        return (lambda t: t1 + flat if t <= knot else (flat if t <= edge else 0)), knot, edge
    top = 2 * mpmath.e ** (k**2) - 2 * mpmath.e ** (-mpmath.e**k + k**2 - k) + flat
    return (lambda t: top + (flat - top) * t / knot if t <= knot else (flat if t <= edge else 0)), knot, edge


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("k", range(0, 13))
def test_normalization_by_quadrature(family, k):
    f, knot, edge = _mp_density(family, k)
    total = mpmath.quad(f, [0, knot]) + mpmath.quad(f, [knot, edge])
    assert abs(float(total) - 1.0) < 1e-10
    g = mixing_density(family, k)
    assert g.cdf(g.edge) == 1.0


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_density_cdf_mean_against_mpmath(family, k):
    f, knot, edge = _mp_density(family, k)
    g = mixing_density(family, k)
    for t in (float(knot) * 0.3, float(knot) * (1 - 1e-3), float(knot) * 1.5, float(edge) * 0.9):
        assert g.density(t) == pytest.approx(float(f(mpmath.mpf(t))), rel=1e-10)
        ref = mpmath.quad(f, [0, min(mpmath.mpf(t), knot)]) + (
            mpmath.quad(f, [knot, mpmath.mpf(t)]) if t > knot else 0
        )
        assert g.cdf(t) == pytest.approx(float(ref), rel=1e-10, abs=1e-300)
    mean = mpmath.quad(lambda t: t * f(t), [0, knot]) + mpmath.quad(lambda t: t * f(t), [knot, edge])
    assert g.mean() == pytest.approx(float(mean), rel=1e-10)


def test_two_level_mean_formula():
    for k in range(1, 11):
        g = TwoLevelDensity(k)
        formula = math.exp(g.log_t1 - 2 * k * k) / 2 + math.exp(g.log_t2 - 2 * k) / 2
        assert g.mean() == pytest.approx(formula, rel=1e-13)


@pytest.mark.parametrize("family", FAMILIES)
def test_mean_bounds(family):
    for k in range(1, 11):
        g = mixing_density(family, k)
        assert g.mean() <= math.exp(-k)
        assert g.mean() <= 4 * math.exp(-k * k)


@pytest.mark.parametrize("family", FAMILIES)
def test_support_and_continuity(family):
    for k in range(1, 12):
        g = mixing_density(family, k)
        assert g.log_pdf(math.exp(-k) * 1.0001) == -math.inf
        assert math.isfinite(g.log_pdf(math.exp(-k) * 0.9999))
    pl = mixing_density("piecewise_linear", 2)
    assert pl.density(pl.knot) == pytest.approx(math.exp(-math.exp(2)), rel=1e-9)
    with pytest.raises(ValueError):
        pl.density(0.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_ppf_endpoints(family):
    for k in range(1, 8):
        g = mixing_density(family, k)
        assert g.ppf(0.0) == 0.0
        assert g.ppf(1.0) == g.edge


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_sampler_ks(family, k):
    g = mixing_density(family, k)
    draws = g.sample(make_stream(17, k), size=10**5)
    assert draws.min() > 0 and draws.max() <= g.edge
    assert ks_stat(draws, g.cdf) < 0.006


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 12), u=st.floats(1e-12, 1.0 - 1e-12), fam=st.sampled_from(FAMILIES))
def test_ppf_inverts_cdf(k, u, fam):
    g = mixing_density(fam, k)
    t = g.ppf(u)
    assert 0 < t <= g.edge
    assert g.cdf(t) == pytest.approx(u, rel=1e-7, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 12), frac=st.floats(0.0, 1.0), fam=st.sampled_from(FAMILIES))
def test_tail_mass_complements_cdf(k, frac, fam):
    g = mixing_density(fam, k)
    x = frac * g.edge
    assert g.tail_mass(x) + g.cdf(x) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
def test_conditions_hold(family):
    checks = verify_conditions(family, range(1, 11))
    assert all(c.passed for c in checks)
    assert all(min(c.mix1_margin, c.mix2_margin, c.mix3_margin) > -1e-9 for c in checks)


class _Stretched(MixingDensity):
    """A density rescaled horizontally so that its support ends at e^{-k/2}.

    Tail masses come from quadrature of the stretched density, not from the
    closed forms, so the mutation is checked by an independent route.
    """

    def __init__(self, k):
        self.k = k
        self.family = "stretched"
        self.base = TwoLevelDensity(k)
        self.log_s = k - k / 2.0

    @property
    def log_edge(self):
        return -self.k / 2.0

    def log_pdf_logt(self, log_t):
        return self.base.log_pdf_logt(np.asarray(log_t) - self.log_s) - self.log_s

    def log_mean(self):
        return self.base.log_mean() + self.log_s

    def log_tail_mass(self, x):
        s = mpmath.e ** mpmath.mpf(self.log_s)
        f = lambda t: mpmath.e ** float(self.log_pdf_logt(float(mpmath.log(t))))
        knot = self.base.knot * s
        pts = sorted({mpmath.mpf(x), knot, mpmath.e ** mpmath.mpf(self.log_edge)})
        pts = [p for p in pts if p >= x]
        return float(mpmath.log(sum(mpmath.quad(f, [a, b]) for a, b in zip(pts[:-1], pts[1:]))))


def test_widened_support_breaks_tail_condition():
    checks = verify_conditions(_Stretched, range(1, 6))
    assert all(not c.mix3 and c.mix3_margin < 0 for c in checks)
    # the untouched density passes the same check
    assert all(c.mix3 for c in verify_conditions("two_level", range(1, 6)))


def test_bad_family_and_k():
    with pytest.raises(ValueError):
        mixing_density("cubic", 1)
    with pytest.raises(ValueError):
        mixing_density("two_level", -1)
