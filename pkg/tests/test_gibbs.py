import math

import mpmath
import numpy as np
import pytest
from conftest import ks_stat
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from blockprior.blocks import build_scheme
from blockprior.gibbs import (
    BlockPriorConfig,
    ChainConfig,
    block_prior,
    gibbs_sweep,
    init_state,
    mixture_weights,
    oracle_block_posterior,
    read_trace,
    run_chain,
    run_chains,
    sample_A_given_theta,
    sample_theta_given_A,
    sample_trunc_invgamma,
    write_trace,
)
from blockprior.mixing import mixing_density
from blockprior.model import SignalSpec, gen_data, l2_risk, make_truth
from blockprior.numerics import make_stream

mpmath.mp.dps = 30


def trunc_invgamma_cdf(a, b, s):
    """P(T <= t) for T ~ IG(a, b) restricted to (0, s]."""
    q_s = special.gammaincc(a, b / s)
    return lambda t: np.where(t >= s, 1.0, special.gammaincc(a, b / np.maximum(t, 1e-300)) / q_s)


def test_theta_update_direct_values(rng):
    x = np.array([1.0, -2.0, 0.5])
    mean = sample_theta_given_A(x, 0.01, 100, rng, z=np.zeros(3))
    np.testing.assert_allclose(mean, 0.5 * x, rtol=1e-15)
    one = sample_theta_given_A(x, 0.01, 100, rng, z=np.ones(3))
    np.testing.assert_allclose(one - mean, 1 / math.sqrt(200), rtol=1e-14)


def test_theta_update_limits(rng):
    x = np.array([3.0, -1.0])
    np.testing.assert_allclose(sample_theta_given_A(x, 1e12, 50, rng, z=np.zeros(2)), x, rtol=1e-10)
    assert np.max(np.abs(sample_theta_given_A(x, 1e-12, 50, rng, z=np.zeros(2)))) < 1e-9
    sd = sample_theta_given_A(np.zeros(2), 1e-12, 50, rng, z=np.ones(2))
    np.testing.assert_allclose(sd, math.sqrt(1e-12), rtol=1e-9)
    with pytest.raises(ValueError):
        sample_theta_given_A(x, 0.0, 50, rng)


def test_theta_update_stationary_mean():
    rng = make_stream(5, 0)
    x = np.array([0.4, -0.3, 0.2, 0.1])
    a, n = 0.02, 100
    w = n * a / (1 + n * a)
    draws = np.array([sample_theta_given_A(x, a, n, rng) for _ in range(10**4)])
    sd = math.sqrt(1 / (1 / a + n) / 10**4)
    assert np.all(np.abs(draws.mean(axis=0) - w * x) < 3 * sd * 1.5)


def _lambda1_by_quadrature(a, b, k):
    g = mixing_density("two_level", k)
    t1, t2 = mpmath.e ** mpmath.mpf(g.log_t1), mpmath.e ** mpmath.mpf(g.log_t2)
    f = lambda t: t ** (-a - 1) * mpmath.e ** (-b / t)
    i1 = mpmath.quad(f, [0, g.knot / 4, g.knot])
    i2 = mpmath.quad(f, [0, g.knot / 4, g.knot, g.edge])
    return float(t1 * i1 / (t1 * i1 + t2 * i2))


def test_mixture_weights_against_quadrature():
    lam1, lam2 = mixture_weights(5.5, 0.003, 2)
    assert lam1 == pytest.approx(_lambda1_by_quadrature(5.5, 0.003, 2), rel=1e-8)
    assert lam1 + lam2 == 1.0


@settings(max_examples=80, deadline=None)
@given(a=st.floats(0.5, 400.0), log_b=st.floats(-40.0, 40.0), k=st.integers(2, 30))
def test_mixture_weights_are_probabilities(a, log_b, k):
    lam1, lam2 = mixture_weights(a, math.exp(log_b), k)
    assert 0.0 <= lam1 <= 1.0 and 0.0 <= lam2 <= 1.0
    assert lam1 + lam2 == pytest.approx(1.0, abs=1e-15)


def test_mixture_weights_limits():
    assert mixture_weights(3.0, 1e6, 3)[0] < 1e-300
    g = mixing_density("two_level", 3)
    lam1, _ = mixture_weights(3.0, 0.0, 3)
    assert lam1 == pytest.approx(1 / (1 + math.exp(g.log_t2 - g.log_t1)), rel=1e-15)


def test_trunc_invgamma_plain_mean():
    draws = sample_trunc_invgamma(3.0, 2.0, math.inf, make_stream(6, 0), size=10**5)
    assert draws.mean() == pytest.approx(1.0, rel=0.02)


def test_trunc_invgamma_ks_and_support():
    a, b, s = 5.5, 0.01, math.exp(-2)
    draws = sample_trunc_invgamma(a, b, s, make_stream(7, 0), size=10**5)
    assert draws.max() <= s and draws.min() > 0
    assert ks_stat(draws, trunc_invgamma_cdf(a, b, s)) < 0.006


def test_trunc_invgamma_far_tail():
    # b/s far beyond the bulk: the rejection branch draws Gamma(a) above b/s
    a, b, s = 3.0, 50.0, 0.05
    draws = sample_trunc_invgamma(a, b, s, make_stream(8, 0), size=20000)
    assert draws.max() <= s
    # y = b / t is then close to x0 + Exp(1): check the mean excess
    y = b / draws
    assert np.mean(y - b / s) == pytest.approx(1.0, rel=0.05)


def test_trunc_invgamma_zero_b():
    out = sample_trunc_invgamma(3.0, 0.0, 0.1, make_stream(9, 0), size=5)
    assert np.all(out > 0) and np.all(out < 1e-300)
    with pytest.raises(ValueError):
        sample_trunc_invgamma(0.0, 1.0, 1.0, make_stream(9, 0))


def test_scale_update_support_and_zero_block():
    rng = make_stream(10, 0)
    for k in (1, 2, 3, 4):
        for scale in (0.0, 1e-3, 0.3, 5.0):
            theta = np.full(int(math.floor(math.exp(k + 1)) - int(math.floor(math.exp(k)))), scale)
            for _ in range(20):
                a = sample_A_given_theta(theta, k, rng)
                assert 0 < a <= math.exp(-k)
    with pytest.raises(ValueError):
        sample_A_given_theta(np.ones(2), 1, rng)


def test_scale_update_component_frequencies():
    # P(A <= knot) = lambda1 + lambda2 * P(IG truncated at e^{-k} lands below the knot)
    k = 2
    theta = np.full(13, 0.01)
    a_k, b_k = 13 / 2 - 1, 0.5 * float(theta @ theta)
    lam1, lam2 = mixture_weights(a_k, b_k, k)
    g = mixing_density("two_level", k)
    inner_given_outer = special.gammaincc(a_k, b_k / g.knot) / special.gammaincc(a_k, b_k / g.edge)
    p = lam1 + lam2 * inner_given_outer
    rng = make_stream(11, 0)
    m = 10**5
    hits = sum(sample_A_given_theta(theta, k, rng) <= g.knot for _ in range(m))
    assert abs(hits - m * p) < 3 * math.sqrt(m * p * (1 - p))


def _data(alpha=1.0, n=256, seed=1):
    return gen_data(make_truth(SignalSpec(alpha), n), n, seed)


def test_sweep_respects_l1_ball():
    d = _data(alpha=0.5, n=256)
    cfg = block_prior("mBLOCK", 256, constraint=30.0)
    rng = make_stream(12, 0)
    state = init_state(d, cfg, rng, init_scale="mid")
    for _ in range(20):
        state = gibbs_sweep(state, d, cfg, rng)
        assert np.abs(state.theta).sum() <= 30.0 * (1 + 1e-12)
    free = gibbs_sweep(init_state(d, block_prior("BLOCK", 256)), d, block_prior("BLOCK", 256), rng)
    assert free.sweep_count == 1


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31), bound=st.floats(2.0, 40.0))
def test_constrained_chains_stay_in_ball(seed, bound):
    d = _data(alpha=0.5, n=64, seed=seed)
    cfg = block_prior("mBLOCK", 64, constraint=bound)
    chain = ChainConfig(sweeps=6, burn_in=1, keep_draws=True, init_scale="mid")
    _, _, draws = run_chains(d.x, 64, cfg, chain, [make_stream(seed, 1)])
    assert np.all(np.abs(draws).sum(axis=2) <= bound * (1 + 1e-12))


def test_sweeps_are_deterministic():
    d = _data()
    cfg = block_prior("BLOCK", 256)
    out = []
    for _ in range(2):
        rng = make_stream(13, 0)
        s = init_state(d, cfg, rng)
        for _ in range(5):
            s = gibbs_sweep(s, d, cfg, rng)
        out.append(np.concatenate([s.theta, np.nan_to_num(s.a)]))
    assert out[0].tobytes() == out[1].tobytes()


def test_init_needs_generator_for_marginal():
    with pytest.raises(ValueError):
        init_state(_data(), block_prior("BLOCK", 256), init_scale="marginal")
    with pytest.raises(ValueError):
        ChainConfig(init_scale="random")
    with pytest.raises(ValueError):
        ChainConfig(sweeps=10, burn_in=10)


def test_batched_chains_match_single_chains():
    d = _data(n=128)
    cfg = block_prior("BLOCK", 128)
    chain = ChainConfig(sweeps=8, burn_in=2)
    rngs = [make_stream(14, i) for i in range(3)]
    est, _, _ = run_chains(np.tile(d.x, (3, 1)), 128, cfg, chain, rngs)
    for i in range(3):
        single = run_chain(d, cfg, chain, make_stream(14, i)).estimate
        assert single.tobytes() == est[i].tobytes()


def test_risk_shrinks_with_n():
    truth = make_truth(SignalSpec(1.0), 512)
    risks = []
    for n in (64, 4096, 10**6):
        d = gen_data(truth, n, 3)
        d = type(d)(n=n, x=d.x[:512], truth=truth)
        cfg = BlockPriorConfig(build_scheme("exponential", 512))
        chain = ChainConfig(sweeps=30, burn_in=10, estimator="posterior_mean")
        risks.append(l2_risk(run_chain(d, cfg, chain, make_stream(15, n)).estimate, truth))
    assert risks[0] > risks[1] > risks[2]


def test_oracle_point_mass_is_conjugate():
    x = np.array([0.3, -0.1, 0.2, 0.05, -0.4])
    post = oracle_block_posterior(x, 1, 100, point_mass=0.02)
    np.testing.assert_allclose(post.mean, 100 * 0.02 / (1 + 100 * 0.02) * x, rtol=1e-15)


def _mp_block_posterior(x, k, n):
    g = mixing_density("two_level", k)
    ss, nk = mpmath.mpf(float(x @ x)), len(x)
    h_in = mpmath.e ** mpmath.mpf(g.log_inner_height)
    h_out = mpmath.e ** mpmath.mpf(g.log_t2)
    lik = lambda t: (t + mpmath.mpf(1) / n) ** (-mpmath.mpf(nk) / 2) * mpmath.e ** (-ss / (2 * (t + mpmath.mpf(1) / n)))
    knot, edge = mpmath.mpf(g.knot), mpmath.mpf(g.edge)
    inner = lambda f: mpmath.quad(lambda t: h_in * f(t), [0, knot / 1e6, knot / 1e3, knot])
    outer = lambda f: mpmath.quad(lambda t: h_out * f(t), [knot, (knot + edge) / 2, edge]) if edge > knot else 0
    z = inner(lik) + outer(lik)
    shrink = (inner(lambda t: lik(t) * n * t / (1 + n * t)) + outer(lambda t: lik(t) * n * t / (1 + n * t))) / z

    def cdf(q):
        lo = mpmath.quad(lambda t: h_in * lik(t), [0, min(q, knot) / 1e3, min(q, knot)])
        if q > knot:
            lo += mpmath.quad(lambda t: h_out * lik(t), [knot, q])
        return lo / z

    return z, shrink, cdf


@pytest.mark.parametrize("k,n", [(1, 100), (2, 256), (3, 100)])
def test_oracle_against_extended_precision(k, n):
    rng = make_stream(16, k)
    size = int(math.floor(math.exp(k + 1))) - int(math.floor(math.exp(k)))
    x = make_truth(SignalSpec(1.0), 60).coeffs[int(math.exp(k)) - 1 :][:size] + rng.standard_normal(size) / math.sqrt(n)
    post = oracle_block_posterior(x, k, n)
    z, shrink, _ = _mp_block_posterior(x, k, n)
    assert post.shrinkage == pytest.approx(float(shrink), rel=1e-6)
    log_ev = float(mpmath.log(z)) - 0.5 * size * math.log(2 * math.pi)
    assert post.log_evidence == pytest.approx(log_ev, rel=1e-7)
    assert post.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_oracle_cdf_against_extended_precision():
    x = np.array([0.2, -0.15, 0.1, 0.05, -0.12])
    post = oracle_block_posterior(x, 1, 100)
    _, _, cdf = _mp_block_posterior(x, 1, 100)
    for q in (0.01, 0.05, 0.1, 0.2, 0.3):
        assert post.cdf(q) == pytest.approx(float(cdf(mpmath.mpf(q))), abs=1e-4)
    draws = post.sample(make_stream(17, 0), size=10**5)
    assert ks_stat(draws, post.cdf) < 0.006


def test_oracle_handles_large_blocks():
    # knot far below the double range: the oracle must stay finite
    x = make_stream(18, 0).standard_normal(300) * 1e-2
    post = oracle_block_posterior(x, 30, 512)
    assert np.isfinite(post.log_evidence) and 0 <= post.shrinkage <= 1


def test_trace_round_trip(tmp_path):
    d = _data(n=64)
    chain = ChainConfig(sweeps=12, burn_in=4, keep_draws=True)
    res = run_chain(d, block_prior("BLOCK", 64), chain, make_stream(19, 0))
    path = tmp_path / "trace.csv"
    write_trace(path, res.draws, start_sweep=4)
    sweeps, draws = read_trace(path)
    assert sweeps.tolist() == list(range(4, 12))
    assert draws.tobytes() == res.draws.tobytes()
    assert path.read_text().splitlines()[0].startswith("sweep,theta_1,theta_2")
