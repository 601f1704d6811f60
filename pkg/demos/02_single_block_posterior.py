"""One block, two routes: Gibbs sampling against one-dimensional quadrature.

Run with ``python demos/02_single_block_posterior.py``.
"""
# %%
import math

import numpy as np

from blockprior.blocks import build_scheme
from blockprior.gibbs import BlockPriorConfig, ChainConfig, oracle_block_posterior, run_chains
from blockprior.model import SignalSpec, gen_data, make_truth
from blockprior.numerics import make_stream

# %% [markdown]
# Coordinates 2..6 form block k = 1. Given its scale A, the block is
# Gaussian, so integrating A out numerically gives the exact posterior mean.

# %%
n, k = 100, 1
truth = make_truth(SignalSpec(1.0), 6)
data = gen_data(truth, n, 3)
scheme = build_scheme("exponential", 6)
sl = scheme.slices()[k]
post = oracle_block_posterior(data.x[sl], k, n)
print("observations     ", np.round(data.x[sl], 4))
print("quadrature mean  ", np.round(post.mean, 4))
print("shrinkage factor ", round(post.shrinkage, 4))

# %% [markdown]
# The same block by Gibbs sampling, 100 chains started at A = e^{-k}/2.
# Averaging the conditional means w(A) X over draws cuts the Monte Carlo noise.

# %%
cfg = BlockPriorConfig(scheme, passthrough_first=k)
chain = ChainConfig(sweeps=2000, burn_in=200, estimator="posterior_mean", keep_draws=True, init_scale="mid")
rngs = [make_stream(1, i) for i in range(100)]
est, diag, _ = run_chains(np.tile(data.x, (100, 1)), n, cfg, chain, rngs, rao_blackwell=True)
gibbs_mean = est[:, sl].mean(axis=0)
print("Gibbs mean       ", np.round(gibbs_mean, 4))
print("max relative gap ", float(np.max(np.abs(gibbs_mean / post.mean - 1))))

# %%
a = diag["a_draws"][:, :, k].ravel()
for q in (0.1, 0.5, 0.9):
    print(f"A quantile {q}: Gibbs {np.quantile(a, q):.4f}  quadrature {np.interp(q, np.cumsum(post.weights), post.nodes):.4f}")
print("edge of the support e^{-k} =", math.exp(-k))
