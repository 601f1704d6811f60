"""Adaptive block priors for the Gaussian sequence model.

Truth and data generation (:mod:`.model`), block partitions
(:mod:`.blocks`), the mixing densities of the block scales
(:mod:`.mixing`), the Gibbs sampler (:mod:`.gibbs`), comparison priors
(:mod:`.baselines`) and the simulation harness (:mod:`.harness`).
"""
__version__ = "0.1.0"

from .blocks import BlockScheme, block_of, build_scheme
from .mixing import FAMILIES, MixingDensity, PiecewiseLinearDensity, TwoLevelDensity, mixing_density, verify_conditions
from .model import Dataset, SignalSpec, TruthSequence, gen_data, l2_risk, make_truth, minimax_rate, sobolev_norm_sq
from .gibbs import (
    BlockPriorConfig,
    ChainConfig,
    GibbsState,
    block_prior,
    gibbs_sweep,
    init_state,
    oracle_block_posterior,
    run_chain,
    run_chains,
)
from .baselines import RGPConfig, SieveConfig
from .harness import ExperimentSpec, RiskTable, emit, parse_csv, run_experiment, verify_suite
