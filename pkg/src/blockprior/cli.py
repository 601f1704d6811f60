"""Command line: ``simulate``, ``sample``, ``verify`` and ``oracle``.

Settings for ``simulate`` come from, in increasing priority: built-in
defaults, ``--config FILE`` (flat ``key = value`` lines), command-line
flags, and finally the ``BLOCKPRIOR_SEED`` environment variable for the seed.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from .gibbs import ChainConfig, block_prior, oracle_block_posterior, run_chain, write_trace
from .harness import (
    METHODS,
    ConfigError,
    ExperimentSpec,
    _method_stream,
    _trial_data,
    _truncate,
    _truths,
    emit,
    load_config,
    run_experiment,
    spec_from_mapping,
    verify_suite,
)
from .model import l2_risk

SEED_ENV = "BLOCKPRIOR_SEED"


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockprior", description="Block prior simulations and checks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a risk table")
    s.add_argument("--config", help="flat key = value file")
    s.add_argument("--alpha", type=_csv_list, help="smoothness values, comma separated")
    s.add_argument("--n", type=_csv_list, help="sample sizes, comma separated")
    s.add_argument("--methods", type=_csv_list, help=f"subset of {','.join(METHODS)}")
    s.add_argument("--trials", help="trial count, or 'adaptive'")
    s.add_argument("--seed", help="master seed (64-bit)")
    s.add_argument("--estimator", choices=("single_draw", "posterior_mean"))
    s.add_argument("--sweeps", type=int)
    s.add_argument("--burn-in", type=int, dest="burn_in")
    s.add_argument("--workers", type=int)
    s.add_argument("--format", choices=("csv", "markdown"), default="csv")
    s.add_argument("--timing", action="store_true", help="fill the seconds column (output no longer byte-stable)")
    s.add_argument("--out", help="output file (default stdout)")

    c = sub.add_parser("sample", help="run one chain on one dataset")
    c.add_argument("--method", default="BLOCK", choices=("BLOCK", "mBLOCK", "cBLOCK16", "cBLOCK32"))
    c.add_argument("--alpha", type=float, default=1.0)
    c.add_argument("--n", type=int, default=256)
    c.add_argument("--trial", type=int, default=0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--sweeps", type=int, default=2000)
    c.add_argument("--burn-in", type=int, default=500, dest="burn_in")
    c.add_argument("--estimator", choices=("single_draw", "posterior_mean"), default="single_draw")
    c.add_argument("--init", choices=("marginal", "mid", "inner"), default="marginal")
    c.add_argument("--dump", help="write retained draws here (CSV: sweep, theta_1..theta_J)")

    v = sub.add_parser("verify", help="run the verification suite")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    v.add_argument("--seed", type=int, default=0)

    o = sub.add_parser("oracle", help="quadrature posterior of one block")
    o.add_argument("--k", type=int, required=True, help="block index")
    o.add_argument("--n", type=int, required=True, help="sample size")
    o.add_argument("--x", type=_csv_list, help="block observations, comma separated")
    o.add_argument("--alpha", type=float, default=1.0, help="simulate the block when --x is absent")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--panels", type=int, default=2000)
    return p


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} is not an integer: {raw!r}") from None


def _simulate(args) -> int:
    values = load_config(args.config) if args.config else {}
    flags = {
        "alphas": args.alpha,
        "ns": args.n,
        "methods": args.methods,
        "trials": args.trials,
        "seed": args.seed,
        "estimator": args.estimator,
        "sweeps": args.sweeps,
        "burn_in": args.burn_in,
        "workers": args.workers,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    env = _env_seed()
    if env is not None:
        values["seed"] = env
    spec = spec_from_mapping(values)
    progress = None
    if args.verbose:
        progress = lambda c: logging.info("%s alpha=%g n=%d median=%.4f", c.method, c.alpha, c.n, c.median)
    table = run_experiment(spec, progress=progress)
    text = emit(table, args.format, timing=args.timing)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if all(c.ok for c in table.cells()) else 1


def _sample(args) -> int:
    spec = ExperimentSpec(alphas=(args.alpha,), ns=(args.n,), methods=(args.method,), master_seed=args.seed)
    truth = _truncate(_truths(spec)[spec.alphas[0]], args.n)
    data = _trial_data(spec, truth, spec.alphas[0], args.n, args.trial)
    rng = _method_stream(spec, args.method, spec.alphas[0], args.n, args.trial)
    chain = ChainConfig(
        sweeps=args.sweeps,
        burn_in=args.burn_in,
        estimator=args.estimator,
        keep_draws=bool(args.dump),
        init_scale=args.init,
    )
    res = run_chain(data, block_prior(args.method, args.n), chain, rng)
    if args.dump:
        write_trace(args.dump, res.draws, start_sweep=args.burn_in)
    d = res.diagnostics
    print(f"method={args.method} alpha={args.alpha:g} n={args.n} trial={args.trial} seed={args.seed}")
    print(f"l2_risk={l2_risk(res.estimate, truth)!r}")
    print(f"tail_rejection={d['tail_rejection']} constraint_fallback={d['constraint_fallback']}")
    a_mean = d["a_mean"]
    print("a_mean=" + ",".join("pass" if math.isnan(v) else f"{v:.6g}" for v in a_mean))
    return 0


def _oracle(args) -> int:
    from .blocks import build_scheme

    if args.x:
        x = np.array([float(v) for v in args.x])
    else:
        spec = ExperimentSpec(alphas=(args.alpha,), ns=(args.n,), methods=("BLOCK",), master_seed=args.seed)
        truth = _truncate(_truths(spec)[spec.alphas[0]], args.n)
        data = _trial_data(spec, truth, spec.alphas[0], args.n, 0)
        scheme = build_scheme("exponential", args.n)
        if not 0 <= args.k < scheme.n_blocks:
            raise ConfigError(f"block {args.k} does not exist for n={args.n}")
        x = data.x[scheme.slices()[args.k]]
    post = oracle_block_posterior(x, args.k, args.n, panels=args.panels)
    c = np.cumsum(post.weights)
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    quant = np.interp(qs, c, post.nodes)
    print(f"k={args.k} n={args.n} n_k={x.shape[0]} ||x||^2={float(x @ x)!r}")
    print(f"shrinkage={post.shrinkage!r}")
    print(f"log_evidence={post.log_evidence!r}")
    print("A_quantiles=" + ",".join(f"{q:g}:{v:.6g}" for q, v in zip(qs, quant)))
    print("posterior_mean=" + ",".join(repr(float(v)) for v in post.mean))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "simulate":
            return _simulate(args)
        if args.command == "sample":
            return _sample(args)
        if args.command == "verify":
            report = verify_suite(args.level, seed=args.seed)
            print(report.render())
            return 0 if report.passed else 1
        if args.command == "oracle":
            return _oracle(args)
    except (ConfigError, OSError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"blockprior: error: {exc}", file=sys.stderr)
        return 2
    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
