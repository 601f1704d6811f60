"""Simulation harness: risk tables, the verification suite and result files.

A cell is one ``(method, alpha, n)`` combination. Every cell of a given
``alpha`` shares one truth, and trial ``i`` of every method at ``(alpha, n)``
sees the same dataset, so methods are compared on paired data. Random
streams are derived from the master seed and a hash of the work item:

* truth signs   ``("truth", alpha)``
* trial data    ``("data", alpha, n, trial)``
* method noise  ``("method", method, alpha, n, trial)``

so the numbers do not depend on how trials are grouped or scheduled.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from . import __version__
from .baselines import (
    RGPConfig,
    SieveConfig,
    adaptive_sieve_posterior,
    fixed_sieve_posterior,
    log_laplace_marginal,
    rgpf_posterior,
    rgpg_chain,
)
from .blocks import build_scheme
from .gibbs import BlockPriorConfig, ChainConfig, block_prior, oracle_block_posterior, run_chains
from .mixing import FAMILIES, mixing_density, verify_conditions
from .model import Dataset, SignalSpec, TruthSequence, gen_data, l2_risk, make_truth, minimax_rate, tail_energy
from .numerics import derive_stream_id, make_stream

log = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "TABLE_METHODS",
    "ExperimentSpec",
    "CellResult",
    "RiskTable",
    "run_experiment",
    "emit",
    "parse_csv",
    "load_config",
    "spec_from_mapping",
    "ConfigError",
    "VerifyItem",
    "VerificationReport",
    "verify_suite",
    "single_block_agreement",
    "prior_mass_check",
    "sieve_mass_check",
]

METHODS = ("RGPF", "RGPG", "BLOCK", "mBLOCK", "cBLOCK16", "cBLOCK32", "SIEVE_F", "SIEVE_A")
TABLE_METHODS = METHODS[:6]
_BLOCK_METHODS = ("BLOCK", "mBLOCK", "cBLOCK16", "cBLOCK32")
CSV_FIELDS = ("method", "alpha", "n", "median", "mad", "trials", "seconds", "seed")


class ConfigError(ValueError):
    """Malformed experiment configuration."""


@dataclass(frozen=True)
class ExperimentSpec:
    """What to simulate.

    ``trials`` fixes the trial count; with ``adaptive_stop`` trials are added
    in rounds of 100, from ``min_trials`` up to ``max_trials``, until the
    bootstrap standard error of the median drops below ``stop_rel_se`` of
    the median. ``workers`` and ``batch`` only affect scheduling.
    """

    alphas: tuple = (0.5, 1.0, 1.5)
    ns: tuple = (256, 512)
    methods: tuple = TABLE_METHODS
    trials: int = 200
    master_seed: int = 0
    estimator: str = "single_draw"
    adaptive_stop: bool = False
    min_trials: int = 100
    max_trials: int = 1000
    stop_rel_se: float = 0.05
    sweeps: int = 2000
    burn_in: int = 500
    init_scale: str = "marginal"
    rgpg_sweeps: int = 50
    rgpg_burn_in: int = 25
    constraint: float = 30.0
    amplitude: float = 5.0
    workers: int = 1
    batch: int = 50

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "ns", tuple(int(v) for v in self.ns))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {list(METHODS)}")
        if not self.alphas or any(a <= 0 for a in self.alphas):
            raise ConfigError("alphas must be positive and nonempty")
        if not self.ns or any(v < 2 for v in self.ns):
            raise ConfigError("every n must be >= 2")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.adaptive_stop and not 1 <= self.min_trials <= self.max_trials:
            raise ConfigError("need 1 <= min_trials <= max_trials")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.estimator not in ("single_draw", "posterior_mean"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.workers < 1 or self.batch < 1:
            raise ConfigError("workers and batch must be >= 1")
        try:
            ChainConfig(sweeps=self.sweeps, burn_in=self.burn_in, init_scale=self.init_scale)
            ChainConfig(sweeps=self.rgpg_sweeps, burn_in=self.rgpg_burn_in)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def config_hash(self) -> str:
        """Hash of every field that can change a number (not the scheduling ones)."""
        d = asdict(self)
        d.pop("workers")
        d.pop("batch")
        blob = json.dumps(d, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class CellResult:
    method: str
    alpha: float
    n: int
    median: float
    mad: float
    trials: int
    seconds: float
    risks: np.ndarray | None = None
    error: str | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class RiskTable:
    rows: dict = field(default_factory=dict)  # (method, alpha, n) -> CellResult
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, key):
        method, alpha, n = key
        return self.rows[(method, float(alpha), int(n))]

    def median(self, method, alpha, n) -> float:
        return self[(method, alpha, n)].median

    def cells(self):
        return [self.rows[k] for k in sorted(self.rows, key=_cell_sort_key)]


def _cell_sort_key(key):
    method, alpha, n = key
    order = METHODS.index(method) if method in METHODS else len(METHODS)
    return (int(n), float(alpha), order, method)


def median_mad(risks):
    """Median and unscaled median absolute deviation."""
    risks = np.asarray(risks, dtype=float)
    med = float(np.median(risks))
    return med, float(np.median(np.abs(risks - med)))


# --------------------------------------------------------------------------
# running cells


def _truths(spec: ExperimentSpec):
    j_max = max(spec.ns)
    out = {}
    for alpha in spec.alphas:
        sig = SignalSpec(alpha=alpha, amplitude=spec.amplitude)
        rng = make_stream(spec.master_seed, derive_stream_id("truth", alpha))
        out[alpha] = make_truth(sig, j_max, rng)
    return out


def _truncate(truth: TruthSequence, n: int) -> TruthSequence:
    coeffs = truth.coeffs[:n].copy()
    coeffs.setflags(write=False)
    return TruthSequence(coeffs=coeffs, spec=truth.spec)


def _trial_data(spec, truth, alpha, n, trial) -> Dataset:
    seed_id = derive_stream_id("data", alpha, n, trial)
    d = gen_data(truth, n, make_stream(spec.master_seed, seed_id))
    d.meta.update(trial=trial, stream_id=seed_id)
    return d


def _method_stream(spec, method, alpha, n, trial):
    return make_stream(spec.master_seed, derive_stream_id("method", method, alpha, n, trial))


def _run_work(item):
    """One work item: a method on a contiguous range of trials of one cell."""
    spec, method, alpha, n, truth, trials = item
    t0 = time.perf_counter()
    data = [_trial_data(spec, truth, alpha, n, t) for t in trials]
    rngs = [_method_stream(spec, method, alpha, n, t) for t in trials]
    diag = {}
    if method in _BLOCK_METHODS:
        prior = block_prior(method, n, constraint=spec.constraint)
        chain = ChainConfig(
            sweeps=spec.sweeps, burn_in=spec.burn_in, estimator=spec.estimator, init_scale=spec.init_scale
        )
        x = np.stack([d.x for d in data])
        est, d_chain, _ = run_chains(x, n, prior, chain, rngs)
        diag = {key: d_chain[key] for key in ("tail_rejection", "constraint_fallback", "constraint_rejections", "updates")}
        estimates = list(est)
    elif method == "RGPF":
        cfg = RGPConfig(mode="fixed_c", alpha=alpha, estimator=spec.estimator)
        estimates = [rgpf_posterior(d, cfg, r) for d, r in zip(data, rngs)]
    elif method == "RGPG":
        cfg = RGPConfig(mode="gamma_c", alpha=alpha, estimator=spec.estimator)
        chain = ChainConfig(sweeps=spec.rgpg_sweeps, burn_in=spec.rgpg_burn_in, estimator=spec.estimator)
        estimates = [rgpg_chain(d, cfg, chain, r) for d, r in zip(data, rngs)]
    elif method == "SIEVE_F":
        cfg = SieveConfig(mode="fixed_J", alpha=alpha, estimator=spec.estimator)
        estimates = [fixed_sieve_posterior(d, cfg, r) for d, r in zip(data, rngs)]
    elif method == "SIEVE_A":
        cfg = SieveConfig(mode="adaptive", alpha=alpha, estimator=spec.estimator)
        estimates = [adaptive_sieve_posterior(d, cfg, r) for d, r in zip(data, rngs)]
    else:  # pragma: no cover - ExperimentSpec validates names
        raise ValueError(method)
    risks = [l2_risk(e, truth) for e in estimates]
    return list(zip(trials, risks)), diag, time.perf_counter() - t0


def _bootstrap_se(risks, rng, reps=200) -> float:
    risks = np.asarray(risks)
    idx = rng.integers(0, risks.shape[0], size=(reps, risks.shape[0]))
    return float(np.std(np.median(risks[idx], axis=1), ddof=1))


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _work_items(spec, cells, truths, start, stop):
    items = []
    for method, alpha, n in cells:
        truth = _truncate(truths[alpha], n)
        for lo in range(start, stop, spec.batch):
            items.append((spec, method, alpha, n, truth, tuple(range(lo, min(lo + spec.batch, stop)))))
    return items


def run_experiment(spec: ExperimentSpec, progress=None) -> RiskTable:
    """Run every cell of ``spec`` and aggregate median and MAD of the l2 risk.

    A method that raises marks its cell failed (``error`` set, NaN numbers)
    and the other cells still run. ``progress`` is called with each finished
    cell.
    """
    truths = _truths(spec)
    cells = [(m, a, n) for n in spec.ns for a in spec.alphas for m in spec.methods]
    collected = {c: [] for c in cells}
    diags = {c: {} for c in cells}
    seconds = {c: 0.0 for c in cells}
    errors = {}

    def run_round(active, start, stop):
        items = _work_items(spec, active, truths, start, stop)
        try:
            results = _map(_run_work, items, spec.workers)
        except Exception:
            # fall back to item-by-item so one failing cell cannot sink the rest
            results = []
            for it in items:
                try:
                    results.append(_run_work(it))
                except Exception as exc:  # noqa: BLE001 - recorded on the cell
                    results.append(exc)
        for it, res in zip(items, results):
            cell = it[1:4]
            if isinstance(res, Exception):
                errors[cell] = f"{type(res).__name__}: {res}"
                continue
            pairs, diag, secs = res
            collected[cell].extend(pairs)
            seconds[cell] += secs
            for key, v in diag.items():
                diags[cell][key] = diags[cell].get(key, 0) + int(v)

    if spec.adaptive_stop:
        active = list(cells)
        done = 0
        target = spec.min_trials
        while active:
            run_round(active, done, target)
            done = target
            still = []
            for cell in active:
                if cell in errors or done >= spec.max_trials:
                    continue
                risks = [r for _, r in sorted(collected[cell])]
                brng = make_stream(spec.master_seed, derive_stream_id("bootstrap", *cell, done))
                med = float(np.median(risks))
                if _bootstrap_se(risks, brng) >= spec.stop_rel_se * abs(med):
                    still.append(cell)
            active = still
            target = min(done + 100, spec.max_trials)
    else:
        run_round(cells, 0, spec.trials)

    table = RiskTable(metadata=_metadata(spec))
    for cell in cells:
        method, alpha, n = cell
        if cell in errors:
            res = CellResult(method, alpha, n, math.nan, math.nan, 0, seconds[cell], error=errors[cell])
            log.error("cell %s failed: %s", cell, errors[cell])
        else:
            risks = np.array([r for _, r in sorted(collected[cell])])
            med, mad = median_mad(risks)
            res = CellResult(method, alpha, n, med, mad, risks.shape[0], seconds[cell], risks, None, diags[cell])
        table.rows[(method, float(alpha), int(n))] = res
        if progress is not None:
            progress(res)
    return table


def _metadata(spec: ExperimentSpec) -> dict:
    tails = {
        f"{a:g}/{n}": tail_energy(SignalSpec(alpha=a, amplitude=spec.amplitude), n) for a in spec.alphas for n in spec.ns
    }
    return {
        "seed": int(spec.master_seed),
        "config_hash": spec.config_hash(),
        "version": __version__,
        "estimator": spec.estimator,
        "excluded_tail": tails,
    }


# --------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def emit(table: RiskTable, fmt: str = "csv", timing: bool = True) -> str:
    """Render a table as CSV or markdown.

    CSV columns are ``method,alpha,n,median,mad,trials,seconds,seed`` with
    full-precision floats; a non-empty table ends with a ``#`` comment line
    carrying the seed, config hash and version. With ``timing`` off the
    ``seconds`` column is ``nan`` so that reruns are byte-identical.
    """
    if fmt == "csv":
        return _emit_csv(table, timing)
    if fmt in ("markdown", "md"):
        return _emit_markdown(table)
    raise ValueError(f"unknown format {fmt!r}")


def _emit_csv(table, timing):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    seed = table.metadata.get("seed", 0)
    cells = table.cells()
    for c in cells:
        secs = c.seconds if timing else math.nan
        w.writerow([c.method, _fmt(c.alpha), c.n, _fmt(c.median), _fmt(c.mad), c.trials, _fmt(secs), seed])
    if cells:
        meta = table.metadata
        buf.write(
            f"# seed={meta.get('seed')} config_hash={meta.get('config_hash')} version={meta.get('version')}\n"
        )
    return buf.getvalue()


def parse_csv(text: str) -> RiskTable:
    """Inverse of the CSV emitter (numeric fields exact)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    meta = {}
    body = []
    for ln in lines:
        if ln.startswith("#"):
            for tok in ln[1:].split():
                key, _, val = tok.partition("=")
                meta[key] = val
        else:
            body.append(ln)
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    table = RiskTable()
    for row in reader:
        res = CellResult(
            method=row["method"],
            alpha=float(row["alpha"]),
            n=int(row["n"]),
            median=float(row["median"]),
            mad=float(row["mad"]),
            trials=int(row["trials"]),
            seconds=float(row["seconds"]),
        )
        table.rows[(res.method, res.alpha, res.n)] = res
        meta.setdefault("seed", row["seed"])
    if "seed" in meta:
        meta["seed"] = int(meta["seed"])
    table.metadata = meta
    return table


def _emit_markdown(table):
    by_n = {}
    for c in table.cells():
        by_n.setdefault(c.n, {}).setdefault(c.alpha, []).append(c)
    meta = table.metadata
    out = []
    for n in sorted(by_n):
        out.append(f"Estimation errors for n={n}: median l2 risk and MAD (in parentheses).")
        out.append("")
        out.append("| alpha | Method | risk | Method | risk |")
        out.append("|---|---|---|---|---|")
        for alpha in sorted(by_n[n]):
            cells = by_n[n][alpha]
            half = (len(cells) + 1) // 2
            left, right = cells[:half], cells[half:]
            for i, lc in enumerate(left):
                rc = right[i] if i < len(right) else None
                lead = f"{alpha:g}" if i == 0 else ""
                row = [lead, lc.method, _md_value(lc)]
                row += [rc.method, _md_value(rc)] if rc is not None else ["", ""]
                out.append("| " + " | ".join(row) + " |")
        out.append("")
    out.append(
        f"seed {meta.get('seed')}, config {meta.get('config_hash')}, version {meta.get('version')}"
    )
    return "\n".join(out) + "\n"


def _md_value(c: CellResult) -> str:
    if not c.ok:
        return "failed"
    return f"{c.median:.3f} ({c.mad:.3f})"


# --------------------------------------------------------------------------
# configuration file


_LIST_KEYS = {"alphas": float, "ns": int, "methods": str}
_SCALAR_KEYS = {
    "trials": int,
    "seed": int,
    "estimator": str,
    "adaptive_stop": "bool",
    "min_trials": int,
    "max_trials": int,
    "stop_rel_se": float,
    "sweeps": int,
    "burn_in": int,
    "init_scale": str,
    "rgpg_sweeps": int,
    "rgpg_burn_in": int,
    "constraint": float,
    "amplitude": float,
    "workers": int,
    "batch": int,
}
_ALIASES = {"alpha": "alphas", "n": "ns", "method": "methods"}


def load_config(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment.

    List keys (``alphas``, ``ns``, ``methods``) take comma separated values.
    ``trials = adaptive`` switches on the adaptive stopping rule.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config_text(text)


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = _ALIASES.get(key, key)
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _convert(key, value):
    if key in _LIST_KEYS:
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        return tuple(_LIST_KEYS[key](v) for v in value)
    kind = _SCALAR_KEYS[key]
    if kind == "bool":
        if isinstance(value, bool):
            return value
        low = str(value).lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{key}: not a boolean: {value!r}")
        return low in ("true", "1", "yes")
    return kind(value)


def spec_from_mapping(values: dict) -> ExperimentSpec:
    """Build a spec from parsed config and/or flag values (strings allowed)."""
    kwargs = {}
    for key, value in values.items():
        if value is None:
            continue
        key = _ALIASES.get(key, key)
        if key == "trials" and str(value).strip().lower() == "adaptive":
            kwargs["adaptive_stop"] = True
            continue
        if key not in _LIST_KEYS and key not in _SCALAR_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            converted = _convert(key, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
        kwargs["master_seed" if key == "seed" else key] = converted
    return ExperimentSpec(**kwargs)


# --------------------------------------------------------------------------
# verification suite


@dataclass
class VerifyItem:
    name: str
    passed: bool
    detail: str
    figures: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    level: str
    items: list

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items)

    def render(self) -> str:
        lines = []
        for it in self.items:
            lines.append(f"[{'PASS' if it.passed else 'FAIL'}] {it.name}: {it.detail}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _tv_against(post, draws, bins=40) -> float:
    qs = np.linspace(0.0, 1.0, bins + 1)
    edges = np.interp(qs, np.cumsum(post.weights), post.nodes)
    edges[0], edges[-1] = 0.0, np.inf
    emp = np.histogram(draws, edges)[0] / draws.size
    ref = np.diff(post.cdf(edges[1:-1]), prepend=0.0, append=1.0)
    return 0.5 * float(np.abs(emp - ref).sum())


# Chains per oracle comparison. Blocks 1 and 2 mix fast and start away from
# the posterior, so the run tests convergence. Block 3 moves through log A_k
# as a slow random walk (mean relative error about 0.6 / sqrt(effective draws)),
# so it uses many short chains from exact starts.
ORACLE_RUNS = {
    1: dict(chains=100, sweeps=2000, init_scale="mid"),
    2: dict(chains=100, sweeps=2000, init_scale="mid"),
    3: dict(chains=30000, sweeps=8, init_scale="marginal"),
}


def single_block_agreement(k, n, chains=100, sweeps=2000, seed=0, update_scales=True, init_scale="marginal"):
    """Gibbs on one block against the quadrature posterior.

    The earlier blocks pass through, so block ``k`` is the only one sampled.
    Returns ``(max relative error of the Rao-Blackwellized mean, TV of the
    A_k draws over 40 equal-probability bins)``.
    """
    j_max = int(math.floor(math.exp(k + 1))) - 1
    truth = make_truth(SignalSpec(1.0, sign_seed=seed), j_max)
    data = gen_data(truth, n, make_stream(seed, derive_stream_id("oracle-data", k, n)))
    cfg = BlockPriorConfig(build_scheme("exponential", j_max), passthrough_first=k)
    sl = cfg.scheme.slices()[k]
    post = oracle_block_posterior(data.x[sl], k, n)
    chain = ChainConfig(
        sweeps=sweeps, burn_in=sweeps // 10, estimator="posterior_mean", keep_draws=True, init_scale=init_scale
    )
    rngs = [make_stream(seed, derive_stream_id("oracle-chain", k, n, i)) for i in range(chains)]
    x = np.tile(data.x, (chains, 1))
    est, diag, _ = run_chains(x, n, cfg, chain, rngs, rao_blackwell=True, update_scales=update_scales)
    mean = est[:, sl].mean(axis=0)
    relerr = float(np.max(np.abs(mean / post.mean - 1.0)))
    tv = _tv_against(post, diag["a_draws"][:, :, k].ravel())
    return relerr, tv


def _prior_scales(scheme, size, rng, family="two_level"):
    a = np.empty((size, scheme.n_blocks))
    for k in range(scheme.n_blocks):
        a[:, k] = mixing_density(family, k).sample(rng, size=size)
    return a


def prior_mass_check(n, alpha=1.0, draws=10**6, seed=0, chunk=100_000):
    """log of the block-prior mass of ``{||theta - theta_0||^2 <= eps_n^2}``.

    Plain prior draws almost never land in the ball, so the mass is written
    as ``vol(ball) * E[p(U | A)]`` with ``U`` uniform in the ball and ``A``
    from the prior; both are simulated ``draws`` times. Returns
    ``(log_mass, eps_n^2)``.
    """
    rng = make_stream(seed, derive_stream_id("prior-mass", n, alpha))
    truth = make_truth(SignalSpec(alpha, sign_seed=seed), n).coeffs
    scheme = build_scheme("exponential", n)
    eps2 = minimax_rate(n, alpha) ** 2
    from scipy.special import gammaln, logsumexp

    log_vol = 0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0) + 0.5 * n * math.log(eps2)
    parts = []
    for start in range(0, draws, chunk):
        m = min(chunk, draws - start)
        d = rng.standard_normal((m, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        d *= math.sqrt(eps2) * rng.random(m)[:, None] ** (1.0 / n)
        u = truth + d
        a = _prior_scales(scheme, m, rng)
        lp = np.zeros(m)
        for k, sl in enumerate(scheme.slices()):
            size = sl.stop - sl.start
            lp -= 0.5 * size * np.log(2 * math.pi * a[:, k]) + np.einsum("ij,ij->i", u[:, sl], u[:, sl]) / (2 * a[:, k])
        parts.append(lp)
    lp = np.concatenate(parts)
    return float(log_vol + logsumexp(lp) - math.log(draws)), eps2


def sieve_mass_check(n, alpha=1.0, beta=0.01, draws=10**5, seed=0, k_max=11):
    """Prior mass outside the sieve ``{sum_{j > (n/beta)^{1/(2a+1)}} (theta_j - theta_0j)^2 <= eps_n^2}``.

    Each block's contribution is ``A_k`` times a noncentral chi-square, drawn
    exactly. The two-level scale is stratified on which block (if any) takes
    its outer piece; strata with two or more outer blocks are dropped and
    their total probability is returned as ``bound``. Coordinates run up to
    ``e^{k_max}``. Returns ``(estimate, bound)``.
    """
    rng = make_stream(seed, derive_stream_id("sieve-mass", n, alpha, beta))
    eps2 = minimax_rate(n, alpha) ** 2
    cut = (n / beta) ** (1.0 / (2.0 * alpha + 1.0))
    j_max = int(math.floor(math.exp(k_max)))
    scheme = build_scheme("exponential", j_max)
    j = np.arange(1, j_max + 1, dtype=float)
    energy = 25.0 * j ** (-2.0 * (alpha + 0.6))
    blocks = []
    for k, sl in enumerate(scheme.slices()):
        sel = j[sl] > cut
        if sel.any():
            g = mixing_density("two_level", k)
            blocks.append((int(sel.sum()), float(energy[sl][sel].sum()), g, float(g.log_tail_mass(g.knot))))
    log_keep = [math.log1p(-math.exp(b[3])) for b in blocks]
    base = sum(log_keep)
    total = 0.0
    for outer in [None] + list(range(len(blocks))):
        dev = np.zeros(draws)
        for i, (m, nc, g, _) in enumerate(blocks):
            if i == outer:
                a = g.knot + (g.edge - g.knot) * rng.random(draws)
            else:
                a = g.knot * (1.0 - rng.random(draws))
            dev += a * rng.noncentral_chisquare(m, nc / a)
        weight = base if outer is None else base - log_keep[outer] + blocks[outer][3]
        total += math.exp(weight) * float(np.mean(dev > eps2))
    p_out = np.exp([b[3] for b in blocks])
    bound = float(max(p_out.sum() ** 2 - (p_out**2).sum(), 0.0) / 2.0)
    return total, bound


def _check_sieves():
    # m(X) against quadrature and the conjugate fixed-J posterior against the closed form
    worst = 0.0
    for n in (16, 256):
        s = math.sqrt(n)
        for x in np.arange(-3.0, 3.5, 0.5):
            f = lambda t: math.exp(-0.5 * n * (x - t) ** 2 - s * abs(t)) * s / 2 * math.sqrt(n / (2 * math.pi))
            pts = [-np.inf] + sorted({0.0, float(x)}) + [np.inf]
            val = sum(
                integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0] for lo, hi in zip(pts[:-1], pts[1:])
            )
            worst = max(worst, abs(math.exp(log_laplace_marginal(x, n)) / val - 1.0))
    truth = make_truth(SignalSpec(1.0), 64)
    data = gen_data(truth, 64, 1)
    mean, var = fixed_sieve_posterior(data, SieveConfig(J=10), return_moments=True)
    exact = np.allclose(mean[:10], 64 * data.x[:10] / 65, rtol=0, atol=0) and np.all(var[:10] == 1 / 65)
    exact = exact and not mean[10:].any()
    return worst, bool(exact)


def verify_suite(level: str = "quick", seed: int = 0, update_scales: bool = True) -> VerificationReport:
    """Numerical checks of the prior and the samplers.

    (a) mixing conditions for both families, k = 1..10;
    (b) prior mass of an eps_n ball around the truth, n = 8, 16, 32;
    (c) prior mass outside the sieve decays over n = 32, 64, 128;
    (d) samplers against their exact references;
    (e) BLOCK risk decreases from n = 256 to 512 for alpha = 1, 1.5.

    ``update_scales=False`` runs (d) with a deliberately broken sampler.
    """
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    full = level == "full"
    items = []

    # (a)
    margins = {}
    ok = True
    for fam in FAMILIES:
        checks = verify_conditions(fam, range(1, 11), c=(1.0, 1.0, 1.0))
        ok &= all(ch.passed for ch in checks)
        margins[fam] = min(min(ch.mix1_margin, ch.mix2_margin, ch.mix3_margin) for ch in checks)
    items.append(
        VerifyItem(
            "(a) mixing conditions",
            ok,
            ", ".join(f"{f} min log-margin {m:.3g}" for f, m in margins.items()),
            margins,
        )
    )

    # (b)
    ratios = {}
    for n in (8, 16, 32):
        lm, eps2 = prior_mass_check(n, 1.0, draws=10**6, seed=seed)
        ratios[n] = (lm, -lm / (n * eps2))
    ok = all(np.isfinite(lm) for lm, _ in ratios.values())
    fitted = max(r for _, r in ratios.values())
    items.append(
        VerifyItem(
            "(b) prior mass near the truth",
            ok,
            ", ".join(f"n={n}: log mass {lm:.2f}, ratio {r:.2f}" for n, (lm, r) in ratios.items())
            + f"; fitted C {fitted:.2f}",
            {"log_mass": {n: v[0] for n, v in ratios.items()}, "C": fitted},
        )
    )

    # (c)
    masses = {n: sieve_mass_check(n, draws=10**6 if full else 10**5, seed=seed) for n in (32, 64, 128)}
    vals = [masses[n][0] for n in (32, 64, 128)]
    ok = all(v > 0 for v in vals) and vals[0] > vals[1] > vals[2]
    items.append(
        VerifyItem(
            "(c) prior mass outside the sieve",
            ok,
            ", ".join(f"n={n}: {v:.3g} (dropped <= {b:.1g})" for n, (v, b) in masses.items()),
            {n: v for n, (v, _) in masses.items()},
        )
    )

    # (d)
    rows = []
    ok = True
    for n in ((100, 256) if full else (100,)):
        for k in (1, 2, 3):
            rel, tv = single_block_agreement(k, n, seed=seed, update_scales=update_scales, **ORACLE_RUNS[k])
            ok &= rel < 0.01 and tv < 0.02
            rows.append(f"k={k} n={n} mean err {rel:.2g} TV {tv:.3f}")
    worst, exact = _check_sieves()
    ok &= worst < 1e-9 and exact
    rows.append(f"sieve marginal err {worst:.1g}, fixed sieve exact {exact}")
    items.append(VerifyItem("(d) sampler oracles", bool(ok), "; ".join(rows)))

    # (e)
    # the chains start from exact per-block posterior draws, so the quick
    # level can afford the full trial count with short chains
    trials = 200
    spec = ExperimentSpec(
        alphas=(1.0, 1.5),
        ns=(256, 512),
        methods=("BLOCK",),
        trials=trials,
        master_seed=seed,
        sweeps=2000 if full else 20,
        burn_in=500 if full else 10,
    )
    table = run_experiment(spec)
    meds = {(a, n): table.median("BLOCK", a, n) for a in (1.0, 1.5) for n in (256, 512)}
    ok = all(meds[(a, 512)] < meds[(a, 256)] for a in (1.0, 1.5))
    items.append(
        VerifyItem(
            "(e) contraction trend",
            ok,
            ", ".join(f"alpha={a:g}: {meds[(a, 256)]:.3f} -> {meds[(a, 512)]:.3f}" for a in (1.0, 1.5))
            + f" ({trials} trials)",
            {f"{a:g}/{n}": v for (a, n), v in meds.items()},
        )
    )
    return VerificationReport(level=level, items=items)
