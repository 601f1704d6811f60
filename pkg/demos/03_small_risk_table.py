"""A reduced risk table: every method on a few trials, printed as markdown.

Run with ``python demos/03_small_risk_table.py``. The full table is
``blockprior simulate --format markdown`` (about 25 minutes on one core).
"""
# %%
from blockprior.harness import METHODS, ExperimentSpec, emit, run_experiment

# %%
spec = ExperimentSpec(alphas=(0.5, 1.0), ns=(128,), methods=METHODS, trials=20, sweeps=200, burn_in=50)
table = run_experiment(spec)
print(emit(table, "markdown"))

# %% [markdown]
# Raw per-trial risks stay on the cells, so spread and pairing can be
# examined directly: trial i of every method used the same data.

# %%
block = table["BLOCK", 1.0, 128].risks
gp = table["RGPF", 1.0, 128].risks
print("BLOCK beats RGPF on", int((block < gp).sum()), "of", block.size, "paired trials")
for c in table.cells():
    if c.diagnostics.get("constraint_fallback"):
        print(f"{c.method} alpha={c.alpha:g}: {c.diagnostics['constraint_fallback']} constraint fallbacks")
