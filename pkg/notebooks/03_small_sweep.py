# %% [markdown]
# # A small sweep with heatmaps
#
# A reduced grid over the app parameters, stored on disk, summarized and
# drawn as SVG. The full study uses six levels per parameter and 30 seeds
# (`cocoa-abm sweep`), which takes minutes rather than seconds.

# %%
import tempfile
from pathlib import Path

from cocoa_abm.analysis import aggregate, heatmaps
from cocoa_abm.domain import ScenarioConfig
from cocoa_abm.render import render_all
from cocoa_abm.sweep import SweepPlan, enumerate_scenarios, load_runs, read_manifest, run_sweep

config = ScenarioConfig(beta=9.375e-5)
grid = (0.0, 0.5, 1.0)
plan = SweepPlan(grid, grid, (0.0, 1.0), tuple(range(1, 6)), config)
out = Path(tempfile.mkdtemp(prefix="cocoa_sweep_"))
report = run_sweep(plan, parallelism=1, out_dir=out)
print(report.executed, "runs; excluded seeds:", report.excluded_seeds)

# %% [markdown]
# Seeds whose no-app baseline infects fewer than 30 people are dropped from
# every scenario before averaging.

# %%
runs = load_runs(out, enumerate_scenarios(plan), plan.seeds, config.max_days)
summary = aggregate(runs, read_manifest(out)["excluded_seeds"])
for s in summary:
    print(s.key, round(s.mean_total_infected, 1), f"{s.mean_w:+.4f}", s.label.value)

# %% [markdown]
# Heatmaps hold p3 fixed; rows are p2 (descending) and columns p1. With
# p1 = 0 or p2 = 0 the app cannot change anything, so that column and row
# repeat the baseline.

# %%
hm = heatmaps(summary)[-1]
print("p3 =", hm.p3)
for p2, row in zip(hm.rows, hm.values):
    print(f"p2={p2:<4}", " ".join(f"{v:6.1f}" for v in row))

# %%
for name, svg in render_all(summary).items():
    (out / name).write_text(svg)
print("figures in", out)
