"""
A small simulation study
========================

The full studies run from the command line (``contsweep simulate``). Here a
handful of Study 1 conditions run with 200 replications each.
"""

# %%
from contsweep.simulation import run_study, write_comparison_csv, write_results_csv

results = run_study(1, replications=200, master_seed=7, conditions=[4, 13, 31, 40])

# %%
for r in results:
    c = r.condition
    cells = "  ".join(f"{q} {s.rmse:.4f}" for q, s in r.summaries.items())
    print(f"n={c.n_test:4d} sd+={c.sigma_plus} sd-={c.sigma_minus} alpha={c.alpha_test}: {cells}")

# %%
# Long-format results and the wide RMSE comparison against O-CS.
write_results_csv("study1_small_results.csv", results)
write_comparison_csv("study1_small_comparison.csv", results)
