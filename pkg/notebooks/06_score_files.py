"""
Quantifying score files
=======================

Training and test scores arrive as CSV files. ``evaluate_score_files`` fits
the class distributions, estimates every test set and scores the estimates
against known prevalences. The command-line equivalent is::

    contsweep fit --train train.csv --out fitted
    contsweep estimate --params fitted/params.txt --train train.csv --test set_*.csv --method cs
"""

# %%
from pathlib import Path

from contsweep import ClassConditionalModel, DistributionParams, generate_test_set, write_test_csv, write_train_csv
from contsweep.simulation import evaluate_score_files, generate_train_set, write_estimates_csv

out = Path("score_files")
out.mkdir(exist_ok=True)
truth = ClassConditionalModel(DistributionParams.skew_normal(1, 1.4, 1), DistributionParams.skew_normal(0.8, 1.7, -1.8))
write_train_csv(out / "train.csv", generate_train_set(truth, 0.5, 2000, seed=1))
prevalences = {}
for i, a in enumerate((0.1, 0.25, 0.4, 0.55, 0.7, 0.85)):
    write_test_csv(out / f"set_{i}.csv", generate_test_set(truth, a, 250, seed=10 + i))
    prevalences[f"set_{i}"] = round(a * 250) / 250

# %%
rows, metrics = evaluate_score_files(out / "train.csv", sorted(out.glob("set_*.csv")), truths=prevalences)
write_estimates_csv(out / "estimates.csv", rows)
for method, m in metrics.items():
    print(f"{method:5s} MAE {m['MAE']:.4f}  RMSE {m['RMSE']:.4f}  RAE {m['RAE']:.4f}")
