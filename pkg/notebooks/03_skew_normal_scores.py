"""
Skew-normal score distributions
===============================

Real classifier scores are rarely symmetric. Fit skew-normal and normal
models to skewed training scores and compare the resulting estimates.
"""

# %%
from contsweep import (ClassConditionalModel, DistributionParams, Family, continuous_sweep, fit,
                       generate_test_set, optimal_pdelta)
from contsweep.simulation import generate_train_set

truth = ClassConditionalModel(DistributionParams.skew_normal(1, 1, 4), DistributionParams.skew_normal(0, 1, 4))
train = generate_train_set(truth, 0.5, 1000, seed=5)

# %%
# Maximum likelihood fits per class.
for family in (Family.SKEW_NORMAL, Family.NORMAL):
    print(family.value, fit(train.positives, family))

# %%
# Continuous Sweep with each fitted model on 200 test sets. With a single
# training set either fit can come out ahead; the simulation studies average
# over fresh training sets.
import numpy as np

models = {f.value: ClassConditionalModel.fit(train, f) for f in (Family.SKEW_NORMAL, Family.NORMAL)}
windows = {k: optimal_pdelta(m, 500).window for k, m in models.items()}
errors = {k: [] for k in models}
for r in range(200):
    test = generate_test_set(truth, 0.3, 500, seed=100 + r)
    for k, m in models.items():
        errors[k].append(continuous_sweep(m, test, windows[k]).clipped - 0.3)
for k, e in errors.items():
    e = np.array(e)
    print(f"{k:12s} bias {e.mean():+.4f}  rmse {np.sqrt(np.mean(e**2)):.4f}")

# %%
# The fitted parameters reported for a public competition's scores give an
# optimal p_delta close to 0.4 for test sets of 250.
lequa = ClassConditionalModel(DistributionParams.skew_normal(1.0309, 1.4119, 1.0068),
                              DistributionParams.skew_normal(0.8425, 1.6677, -1.7983))
print("p_delta* =", round(optimal_pdelta(lequa, 250).p_delta_star, 3))
