"""
Distribution matching baselines
===============================

SLD re-estimates the prior by EM on posteriors; DyS matches histograms of
posteriors with a Topsoe distance.
"""

# %%
import numpy as np

from contsweep import ClassConditionalModel, dys, generate_test_set, histogram, nb_posterior, sld

model = ClassConditionalModel.normal(1, 1, 0, 1)
rng = np.random.default_rng(0)

# %%
# Class histograms of posteriors (prior 0.5) from many draws per class.
pos = nb_posterior(model, 0.5, rng.normal(1, 1, 200_000))
neg = nb_posterior(model, 0.5, rng.normal(0, 1, 200_000))
h_pos, h_neg = histogram(pos), histogram(neg)
print("positive histogram:", np.round(h_pos.masses, 3))
print("negative histogram:", np.round(h_neg.masses, 3))

# %%
for alpha in (0.1, 0.5, 0.9):
    test = generate_test_set(model, alpha, 1000, seed=int(alpha * 100))
    post = nb_posterior(model, 0.5, test.scores)
    e_sld = sld(0.5, post)
    e_dys = dys(h_pos, h_neg, histogram(post))
    print(f"alpha={alpha}: SLD {e_sld.raw:.3f} ({e_sld.diagnostics['iterations']} its)  DyS {e_dys.raw:.3f}")
