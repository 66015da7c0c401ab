"""
Counting, correcting and sweeping
=================================

Classify and Count is biased whenever the classifier makes mistakes. This
script walks from the biased count to the Adjusted Count, Median Sweep and
Continuous Sweep on one simulated test set.
"""

# %%
# A classifier with 98% sensitivity and 3% false-positive rate looks at 1000
# panels, 100 of them broken. The expected share flagged is not 10%.
from contsweep import cc_bias, cc_expectation

print("expected flagged share:", cc_expectation(0.1, 0.98, 0.97))
print("bias:", cc_bias(0.1, 0.98, 0.97))

# %%
# The Adjusted Count inverts that relation.
from contsweep import adjusted_count

print("adjusted:", adjusted_count(0.125, 0.98, 0.03))

# %%
# Known class-conditional score distributions: positives ~ N(1, 1),
# negatives ~ N(0, 1). A test set with 30% positives.
from contsweep import ClassConditionalModel, generate_test_set

model = ClassConditionalModel.normal(1, 1, 0, 1)
test = generate_test_set(model, alpha=0.3, n=1000, seed=1)

# %%
# The Adjusted Count depends on the chosen threshold.
from contsweep import classify_count

for theta in (-0.5, 0.0, 0.5, 1.0, 1.5):
    cc = classify_count(test, theta)
    print(f"theta={theta:+.1f}  CC={cc:.3f}  AC={adjusted_count(cc, model.tpr(theta), model.fpr(theta)):.3f}")

# %%
# Median Sweep takes the median over test-score thresholds whose TPR - FPR
# gap exceeds p_delta. Continuous Sweep integrates the AC curve over the
# window where the gap exceeds p_delta.
from contsweep import continuous_sweep, decision_boundaries, median_sweep

window = decision_boundaries(model, 0.25)
print("window:", window.theta_l, window.theta_r)
print("median sweep:", median_sweep(model, test, 0.25).raw)
print("continuous sweep:", continuous_sweep(model, test, window).raw)
