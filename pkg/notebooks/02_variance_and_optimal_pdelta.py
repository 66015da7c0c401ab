"""
Variance of Continuous Sweep and the optimal p_delta
====================================================

The analytic variance is checked against simulation, then minimized over
p_delta. Writes the variance curve to ``variance_curve.csv`` for plotting.
"""

# %%
import csv

from contsweep import ClassConditionalModel, cs_variance, decision_boundaries, optimal_pdelta
from contsweep.simulation import monte_carlo_variance

model = ClassConditionalModel.normal(1, 1, 0, 1)
window = decision_boundaries(model, 0.25)

# %%
# Theory against 2000 simulated test sets of size 1000.
theory = cs_variance(model, 0.5, 1000, window).variance
simulated = monte_carlo_variance(model, 0.5, 1000, window, reps=2000, seed=3)
print(f"theory {theory:.4e}  simulation {simulated:.4e}  ratio {simulated / theory:.3f}")

# %%
# The variance as a function of p_delta: large for tiny p_delta (wide window
# full of unreliable AC values), rising again near the maximum gap.
sol = optimal_pdelta(model, n_test=1000, curve_points=41)
print(f"p_delta* = {sol.p_delta_star:.4f}, variance {sol.variance_at_star:.4e}, g_max {sol.g_max:.4f}")
for p, v in sol.variance_curve[::8]:
    print(f"  p={p:.3f}  V={v:.3e}")

with open("variance_curve.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["p_delta", "variance"])
    w.writerows(sol.variance_curve)

# %%
# The optimum shifts with the test-set size only through the 1/n factor,
# so p_delta* itself does not move.
print([round(optimal_pdelta(model, n).p_delta_star, 4) for n in (100, 1000, 10000)])

# %%
# Unequal spreads move the optimum.
for sp, sm in [(0.5, 1.5), (1.5, 0.5)]:
    m = ClassConditionalModel.normal(1, sp, 0, sm)
    s = optimal_pdelta(m, 1000)
    print(f"sd+={sp} sd-={sm}: p_delta*={s.p_delta_star:.3f}  window=({s.window.theta_l:.2f}, "
          f"{s.window.theta_r:.2f})  V={s.variance_at_star:.2e}  V/V(0.25)="
          f"{s.variance_at_star / cs_variance(m, 0.5, 1000, decision_boundaries(m, min(0.25, 0.99 * s.g_max))).variance:.2f}")
