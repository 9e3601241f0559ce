"""
How much privacy does a distortion budget buy?
==============================================

Two Gaussian classes at -3 and +3 with unit noise.  A privatizer may shift
each class toward the other, paying the expected squared shift as
distortion.  For every budget we print the optimal shifts, the accuracy of
the best possible adversary, and three leakage measures of the release.
"""

from leakage_lab import BinaryGaussianMixture, apply_affine
from leakage_lab import leakage_metrics as lm
from leakage_lab.affine_opt import condition_threshold, optimize_noisy_affine, solve_affine

model = BinaryGaussianMixture(mu0=-3.0, mu1=3.0, sigma=1.0, p_tilde=0.5)
print(f"budget at which the two classes can be merged: {condition_threshold(model):.2f}\n")

print(" D    beta0  beta1  MAP acc  max leak  Sibson-20")
for budget in (0, 1, 2, 3, 4, 5, 6, 9, 12):
    sol = solve_affine(model, budget)
    t = apply_affine(model, sol.beta0, sol.beta1)
    print(
        f"{budget:>2}  {sol.beta0:6.3f} {sol.beta1:6.3f}  {lm.map_accuracy(t):7.4f}"
        f"  {lm.max_leakage_binary(t):8.4f}  {lm.sibson_mi_quadrature(t, 20):9.4f}"
    )

# Spending part of the budget on noise instead of shifts helps further.
print("\n D   affine gap/sigma  noisy gap/sigma  noise std")
for budget in (1, 2, 4, 6):
    pure = solve_affine(model, budget)
    noisy = optimize_noisy_affine(model, budget)
    print(f"{budget:>2}   {(model.gap - pure.beta0 - pure.beta1):14.3f}  {noisy.objective:15.3f}  {noisy.gamma:9.3f}")
