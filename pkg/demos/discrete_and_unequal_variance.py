"""
Maximal leakage beyond the symmetric Gaussian case
==================================================

First two discrete releases of a uniform 2k-bit secret: one reveals the
secret whenever it is even and a fixed symbol otherwise, the other reveals
its k+1 lowest bits.  Then Gaussian
classes with unequal spread, where the MAP rule has two thresholds.
"""

from leakage_lab import leakage_metrics as lm

for k in (2, 3, 4):
    parity = lm.max_leakage_discrete(lm.parity_release_channel(k)).bits
    low = lm.max_leakage_discrete(lm.low_bits_channel(k)).bits
    print(f"k = {k}: even-or-symbol leaks {parity:.4f} bits, low bits {low:.4f} bits")

print()
for s1 in (1.0, 1.5, 2.0, 4.0):
    h = lm.max_leakage_hetero(lm.HeteroscedasticModel(0.0, 1.0, 1.0, s1))
    zs = ", ".join(f"{z:.3f}" for z in h.thresholds)
    print(f"sigma1 = {s1}: {h.nats:.4f} nats, thresholds [{zs}]")

three = lm.ThreeClassModel(-1.0, 0.0, 1.0, 1.0)
print(f"\nthree classes at -1, 0, 1: {lm.max_leakage_three_class(three):.4f} nats")
