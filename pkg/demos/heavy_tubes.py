"""Heavy tubes of a product Cantor set and the content of their covers across scales."""

from fractions import Fraction

from slicelab.analysis import heavy_part_cover, heavy_tubes
from slicelab.constructions import cantor_digits, product_set

digits = cantor_digits((0, 3), 5)
K = product_set(digits, digits, 10)
print(f"|K| = {len(K)} cubes at {K.scale}")

for e in (Fraction(0), Fraction(1, 2), Fraction(-1), float("inf")):
    H = heavy_tubes(K, e, t=1.0, s=0.75, eta=0.08)
    print(f"slope {e}: {len(H)} heavy tubes, threshold {H.threshold}")

r = heavy_part_cover(K, [Fraction(0), Fraction(1, 2), Fraction(2)], 1.0, 0.75, 0.08, None,
                     ["2^-6", "2^-8", "2^-10"])
for d, avg in zip(r.scales, r.average):
    print(f"delta = {d}: average content {avg:.4f}")
