"""Nested Cantor set from alternating fills and blocks, with its equal-split measure."""

from slicelab.analysis import box_dimension_slope
from slicelab.constructions import build_LF, build_R, frostman_measure

R = build_R([0, 2, 6, 8, 12], tau=1.5, s=0.5, enforce_decay=False)
for i, L in enumerate(R.levels):
    print(f"level {i} ({R.kind(i)}): {len(L)} cubes at {L.scale}")

print(f"box-counting slope {box_dimension_slope(R.profile()).slope:.3f}")

mu = frostman_measure(R.levels, 1.4)
print(f"total mass {mu.total_mass}, max mu(Q) / side^1.4 = {mu.max_ratio:.4f} at {mu.witness}")

LF = build_LF(R)
for sc, tot, tb in zip(LF.scales, LF.totals, LF.total_bounds):
    print(f"tubes at {sc}: {tot} (bound {tb:.0f})")
