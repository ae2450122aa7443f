"""Print the closed-form exponent table on a small grid of (t, s)."""

from slicelab.analysis import exponent_table

print(f"{'t':>4} {'s':>4} {'furst':>7} {'heavy':>7} {'subunif':>7}")
for t in (0.5, 1.0, 1.5, 1.8):
    for s in (0.2, 0.5, 0.8):
        r = exponent_table(t, s)
        print(f"{t:4.1f} {s:4.1f} {r.furstenbergLB:7.3f} {r.borelHeavyBound:7.3f} {r.subuniformBound:7.3f}")
