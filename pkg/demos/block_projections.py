"""Build a sheared-grid block and print its projection counts per direction."""

from slicelab.constructions import BlockParams, build_block, verify_P1, verify_P2

params = BlockParams("2^-8", tau=1.5, s=0.5)
block = build_block(params)
print(f"{len(block.cubes)} cubes, grid {params.grid}, stride {params.stride}, theta {params.theta}")

p1 = verify_P1(block)
print(f"column progressions: step {p1.step}, shortest {p1.min_length} (need {p1.required})")

p2 = verify_P2(block)
print(f"projection bound delta^-(s+tau)/2 = {p2.bound:g}")
for e, c, pc in zip(p2.directions, p2.counts, p2.perturbed_counts):
    print(f"  e = {str(e):>6}: {c:4d} cells, perturbed {pc:4d}")
print(f"largest count / bound = {p2.constant:.4f}")
