from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slicelab.dyadic import CubeSet, Scale, ScaleSequence, TubeSet
from slicelab.errors import UndefinedError
from slicelab.uniformity import (branching_class, decompose_subuniform, level_ratio_at,
                                 subuniformity_constant, subuniformly_distributed_constant)


def oracle_constant(cells, k, levels):
    """max_j max_parent |P|_{D_j} |P ∩ parent|_{D_j+1} / |P|_{D_j+1}, by dictionaries."""
    best = Fraction(0)
    for kj, kj1 in zip(levels, levels[1:]):
        fine = {(x >> (k - kj1), y >> (k - kj1)) for x, y in cells}
        coarse = Counter((x >> (kj1 - kj), y >> (kj1 - kj)) for x, y in fine)
        best = max(best, Fraction(len(coarse) * max(coarse.values()), len(fine)))
    return best


@st.composite
def family(draw, ks=(4, 6)):
    k = draw(st.sampled_from(ks))
    step = draw(st.sampled_from([d for d in (1, 2, 3) if k % d == 0]))
    N = 1 << k
    cells = draw(st.lists(st.tuples(st.integers(0, N - 1), st.integers(0, N - 1)),
                          min_size=1, max_size=300))
    return k, step, cells


@given(family())
def test_constant_matches_oracle(fam):
    k, step, cells = fam
    L = ScaleSequence(Scale(k), step)
    rep = subuniformity_constant(CubeSet(k, cells), L)
    assert rep.constant == oracle_constant(set(cells), k, [s.k for s in L.levels])
    j, cell = rep.witness
    assert level_ratio_at(CubeSet(k, cells), L, j, cell) == rep.constant


def test_constant_examples():
    L = ScaleSequence(Scale(6), 2)
    assert subuniformity_constant(CubeSet.full(6), L).constant == 1
    assert subuniformity_constant(CubeSet(6, [[5, 7]]), L).constant == 1
    # one full-density 2^-2 square plus one sparse square
    dense = [(x, y) for x in range(16) for y in range(16)]
    sparse = [(48, 48), (50, 52)]
    P = CubeSet(6, dense + sparse)
    assert subuniformity_constant(P, L).constant == oracle_constant(set(dense + sparse), 6, [0, 2, 4, 6])
    with pytest.raises(UndefinedError):
        subuniformity_constant(CubeSet(6), L)


def test_uniform_tree_has_constant_one():
    # every parent keeps the same number of children at every level
    cells = [(x, y) for x in range(0, 64, 2) for y in range(0, 64, 4)]
    assert subuniformity_constant(CubeSet(6, cells), ScaleSequence(Scale(6), 1)).constant == 1


def test_distributed_constant():
    assert subuniformly_distributed_constant(CubeSet.full(5)).constant == 1
    # middle-fourths product Cantor at depth 3: digits {0, 3} in base 4
    C = [a * 16 + b * 4 + c for a in (0, 3) for b in (0, 3) for c in (0, 3)]
    K = CubeSet(6, [(x, y) for x in C for y in C])
    assert subuniformly_distributed_constant(K).constant <= 4
    # two blocks with swapped branching: dense-then-sparse vs sparse-then-dense
    A = [(x, y) for x in range(8) for y in range(8)]                        # dense corner
    B = [(32 + 8 * i, 32 + 8 * j) for i in range(4) for j in range(4)]   # spread points
    assert subuniformly_distributed_constant(CubeSet(6, A + B)).constant >= 4


def test_branching_class_half_open():
    assert [branching_class(c) for c in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]


@given(family(ks=(4, 6)))
def test_decomposition_partition(fam):
    k, step, cells = fam
    L = ScaleSequence(Scale(k), step)
    for kind in (CubeSet, TubeSet):
        P = kind(k, cells)
        part = decompose_subuniform(P, L)
        joined = np.concatenate([p.idx for p in part.parts])
        assert len(joined) == len(P) and kind(k, joined) == P
        assert all(c <= 2 for c in part.constants)
        assert len(part) <= part.count_bound == (2 * step + 1) ** L.n
        assert list(part.signatures) == sorted(part.signatures)


def test_decomposition_examples():
    assert len(decompose_subuniform(CubeSet.full(4), ScaleSequence(Scale(4), 2))) == 1
    rng = np.random.default_rng(5)
    flat = rng.choice(4096, size=300, replace=False)
    P = CubeSet(6, np.stack([flat // 64, flat % 64], axis=1))
    L = ScaleSequence.from_eta("2^-6", 1 / 3)
    part = decompose_subuniform(P, L)
    assert all(subuniformity_constant(p, L).constant <= 2 for p in part.parts)
    assert ScaleSequence(Scale(4), 2).n == 2 and part.count_bound == 125
    assert decompose_subuniform(CubeSet.full(4), ScaleSequence(Scale(4), 2)).count_bound == 25
