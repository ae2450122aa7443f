import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slicelab.dyadic import CubeSet, DyadicSquare, DyadicTube, Scale, TubeSet
from slicelab.errors import InvalidInputError, InvalidScaleError, UndefinedError
from slicelab.incidence import (ProductCubeSet, coarse_incidences, coarsen, count_incidences,
                                count_incidences_bruteforce, incidence_count,
                                incidence_counts_per_tube, incidence_quotient, incident,
                                quotients_csv)


def exact_incident(k, ix, iy, ia, ib, A=1):
    """Distance from the ball center to the core line compared with (5 + 5) A delta, in rationals."""
    d = Fraction(1, 1 << k)
    cx, cy = (ix + Fraction(1, 2)) * d, (iy + Fraction(1, 2)) * d
    a, b = ia * d, ib * d
    num = a * cx - cy + b
    return num * num <= (10 * Fraction(A) * d) ** 2 * (1 + a * a)


def oracle_pairs(P, Ts, A=1):
    return {(ix, iy, ia, ib) for ix, iy in P.idx.tolist() for ia, ib in Ts.idx.tolist()
            if exact_incident(P.k, ix, iy, ia, ib, A)}


@st.composite
def instance(draw, max_k=6, max_n=60):
    k = draw(st.integers(1, max_k))
    N = 1 << k
    cell = st.tuples(st.integers(0, N - 1), st.integers(0, N - 1))
    P = CubeSet(k, draw(st.lists(cell, max_size=max_n)))
    Ts = TubeSet(k, draw(st.lists(cell, max_size=max_n)))
    return P, Ts


# ---------------------------------------------------------------- predicate


def test_incident_examples():
    assert incident(DyadicSquare(6, 0, 0), DyadicTube.at(6, 0, 0))
    # center (0.5, 0.9) vs the line y = 0
    k = 6
    p = DyadicSquare(k, 32, int(0.9 * 64))
    assert not incident(p, DyadicTube.at(k, 0, 0))
    with pytest.raises(InvalidInputError):
        incident(DyadicSquare(5, 0, 0), DyadicTube.at(6, 0, 0))


def test_incident_matches_sampling():
    rng = random.Random(7)
    k = 6
    d = 1 / 64
    for _ in range(2000):
        ix, iy, ia, ib = (rng.randrange(64) for _ in range(4))
        a, b = ia * d, ib * d
        cx, cy = (ix + 0.5) * d, (iy + 0.5) * d
        dist = abs(a * cx - cy + b) / (1 + a * a) ** 0.5
        got = incident(DyadicSquare(k, ix, iy), DyadicTube.at(k, ia, ib))
        if abs(dist - 10 * d) < 1e-9:
            continue
        # sample the ball; a sampled point in the strip proves incidence
        hit = False
        for _ in range(1000):
            r, t = 5 * d * rng.random() ** 0.5, 6.283185307179586 * rng.random()
            x, y = cx + r * np.cos(t), cy + r * np.sin(t)
            if abs(a * x - y + b) / (1 + a * a) ** 0.5 <= 5 * d:
                hit = True
                break
        if hit:
            assert got
        if not got:
            assert dist > 10 * d


@given(instance(), st.sampled_from([Fraction(1), Fraction(2), Fraction(1, 3)]))
def test_count_matches_exact_oracle(inst, A):
    P, Ts = inst
    I = count_incidences(P, Ts, A)
    assert {tuple(r) for r in I.idx.tolist()} == oracle_pairs(P, Ts, A)
    assert I == count_incidences_bruteforce(P, Ts, A)
    assert incidence_count(P, Ts, A) == len(I) <= len(P) * len(Ts)
    per = incidence_counts_per_tube(P, Ts, A)
    assert int(per.sum()) == len(I)


@given(instance(), st.randoms())
def test_count_invariant_under_relabeling(inst, rnd):
    P, Ts = inst
    pi, ti = P.idx.tolist(), Ts.idx.tolist()
    rnd.shuffle(pi)
    rnd.shuffle(ti)
    assert count_incidences(CubeSet(P.k, pi), TubeSet(Ts.k, ti)) == count_incidences(P, Ts)


def test_count_examples():
    P = CubeSet(5, [[3, 3]])
    assert incidence_count(P, TubeSet(5, [[0, 3]])) == 1
    full = CubeSet.full(4)
    T = TubeSet(4, [[0, 0]])
    assert incidence_count(full, T) == len(oracle_pairs(full, T))


def test_block_vs_heavy_direction_tubes():
    from slicelab.constructions import BlockParams, build_block
    block = build_block(BlockParams("2^-8", 1.5, 0.5))
    ia = 64  # slope 1/4
    Ts = TubeSet(8, [[ia, b] for b in range(0, 256, 3)])
    assert count_incidences(block.cubes, Ts) == count_incidences_bruteforce(block.cubes, Ts)


def test_empty_families():
    assert len(count_incidences(CubeSet(3), TubeSet(3, [[0, 0]]))) == 0
    with pytest.raises(UndefinedError):
        incidence_quotient(CubeSet(3), TubeSet(3, [[0, 0]]), "2^-1")


# ---------------------------------------------------------------- coarsening


@given(instance(max_k=6), st.integers(0, 6))
def test_coarsening_inclusion(inst, j):
    P, Ts = inst
    D = Scale(min(j, P.k))
    I = count_incidences(P, Ts)
    C = coarsen(I, D)
    assert C.issubset(coarse_incidences(P, Ts, D))
    # every output cube is incident as a pair of parents
    for ix, iy, ia, ib in C.idx.tolist():
        assert exact_incident(D.k, ix, iy, ia, ib)


def test_coarsen_identity_and_errors():
    P, Ts = CubeSet.full(3), TubeSet.full(3)
    I = count_incidences(P, Ts)
    assert coarsen(I, Scale(3)) == ProductCubeSet(3, I.idx)
    with pytest.raises(InvalidScaleError):
        coarsen(I, Scale(4))


def test_converse_inclusion_fails_for_stored_witness():
    P, Ts = CubeSet(6, [[0, 0]]), TubeSet(6, [[0, 15]])
    assert incidence_count(P, Ts) == 0
    D = Scale(3)
    assert len(coarse_incidences(P, Ts, D)) > len(coarsen(count_incidences(P, Ts), D))


# ---------------------------------------------------------------- quotients


@given(instance(max_k=5, max_n=40))
def test_quotient_properties(inst):
    P, Ts = inst
    if not len(P) or not len(Ts):
        return
    q1 = incidence_quotient(P, Ts, Scale(0))
    assert q1.iota <= 1
    for j in range(P.k + 1):
        q = incidence_quotient(P, Ts, Scale(j))
        x = q.iota * q.delta.value * q.num_cubes * q.num_tubes
        assert x.denominator == 1 and x == q.num_incidences


def test_quotient_examples():
    P, Ts = CubeSet(5, [[3, 3]]), TubeSet(5, [[0, 3]])
    assert incidence_quotient(P, Ts, Scale(5)).iota == 32
    P, Ts = CubeSet.full(4), TubeSet.full(4)
    q = incidence_quotient(P, Ts, Scale(4))
    assert q.num_incidences == len(oracle_pairs(P, Ts))
    assert q.iota == Fraction(q.num_incidences * 16, 256 * 256)
    text = quotients_csv([q])
    assert text.splitlines()[0] == "scale,cubes,tubes,incidences,iota"
