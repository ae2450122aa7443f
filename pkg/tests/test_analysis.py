import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slicelab.analysis import (box_dimension_slope, covering_profile, delta_set_constant,
                               exponent_table, exponent_table_csv, hausdorff_content_upper,
                               heavy_part_cover, heavy_tubes)
from slicelab.constructions import build_R, cantor_digits, product_set
from slicelab.dyadic import CubeSet, DyadicSquare, DyadicTube, Scale
from slicelab.errors import InvalidInputError, InvalidParameterError, UndefinedError
from slicelab.incidence import incident


# ---------------------------------------------------------------- (delta, s, C)-sets


def oracle_delta_constant(cells, k, s):
    """Max over grid corners c and r = 2^-j of |{cells meeting closed B(c, r)}| r^-s / |P|."""
    n = 1 << k
    P = set(cells)
    best = 0.0
    for j in range(k + 1):
        R = 1 << (k - j)
        for cx in range(n + 1):
            for cy in range(n + 1):
                cnt = 0
                for x, y in P:
                    gx = max(0, x - cx, cx - x - 1)
                    gy = max(0, y - cy, cy - y - 1)
                    cnt += gx * gx + gy * gy <= R * R
                best = max(best, cnt * 2.0 ** (j * s) / len(P))
    return best


@given(st.integers(1, 3), st.data(), st.sampled_from([0.0, 0.5, 1.0, 2.0]))
def test_delta_constant_matches_oracle(k, data, s):
    N = 1 << k
    cells = data.draw(st.lists(st.tuples(st.integers(0, N - 1), st.integers(0, N - 1)),
                               min_size=1, max_size=12))
    rep = delta_set_constant(CubeSet(k, cells), Scale(k), s)
    assert rep.constant == pytest.approx(oracle_delta_constant(cells, k, s), rel=1e-12)


def test_delta_constant_examples():
    assert delta_set_constant(CubeSet(5, [[3, 4]]), "2^-5", 0).constant == 1
    full = delta_set_constant(CubeSet.full(4), "2^-4", 2)
    # a closed ball of radius delta about an interior corner meets a 4 x 4 block minus its corners
    assert full.constant == 12
    with pytest.raises(UndefinedError):
        delta_set_constant(CubeSet(4), "2^-4", 1)


@given(st.integers(2, 4), st.data())
def test_delta_constant_monotone_in_s(k, data):
    N = 1 << k
    cells = data.draw(st.lists(st.tuples(st.integers(0, N - 1), st.integers(0, N - 1)),
                               min_size=1, max_size=30))
    P = CubeSet(k, cells)
    cs = [delta_set_constant(P, Scale(k), s).constant for s in (0.0, 0.5, 1.0, 1.5, 2.0)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(cs, cs[1:]))


def test_delta_constant_one_dimensional_and_relative():
    prog = 16 * np.arange(8)
    r = delta_set_constant(prog, "2^-8", 0.5)
    # exhaustive 1-d oracle
    best = 0.0
    for j in range(9):
        R = 1 << (8 - j)
        for c in range(257):
            cnt = sum(max(0, y - c, c - y - 1) <= R for y in prog.tolist())
            best = max(best, cnt * 2.0 ** (j * 0.5) / 8)
    assert r.constant == pytest.approx(best)
    # relative variant: the part inside a container, rescaled
    P = CubeSet(4, [(x, y) for x in range(4) for y in range(4)] + [(15, 15)])
    rel = delta_set_constant(P, "2^-4", 2, relative_to=DyadicSquare(2, 0, 0))
    assert rel.constant == delta_set_constant(CubeSet.full(2), "2^-2", 2).constant


# ---------------------------------------------------------------- box counting


def test_box_slope_examples():
    prof = covering_profile(CubeSet.full(6), ["2^-2", "2^-3", "2^-4", "2^-5", "2^-6"])
    assert box_dimension_slope(prof).slope == pytest.approx(2.0, abs=0.01)
    assert box_dimension_slope(covering_profile(CubeSet(6, [[1, 1]]))).slope == pytest.approx(0.0)
    with pytest.raises(InvalidInputError):
        box_dimension_slope([(Scale(2), 4)])


def test_box_slope_cantor_tree():
    R = build_R([0, 2, 6, 8, 12], 1.5, 0.5, enforce_decay=False)
    fit = box_dimension_slope(R.profile())
    # window-weighted average of fill slope 2 and block slope tau over the manifest
    ex = R.exponents
    weighted = sum((2 if i % 2 else 1.5) * (ex[i] - ex[i - 1]) for i in range(1, len(ex))) / ex[-1]
    assert 1.5 < fit.slope < 2
    assert fit.exponents[-1] == pytest.approx(weighted)
    assert abs(fit.slope - weighted) < 0.1


# ---------------------------------------------------------------- heavy tubes


def horizontal_segment(k=6, row=10):
    return CubeSet(k, [(x, row) for x in range(1 << k)])


def test_heavy_tubes_examples():
    K = horizontal_segment()
    H = heavy_tubes(K, 0, 1, 1, 0.05)
    assert [6, 0, 10] in [[6, *r] for r in H.tubes.idx.tolist()]
    assert heavy_tubes(K, 1, 1, 1, 0.05).tubes.idx.size == 0
    # zero exponent: the threshold is all of K
    H0 = heavy_tubes(K, 0, 1, 1, 0.0)
    assert H0.threshold == len(K)
    assert all(c == len(K) for c in H0.counts)


def oracle_heavy(cells, k, e, expo):
    """Reorient so the slope lies in [0, 1], then test every roughly parallel tube pairwise."""
    n = (1 << k) - 1
    if isinstance(e, float):
        fr, ef = (lambda x, y: (y, x)), Fraction(0)
    elif abs(e) <= 1:
        fr, ef = ((lambda x, y: (x, y)), e) if e >= 0 else ((lambda x, y: (x, n - y)), -e)
    elif e > 0:
        fr, ef = (lambda x, y: (y, x)), 1 / e
    else:
        fr, ef = (lambda x, y: (y, n - x)), -1 / e
    pts = [DyadicSquare(k, *fr(x, y)) for x, y in cells]
    need = 2.0 ** (-k * expo) * len(cells)
    out = {}
    for ia in range(n + 1):
        if not (Fraction(ia - 1, n + 1) <= ef < Fraction(ia + 2, n + 1)):
            continue
        for ib in range(n + 1):
            T = DyadicTube.at(k, ia, ib)
            c = sum(incident(p, T) for p in pts)
            if c >= need:
                out[(ia, ib)] = c
    return out


@pytest.mark.parametrize("e", [Fraction(0), Fraction(1, 3), Fraction(-1, 2), Fraction(3),
                               Fraction(-5, 2), math.inf])
def test_heavy_tubes_against_oracle(e):
    rng = np.random.default_rng(3)
    cells = sorted(set(map(tuple, rng.integers(0, 16, size=(60, 2)).tolist())))
    K = CubeSet(4, cells)
    t, s, eta = 1.2, 0.8, 0.05
    H = heavy_tubes(K, e, t, s, eta)
    got = {tuple(r): int(c) for r, c in zip(H.tubes.idx.tolist(), H.counts)}
    assert got == oracle_heavy(cells, 4, e, t - s + 2 * eta)
    assert got


@given(st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_heavy_tubes_monotone_in_eta(a, b):
    lo, hi = sorted((a, b))
    K = product_set(cantor_digits((0, 3), 3), cantor_digits((0, 3), 3), 6)
    # larger eta lowers the threshold, so the heavy family grows
    small = heavy_tubes(K, Fraction(1, 4), 1.0, 0.5, lo)
    big = heavy_tubes(K, Fraction(1, 4), 1.0, 0.5, hi)
    assert big.threshold <= small.threshold
    assert small.tubes.issubset(big.tubes)


# ---------------------------------------------------------------- heavy-part covers


def test_heavy_part_cover_no_heavy_tubes():
    K = CubeSet(6, [(10, y) for y in range(64)])
    r = heavy_part_cover(K, [Fraction(0)], 1.0, 0.9, 0.05, None, ["2^-6"])
    assert r.heavy_counts == ((0,),) and r.content == ((0.0,),)


def test_heavy_part_cover_contains_heavy_points():
    K = product_set(cantor_digits((0, 3), 4), cantor_digits((0, 3), 4), 8)
    dirs = [Fraction(0), Fraction(1, 2), Fraction(-1), Fraction(2), math.inf]
    r = heavy_part_cover(K, dirs, 1.0, 0.75, 0.08, None, ["2^-6", "2^-8"])
    assert all(all(row) for row in r.covers_ok)
    assert r.exponent == pytest.approx(1 - r.kappa + 3 * 0.08)
    for row, covers in zip(r.content, r.covers):
        for c, cv in zip(row, covers):
            assert c == pytest.approx(hausdorff_content_upper([(s, len(q)) for s, q in cv], r.exponent))


def test_heavy_part_cover_kappa_checks():
    K = horizontal_segment()
    with pytest.raises(InvalidParameterError):
        heavy_part_cover(K, [0], 1.0, 0.1, 0.3, None, ["2^-6"])
    with pytest.raises(InvalidParameterError):
        heavy_part_cover(K, [0], 1.0, 0.5, 0.05, 0.2, ["2^-6"])


# ---------------------------------------------------------------- exponents


def test_exponent_examples():
    assert exponent_table(1.8, 0.7).borelHeavyBound == pytest.approx(1.5, abs=1e-12)
    assert exponent_table(1.8, 0.9).borelHeavyBound == 0
    assert exponent_table(1.0, 0.5).furstenbergLB == pytest.approx(1.25, abs=1e-12)
    assert exponent_table(1.5, 0.8).subuniformBound == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        exponent_table(2.5, 0.5)
    with pytest.raises(InvalidParameterError):
        exponent_table(1.0, -0.1)


@given(st.floats(0, 2), st.floats(0, 1))
def test_exponent_invariants(t, s):
    row = exponent_table(t, s)
    assert row.borelHeavyBound <= t + 1e-12
    for f in ("furstenbergLB", "borelHeavyBound", "subuniformBound", "lineFamilyBound",
              "lineFamilySBound"):
        assert -1e-12 <= getattr(row, f) <= 2 + 1e-12
    assert t / 2 >= (2 * t - 1) / 3 - 1e-12
    if 1.5 < t <= 2:
        assert min(t, 3 - t) == 3 - t


@given(st.floats(0.05, 1.95), st.floats(0, 1))
def test_exponent_continuity_off_threshold(t, s):
    thr = (2 * t - 1) / 3
    h = 1e-7
    if abs(s - thr) < 1e-3 or not (h <= s <= 1 - h):
        return
    a, b = exponent_table(t, s), exponent_table(t, s + h)
    for f in ("furstenbergLB", "borelHeavyBound", "subuniformBound"):
        assert abs(getattr(a, f) - getattr(b, f)) <= 4 * h


def test_exponent_csv_header():
    text = exponent_table_csv([1.0, 1.8], [0.5, 0.7])
    lines = text.splitlines()
    assert lines[0].split(",")[:3] == ["t", "s", "furstenbergLB"]
    assert len(lines) == 5
