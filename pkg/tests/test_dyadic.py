from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slicelab.dyadic import (CubeSet, DyadicSquare, DyadicTube, Scale, ScaleSequence, TubeSet,
                             as_scale, ball_of, cover, duality_line, parent, std_tube_of)
from slicelab.errors import InvalidInputError, InvalidParameterError, InvalidScaleError


def squares(max_k=8):
    return st.integers(0, max_k).flatmap(
        lambda k: st.tuples(st.just(k), st.integers(0, (1 << k) - 1), st.integers(0, (1 << k) - 1)))


# ---------------------------------------------------------------- scales


def test_scale_parse_roundtrip():
    assert Scale.parse("2^-8") == Scale(8)
    assert str(Scale(8)) == "2^-8"
    assert Scale.parse("1") == Scale(0)
    assert as_scale(Fraction(1, 16)) == Scale(4)
    assert as_scale(0.25) == Scale(2)


@pytest.mark.parametrize("bad", ["2^8", "0.3", "abc", 3, 0.3, -1, True])
def test_scale_rejects_non_dyadic(bad):
    with pytest.raises(InvalidScaleError):
        as_scale(bad)


def test_scale_sequence_levels():
    L = ScaleSequence.from_eta("2^-6", 1 / 3)
    assert L.S == 4 and L.n == 3
    assert [s.k for s in L.levels] == [0, 2, 4, 6]
    with pytest.raises(InvalidParameterError):
        ScaleSequence(Scale(6), 4)
    with pytest.raises(InvalidParameterError):
        ScaleSequence.from_eta("2^-6", 0.3)


# ---------------------------------------------------------------- duality and geometry


def test_duality_line_examples():
    assert duality_line(0, 0)(Fraction(7, 3)) == 0
    diag = duality_line(1, 0)
    assert diag(Fraction(2, 5)) == Fraction(2, 5)
    L = duality_line(0.5, 0.25)
    assert L.contains_point(0, Fraction(1, 4)) and L.contains_point(1, Fraction(3, 4))


def test_ball_and_tube_examples():
    b = ball_of(DyadicSquare(2, 0, 0))
    assert b.center == (Fraction(1, 8), Fraction(1, 8)) and b.radius == Fraction(5, 4)
    T = std_tube_of(DyadicTube.at(6, 0, 0))
    assert (T.slope, T.intercept, T.half_width) == (0, 0, Fraction(5, 64))


@given(squares(8), st.integers(0, 8))
def test_ball_nesting(sq, j):
    k, ix, iy = sq
    p = DyadicSquare(k, ix, iy)
    P = parent(p, Scale(min(j, k)))
    assert ball_of(P).contains_ball(ball_of(p))


@given(squares(7), st.integers(0, 7), st.data())
def test_tube_nesting_inside_B2(sq, j, data):
    k, ia, ib = sq
    T = DyadicTube.at(k, ia, ib)
    big = std_tube_of(parent(T, Scale(min(j, k))))
    small = std_tube_of(T)
    # points on the small strip's boundary with |x| <= 2 stay in the big strip
    x = Fraction(data.draw(st.integers(-2000, 2000)), 1000)
    norm = (1 + small.slope ** 2)
    for sign in (-1, 1):
        # vertical offset realising distance half_width along the normal
        off = sign * small.half_width * Fraction(int((float(norm) ** 0.5) * 10 ** 9), 10 ** 9)
        y = small.slope * x + small.intercept + off
        if x * x + y * y <= 4:
            assert big.contains_point(x, y)


# ---------------------------------------------------------------- parents and covers


def test_parent_examples():
    assert parent(DyadicSquare(4, 5, 9), "2^-2") == DyadicSquare(2, 1, 2)
    sq = DyadicSquare(5, 3, 7)
    assert parent(sq, Scale(5)) == sq
    assert parent(DyadicTube.at(6, 10, 33), "2^-3") == DyadicTube.at(3, 1, 4)
    with pytest.raises(InvalidScaleError):
        parent(DyadicSquare(2, 0, 0), "2^-3")


def test_cover_examples():
    assert len(cover(CubeSet.full(0), "2^-2")) == 16
    for k in (0, 3, 9):
        assert len(cover([(0.0, 0.0)], Scale(k))) == 1
    assert len(cover([], "2^-3")) == 0


def test_cover_block_grid_points():
    # 64 x 64 grid with spacing 2^-6 lands in distinct 2^-8 cubes
    g = [Fraction(i, 64) for i in range(64)]
    pts = [(x, y) for x in g for y in g]
    assert len(cover(pts, "2^-8")) == 4096


@given(st.lists(st.tuples(st.floats(0, 0.999), st.floats(0, 0.999)), max_size=40),
       st.lists(st.tuples(st.floats(0, 0.999), st.floats(0, 0.999)), max_size=40),
       st.integers(0, 7))
def test_cover_monotone_idempotent(a, b, k):
    A = cover(a, Scale(k))
    AB = cover(a + b, Scale(k))
    assert A.issubset(AB)
    assert cover(A, Scale(k)) == A
    # oracle: floor of coordinates
    want = {(int(x * 2 ** k), int(y * 2 ** k)) for x, y in a}
    assert set(map(tuple, A.idx.tolist())) == want


@given(squares(8), st.integers(0, 8))
def test_parent_fiber_size(sq, j):
    k, ix, iy = sq
    j = min(j, k)
    P = parent(DyadicSquare(k, ix, iy), Scale(j))
    fiber = CubeSet.full(k).within(P)
    assert len(fiber) == (1 << (k - j)) ** 2
    tubes = TubeSet.full(k).within(DyadicTube(P))
    assert len(tubes) == (1 << (k - j)) ** 2


# ---------------------------------------------------------------- families


def test_family_roundtrip_and_errors():
    P = CubeSet(3, [[1, 2], [0, 0], [1, 2]])
    assert len(P) == 2 and P.idx.tolist() == [[0, 0], [1, 2]]
    assert CubeSet.from_csv(P.to_csv()) == P
    T = TubeSet.from_cells([DyadicTube.at(4, 1, 1), DyadicTube.at(4, 2, 3)])
    assert TubeSet.from_csv(T.to_csv()) == T
    assert T.tokens() == ["T:4:1:1", "T:4:2:3"]
    with pytest.raises(InvalidInputError):
        TubeSet(2, [[4, 0]])
    with pytest.raises(InvalidInputError):
        CubeSet.from_csv("")
    assert DyadicSquare.parse("3:1:2") == DyadicSquare(3, 1, 2)
    assert DyadicTube.parse("T:3:1:2") == DyadicTube.at(3, 1, 2)
