"""Ball-tube incidences, product cubes, coarsening and the incidence quotient.

A square ``p`` and a tube ``T`` of scale ``d = 2**-k`` are incident when the
ball of radius ``5d`` around ``p`` meets the closed strip of half-width
``5d`` around the core line of ``T``. With ``N = 2**k`` and integer indices
this is the exact test

    |ia*(2*ix + 1) + 2*N*(ib - iy) - N|  <=  20 * A * sqrt(N**2 + ia**2)

where ``A`` is a thickening factor (1 for the plain predicate). For each
slope index the right-hand side is turned into an integer radius with
``math.isqrt``, so the bucketed counter and the all-pairs oracle agree
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from ._rows import rows_in, unique_rows
from .dyadic import (CubeSet, DyadicSquare, DyadicTube, Scale, TubeSet, as_scale)
from .errors import InvalidInputError, InvalidParameterError, InvalidScaleError, UndefinedError

__all__ = [
    "IncidencePair",
    "ProductCube",
    "ProductCubeSet",
    "IncidenceSet",
    "QuotientRecord",
    "incident",
    "count_incidences",
    "count_incidences_bruteforce",
    "incidence_count_bruteforce",
    "incidence_count",
    "incidence_counts_per_tube",
    "coarsen",
    "coarse_incidences",
    "incidence_quotient",
    "quotients_csv",
]

# tubes x columns handled per vectorized chunk
_CHUNK = 1 << 21


def _factor(A) -> Fraction:
    f = Fraction(A)
    if f <= 0:
        raise InvalidParameterError(f"thickening factor must be positive, got {A}")
    return f


def _radius(N: int, ia: int, f: Fraction) -> int:
    """Largest integer r with r <= 20*f*sqrt(N^2 + ia^2)."""
    X = 400 * f.numerator ** 2 * (N * N + ia * ia)
    return math.isqrt(X // (f.denominator ** 2))


def _radius_table(k: int, ia: np.ndarray, f: Fraction) -> np.ndarray:
    N = 1 << k
    ua, inv = np.unique(ia, return_inverse=True)
    r = np.array([_radius(N, int(a), f) for a in ua.tolist()], dtype=np.int64)
    return r[inv.reshape(-1)]


@dataclass(frozen=True)
class IncidencePair:
    p: DyadicSquare
    T: DyadicTube

    def __post_init__(self):
        if self.p.k != self.T.k:
            raise InvalidInputError("incidence pair members must share a scale")


@dataclass(frozen=True, order=True)
class ProductCube:
    """The cube ``p x dual(T)`` in R^4."""

    p: DyadicSquare
    dual: DyadicSquare

    def __str__(self) -> str:
        return f"{self.p}|T:{self.dual.k}:{self.dual.ix}:{self.dual.iy}"


class ProductCubeSet:
    """Distinct product cubes at one scale, as an (m, 4) array ``(ix, iy, ia, ib)``.

    Rows are kept in tube-major order: sorted by ``(ia, ib, ix, iy)``.
    """

    __slots__ = ("_k", "_idx")

    def __init__(self, k: int | Scale, idx=None, *, assume_canonical: bool = False):
        k = k.k if isinstance(k, Scale) else Scale(k).k
        arr = np.empty((0, 4), dtype=np.int64) if idx is None else np.asarray(idx, dtype=np.int64)
        if arr.size == 0:
            arr = np.empty((0, 4), dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise InvalidInputError(f"product cubes need shape (m, 4), got {arr.shape}")
        if not assume_canonical:
            arr = unique_rows(arr[:, [2, 3, 0, 1]])[:, [2, 3, 0, 1]]
        arr.setflags(write=False)
        self._k = k
        self._idx = arr

    @property
    def k(self) -> int:
        return self._k

    @property
    def scale(self) -> Scale:
        return Scale(self._k)

    @property
    def idx(self) -> np.ndarray:
        return self._idx

    def __len__(self) -> int:
        return len(self._idx)

    def __iter__(self) -> Iterator[ProductCube]:
        k = self._k
        for ix, iy, ia, ib in self._idx.tolist():
            yield ProductCube(DyadicSquare(k, ix, iy), DyadicSquare(k, ia, ib))

    def __eq__(self, other) -> bool:
        return (isinstance(other, ProductCubeSet) and self._k == other._k
                and np.array_equal(self._idx, other._idx))

    def __hash__(self):
        return hash((self._k, self._idx.tobytes()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(scale={self.scale}, size={len(self)})"

    def cubes(self) -> CubeSet:
        return CubeSet(self._k, self._idx[:, :2])

    def tubes(self) -> TubeSet:
        return TubeSet(self._k, self._idx[:, 2:])

    def contains_rows(self, rows: np.ndarray) -> np.ndarray:
        return rows_in(np.asarray(rows, dtype=np.int64).reshape(-1, 4), self._idx)

    def issubset(self, other: "ProductCubeSet") -> bool:
        if self._k != other._k:
            raise InvalidInputError("product cube sets must share a scale")
        return bool(rows_in(self._idx, other._idx).all())

    def missing_from(self, other: "ProductCubeSet") -> "ProductCubeSet":
        """Members of ``self`` that are absent from ``other``."""
        return ProductCubeSet(self._k, self._idx[~rows_in(self._idx, other._idx)],
                              assume_canonical=True)

    def at(self, delta) -> "ProductCubeSet":
        D = as_scale(delta)
        if D.k > self._k:
            raise InvalidScaleError(f"{D} is finer than {self.scale}")
        return ProductCubeSet(D.k, self._idx >> (self._k - D.k))


class IncidenceSet(ProductCubeSet):
    """The incident pairs of two families, stored as product cubes."""

    __slots__ = ()

    def pairs(self) -> Iterator[IncidencePair]:
        k = self._k
        for ix, iy, ia, ib in self._idx.tolist():
            yield IncidencePair(DyadicSquare(k, ix, iy), DyadicTube(DyadicSquare(k, ia, ib)))


@dataclass(frozen=True)
class QuotientRecord:
    """Incidence quotient ``iota = |I| / (D * |P_D| * |T_D|)`` (kept exact)."""

    delta: Scale
    num_incidences: int
    num_cubes: int
    num_tubes: int
    iota: Fraction

    @property
    def iota_float(self) -> float:
        return float(self.iota)

    def as_dict(self) -> dict:
        return {
            "scale": str(self.delta),
            "cubes": self.num_cubes,
            "tubes": self.num_tubes,
            "incidences": self.num_incidences,
            "iota": str(self.iota),
            "iota_float": float(self.iota),
        }


# ---------------------------------------------------------------- predicate


def incident(p: DyadicSquare, T: DyadicTube, A=1) -> bool:
    """Whether the ball of ``p`` meets the strip of ``T`` (thickened by ``A``)."""
    if p.k != T.k:
        raise InvalidInputError(f"scale mismatch: square {p.scale}, tube {T.scale}")
    f = _factor(A)
    N = 1 << p.k
    num = T.ia * (2 * p.ix + 1) + 2 * N * (T.ib - p.iy) - N
    return abs(num) <= _radius(N, T.ia, f)


def _check_pair(P: CubeSet, Ts: TubeSet):
    if not isinstance(P, CubeSet) or not isinstance(Ts, TubeSet):
        raise InvalidInputError("expected a CubeSet and a TubeSet")
    if P.k != Ts.k:
        raise InvalidInputError(f"scale mismatch: cubes {P.scale}, tubes {Ts.scale}")


# ---------------------------------------------------------------- bucketed counting


class _ColumnIndex:
    """Squares grouped by column, with one sorted search key per square.

    ``key = rank(column) * width + (iy - ymin + 1)``. When the key range is
    small a prefix-count table replaces binary search.
    """

    _TABLE_LIMIT = 1 << 23

    def __init__(self, P: CubeSet):
        idx = P.idx  # sorted by (ix, iy)
        ix = idx[:, 0]
        new_col = np.empty(len(ix), dtype=bool)
        new_col[0] = True
        np.not_equal(ix[1:], ix[:-1], out=new_col[1:])
        self.cols = ix[new_col]
        rank = np.cumsum(new_col) - 1
        self.ymin = int(idx[:, 1].min())
        self.width = int(idx[:, 1].max()) - self.ymin + 3
        self.base = np.arange(len(self.cols), dtype=np.int64) * self.width
        self.keys = rank * self.width + (idx[:, 1] - self.ymin + 1)
        size = len(self.cols) * self.width
        self.table = None
        if size <= self._TABLE_LIMIT:
            self.table = np.zeros(size + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.keys, minlength=size), out=self.table[1:])

    def ranges(self, yl: np.ndarray, yh: np.ndarray):
        """Positions ``[left, right)`` of keys in ``[yl, yh]``."""
        if self.table is not None:
            left = self.table[yl]
            right = self.table[yh + 1]
        else:
            left = np.searchsorted(self.keys, yl, side="left")
            right = np.searchsorted(self.keys, yh, side="right")
        return left, np.maximum(right, left)


def _bands(P: CubeSet, Ts: TubeSet, f: Fraction):
    """Yield ``(first_tube_row, left, right)`` per chunk of tubes.

    ``left``/``right`` have shape (tubes, columns) and delimit the incident
    squares of each column inside the sorted index of ``P``.
    """
    if len(P) == 0 or len(Ts) == 0:
        return
    k = P.k
    N = 1 << k
    ci = _ColumnIndex(P)
    odd = 2 * ci.cols + 1
    ia_all = Ts.idx[:, 0]
    ib_all = Ts.idx[:, 1]
    r_all = _radius_table(k, ia_all, f)
    step = max(1, _CHUNK // max(1, len(ci.cols)))
    top = ci.width - 1
    for s in range(0, len(Ts), step):
        ia = ia_all[s:s + step, None]
        c = ia * odd[None, :] + (2 * N * ib_all[s:s + step] - N)[:, None]
        r = r_all[s:s + step, None]
        lo = -((r - c) // (2 * N))  # ceil((c - r) / 2N)
        hi = (c + r) // (2 * N)
        shift = 1 - ci.ymin
        yl = np.clip(lo + shift, 0, top) + ci.base
        yh = np.clip(hi + shift, 0, top) + ci.base
        left, right = ci.ranges(yl, yh)
        yield s, left, right


def incidence_counts_per_tube(P: CubeSet, Ts: TubeSet, A=1) -> np.ndarray:
    """Number of incident squares for each tube (aligned with ``Ts.idx``)."""
    _check_pair(P, Ts)
    out = np.zeros(len(Ts), dtype=np.int64)
    for s, left, right in _bands(P, Ts, _factor(A)):
        out[s:s + len(left)] = (right - left).sum(axis=1)
    return out


def incidence_count(P: CubeSet, Ts: TubeSet, A=1) -> int:
    """``|I(P, Ts)|`` without materializing the pairs."""
    return int(incidence_counts_per_tube(P, Ts, A).sum())


def count_incidences(P: CubeSet, Ts: TubeSet, A=1) -> IncidenceSet:
    """All incident pairs, found by searching a narrow band of each column per tube."""
    _check_pair(P, Ts)
    f = _factor(A)
    px = np.ascontiguousarray(P.idx[:, 0])
    py = np.ascontiguousarray(P.idx[:, 1])
    ta = np.ascontiguousarray(Ts.idx[:, 0])
    tb = np.ascontiguousarray(Ts.idx[:, 1])
    chunks = []
    for s, left, right in _bands(P, Ts, f):
        cnt = (right - left).ravel()
        nz = np.flatnonzero(cnt)
        if len(nz) == 0:
            continue
        cnt_nz = cnt[nz]
        total = int(cnt_nz.sum())
        # positions run through consecutive blocks [start, start + count)
        starts = left.ravel()[nz]
        p_pos = np.ones(total, dtype=np.int64)
        p_pos[0] = starts[0]
        ends = np.cumsum(cnt_nz)[:-1]
        p_pos[ends] = starts[1:] - starts[:-1] - cnt_nz[:-1] + 1
        np.cumsum(p_pos, out=p_pos)
        t_row = s + nz // left.shape[1]
        out = np.empty((4, total), dtype=np.int64)
        np.take(px, p_pos, out=out[0])
        np.take(py, p_pos, out=out[1])
        out[2] = np.repeat(ta[t_row], cnt_nz)
        out[3] = np.repeat(tb[t_row], cnt_nz)
        chunks.append(out.T)
    if not chunks:
        arr = np.empty((0, 4), dtype=np.int64)
    else:
        arr = chunks[0] if len(chunks) == 1 else np.concatenate(chunks)
    return IncidenceSet(P.k, arr, assume_canonical=True)


def _bruteforce_masks(P: CubeSet, Ts: TubeSet, A):
    """Yield ``(first_tube_row, mask)`` with ``mask[t, p]`` the exact all-pairs test."""
    _check_pair(P, Ts)
    f = _factor(A)
    if len(P) == 0 or len(Ts) == 0:
        return
    N = 1 << P.k
    fn2, fd2 = f.numerator ** 2, f.denominator ** 2
    ix = P.idx[:, 0][None, :]
    iy = P.idx[:, 1][None, :]
    # int64 is safe while every product stays below 2**62
    M = max(1, int(np.abs(P.idx).max()))
    num_bound = N * (2 * M + 1) + 2 * N * (N + M) + N
    exact_int = num_bound ** 2 * fd2 < (1 << 62) and 800 * fn2 * N * N < (1 << 62)
    step = max(1, _CHUNK // max(1, len(P)))
    for s in range(0, len(Ts), step):
        ia = Ts.idx[s:s + step, 0][:, None]
        ib = Ts.idx[s:s + step, 1][:, None]
        num = ia * (2 * ix + 1) + 2 * N * (ib - iy) - N
        if exact_int:
            mask = num * num * fd2 <= 400 * fn2 * (N * N + ia * ia)
        else:
            num_o = num.astype(object)
            ia_o = ia.astype(object)
            mask = (num_o * num_o * fd2 <= 400 * fn2 * (N * N + ia_o * ia_o)).astype(bool)
        yield s, mask


def count_incidences_bruteforce(P: CubeSet, Ts: TubeSet, A=1) -> IncidenceSet:
    """All-pairs oracle using the squared form of the distance inequality."""
    chunks = []
    for s, mask in _bruteforce_masks(P, Ts, A):
        ti, pi = np.nonzero(mask)
        if len(ti):
            chunks.append(np.concatenate([P.idx[pi], Ts.idx[s + ti]], axis=1))
    arr = np.concatenate(chunks) if chunks else np.empty((0, 4), dtype=np.int64)
    return IncidenceSet(P.k, arr, assume_canonical=True)


def incidence_count_bruteforce(P: CubeSet, Ts: TubeSet, A=1) -> int:
    """``|I(P, Ts)|`` by testing every pair."""
    return int(sum(int(mask.sum()) for _, mask in _bruteforce_masks(P, Ts, A)))


# ---------------------------------------------------------------- scale changes


def coarsen(I: ProductCubeSet, delta) -> ProductCubeSet:
    """Parents at scale ``delta`` of every product cube of ``I``."""
    D = as_scale(delta)
    if D.k > I.k:
        raise InvalidScaleError(f"cannot coarsen {I.scale} to the finer scale {D}")
    return I.at(D)


def coarse_incidences(P: CubeSet, Ts: TubeSet, delta) -> IncidenceSet:
    """``I(P_D, T_D)`` for the dyadic covers at scale ``delta``."""
    D = as_scale(delta)
    return count_incidences(P.at(D), Ts.at(D))


def incidence_quotient(P: CubeSet, Ts: TubeSet, delta) -> QuotientRecord:
    """Exact incidence quotient at scale ``delta``."""
    _check_pair(P, Ts)
    D = as_scale(delta)
    if D.k > P.k:
        raise InvalidScaleError(f"quotient scale {D} is finer than the families ({P.scale})")
    if len(P) == 0 or len(Ts) == 0:
        raise UndefinedError("the incidence quotient needs nonempty families")
    PD, TD = P.at(D), Ts.at(D)
    n = incidence_count(PD, TD)
    iota = Fraction(n * D.inverse, len(PD) * len(TD))
    return QuotientRecord(D, n, len(PD), len(TD), iota)


def quotients_csv(records) -> str:
    lines = ["scale,cubes,tubes,incidences,iota"]
    for r in records:
        lines.append(f"{r.delta},{r.num_cubes},{r.num_tubes},{r.num_incidences},{float(r.iota)!r}")
    return "\n".join(lines) + "\n"
