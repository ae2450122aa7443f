"""Dyadic squares, dyadic tubes and their covering numbers.

Scales are stored as integer exponents ``k`` with side length ``2**-k``.
Squares are half-open index cells ``[ix*d, (ix+1)*d) x [iy*d, (iy+1)*d)``.
A tube is described by its dual square of (slope, intercept) parameters;
the line ``y = a*x + b`` corresponds to the point ``(a, b)``.

All cell geometry is exact: coordinates are :class:`fractions.Fraction`
values with power-of-two denominators.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._rows import rows_in, unique_rows
from .errors import InvalidInputError, InvalidParameterError, InvalidScaleError

__all__ = [
    "Scale",
    "as_scale",
    "DyadicSquare",
    "DyadicTube",
    "Line",
    "Ball",
    "StdTube",
    "CubeSet",
    "TubeSet",
    "ScaleSequence",
    "duality_line",
    "cover",
    "parent",
    "ball_of",
    "std_tube_of",
]

_SCALE_RE = re.compile(r"^\s*2\s*\^\s*\(?\s*-\s*(\d+)\s*\)?\s*$")


@dataclass(frozen=True)
class Scale:
    """Dyadic length ``2**-k`` stored by its exponent."""

    k: int

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or isinstance(self.k, bool):
            raise InvalidScaleError(f"scale exponent must be an integer, got {self.k!r}")
        if self.k < 0:
            raise InvalidScaleError(f"scale exponent must be >= 0, got {self.k}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def value(self) -> Fraction:
        return Fraction(1, 1 << self.k)

    @property
    def inverse(self) -> int:
        """The integer ``2**k``."""
        return 1 << self.k

    def __float__(self) -> float:
        return math.ldexp(1.0, -self.k)

    def __str__(self) -> str:
        return f"2^-{self.k}"

    def is_finer_than(self, other: "Scale") -> bool:
        return self.k > other.k

    @classmethod
    def parse(cls, text: str) -> "Scale":
        """Parse ``"2^-k"`` (also ``"1"`` for k = 0)."""
        text = str(text).strip()
        if text == "1":
            return cls(0)
        m = _SCALE_RE.match(text)
        if not m:
            raise InvalidScaleError(f"cannot parse scale {text!r}; expected '2^-k'")
        return cls(int(m.group(1)))


def as_scale(x) -> Scale:
    """Coerce a Scale, a ``"2^-k"`` string, or an exact power of two <= 1."""
    if isinstance(x, Scale):
        return x
    if isinstance(x, str):
        return Scale.parse(x)
    if isinstance(x, (bool, np.bool_)):
        raise InvalidScaleError(f"not a scale: {x!r}")
    try:
        v = Fraction(x)
    except (TypeError, ValueError) as exc:
        raise InvalidScaleError(f"not a scale: {x!r}") from exc
    if v <= 0 or v > 1 or v.numerator != 1 or v.denominator & (v.denominator - 1):
        raise InvalidScaleError(f"{x!r} is not of the form 2^-k with k >= 0")
    return Scale(v.denominator.bit_length() - 1)


# ---------------------------------------------------------------- cells


@dataclass(frozen=True, order=True)
class DyadicSquare:
    """The half-open square of side ``2**-k`` with lower-left corner ``(ix, iy) * 2**-k``."""

    k: int
    ix: int
    iy: int

    def __post_init__(self):
        Scale(self.k)
        object.__setattr__(self, "ix", int(self.ix))
        object.__setattr__(self, "iy", int(self.iy))

    @property
    def scale(self) -> Scale:
        return Scale(self.k)

    @property
    def side(self) -> Fraction:
        return Fraction(1, 1 << self.k)

    @property
    def corner(self) -> tuple[Fraction, Fraction]:
        d = self.side
        return (self.ix * d, self.iy * d)

    @property
    def center(self) -> tuple[Fraction, Fraction]:
        d = self.side
        return ((2 * self.ix + 1) * d / 2, (2 * self.iy + 1) * d / 2)

    def in_unit_square(self) -> bool:
        n = 1 << self.k
        return 0 <= self.ix < n and 0 <= self.iy < n

    def contains_point(self, x, y) -> bool:
        x0, y0 = self.corner
        d = self.side
        return x0 <= Fraction(x) < x0 + d and y0 <= Fraction(y) < y0 + d

    def contains(self, other: "DyadicSquare") -> bool:
        if other.k < self.k:
            return False
        sh = other.k - self.k
        return (other.ix >> sh, other.iy >> sh) == (self.ix, self.iy)

    def __str__(self) -> str:
        return f"{self.k}:{self.ix}:{self.iy}"

    @classmethod
    def parse(cls, text: str) -> "DyadicSquare":
        parts = text.strip().split(":")
        if len(parts) != 3:
            raise InvalidInputError(f"cannot parse square {text!r}; expected 'k:ix:iy'")
        return cls(*(int(p) for p in parts))


@dataclass(frozen=True, order=True)
class DyadicTube:
    """The union of the lines ``y = a*x + b`` over ``(a, b)`` in the dual square."""

    dual: DyadicSquare

    def __post_init__(self):
        if not self.dual.in_unit_square():
            raise InvalidInputError(f"tube dual {self.dual} must lie in [0,1)^2")

    @classmethod
    def at(cls, k: int, ia: int, ib: int) -> "DyadicTube":
        return cls(DyadicSquare(k, ia, ib))

    @property
    def k(self) -> int:
        return self.dual.k

    @property
    def ia(self) -> int:
        return self.dual.ix

    @property
    def ib(self) -> int:
        return self.dual.iy

    @property
    def scale(self) -> Scale:
        return self.dual.scale

    def slope_interval(self) -> tuple[Fraction, Fraction]:
        a, _ = self.dual.corner
        return (a, a + self.dual.side)

    def contains(self, other: "DyadicTube") -> bool:
        return self.dual.contains(other.dual)

    def __str__(self) -> str:
        return f"T:{self.k}:{self.ia}:{self.ib}"

    @classmethod
    def parse(cls, text: str) -> "DyadicTube":
        parts = text.strip().split(":")
        if len(parts) != 4 or parts[0] != "T":
            raise InvalidInputError(f"cannot parse tube {text!r}; expected 'T:k:ia:ib'")
        return cls.at(*(int(p) for p in parts[1:]))


# ---------------------------------------------------------------- geometry


@dataclass(frozen=True)
class Line:
    """The affine line ``y = slope*x + intercept``."""

    slope: Fraction
    intercept: Fraction

    def __call__(self, x):
        return self.slope * x + self.intercept

    def contains_point(self, x, y) -> bool:
        return self.slope * Fraction(x) + self.intercept == Fraction(y)


def duality_line(a, b) -> Line:
    """Point-line duality: ``(a, b)`` maps to the line ``y = a*x + b``."""
    return Line(Fraction(a), Fraction(b))


@dataclass(frozen=True)
class Ball:
    """Closed disc."""

    center: tuple[Fraction, Fraction]
    radius: Fraction

    def contains_point(self, x, y) -> bool:
        dx = Fraction(x) - self.center[0]
        dy = Fraction(y) - self.center[1]
        return dx * dx + dy * dy <= self.radius * self.radius

    def contains_ball(self, other: "Ball") -> bool:
        """Exact check of ``other`` being a subset: ``|c - c'| + r' <= r``."""
        gap = self.radius - other.radius
        if gap < 0:
            return False
        dx = self.center[0] - other.center[0]
        dy = self.center[1] - other.center[1]
        return dx * dx + dy * dy <= gap * gap


@dataclass(frozen=True)
class StdTube:
    """Closed strip of half-width ``half_width`` around ``y = slope*x + intercept``."""

    slope: Fraction
    intercept: Fraction
    half_width: Fraction

    @property
    def core(self) -> Line:
        return Line(self.slope, self.intercept)

    def contains_point(self, x, y) -> bool:
        a, b = self.slope, self.intercept
        num = a * Fraction(x) - Fraction(y) + b
        return num * num <= self.half_width ** 2 * (1 + a * a)

    def distance(self, x: float, y: float) -> float:
        """Euclidean distance from a point to the core line."""
        a, b = float(self.slope), float(self.intercept)
        return abs(a * x - y + b) / math.hypot(1.0, a)


def ball_of(p: DyadicSquare) -> Ball:
    """The ball of radius ``5*side`` concentric with ``p``."""
    return Ball(p.center, 5 * p.side)


def std_tube_of(T: DyadicTube) -> StdTube:
    """The strip of half-width ``5*side`` whose core line comes from the dual's lower-left corner."""
    a, b = T.dual.corner
    return StdTube(a, b, 5 * T.dual.side)


def parent(cell, delta):
    """The dyadic cell of scale ``delta`` that contains ``cell``."""
    D = as_scale(delta)
    sq = cell.dual if isinstance(cell, DyadicTube) else cell
    if D.k > sq.k:
        raise InvalidScaleError(f"parent scale {D} is finer than the cell scale {sq.scale}")
    sh = sq.k - D.k
    up = DyadicSquare(D.k, sq.ix >> sh, sq.iy >> sh)
    return DyadicTube(up) if isinstance(cell, DyadicTube) else up


# ---------------------------------------------------------------- families


class _CellFamily:
    """Finite set of cells at one scale, stored as a sorted (m, 2) index array."""

    _header = ("k", "ix", "iy")

    __slots__ = ("_k", "_idx")

    def __init__(self, k: int | Scale, idx=None):
        k = k.k if isinstance(k, Scale) else Scale(k).k
        if idx is None:
            arr = np.empty((0, 2), dtype=np.int64)
        else:
            arr = np.asarray(idx, dtype=np.int64)
            if arr.size == 0:
                arr = np.empty((0, 2), dtype=np.int64)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise InvalidInputError(f"index array must have shape (m, 2), got {arr.shape}")
            arr = unique_rows(arr)
        arr.setflags(write=False)
        self._k = k
        self._idx = arr
        self._validate()

    def _validate(self):
        pass

    # construction ---------------------------------------------------
    @classmethod
    def _cell_to_row(cls, c) -> tuple[int, int, int]:
        return (c.k, c.ix, c.iy)

    @classmethod
    def from_cells(cls, cells: Iterable, k: int | None = None):
        rows = [cls._cell_to_row(c) for c in cells]
        ks = {r[0] for r in rows}
        if len(ks) > 1:
            raise InvalidInputError(f"cells have mixed scales {sorted(ks)}")
        if not rows:
            if k is None:
                raise InvalidInputError("cannot infer the scale of an empty family; pass k")
            return cls(k)
        kk = ks.pop()
        if k is not None and k != kk:
            raise InvalidInputError(f"cells are at scale 2^-{kk}, expected 2^-{k}")
        return cls(kk, [r[1:] for r in rows])

    @classmethod
    def full(cls, k: int):
        """Every cell of scale ``2**-k`` inside ``[0,1)^2``."""
        n = 1 << k
        g = np.arange(n, dtype=np.int64)
        return cls(k, np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2))

    # basic protocol -------------------------------------------------
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

    def __bool__(self) -> bool:
        return len(self._idx) > 0

    def _make(self, ix: int, iy: int):
        return DyadicSquare(self._k, ix, iy)

    def __iter__(self) -> Iterator:
        for ix, iy in self._idx.tolist():
            yield self._make(ix, iy)

    def __contains__(self, cell) -> bool:
        row = self._cell_to_row(cell)
        if row[0] != self._k:
            return False
        return bool(rows_in(np.array([row[1:]]), self._idx)[0])

    def __eq__(self, other) -> bool:
        return (type(self) is type(other) and self._k == other._k
                and np.array_equal(self._idx, other._idx))

    def __hash__(self):
        return hash((type(self).__name__, self._k, self._idx.tobytes()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(scale={self.scale}, size={len(self)})"

    # set algebra ----------------------------------------------------
    def _check_same(self, other):
        if type(self) is not type(other) or self._k != other._k:
            raise InvalidInputError("families must have the same type and scale")

    def union(self, other):
        self._check_same(other)
        return type(self)(self._k, np.concatenate([self._idx, other._idx]))

    def intersection(self, other):
        self._check_same(other)
        return type(self)(self._k, self._idx[rows_in(self._idx, other._idx)])

    def difference(self, other):
        self._check_same(other)
        return type(self)(self._k, self._idx[~rows_in(self._idx, other._idx)])

    def issubset(self, other) -> bool:
        self._check_same(other)
        return bool(rows_in(self._idx, other._idx).all())

    def subset(self, mask_or_index):
        """The sub-family selected by a boolean mask or index array."""
        return type(self)(self._k, self._idx[mask_or_index])

    # scale changes --------------------------------------------------
    def at(self, delta):
        """Dyadic cover at another scale: parents if coarser, all subcells if finer."""
        D = as_scale(delta)
        if D.k <= self._k:
            sh = self._k - D.k
            return type(self)(D.k, self._idx >> sh)
        sh = D.k - self._k
        m = 1 << sh
        g = np.arange(m, dtype=np.int64)
        off = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        kids = (self._idx[:, None, :] << sh) + off[None, :, :]
        return type(self)(D.k, kids.reshape(-1, 2))

    def covering_number(self, delta) -> int:
        return len(self.at(delta))

    def parents_of(self, delta) -> np.ndarray:
        """Row-aligned parent indices at a coarser scale (not deduplicated)."""
        D = as_scale(delta)
        if D.k > self._k:
            raise InvalidScaleError(f"{D} is finer than the family scale {self.scale}")
        return self._idx >> (self._k - D.k)

    def within(self, cell):
        """Members contained in a coarser cell."""
        sq = cell.dual if isinstance(cell, DyadicTube) else cell
        if sq.k > self._k:
            raise InvalidScaleError("container cell is finer than the family")
        sh = self._k - sq.k
        mask = ((self._idx[:, 0] >> sh) == sq.ix) & ((self._idx[:, 1] >> sh) == sq.iy)
        return self.subset(mask)

    def in_unit_square(self) -> bool:
        n = 1 << self._k
        return bool(((self._idx >= 0) & (self._idx < n)).all())

    # serialization --------------------------------------------------
    def tokens(self) -> list[str]:
        return [str(c) for c in self]

    def to_csv(self) -> str:
        lines = [",".join(self._header)]
        lines += [f"{self._k},{ix},{iy}" for ix, iy in self._idx.tolist()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str):
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            raise InvalidInputError("empty cell list")
        if rows[0].replace(" ", "").split(",")[0] == "k":
            rows = rows[1:]
        if not rows:
            raise InvalidInputError("cell list has a header but no rows")
        data = np.array([[int(v) for v in r.split(",")] for r in rows], dtype=np.int64)
        if data.shape[1] != 3:
            raise InvalidInputError("each row must have three integers k,ix,iy")
        ks = np.unique(data[:, 0])
        if len(ks) != 1:
            raise InvalidInputError(f"rows have mixed scales {ks.tolist()}")
        return cls(int(ks[0]), data[:, 1:])


class CubeSet(_CellFamily):
    """Finite family of dyadic squares at a common scale."""

    __slots__ = ()


class TubeSet(_CellFamily):
    """Finite family of dyadic tubes at a common scale, stored by dual squares."""

    __slots__ = ()
    _header = ("k", "ia", "ib")

    def _validate(self):
        if not self.in_unit_square():
            raise InvalidInputError("tube duals must lie in [0,1)^2")

    @classmethod
    def _cell_to_row(cls, c):
        if isinstance(c, DyadicTube):
            c = c.dual
        return (c.k, c.ix, c.iy)

    def _make(self, ia: int, ib: int):
        return DyadicTube(DyadicSquare(self._k, ia, ib))

    def duals(self) -> CubeSet:
        return CubeSet(self._k, self._idx)

    @classmethod
    def from_duals(cls, cubes: CubeSet) -> "TubeSet":
        return cls(cubes.k, cubes.idx)


def cover(obj, delta):
    """Dyadic cover of ``obj`` at scale ``delta``.

    ``obj`` may be a single cell, a cell family, or an ``(m, 2)`` array of
    points (floats or Fractions). For families the result has the same type;
    its length is the dyadic covering number.
    """
    D = as_scale(delta)
    if isinstance(obj, _CellFamily):
        return obj.at(D)
    if isinstance(obj, DyadicTube):
        return TubeSet.from_cells([obj]).at(D)
    if isinstance(obj, DyadicSquare):
        return CubeSet.from_cells([obj]).at(D)
    pts = np.asarray(obj, dtype=object if _has_fractions(obj) else float)
    if pts.size == 0:
        return CubeSet(D.k)
    pts = pts.reshape(-1, 2)
    n = 1 << D.k
    if pts.dtype == object:
        idx = np.array([[math.floor(Fraction(x) * n), math.floor(Fraction(y) * n)]
                        for x, y in pts.tolist()], dtype=np.int64)
    else:
        if not np.isfinite(pts).all():
            raise InvalidInputError("points must be finite")
        idx = np.floor(pts * n).astype(np.int64)
    return CubeSet(D.k, idx)


def _has_fractions(obj) -> bool:
    if isinstance(obj, np.ndarray):
        return obj.dtype == object
    stack = [obj]
    while stack:
        x = stack.pop()
        if isinstance(x, Fraction):
            return True
        if isinstance(x, (list, tuple)):
            stack.extend(x)
    return False


# ---------------------------------------------------------------- scale ladders


@dataclass(frozen=True)
class ScaleSequence:
    """Geometric ladder ``1 = D_0 > D_1 > ... > D_n = delta`` with ratio ``S = 2**step``.

    ``levels[j]`` is ``D_j``; consecutive levels differ by the factor ``S``.
    """

    delta: Scale
    step: int

    def __post_init__(self):
        object.__setattr__(self, "delta", as_scale(self.delta))
        if self.step < 1 or self.delta.k % self.step:
            raise InvalidParameterError(
                f"ladder step 2^{self.step} must divide 1/delta = 2^{self.delta.k}")

    @classmethod
    def from_eta(cls, delta, eta: float) -> "ScaleSequence":
        """Ladder with ``S = delta**-eta``; requires ``k*eta`` and ``1/eta`` to be integers."""
        D = as_scale(delta)
        if not 0 < eta < 1:
            raise InvalidParameterError(f"eta must lie in (0,1), got {eta}")
        step = D.k * eta
        if abs(step - round(step)) > 1e-9 or round(step) < 1:
            raise InvalidParameterError(f"delta^-eta = 2^{step:g} is not a power of two")
        return cls(D, int(round(step)))

    @property
    def eta(self) -> float:
        return self.step / self.delta.k

    @property
    def S(self) -> int:
        return 1 << self.step

    @property
    def n(self) -> int:
        return self.delta.k // self.step

    @property
    def levels(self) -> tuple[Scale, ...]:
        return tuple(Scale(j * self.step) for j in range(self.n + 1))

    def level(self, j: int) -> Scale:
        if not 0 <= j <= self.n:
            raise IndexError(j)
        return Scale(j * self.step)

    def __str__(self) -> str:
        return "{" + ", ".join(str(s) for s in self.levels) + "}"


def scale_list(scales: Sequence) -> list[Scale]:
    """Coerce a sequence of scale-like values."""
    return [as_scale(s) for s in scales]
