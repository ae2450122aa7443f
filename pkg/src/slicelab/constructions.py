"""Explicit constructions: the sheared-grid building block, its direction set,
the nested Cantor set R, the line families L_F and L_G, and Frostman masses.

Coordinates are integer cell indices at the working scale, so every
construction is exact and reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._rows import row_keys, rows_in
from .analysis import delta_set_constant
from .dyadic import CubeSet, DyadicSquare, Scale, TubeSet, as_scale
from .errors import InvalidInputError, InvalidParameterError

__all__ = [
    "BlockParams",
    "Block",
    "P1Report",
    "P2Report",
    "CantorTree",
    "LFReport",
    "TubeTree",
    "ColumnTree",
    "FrostmanMeasure",
    "build_block",
    "direction_set",
    "projection_cells",
    "projection_count",
    "distinct_projections",
    "verify_P1",
    "verify_P2",
    "direction_covering",
    "build_R",
    "build_LF",
    "intersect_direction_sets",
    "build_LG",
    "column_subtree",
    "frostman_measure",
    "uniform_test_tree",
    "cantor_digits",
    "product_set",
]


def _is_int(x: float) -> bool:
    return abs(x - round(x)) < 1e-9


# ---------------------------------------------------------------- building block


@dataclass(frozen=True)
class BlockParams:
    """Scale, grid dimension tau and direction dimension s of a building block.

    The unsheared grid has ``M = delta^(-tau/2)`` points per side with
    spacing ``m = delta^(tau/2 - 1)`` cells; the shear is ``theta = 1/m``.
    Both must be integers unless ``allow_rounding`` is set, in which case
    ``m`` is rounded to the nearest integer and ``M = delta^-1 // m``.
    """

    delta: Scale
    tau: float
    s: float
    allow_rounding: bool = False

    def __post_init__(self):
        object.__setattr__(self, "delta", as_scale(self.delta))
        if not 1 < self.tau <= 2:
            raise InvalidParameterError(f"tau must lie in (1, 2], got {self.tau}")
        if not -1e-12 <= self.s <= 2 - self.tau + 1e-12:
            raise InvalidParameterError(f"s must lie in [0, 2 - tau], got {self.s}")
        if self.delta.k < 1:
            raise InvalidParameterError("the block needs delta <= 1/2")
        half = self.delta.k * self.tau / 2
        if not _is_int(half) and not self.allow_rounding:
            raise InvalidParameterError(
                f"delta^(-tau/2) = 2^{half:g} is not an integer; pass allow_rounding=True")

    @property
    def k(self) -> int:
        return self.delta.k

    @property
    def exact(self) -> bool:
        return _is_int(self.k * self.tau / 2)

    @property
    def stride(self) -> int:
        """``m``: spacing of the unsheared grid in cells."""
        if self.exact:
            return 1 << (self.k - int(round(self.k * self.tau / 2)))
        return max(1, int(round(2.0 ** (self.k * (1 - self.tau / 2)))))

    @property
    def grid(self) -> int:
        """``M``: grid points per side."""
        if self.exact:
            return 1 << int(round(self.k * self.tau / 2))
        return (1 << self.k) // self.stride

    @property
    def theta(self) -> Fraction:
        return Fraction(1, self.stride)

    @property
    def N(self) -> int:
        """Largest numerator and denominator in the direction set, ``floor(delta^(-s/2))``."""
        x = self.k * self.s / 2
        if _is_int(x):
            return 1 << int(round(x))
        return max(1, int(math.floor(2.0 ** x)))

    @property
    def ap_step(self) -> int:
        """Progression step ``delta^(tau-1)`` in cells."""
        return self.stride * self.stride

    @property
    def ap_length(self) -> int:
        """Required progression length ``delta^(1-tau) / 2``."""
        return self.grid // (2 * self.stride)

    def as_dict(self) -> dict:
        return {"delta": str(self.delta), "tau": self.tau, "s": self.s,
                "allow_rounding": self.allow_rounding, "grid": self.grid,
                "stride": self.stride, "theta": str(self.theta), "N": self.N}


@dataclass(frozen=True)
class Block:
    """The block cubes with their shifted rationals ``p/q - theta`` and a separated subset."""

    params: BlockParams
    cubes: CubeSet
    directions: tuple[Fraction, ...]
    separated: tuple[Fraction, ...]
    raw_direction_count: int

    @property
    def lambdas(self) -> tuple[Fraction, ...]:
        return tuple(e + self.params.theta for e in self.directions)

    def as_dict(self) -> dict:
        return {"params": self.params.as_dict(), "num_cubes": len(self.cubes),
                "num_directions": len(self.directions),
                "raw_direction_count": self.raw_direction_count,
                "num_separated": len(self.separated),
                "directions": [str(e) for e in self.directions]}


def _separation(params: BlockParams):
    x = params.k * params.s
    return Fraction(1, 1 << int(round(x))) if _is_int(x) else 2.0 ** (-x)


def direction_set(params: BlockParams) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...], int]:
    """Shifted rationals ``p/q - theta`` with ``0 <= p <= N``, ``1 <= q <= N``.

    Returns the sorted distinct directions, a greedy left-to-right subset
    with gaps at least ``delta^s``, and the count before deduplication.
    """
    N = params.N
    lam = sorted({Fraction(p, q) for p in range(N + 1) for q in range(1, N + 1)})
    dirs = tuple(l - params.theta for l in lam)
    gap = _separation(params)
    sep: list[Fraction] = []
    for e in dirs:
        if not sep or (e - sep[-1] >= gap if isinstance(gap, Fraction) else float(e - sep[-1]) >= gap):
            sep.append(e)
    return dirs, tuple(sep), (N + 1) * N


def build_block(params: BlockParams) -> Block:
    """Sheared grid, thickened to delta-cubes, unioned with its copy shifted left by 1/2.

    Grid point ``(k, l)`` lands in cell ``(m k + l, m l)``; cells outside
    ``[0,1)^2`` are discarded. For tau = 2 the block is the full grid.
    """
    k = params.k
    n = 1 << k
    if params.tau == 2:
        cubes = CubeSet.full(k)
    else:
        m, M = params.stride, params.grid
        g = np.arange(M, dtype=np.int64)
        kk, ll = np.meshgrid(g, g, indexing="ij")
        x = (m * kk + ll).reshape(-1)
        y = (m * ll).reshape(-1)
        keep = x < n
        base = np.stack([x[keep], y[keep]], axis=1)
        shifted = base - np.array([n >> 1, 0], dtype=np.int64)
        shifted = shifted[shifted[:, 0] >= 0]
        cubes = CubeSet(k, np.concatenate([base, shifted]))
    dirs, sep, raw = direction_set(params)
    return Block(params, cubes, dirs, sep, raw)


# ---------------------------------------------------------------- projections


def _floor_over_sqrt(v: np.ndarray, G: int) -> np.ndarray:
    """Exact ``floor(v / sqrt(G))`` for integer ``v`` and ``G >= 1``.

    Floats give the answer except near integers, which are redone with isqrt.
    """
    f = v / math.sqrt(G)
    out = np.floor(f).astype(np.int64)
    near = np.flatnonzero(np.abs(f - np.rint(f)) < 1e-6)
    for i in near.tolist():
        w = int(v[i])
        n = math.isqrt(w * w // G)
        if w >= 0:
            out[i] = n
        else:
            out[i] = -n if n * n * G == w * w else -n - 1
    return out


def projection_cells(idx: np.ndarray, e, normalized: bool = True) -> np.ndarray:
    """Sorted cell indices ``t`` of the delta-intervals met by the projected cubes.

    Cubes are ``[ix, ix+1) x [iy, iy+1)`` in cell units. With ``normalized``
    the map is the orthogonal projection ``(x + e y) / sqrt(1 + e^2)``;
    otherwise it is ``x + e y``. Exact for rational ``e``.
    """
    e = Fraction(e)
    a, b = e.numerator, e.denominator
    if len(idx) == 0:
        return np.empty(0, dtype=np.int64)
    ix, iy = idx[:, 0], idx[:, 1]
    if normalized:
        v_lo = ix * b + a * iy + min(0, a)
        v_hi = ix * b + a * iy + b + max(0, a)
        G = a * a + b * b
        lo = _floor_over_sqrt(v_lo, G)
        hi = -_floor_over_sqrt(-v_hi, G) - 1
    else:
        lo = ix + (a * iy + min(0, a)) // b
        hi = ix - (-(a * iy + max(0, a))) // b
    base = int(lo.min())
    span = int(hi.max()) - base + 2
    diff = np.bincount(lo - base, minlength=span) - np.bincount(hi - base + 1, minlength=span)
    return np.flatnonzero(np.cumsum(diff)[:-1] > 0) + base


def projection_count(cubes: CubeSet, e, normalized: bool = True) -> int:
    """``|pi_e(union of cubes)|_delta`` for the projection along direction ``(1, e)``."""
    return len(projection_cells(cubes.idx, e, normalized))


def distinct_projections(cubes: CubeSet, e) -> int:
    """Number of distinct values ``x + e y`` over the lower-left cube corners."""
    e = Fraction(e)
    vals = cubes.idx[:, 0].astype(object) * e.denominator + cubes.idx[:, 1].astype(object) * e.numerator
    if e.denominator < (1 << 40) and abs(e.numerator) < (1 << 40):
        vals = cubes.idx[:, 0] * e.denominator + cubes.idx[:, 1] * e.numerator
    return len(np.unique(vals))


# ---------------------------------------------------------------- (P1) and (P2)


@dataclass(frozen=True)
class P1Report:
    """Per-column longest progressions and (delta, tau-1, C) constants of the fibers."""

    params: BlockParams
    step: int
    required: int
    lengths: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)
    fiber_constants: np.ndarray = field(repr=False)
    witness_constants: np.ndarray = field(repr=False)
    empty_columns: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not self.empty_columns and bool((self.lengths >= self.required).all())

    @property
    def min_length(self) -> int:
        return int(self.lengths.min())

    @property
    def fiber_constant(self) -> float:
        return float(np.max(self.fiber_constants))

    @property
    def witness_constant(self) -> float:
        return float(np.max(self.witness_constants))

    def as_dict(self) -> dict:
        return {"params": self.params.as_dict(), "step": self.step, "required_length": self.required,
                "ok": self.ok, "min_length": self.min_length,
                "fiber_constant": self.fiber_constant, "witness_constant": self.witness_constant,
                "empty_columns": list(self.empty_columns)}


def _longest_progression(col: np.ndarray, step: int) -> tuple[int, int]:
    """Longest run ``y, y+step, ...`` inside a boolean column; returns (length, start)."""
    n = len(col)
    L = -(-n // step)
    B = np.zeros(L * step, dtype=bool)
    B[:n] = col
    B = B.reshape(L, step)
    run = np.zeros(step, dtype=np.int64)
    best, start = 0, 0
    for i in range(L):
        run = np.where(B[i], run + 1, 0)
        j = int(np.argmax(run))
        if run[j] > best:
            best = int(run[j])
            start = (i - best + 1) * step + j
    return best, start


def verify_P1(block: Block) -> P1Report:
    """Check every column fiber for a progression of step ``delta^(tau-1)``.

    Also records each fiber's (delta, tau-1, C) constant and that of the
    progression witness.
    """
    p = block.params
    k, n = p.k, 1 << p.k
    step = p.ap_step
    req = p.ap_length
    grid = np.zeros((n, n), dtype=bool)
    grid[block.cubes.idx[:, 0], block.cubes.idx[:, 1]] = True
    lengths = np.zeros(n, dtype=np.int64)
    starts = np.zeros(n, dtype=np.int64)
    fc = np.zeros(n)
    wc = np.zeros(n)
    empty = []
    s = p.tau - 1
    for x in range(n):
        col = grid[x]
        if not col.any():
            empty.append(x)
            continue
        length, start = _longest_progression(col, step)
        lengths[x], starts[x] = length, start
        fc[x] = delta_set_constant(np.flatnonzero(col), Scale(k), s).constant
        wc[x] = delta_set_constant(start + step * np.arange(length), Scale(k), s).constant
    return P1Report(p, step, req, lengths, starts, fc, wc, tuple(empty))


@dataclass(frozen=True)
class P2Report:
    """Projection covering counts for the block's directions and their perturbations."""

    params: BlockParams
    directions: tuple[Fraction, ...]
    counts: tuple[int, ...]
    perturbed_counts: tuple[int, ...]
    bound: float
    constant: float
    kernel_pairs: int
    kernel_ok: bool

    @property
    def max_count(self) -> int:
        return max(max(self.counts), max(self.perturbed_counts, default=0))

    def as_dict(self) -> dict:
        return {"params": self.params.as_dict(), "bound": self.bound, "constant": self.constant,
                "max_count": self.max_count, "kernel_pairs": self.kernel_pairs,
                "kernel_ok": self.kernel_ok,
                "directions": [{"e": str(e), "count": c, "perturbed": pc}
                               for e, c, pc in zip(self.directions, self.counts,
                                                   self.perturbed_counts)]}


def _kernel_check(block: Block) -> tuple[int, bool]:
    """Grid translates by ``(p, -q)`` keep ``x + (p/q - theta) y``; checked on the sheared cells.

    In cell units a grid step ``(p, -q)`` moves a block cell by
    ``(m p - q, -m q)``, and ``q m x + (p m - q) y`` is ``q m`` times the
    projection value.
    """
    if block.params.tau == 2:
        return 0, True
    m = block.params.stride
    idx = block.cubes.idx
    pairs, ok = 0, True
    for lam in block.lambdas:
        p, q = lam.numerator, lam.denominator
        if p == 0:
            continue
        moved = idx + np.array([m * p - q, -m * q], dtype=np.int64)
        hit = rows_in(moved, idx)
        a = q * m * idx[hit, 0] + (p * m - q) * idx[hit, 1]
        b = q * m * moved[hit, 0] + (p * m - q) * moved[hit, 1]
        pairs += int(hit.sum())
        ok &= bool(np.array_equal(a, b))
    return pairs, ok


def verify_P2(block: Block, perturb: bool = True) -> P2Report:
    """Covering number of every projection ``pi_e`` of the block against ``delta^(-(s+tau)/2)``.

    With ``perturb`` the directions ``e - delta`` and ``e + delta`` are
    evaluated too; the constant is the largest count over the bound.
    """
    p = block.params
    d = Fraction(1, 1 << p.k)
    counts, pert = [], []
    for e in block.directions:
        counts.append(projection_count(block.cubes, e))
        if perturb:
            pert.append(max(projection_count(block.cubes, e - d), projection_count(block.cubes, e + d)))
    bound = 2.0 ** (p.k * (p.s + p.tau) / 2)
    worst = max(counts + pert)
    pairs, ok = _kernel_check(block)
    return P2Report(p, block.directions, tuple(counts), tuple(pert), bound, worst / bound, pairs, ok)


def direction_covering(directions: Sequence[Fraction], k: int, s: float) -> tuple[int, float]:
    """``|E|_{delta^s}`` for ``delta = 2^-k`` and the ratio ``|E|_{delta^s} * delta^s``."""
    x = k * s
    if _is_int(x):
        j = int(round(x))
        cells = {math.floor(e * (1 << j)) for e in directions}
        return len(cells), len(cells) / (1 << j)
    w = 2.0 ** (-x)
    cells = {math.floor(float(e) / w) for e in directions}
    return len(cells), len(cells) * w


# ---------------------------------------------------------------- the Cantor set R


@dataclass(frozen=True)
class CantorTree:
    """Alternating fill and block levels of the nested set R.

    ``exponents[i]`` is the scale exponent of ``levels[i]``; level 0 is the
    unit square, odd levels are fills (all subcells), even levels ``> 0``
    place a rescaled block inside every cube of the previous level.
    """

    exponents: tuple[int, ...]
    tau: float
    s: float
    levels: tuple[CubeSet, ...]
    block_params: tuple[BlockParams | None, ...]
    decay_ok: bool
    decay_violations: tuple[str, ...]

    @property
    def scale_pairs(self) -> list[tuple[Scale, Scale | None]]:
        ex = list(self.exponents)
        return [(Scale(ex[i]), Scale(ex[i + 1]) if i + 1 < len(ex) else None)
                for i in range(0, len(ex), 2)]

    def kind(self, i: int) -> str:
        return "root" if i == 0 else ("fill" if i % 2 else "block")

    @property
    def finest(self) -> CubeSet:
        return self.levels[-1]

    def profile(self) -> list[tuple[Scale, int]]:
        """``(2^-j, |R|_{2^-j})`` for every j down to the finest level."""
        f = self.finest
        return [(Scale(j), f.covering_number(Scale(j))) for j in range(f.k + 1)]

    def as_dict(self) -> dict:
        return {
            "exponents": list(self.exponents), "tau": self.tau, "s": self.s,
            "decay_ok": self.decay_ok, "decay_violations": list(self.decay_violations),
            "levels": [{"scale": str(L.scale), "kind": self.kind(i), "count": len(L),
                        "block": bp.as_dict() if bp else None}
                       for i, (L, bp) in enumerate(zip(self.levels, self.block_params))],
        }


def _decay_violations(ex: Sequence[int]) -> list[str]:
    """Rapid decay: fill exponents exceed 2n times the preceding block exponent, and so on."""
    out = []
    for i in range(1, len(ex)):
        n = i // 2
        if i % 2:  # delta_n < Delta_n^(2n)
            need = 2 * n * ex[i - 1]
            if not ex[i] > need and n > 0:
                out.append(f"delta_{n} = 2^-{ex[i]} is not below Delta_{n}^{2 * n} = 2^-{need}")
        else:  # Delta_{n} < delta_{n-1}^(2n)
            need = 2 * n * ex[i - 1]
            if not ex[i] > need:
                out.append(f"Delta_{n} = 2^-{ex[i]} is not below delta_{n - 1}^{2 * n} = 2^-{need}")
    return out


def _check_exponents(exponents: Sequence[int]) -> tuple[int, ...]:
    ex = tuple(int(e) for e in exponents)
    if len(ex) < 2 or ex[0] != 0:
        raise InvalidParameterError("exponents must start with 0 and list at least one more scale")
    if any(b <= a for a, b in zip(ex, ex[1:])):
        raise InvalidParameterError(f"exponents must increase strictly, got {list(ex)}")
    if len(ex) > 7:
        raise InvalidParameterError("at most 3 scale pairs are supported")
    return ex


def build_R(exponents: Sequence[int], tau: float, s: float = 0.0, *,
            enforce_decay: bool = True, allow_rounding: bool = False) -> CantorTree:
    """Build the levels of R for the alternating exponents ``[0, k0, K1, k1, K2, ...]``.

    Fill levels contain every subcell of the previous level; block levels
    replace every cube Q by the block at ratio ``Delta_{n+1}/delta_n`` rescaled
    into Q. With ``enforce_decay`` a violated decay condition raises.
    """
    ex = _check_exponents(exponents)
    viol = _decay_violations(ex)
    if viol and enforce_decay:
        raise InvalidParameterError("; ".join(viol))
    levels = [CubeSet(0, [[0, 0]])]
    params: list[BlockParams | None] = [None]
    for i in range(1, len(ex)):
        prev = levels[-1]
        if i % 2:
            levels.append(prev.at(Scale(ex[i])))
            params.append(None)
        else:
            kb = ex[i] - ex[i - 1]
            bp = BlockParams(Scale(kb), tau, s, allow_rounding)
            B = build_block(bp).cubes.idx
            kids = (prev.idx[:, None, :] << kb) + B[None, :, :]
            levels.append(CubeSet(ex[i], kids.reshape(-1, 2)))
            params.append(bp)
    return CantorTree(ex, tau, s, tuple(levels), tuple(params), not viol, tuple(viol))


# ---------------------------------------------------------------- the line family L_F


@dataclass(frozen=True)
class LFReport:
    """Per-scale tube covers of the lines through R in the block directions."""

    scales: tuple[Scale, ...]
    directions: tuple[tuple[Fraction, ...], ...]
    per_direction: tuple[tuple[int, ...], ...]
    totals: tuple[int, ...]
    direction_bounds: tuple[float, ...]
    total_bounds: tuple[float, ...]
    cells: tuple[tuple[np.ndarray, ...], ...] = field(repr=False)
    E_intervals: tuple[tuple[Fraction, Fraction], ...] = ()

    @property
    def E_nonempty(self) -> bool:
        return len(self.E_intervals) > 0

    def as_dict(self) -> dict:
        return {
            "levels": [{"scale": str(sc), "num_directions": len(d), "max_per_direction": max(pd),
                        "per_direction": list(pd), "total": tot,
                        "direction_bound": db, "total_bound": tb}
                       for sc, d, pd, tot, db, tb in zip(self.scales, self.directions,
                                                          self.per_direction, self.totals,
                                                          self.direction_bounds, self.total_bounds)],
            "E_nonempty": self.E_nonempty,
            "E_measure": str(sum((b - a for a, b in self.E_intervals), Fraction(0))),
            "E_pieces": len(self.E_intervals),
        }


def _merge(intervals: list[tuple[Fraction, Fraction]]) -> list[tuple[Fraction, Fraction]]:
    out: list[tuple[Fraction, Fraction]] = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def intersect_direction_sets(sets: Sequence[tuple[Sequence[Fraction], Fraction]]
                             ) -> list[tuple[Fraction, Fraction]]:
    """Intersection over levels of the unions of closed intervals ``[e - w, e + w]``.

    ``sets`` holds ``(directions, w)`` per level.
    """
    cur: list[tuple[Fraction, Fraction]] | None = None
    for dirs, w in sets:
        u = _merge([(e - w, e + w) for e in dirs])
        if cur is None:
            cur = u
            continue
        nxt, i, j = [], 0, 0
        while i < len(cur) and j < len(u):
            a = max(cur[i][0], u[j][0])
            b = min(cur[i][1], u[j][1])
            if a <= b:
                nxt.append((a, b))
            if cur[i][1] < u[j][1]:
                i += 1
            else:
                j += 1
        cur = nxt
    return cur or []


def build_LF(tree: CantorTree) -> LFReport:
    """Tube covers of the lines through ``R_{Delta_n}`` in the directions of the level-n block.

    A tube is identified by ``(floor(e * 2^K), t)``: lines whose directions
    share a ``Delta_n``-interval reuse the same tubes.
    """
    scales, dirs_all, per_dir, totals, dbounds, tbounds, cells_all = [], [], [], [], [], [], []
    E_sets = []
    for i in range(2, len(tree.exponents), 2):
        n = i // 2
        K = tree.exponents[i]
        R = tree.levels[i]
        bp = tree.block_params[i]
        dirs, _, _ = direction_set(bp)
        cells = tuple(projection_cells(R.idx, e) for e in dirs)
        ids = [np.stack([np.full(len(c), math.floor(e * (1 << K)), dtype=np.int64), c], axis=1)
               for e, c in zip(dirs, cells)]
        (keys,) = row_keys(np.concatenate(ids))
        scales.append(Scale(K))
        dirs_all.append(dirs)
        per_dir.append(tuple(len(c) for c in cells))
        totals.append(len(np.unique(keys)))
        dbounds.append(2.0 ** (K * ((tree.s + tree.tau) / 2 + 1 / n)))
        tbounds.append(2.0 ** (K * ((3 * tree.s + tree.tau) / 2 + 2 / n)))
        cells_all.append(cells)
        E_sets.append((dirs, Fraction(1, 1 << bp.k)))
    E = tuple(intersect_direction_sets(E_sets)) if E_sets else ()
    return LFReport(tuple(scales), tuple(dirs_all), tuple(per_dir), tuple(totals),
                    tuple(dbounds), tuple(tbounds), tuple(cells_all), E)


# ---------------------------------------------------------------- the line family L_G


@dataclass(frozen=True)
class TubeTree:
    """Alternating tau-branching and full-branching dyadic tube families.

    ``exponents`` are the cube scales of the matching Cantor tree; the
    tubes at level i have exponent ``max(exponents[i] - 2, 0)`` (width four
    times the cube scale).
    """

    exponents: tuple[int, ...]
    tau: float
    levels: tuple[TubeSet, ...]
    children_per_parent: tuple[int, ...]

    def tube_exponent(self, i: int) -> int:
        return max(self.exponents[i] - 2, 0)

    def kind(self, i: int) -> str:
        return "root" if i == 0 else ("tau" if i % 2 else "full")

    def size_bounds(self) -> list[tuple[int, int, bool]]:
        """``(|T_{delta_n}|, Delta_n^-2 delta_n^-tau rounded down, holds)`` per tau level."""
        out = []
        for i in range(1, len(self.levels), 2):
            bound = 2.0 ** (2 * self.exponents[i - 1] + self.tau * self.exponents[i])
            out.append((len(self.levels[i]), int(bound), len(self.levels[i]) <= bound))
        return out

    def as_dict(self) -> dict:
        return {"exponents": list(self.exponents), "tau": self.tau,
                "levels": [{"tube_scale": str(Scale(self.tube_exponent(i))), "kind": self.kind(i),
                            "count": len(L), "children_per_parent": c}
                           for i, (L, c) in enumerate(zip(self.levels, self.children_per_parent))],
                "size_bounds": [{"count": a, "bound": b, "ok": ok} for a, b, ok in self.size_bounds()]}


def _child_offsets(j: int, tau: float | None) -> np.ndarray:
    """Offsets of the children inside a parent ``j`` levels up: strided (tau) or all."""
    side = 1 << j
    if tau is None:
        sa = sb = 1
    else:
        c = j * (2 - tau)
        if not _is_int(c):
            raise InvalidParameterError(f"(2 - tau) * {j} = {c:g} is not an integer")
        c = int(round(c))
        sa, sb = 1 << ((c + 1) // 2), 1 << (c // 2)
    oa = np.arange(0, side, sa, dtype=np.int64)
    ob = np.arange(0, side, sb, dtype=np.int64)
    return np.stack(np.meshgrid(oa, ob, indexing="ij"), axis=-1).reshape(-1, 2)


def _branch(idx: np.ndarray, j: int, off: np.ndarray) -> np.ndarray:
    return ((idx[:, None, :] << j) + off[None, :, :]).reshape(-1, 2)


def build_LG(exponents: Sequence[int], tau: float) -> TubeTree:
    """Nested tube families: tau-branching from Delta_n to delta_n, full from delta_n to Delta_{n+1}.

    A tau-branching step of ``j`` dyadic levels keeps the sublattice with
    strides ``2^a`` and ``2^b``, ``a + b = j (2 - tau)``, giving ``2^(j tau)``
    children per parent.
    """
    ex = _check_exponents(exponents)
    if not 1 <= tau <= 2:
        raise InvalidParameterError(f"tau must lie in [1, 2], got {tau}")
    levels = [TubeSet(0, [[0, 0]])]
    per = [1]
    for i in range(1, len(ex)):
        j = max(ex[i] - 2, 0) - max(ex[i - 1] - 2, 0)
        off = _child_offsets(j, tau if i % 2 else None)
        levels.append(TubeSet(max(ex[i] - 2, 0), _branch(levels[-1].idx, j, off)))
        per.append(len(off))
    return TubeTree(ex, tau, tuple(levels), tuple(per))


@dataclass(frozen=True)
class ColumnTree:
    """Sub-tree of tubes whose trace on the vertical line at ``x`` contains a surviving interval.

    ``chosen[i][r]`` is the index (at the level-i cube scale) of the
    interval picked for tube ``levels[i][r]``.
    """

    x: Fraction
    levels: tuple[TubeSet, ...]
    chosen: tuple[np.ndarray, ...] = field(repr=False)
    child_counts: tuple[np.ndarray, ...] = field(repr=False)
    relative_constants: tuple[float | None, ...] = ()

    def as_dict(self) -> dict:
        return {"x": str(self.x),
                "levels": [{"count": len(L),
                            "min_children": int(c.min()) if len(c) else 0,
                            "max_children": int(c.max()) if len(c) else 0,
                            "relative_constant": rc}
                           for L, c, rc in zip(self.levels, self.child_counts,
                                               self.relative_constants)]}


def _ceil_shift(v: np.ndarray, sh: int) -> np.ndarray:
    return v << sh if sh >= 0 else -((-v) >> -sh)


def _floor_shift(v: np.ndarray, sh: int) -> np.ndarray:
    return v << sh if sh >= 0 else v >> -sh


def column_subtree(LG: TubeTree, R: CantorTree, x, *, max_relative_checks: int = 64) -> ColumnTree:
    """Extract the tubes of ``LG`` that follow surviving intervals of ``R`` on the line ``{x} x R``.

    A child tube is kept when its trace ``[w(a x + b), w((a+1) x + b + 1))``
    contains a dyadic interval of the current cube scale that lies in R's
    column at x and inside the interval chosen for its parent. The
    smallest such interval is chosen. For tau-branching levels the kept
    children of (up to ``max_relative_checks``) parents are checked as
    relative (delta, tau, C)-subsets of the parent in the dual square.
    """
    if tuple(LG.exponents) != tuple(R.exponents):
        raise InvalidInputError("tube tree and Cantor tree use different exponents")
    x = Fraction(x)
    if not 0 <= x < 1 or x.denominator & (x.denominator - 1):
        raise InvalidInputError(f"x must be a dyadic rational in [0,1), got {x}")
    kx = x.denominator.bit_length() - 1
    X = x.numerator
    ex = LG.exponents
    kept = [LG.levels[0]]
    chosen = [np.zeros(1, dtype=np.int64)]
    counts = [np.ones(1, dtype=np.int64)]
    rel: list[float | None] = [None]
    for i in range(1, len(ex)):
        kc = ex[i]
        e_par, e_c = LG.tube_exponent(i - 1), LG.tube_exponent(i)
        j = e_c - e_par
        off = _child_offsets(j, LG.tau if i % 2 else None)
        par = kept[-1].idx
        kids = _branch(par, j, off)
        parent_of = np.repeat(np.arange(len(par)), len(off))
        ia, ib = kids[:, 0], kids[:, 1]
        sh = kc - e_c - kx
        jl = _ceil_shift(ia * X + (ib << kx), sh)
        jh = _floor_shift((ia + 1) * X + ((ib + 1) << kx), sh) - 1
        dk = kc - ex[i - 1]
        J = chosen[-1][parent_of]
        jl = np.maximum(jl, J << dk)
        jh = np.minimum(jh, ((J + 1) << dk) - 1)
        col = R.levels[i].idx
        ixc = X << (kc - kx) if kc >= kx else X >> (kx - kc)
        S = np.sort(col[col[:, 0] == ixc, 1])
        pos = np.searchsorted(S, jl)
        ok = pos < len(S)
        cand = S[np.minimum(pos, len(S) - 1)] if len(S) else np.zeros(len(kids), dtype=np.int64)
        ok &= cand <= jh
        keep_rows = kids[ok]
        kept.append(TubeSet(e_c, keep_rows))
        order = np.lexsort((keep_rows[:, 1], keep_rows[:, 0])) if len(keep_rows) else np.zeros(0, int)
        chosen.append(cand[ok][order])
        cnt = np.bincount(parent_of[ok], minlength=len(par))
        counts.append(cnt)
        rc = None
        if i % 2 and j > 0 and len(keep_rows):
            worst = 0.0
            for r in np.flatnonzero(cnt)[:max_relative_checks]:
                Q = DyadicSquare(e_par, int(par[r, 0]), int(par[r, 1]))
                sub = CubeSet(e_c, kids[ok & (parent_of == r)])
                worst = max(worst, delta_set_constant(sub, Scale(e_c), LG.tau, relative_to=Q).constant)
            rc = worst
        rel.append(rc)
    return ColumnTree(x, tuple(kept), tuple(chosen), tuple(counts), tuple(rel))


# ---------------------------------------------------------------- Frostman measure


@dataclass(frozen=True)
class FrostmanMeasure:
    """Masses splitting each parent equally among its children.

    ``denominators[m]`` holds, row-aligned with ``levels[m]``, the integer
    D with mass ``1/D``.
    """

    levels: tuple[CubeSet, ...]
    u: float
    denominators: tuple[np.ndarray, ...] = field(repr=False)
    total_mass: Fraction
    branching_constant: float
    level_ratios: tuple[float, ...]
    level_bound_ok: bool
    max_ratio: float
    witness: DyadicSquare
    scale_ratios: tuple[float, ...]

    def mass(self, m: int, row: int) -> Fraction:
        return Fraction(1, int(self.denominators[m][row]))

    def as_dict(self) -> dict:
        return {"u": self.u, "levels": [str(L.scale) for L in self.levels],
                "sizes": [len(L) for L in self.levels],
                "total_mass": str(self.total_mass),
                "branching_constant": self.branching_constant,
                "level_ratios": list(self.level_ratios), "level_bound_ok": self.level_bound_ok,
                "max_ratio": self.max_ratio, "witness": str(self.witness),
                "scale_ratios": list(self.scale_ratios)}


def frostman_measure(levels: Sequence[CubeSet], u: float) -> FrostmanMeasure:
    """Equal-split masses on nested cube families and the largest ``mu(Q) / r^u``.

    ``levels`` must have strictly increasing scale exponents, each nested in
    the previous; a root unit square is prepended when missing. The ratio
    is scanned over every dyadic cell at every scale down to the finest.
    Raises InvalidInputError if a surviving cube has no children.
    """
    levels = list(levels)
    if not levels or any(len(L) == 0 for L in levels):
        raise InvalidInputError("every level must be nonempty")
    if not (levels[0].k == 0 and len(levels[0]) == 1):
        levels.insert(0, CubeSet(0, [[0, 0]]))
    if any(b.k <= a.k for a, b in zip(levels, levels[1:])):
        raise InvalidInputError("level scales must be strictly finer")
    dens = [np.ones(1, dtype=object)]
    C = 0.0
    for a, b in zip(levels, levels[1:]):
        sh = b.k - a.k
        par = b.idx >> sh
        ka, kp = row_keys(a.idx, par)
        pos = np.searchsorted(ka, kp)
        pos_c = np.minimum(pos, len(ka) - 1)
        if not (ka[pos_c] == kp).all():
            raise InvalidInputError(f"level {b.scale} is not nested in {a.scale}")
        children = np.bincount(pos, minlength=len(a))
        if (children == 0).any():
            r = int(np.flatnonzero(children == 0)[0])
            raise InvalidInputError(
                f"cube {DyadicSquare(a.k, *map(int, a.idx[r]))} has no children at {b.scale}")
        C = max(C, float(np.max(2.0 ** (sh * u) / children)))
        dens.append(dens[-1][pos] * children[pos].astype(object))
    leaf = dens[-1]
    vals, cnt = np.unique(leaf, return_counts=True)
    total = sum((Fraction(int(c), int(v)) for v, c in zip(vals, cnt)), Fraction(0))
    ratios = []
    ok = True
    for m, (L, D) in enumerate(zip(levels, dens)):
        r = max(2.0 ** (L.k * u) / float(d) for d in np.unique(D))
        ratios.append(r)
        ok &= r <= C ** m * (1 + 1e-12) or m == 0
    fin = levels[-1]
    mass = 1.0 / np.array([float(d) for d in leaf])
    best = (-1.0, None)
    per_scale = []
    for j in range(fin.k + 1):
        (keys,) = row_keys(fin.idx >> (fin.k - j))
        uk, inv = np.unique(keys, return_inverse=True)
        sums = np.bincount(inv.reshape(-1), weights=mass)
        i = int(np.argmax(sums))
        val = float(sums[i]) * 2.0 ** (j * u)
        per_scale.append(val)
        if val > best[0]:
            row = fin.idx[np.flatnonzero(inv.reshape(-1) == i)[0]] >> (fin.k - j)
            best = (val, DyadicSquare(j, int(row[0]), int(row[1])))
    return FrostmanMeasure(tuple(levels), float(u), tuple(dens), total, C, tuple(ratios), bool(ok),
                           best[0], best[1], tuple(per_scale))


def uniform_test_tree(depth: int) -> list[CubeSet]:
    """Levels at scales ``4^-m``: each cube keeps the 4 diagonal cells of its 4 x 4 subgrid."""
    if depth < 0:
        raise InvalidParameterError("depth must be >= 0")
    diag = np.array([[i, i] for i in range(4)], dtype=np.int64)
    levels = [CubeSet(0, [[0, 0]])]
    for m in range(depth):
        levels.append(CubeSet(2 * (m + 1), _branch(levels[-1].idx, 2, diag)))
    return levels


# ---------------------------------------------------------------- test sets


def cantor_digits(digits: Sequence[int], levels: int, base: int = 4) -> np.ndarray:
    """Cell indices at scale ``base**-levels`` of the Cantor set with the given base digits."""
    if base < 2 or base & (base - 1):
        raise InvalidParameterError(f"base must be a power of two, got {base}")
    digs = sorted(set(int(d) for d in digits))
    if not digs or digs[0] < 0 or digs[-1] >= base:
        raise InvalidParameterError(f"digits must lie in [0, {base}), got {list(digits)}")
    if levels < 0:
        raise InvalidParameterError("levels must be >= 0")
    pts = np.zeros(1, dtype=np.int64)
    for _ in range(levels):
        pts = (pts[:, None] * base + np.array(digs, dtype=np.int64)[None, :]).reshape(-1)
    return pts


def product_set(xs: np.ndarray, ys: np.ndarray, k: int) -> CubeSet:
    """``xs x ys`` as cubes of scale ``2^-k``."""
    gx, gy = np.meshgrid(np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64), indexing="ij")
    return CubeSet(k, np.stack([gx, gy], axis=-1).reshape(-1, 2))
