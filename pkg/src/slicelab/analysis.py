"""(delta, s, C)-set constants, box-counting slopes, heavy tubes and exponent formulas."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from ._content import content_sum
from ._rows import rows_in
from .dyadic import CubeSet, DyadicSquare, Scale, ScaleSequence, TubeSet, as_scale
from .errors import InvalidInputError, InvalidParameterError, UndefinedError
from .incidence import count_incidences, incidence_counts_per_tube
from .scan import ContentCover, content_cover, directional_content, roughly_parallel

__all__ = [
    "DeltaSetReport",
    "BoxSlope",
    "HeavyFamily",
    "HeavyPartCover",
    "ExponentTable",
    "delta_set_constant",
    "covering_profile",
    "box_dimension_slope",
    "heavy_tubes",
    "heavy_part_cover",
    "exponent_table",
    "exponent_table_csv",
    "hausdorff_content_upper",
]


# ---------------------------------------------------------------- (delta, s, C)-sets


@dataclass(frozen=True)
class DeltaSetReport:
    """Minimal C with ``|P ∩ B(w, r)|_delta <= C r^s |P|_delta`` over grid centers and dyadic r.

    ``center`` holds exact coordinates; ``radius`` is the dyadic scale attaining C.
    ``per_radius[j]`` is the constant at ``r = 2^-j`` (relative to the container
    when a container was given).
    """

    delta: Scale
    s: float
    constant: float
    center: tuple[Fraction, ...]
    radius: Scale
    count: int
    size: int
    per_radius: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "delta": str(self.delta),
            "s": self.s,
            "constant": self.constant,
            "witness": {"center": [str(c) for c in self.center], "radius": str(self.radius),
                        "count": self.count},
            "size": self.size,
            "per_radius": list(self.per_radius),
        }


def _ball_stencil(R: int, dim: int, cap: int) -> np.ndarray:
    """Cells at offsets ``o`` from a grid corner that meet the closed ball of radius R (in cells).

    Offsets run over ``[-h-1, h]`` with ``h = min(R, cap)``; per axis the gap
    from the corner to cell ``[o, o+1)`` is ``max(0, o, -o-1)``.
    """
    h = min(R, cap)
    o = np.arange(-h - 1, h + 1, dtype=np.int64)
    f = np.maximum(0, np.maximum(o, -o - 1))
    if dim == 1:
        return (f <= R).astype(np.float64)
    f2 = f[:, None] ** 2 + f[None, :] ** 2
    return (f2 <= R * R).astype(np.float64)


def _indicator(P, delta: Scale, relative_to):
    """Indicator grid of ``P`` at ``delta``, optionally cut to a container and rescaled."""
    if isinstance(P, CubeSet):
        if P.k < delta.k:
            raise InvalidInputError(f"family scale {P.scale} is coarser than {delta}")
        idx = P.at(delta).idx
        dim = 2
    else:
        idx = np.unique(np.asarray(P, dtype=np.int64).reshape(-1))[:, None]
        dim = 1
    k0, origin = 0, np.zeros(dim, dtype=np.int64)
    if relative_to is not None:
        if dim == 2:
            Q = relative_to
            k0, origin = Q.k, np.array([Q.ix, Q.iy], dtype=np.int64)
        else:
            k0, j = relative_to
            origin = np.array([j], dtype=np.int64)
        if k0 > delta.k:
            raise InvalidInputError("container is finer than delta")
        sh = delta.k - k0
        idx = idx[((idx >> sh) == origin).all(axis=1)] - (origin << sh)
    kk = delta.k - k0
    n = 1 << kk
    if len(idx) == 0:
        raise UndefinedError("the (delta, s, C) constant of an empty set is undefined")
    if idx.min() < 0 or idx.max() >= n:
        raise InvalidInputError("set leaves the unit cube")
    grid = np.zeros((n,) * dim, dtype=np.float64)
    grid[tuple(idx.T)] = 1.0
    return grid, kk, k0, origin, dim


def delta_set_constant(P, delta, s: float, *, relative_to=None) -> DeltaSetReport:
    """Smallest C making ``P`` a (delta, s, C)-set, scanning dyadic radii and grid-corner centers.

    ``P`` is a CubeSet or a 1-d array of integer indices at scale ``delta``
    (a vertical fiber, say). With ``relative_to`` (a DyadicSquare, or a pair
    ``(k, j)`` for 1-d input) only the part inside the container is kept and
    it is rescaled to the unit cube, which gives the relative variant.

    Restricting centers to the delta-grid loses at most a factor 4.
    """
    delta = as_scale(delta)
    grid, kk, k0, origin, dim = _indicator(P, delta, relative_to)
    n = grid.shape[0]
    total = int(grid.sum())
    best = None
    per = []
    for j in range(kk + 1):
        R = 1 << (kk - j)
        sten = _ball_stencil(R, dim, n)
        h = (len(sten) - 2) // 2
        conv = np.rint(fftconvolve(grid, sten[::-1] if dim == 1 else sten[::-1, ::-1], mode="full"))
        sl = tuple(slice(h, h + n + 1) for _ in range(dim))
        counts = conv[sl]
        flat = int(np.argmax(counts))
        c = int(counts.reshape(-1)[flat])
        ratio = c * 2.0 ** (j * s) / total
        per.append(ratio)
        if best is None or ratio > best[0]:
            pos = np.unravel_index(flat, counts.shape)
            best = (ratio, j, pos, c)
    ratio, j, pos, c = best
    center = tuple(Fraction(int(p) + (int(o) << kk), 1 << (kk + k0)) for p, o in zip(pos, origin))
    return DeltaSetReport(delta, float(s), ratio, center, Scale(j + k0), c, total, tuple(per))


# ---------------------------------------------------------------- box counting


@dataclass(frozen=True)
class BoxSlope:
    """Least-squares slope of ``log2 |K|_delta`` against ``log2(1/delta)``."""

    slope: float
    intercept: float
    scales: tuple[Scale, ...]
    counts: tuple[int, ...]
    residuals: tuple[float, ...]
    exponents: tuple[float | None, ...]

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "profile": [{"scale": str(s), "count": c, "exponent": e, "residual": r}
                        for s, c, e, r in zip(self.scales, self.counts, self.exponents,
                                              self.residuals)],
        }


def covering_profile(K: CubeSet, scales: Sequence | None = None) -> list[tuple[Scale, int]]:
    """``(delta, |K|_delta)`` for the given scales, default every dyadic scale down to K's."""
    ks = [as_scale(s) for s in scales] if scales is not None else [Scale(j) for j in range(K.k + 1)]
    return [(s, K.covering_number(s)) for s in ks]


def box_dimension_slope(profile: Sequence[tuple]) -> BoxSlope:
    """Fit ``log|K|_delta = slope * log(1/delta) + c`` over a covering profile."""
    rows = [(as_scale(s), int(c)) for s, c in profile]
    if len(rows) < 2:
        raise InvalidInputError("a slope needs at least two scales")
    if any(c < 1 for _, c in rows):
        raise InvalidInputError("covering numbers must be positive")
    x = np.array([s.k for s, _ in rows], dtype=np.float64)
    y = np.log2([c for _, c in rows])
    if np.ptp(x) == 0:
        raise InvalidInputError("scales must not all coincide")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    expo = tuple(float(yy / xx) if xx > 0 else None for xx, yy in zip(x, y))
    return BoxSlope(float(slope), float(intercept), tuple(s for s, _ in rows),
                    tuple(c for _, c in rows), tuple(float(r) for r in resid), expo)


# ---------------------------------------------------------------- heavy tubes

# Orientations reduce any slope to [0, 1]:
# 0 identity, 1 reflect y, 2 swap x and y, 3 swap then reflect y.


def _orient(e) -> tuple[int, Fraction]:
    if isinstance(e, float) and math.isinf(e):
        return 2, Fraction(0)
    e = Fraction(e)
    if abs(e) <= 1:
        return (0, e) if e >= 0 else (1, -e)
    inv = 1 / e
    return (2, inv) if inv >= 0 else (3, -inv)


def _to_frame(idx: np.ndarray, k: int, o: int) -> np.ndarray:
    n = (1 << k) - 1
    x, y = idx[:, 0], idx[:, 1]
    if o == 0:
        return idx.copy()
    if o == 1:
        return np.stack([x, n - y], axis=1)
    if o == 2:
        return np.stack([y, x], axis=1)
    return np.stack([y, n - x], axis=1)


def _from_frame(idx: np.ndarray, k: int, o: int) -> np.ndarray:
    n = (1 << k) - 1
    x, y = idx[:, 0], idx[:, 1]
    if o in (0, 1, 2):
        return _to_frame(idx, k, o)
    return np.stack([n - y, x], axis=1)


@dataclass(frozen=True)
class HeavyFamily:
    """Tubes roughly parallel to ``e`` with at least ``threshold`` incidences.

    Tubes live in the frame given by ``orientation`` where the slope is
    ``frame_slope`` in [0, 1].
    """

    e: Fraction | float
    delta: Scale
    t: float
    s: float
    eta: float
    threshold: int
    orientation: int
    frame_slope: Fraction
    tubes: TubeSet
    counts: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.tubes)

    def as_dict(self) -> dict:
        return {
            "direction": str(self.e), "delta": str(self.delta),
            "t": self.t, "s": self.s, "eta": self.eta,
            "threshold": self.threshold, "orientation": self.orientation,
            "frame_slope": str(self.frame_slope), "num_tubes": len(self.tubes),
            "tubes": self.tubes.tokens(),
            "counts": [int(c) for c in self.counts],
        }


def _heavy_in_frame(Kf: CubeSet, e: Fraction, expo: float):
    k = Kf.k
    N = 1 << k
    ia = np.arange(N, dtype=np.int64)
    ia = ia[roughly_parallel(ia, k, e)]
    cand = TubeSet(k, np.stack(np.meshgrid(ia, np.arange(N, dtype=np.int64), indexing="ij"),
                                axis=-1).reshape(-1, 2))
    counts = incidence_counts_per_tube(Kf, cand)
    need = 2.0 ** (-k * expo) * len(Kf)
    keep = counts >= need
    return cand.subset(keep), counts[keep], need


def heavy_tubes(K: CubeSet, e, t: float, s: float, eta: float) -> HeavyFamily:
    """All delta-tubes roughly parallel to ``e`` meeting at least ``delta^(t-s+2 eta) |K|`` cubes.

    ``e`` is a slope (``float('inf')`` for vertical); slopes outside [0, 1]
    are handled by reflecting or transposing ``K``.
    """
    if len(K) == 0:
        raise UndefinedError("heavy tubes of an empty set are undefined")
    o, ef = _orient(e)
    Kf = CubeSet(K.k, _to_frame(K.idx, K.k, o))
    tubes, counts, need = _heavy_in_frame(Kf, ef, t - s + 2 * eta)
    thr = math.ceil(need)
    return HeavyFamily(e if isinstance(e, float) and math.isinf(e) else Fraction(e), K.scale,
                       t, s, eta, thr, o, ef, tubes, counts)


@dataclass(frozen=True)
class HeavyPartCover:
    """Per-scale square covers of the points lying on heavy tubes, per direction."""

    t: float
    s: float
    eta: float
    kappa: float
    exponent: float
    directions: tuple
    scales: tuple[Scale, ...]
    content: tuple[tuple[float, ...], ...]
    average: tuple[float, ...]
    heavy_counts: tuple[tuple[int, ...], ...]
    covers: tuple[tuple[tuple[tuple[Scale, CubeSet], ...], ...], ...] = field(repr=False)
    covers_ok: tuple[tuple[bool, ...], ...] = ()
    heavy_fraction: tuple[tuple[float, ...], ...] = ()
    covered_fraction: tuple[tuple[float, ...], ...] = ()

    def as_dict(self) -> dict:
        return {
            "t": self.t, "s": self.s, "eta": self.eta, "kappa": self.kappa,
            "exponent": self.exponent,
            "directions": [str(e) for e in self.directions],
            "scales": [
                {"delta": str(d), "average": a, "content": list(c),
                 "heavy_tubes": list(h), "covers_ok": list(ok),
                 "heavy_fraction": list(hf), "covered_fraction": list(cf),
                 "pieces": [[{"scale": str(sc), "count": len(sq)} for sc, sq in cv] for cv in cvs]}
                for d, a, c, h, ok, hf, cf, cvs in zip(self.scales, self.average, self.content,
                                                       self.heavy_counts, self.covers_ok,
                                                       self.heavy_fraction, self.covered_fraction,
                                                       self.covers)
            ],
        }


def _covered(points: np.ndarray, k: int, pieces) -> np.ndarray:
    hit = np.zeros(len(points), dtype=bool)
    for sc, sq in pieces:
        hit |= rows_in(points >> (k - sc.k), sq.idx)
    return hit


def heavy_part_cover(K: CubeSet, directions: Sequence, t: float, s: float, eta: float,
                     kappa: float | None, scales: Sequence, *, ladder_step: int = 2) -> HeavyPartCover:
    """Cover the heavy parts of ``K`` at several scales and record their content sums.

    At each scale the heavy tubes of every direction are pooled per
    orientation, covered by ``scan.content_cover`` (ladder ratio
    ``2**ladder_step``) and projected to square covers per direction. The
    content exponent is ``1 - kappa + 3 eta``.
    """
    k_expected = s - t + 1 - 2 * eta
    if kappa is None:
        kappa = k_expected
    elif abs(kappa - k_expected) > 1e-12:
        raise InvalidParameterError(f"kappa={kappa} differs from s - t + 1 - 2 eta = {k_expected}")
    if not 0 < kappa < 1:
        raise InvalidParameterError(f"kappa={kappa} must lie in (0, 1)")
    expo = 1 - kappa
    dirs = tuple(directions)
    frames = [_orient(e) for e in dirs]
    u = 1 - kappa + 3 * eta
    sc_list = tuple(as_scale(d) for d in scales)
    contents, avgs, heavy_counts, covers, oks, hfs, cfs = [], [], [], [], [], [], []
    for d in sc_list:
        Kd = K.at(d)
        k = d.k
        ladder = ScaleSequence(d, ladder_step)
        per_dir_cover: list = [None] * len(dirs)
        per_dir_content = [0.0] * len(dirs)
        per_dir_heavy = [0] * len(dirs)
        per_dir_ok = [True] * len(dirs)
        per_dir_hf = [0.0] * len(dirs)
        per_dir_cf = [0.0] * len(dirs)
        for o in sorted({f[0] for f in frames}):
            members = [i for i, f in enumerate(frames) if f[0] == o]
            Kf = CubeSet(k, _to_frame(Kd.idx, k, o))
            fams = {i: _heavy_in_frame(Kf, frames[i][1], expo)[0] for i in members}
            pooled = [fams[i].idx for i in members if len(fams[i])]
            Ts = TubeSet(k, np.concatenate(pooled)) if pooled else TubeSet(k)
            cov = content_cover(Kf, Ts, eta, kappa, scales=ladder)
            dc = directional_content(cov, [frames[i][1] for i in members], kappa, eta)
            for i, pc in zip(members, dc.covers):
                pieces = tuple(pc.pieces)
                per_dir_heavy[i] = len(fams[i])
                if len(fams[i]):
                    pts = np.unique(count_incidences(Kf, fams[i]).idx[:, :2], axis=0)
                    per_dir_ok[i] = bool(_covered(pts, k, pieces).all())
                    per_dir_hf[i] = len(pts) / len(Kf)
                else:
                    per_dir_ok[i] = len(pieces) == 0
                per_dir_cf[i] = float(_covered(Kf.idx, k, pieces).mean())
                per_dir_content[i] = pc.content_sum
                per_dir_cover[i] = tuple((sc, CubeSet(sc.k, _from_frame(sq.idx, sc.k, o)))
                                         for sc, sq in pieces)
        contents.append(tuple(per_dir_content))
        avgs.append(sum(per_dir_content) / len(dirs) if dirs else 0.0)
        heavy_counts.append(tuple(per_dir_heavy))
        covers.append(tuple(per_dir_cover))
        oks.append(tuple(per_dir_ok))
        hfs.append(tuple(per_dir_hf))
        cfs.append(tuple(per_dir_cf))
    return HeavyPartCover(t, s, eta, kappa, u, dirs, sc_list, tuple(contents), tuple(avgs),
                          tuple(heavy_counts), tuple(covers), tuple(oks), tuple(hfs), tuple(cfs))


# ---------------------------------------------------------------- exponents


@dataclass(frozen=True)
class ExponentTable:
    """Closed-form exponents for a pair (t, s)."""

    t: float
    s: float
    furstenbergLB: float
    heavyThreshold: float
    borelHeavyBound: float
    subuniformBound: float
    lineFamilyBound: float
    lineFamilySBound: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in _TABLE_FIELDS}


_TABLE_FIELDS = ("t", "s", "furstenbergLB", "heavyThreshold", "borelHeavyBound",
                 "subuniformBound", "lineFamilyBound", "lineFamilySBound")


def exponent_table(t: float, s: float) -> ExponentTable:
    """Evaluate the exponent formulas at (t, s), with t in [0, 2] and s in [0, 1]."""
    if not (0 <= t <= 2 and 0 <= s <= 1):
        raise InvalidParameterError(f"need t in [0,2] and s in [0,1], got t={t}, s={s}")
    thr = (2 * t - 1) / 3
    return ExponentTable(
        t=t, s=s,
        furstenbergLB=min(s + t, (3 * s + t) / 2, s + 1),
        heavyThreshold=thr,
        borelHeavyBound=0.0 if s > thr else min(2 * t - 3 * s, t),
        subuniformBound=max(t - s, 0.0),
        lineFamilyBound=2 - t,
        lineFamilySBound=1 - s,
    )


def exponent_table_csv(ts: Sequence[float], ss: Sequence[float]) -> str:
    """CSV of the table over the grid ``ts x ss``, with a header row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_TABLE_FIELDS)
    for t in ts:
        for s in ss:
            row = exponent_table(t, s)
            w.writerow([repr(float(getattr(row, f))) for f in _TABLE_FIELDS])
    return buf.getvalue()


def hausdorff_content_upper(cover: Sequence[tuple], u: float) -> float:
    """``sum(scale**u * count)`` over an explicit cover; 0 for an empty cover."""
    return content_sum(cover, u)
