"""High-low checks, the scan over a scale ladder, and content covers.

The high-low inequality is checked empirically: for an instance we compute
the incidence count, the square-root term and the thickened term, and
report the smallest constant that makes the inequality hold.

The scale scan walks a ladder ``1 = D_0 > ... > D_n = delta`` and records
the exact incidence quotient at every level. It picks the finest level at
which ``|I(P_D, T_D)| <= C0 * delta**(kappa - 2*eta) * D**-2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._content import content_sum
from ._rows import rows_in, unique_rows
from .dyadic import CubeSet, Scale, ScaleSequence, TubeSet, as_scale
from .errors import InvalidParameterError, PreconditionError
from .incidence import (IncidenceSet, ProductCubeSet, QuotientRecord, count_incidences,
                        incidence_count, incidence_counts_per_tube, incidence_quotient)
from .uniformity import Partition, decompose_subuniform

__all__ = [
    "HighLowCheck",
    "ScanResult",
    "ContentCover",
    "DirectionalContent",
    "check_highlow",
    "scan_scales",
    "content_cover",
    "directional_content",
    "roughly_parallel",
    "parallel_window",
]

DEFAULT_C0 = 1.0
DEFAULT_C_HIGH = 1.0
DEFAULT_THICKENING_C = Fraction(1, 64)


def _pow2(x: float) -> float:
    return 2.0 ** x


# ---------------------------------------------------------------- high-low


@dataclass(frozen=True)
class HighLowCheck:
    """Terms of the high-low inequality for one instance."""

    delta: Scale
    A: Fraction
    epsilon: float
    lhs: int
    term_high: float
    term_low: float
    thick_incidences: int
    minimal_C: float

    def as_dict(self) -> dict:
        return {
            "delta": str(self.delta),
            "A": float(self.A),
            "epsilon": self.epsilon,
            "lhs": self.lhs,
            "term_high": self.term_high,
            "term_low": self.term_low,
            "thick_incidences": self.thick_incidences,
            "minimal_C": self.minimal_C,
        }


def check_highlow(B: CubeSet, Ts: TubeSet, A, eps: float) -> HighLowCheck:
    """Smallest C with ``|I(B,T)| <= C (sqrt(A/delta |B||T|) + delta^-eps/A |I(B^A,T^A)|)``.

    ``B`` is read as the family of balls of its squares. The thickened
    families use radius and half-width ``5*A*delta``.
    """
    k = B.k
    if k < 1:
        raise InvalidParameterError("the high-low check needs delta <= 1/2")
    if eps < 0:
        raise InvalidParameterError(f"epsilon must be >= 0, got {eps}")
    Af = Fraction(A)
    lo, hi = _pow2(k * eps), float(1 << k)
    if not (lo * (1 - 1e-12) <= float(Af) <= hi):
        raise InvalidParameterError(f"A = {float(Af)} outside [delta^-eps, delta^-1] = [{lo}, {hi}]")
    lhs = incidence_count(B, Ts)
    thick = incidence_count(B, Ts, Af)
    high = math.sqrt(float(Af) * (1 << k) * len(B) * len(Ts))
    low = lo / float(Af) * thick
    denom = high + low
    C = lhs / denom if denom > 0 else 0.0
    return HighLowCheck(B.scale, Af, eps, lhs, high, low, thick, C)


# ---------------------------------------------------------------- scale scan


@dataclass(frozen=True)
class ScanResult:
    """Quotient profile along a ladder and the scale chosen by the scan."""

    kappa: float
    eta: float
    ladder: ScaleSequence
    quotients: tuple[QuotientRecord, ...]
    chosen_index: int
    chosen_scale: Scale
    bound_constant: float
    satisfied: bool
    C0: float
    A: Fraction
    high_ratios: tuple[float, ...]
    low_case: tuple[bool, ...]
    chain_ratios: tuple[Fraction, ...]
    chain_identity: bool
    C1: float | None
    density: float

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "eta": self.eta,
            "ladder": [str(s) for s in self.ladder.levels],
            "profile": [q.as_dict() for q in self.quotients],
            "chosen_scale": str(self.chosen_scale),
            "bound_constant": self.bound_constant,
            "satisfied": self.satisfied,
            "C0": self.C0,
            "A": float(self.A),
            "high_ratios": list(self.high_ratios),
            "low_case": list(self.low_case),
            "chain_identity": self.chain_identity,
            "C1": self.C1,
            "density": self.density,
        }


def bound_constant(count: int, D: Scale, delta: Scale, kappa: float, eta: float) -> float:
    """``count * D**2 * delta**-(kappa - 2*eta)``."""
    return math.ldexp(float(count), -2 * D.k) * _pow2(delta.k * (kappa - 2 * eta))


def _ladder(delta: Scale, eta: float | None, scales: ScaleSequence | None) -> ScaleSequence:
    if scales is None:
        if eta is None:
            raise InvalidParameterError("pass eta or an explicit ladder")
        scales = ScaleSequence.from_eta(delta, eta)
    if scales.delta != delta:
        raise InvalidParameterError(f"ladder ends at {scales.delta}, families are at {delta}")
    return scales


def scan_scales(P: CubeSet, Ts: TubeSet, eta: float | None, kappa: float, *,
                scales: ScaleSequence | None = None, C0: float = DEFAULT_C0,
                c: Fraction = DEFAULT_THICKENING_C, C_high: float = DEFAULT_C_HIGH) -> ScanResult:
    """Scan the ladder for the finest scale satisfying the incidence bound.

    ``eta`` is the exponent used in the bound and the precondition; the
    ladder defaults to ``S = delta**-eta`` but may be given explicitly.
    When no level of ``D_1..D_n`` meets the bound the level with the
    smallest bound constant is returned and ``satisfied`` is False.

    Raises
    ------
    PreconditionError
        If ``|I(P,T)| < delta^(1-kappa) |P||T|``; ``details`` carries the
        measured density.
    """
    delta = P.scale
    ladder = _ladder(delta, eta, scales)
    if eta is None:
        eta = ladder.eta
    if not 0 < kappa <= 1:
        raise InvalidParameterError(f"kappa must lie in (0,1], got {kappa}")
    if eta > kappa / 2 + 1e-12:
        raise InvalidParameterError(f"eta = {eta} exceeds kappa/2 = {kappa / 2}")
    if len(P) == 0 or len(Ts) == 0:
        raise PreconditionError("empty families", {"cubes": len(P), "tubes": len(Ts)})
    total = incidence_count(P, Ts)
    density = total / (len(P) * len(Ts))
    required = _pow2(-delta.k * (1 - kappa))
    if density < required:
        raise PreconditionError(
            f"incidence density {density:.6g} is below delta^(1-kappa) = {required:.6g}",
            {"density": density, "required": required, "incidences": total})

    quotients = tuple(incidence_quotient(P, Ts, D) for D in ladder.levels)
    n = ladder.n
    A = Fraction(c) * ladder.S
    highs, lows = [], []
    for q in quotients:
        denom = math.sqrt(float(A) * q.delta.inverse * q.num_cubes * q.num_tubes)
        r = q.num_incidences / denom
        highs.append(r)
        lows.append(r > C_high)

    cap = C0 * _pow2(-delta.k * (kappa - 2 * eta))
    chosen, satisfied = None, False
    for j in range(n, 0, -1):
        q = quotients[j]
        if q.num_incidences <= cap * _pow2(2 * q.delta.k):
            chosen, satisfied = j, True
            break
    consts = [bound_constant(q.num_incidences, q.delta, delta, kappa, eta) for q in quotients]
    if chosen is None:
        chosen = min(range(1, n + 1), key=lambda j: (consts[j], -j))

    chain = tuple(quotients[j + 1].iota / quotients[j].iota for j in range(n))
    prod = Fraction(1)
    for x in chain:
        prod *= x
    identity = prod == quotients[n].iota / quotients[0].iota
    c1 = None
    for j in range(1, n + 1):
        if lows[j]:
            val = float(chain[j - 1]) * _pow2(-quotients[j].delta.k * eta * eta)
            c1 = val if c1 is None else max(c1, val)
    return ScanResult(kappa, eta, ladder, quotients, chosen, quotients[chosen].delta,
                      consts[chosen], satisfied, C0, A, tuple(highs), tuple(lows), chain,
                      identity, c1, density)


# ---------------------------------------------------------------- content covers


@dataclass(frozen=True)
class ContentCover:
    """Multi-scale cover with its content upper sum ``sum(scale**u * count)``."""

    exponent: float
    pieces: tuple[tuple[Scale, ProductCubeSet | CubeSet], ...]
    content_sum: float
    partition: Partition | None = None
    scans: tuple[ScanResult, ...] = field(default=())

    def cover_list(self) -> list[tuple[Scale, int]]:
        return [(s, len(p)) for s, p in self.pieces]

    def uncovered(self, I: ProductCubeSet) -> int:
        """How many members of ``I`` have no ancestor among the pieces."""
        hit = np.zeros(len(I), dtype=bool)
        for s, piece in self.pieces:
            if len(piece) == 0:
                continue
            hit |= rows_in(I.idx >> (I.k - s.k), piece.idx)
        return int((~hit).sum())

    def as_dict(self) -> dict:
        out = {
            "exponent": self.exponent,
            "content_sum": self.content_sum,
            "pieces": [{"scale": str(s), "count": len(p)} for s, p in self.pieces],
        }
        if self.scans:
            out["scans"] = [r.as_dict() for r in self.scans]
        return out


def content_cover(P: CubeSet, Ts: TubeSet, eta: float | None, kappa: float, *,
                  scales: ScaleSequence | None = None, C0: float = DEFAULT_C0,
                  c: Fraction = DEFAULT_THICKENING_C) -> ContentCover:
    """Cover ``I(P, Ts)`` by coarse incidence sets of the sub-uniform parts of ``Ts``.

    Every tube must be heavy: ``|I(P,{T})| >= delta^(1-kappa) |P|``. The
    tubes are split into sub-uniform parts, each part is scanned, and the
    part contributes ``I(P_D, T_D)`` at its chosen scale D.
    """
    delta = P.scale
    ladder = _ladder(delta, eta, scales)
    if eta is None:
        eta = ladder.eta
    u = 2 - kappa + 3 * eta
    if len(Ts) == 0:
        return ContentCover(u, (), 0.0, None, ())
    counts = incidence_counts_per_tube(P, Ts)
    need = _pow2(-delta.k * (1 - kappa)) * len(P)
    light = np.flatnonzero(counts < need)
    if len(light):
        i = int(light[0])
        ia, ib = Ts.idx[i].tolist()
        raise PreconditionError(
            f"tube T:{delta.k}:{ia}:{ib} has {int(counts[i])} incidences, below {need:.6g}",
            {"tube": f"T:{delta.k}:{ia}:{ib}", "count": int(counts[i]), "required": need,
             "light_tubes": len(light)})
    part = decompose_subuniform(Ts, ladder, verify=False)
    pieces, scans = [], []
    for Ti in part.parts:
        res = scan_scales(P, Ti, eta, kappa, scales=ladder, C0=C0, c=c)
        D = res.chosen_scale
        pieces.append((D, count_incidences(P.at(D), Ti.at(D))))
        scans.append(res)
    pieces = tuple(pieces)
    total = content_sum([(s, len(p)) for s, p in pieces], u)
    return ContentCover(u, pieces, total, part, tuple(scans))


def parallel_window(ia: int, k: int) -> tuple[Fraction, Fraction]:
    """Slopes ``e`` for which a tube with slope index ``ia`` at scale ``D = 2^-k`` is roughly parallel.

    The slope interval ``[ia D, (ia+1) D)`` meets ``[e - D, e + D]`` exactly
    when ``(ia-1) D <= e < (ia+2) D``; the window has length ``3 D``.
    """
    D = Fraction(1, 1 << k)
    return ((ia - 1) * D, (ia + 2) * D)


def roughly_parallel(ia: np.ndarray, k: int, e) -> np.ndarray:
    """Mask of slope indices whose tubes are roughly parallel to slope ``e``."""
    e = Fraction(e)
    N = 1 << k
    ia = np.asarray(ia, dtype=np.int64)
    # (ia - 1) / N <= e < (ia + 2) / N, cleared of denominators
    return ((ia - 1) * e.denominator <= e.numerator * N) & (e.numerator * N < (ia + 2) * e.denominator)


@dataclass(frozen=True)
class DirectionalContent:
    """Per-direction square covers and their content sums."""

    exponent: float
    directions: tuple[Fraction, ...]
    covers: tuple[ContentCover, ...]
    average: float

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "average": self.average,
            "directions": [
                {"slope": float(e), "content_sum": cv.content_sum,
                 "pieces": [{"scale": str(s), "count": len(p)} for s, p in cv.pieces]}
                for e, cv in zip(self.directions, self.covers)
            ],
        }


def directional_content(cover: ContentCover, directions: Sequence, kappa: float,
                        eta: float) -> DirectionalContent:
    """Project the pieces roughly parallel to each direction onto their square factor.

    Squares are merged per scale before summing ``scale**(1 - kappa + 3 eta)``.
    ``directions`` are slopes in ``[0, 1]``.
    """
    u = 1 - kappa + 3 * eta
    dirs = tuple(Fraction(e) for e in directions)
    out = []
    for e in dirs:
        by_scale: dict[int, list[np.ndarray]] = {}
        for s, piece in cover.pieces:
            if len(piece) == 0:
                continue
            rows = piece.idx[roughly_parallel(piece.idx[:, 2], s.k, e)]
            if len(rows):
                by_scale.setdefault(s.k, []).append(rows[:, :2])
        pieces = tuple((Scale(kk), CubeSet(kk, np.concatenate(v))) for kk, v in sorted(by_scale.items()))
        out.append(ContentCover(u, pieces, content_sum([(s, len(p)) for s, p in pieces], u)))
    avg = sum(cv.content_sum for cv in out) / len(out) if out else 0.0
    return DirectionalContent(u, dirs, tuple(out), avg)
