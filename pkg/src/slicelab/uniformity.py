"""Sub-uniformity constants and the partition into sub-uniform parts.

For a ladder ``1 = D_0 > ... > D_n = delta`` a family P is sub-uniform with
constant C when, at every level j and for every D_j-parent Q,

    |P|_{D_j} * |P ∩ Q|_{D_{j+1}}  <=  C * |P|_{D_{j+1}}.

All ratios are computed exactly as Fractions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._rows import row_keys
from .dyadic import (CubeSet, DyadicSquare, DyadicTube, Scale, ScaleSequence, TubeSet,
                     _CellFamily)
from .errors import InvalidInputError, UndefinedError

__all__ = [
    "UniformityReport",
    "DistributionReport",
    "Partition",
    "subuniformity_constant",
    "subuniformly_distributed_constant",
    "decompose_subuniform",
    "branching_class",
]


def branching_class(count: int) -> int:
    """The k with ``2**(k-1) < count <= 2**k`` (count >= 1)."""
    if count < 1:
        raise ValueError("count must be positive")
    return (int(count) - 1).bit_length()


def _children_per_parent(idx: np.ndarray, shift: int):
    """Distinct parents (at ``shift`` bits coarser) and their child counts.

    ``idx`` must hold distinct rows.
    """
    par = idx >> shift
    (keys,) = row_keys(par)
    uk, first, counts = np.unique(keys, return_index=True, return_counts=True)
    inverse = np.searchsorted(uk, keys)
    return par[first], counts, inverse


def _cell(fam: _CellFamily, k: int, row) -> DyadicSquare | DyadicTube:
    sq = DyadicSquare(k, int(row[0]), int(row[1]))
    return DyadicTube(sq) if isinstance(fam, TubeSet) else sq


@dataclass(frozen=True)
class UniformityReport:
    """Smallest constant for the ladder, with the level and parent attaining it."""

    scales: ScaleSequence
    constant: Fraction
    witness: tuple[int, DyadicSquare | DyadicTube]
    level_constants: tuple[Fraction, ...]

    def as_dict(self) -> dict:
        j, cell = self.witness
        return {
            "ladder": [str(s) for s in self.scales.levels],
            "constant": float(self.constant),
            "constant_exact": str(self.constant),
            "witness": {"level": j, "cell": str(cell)},
            "level_constants": [float(c) for c in self.level_constants],
        }


def _level_ratio(P: _CellFamily, kj: int, kj1: int):
    """Ratio at one ladder level and the parent row attaining it."""
    fine = P.at(Scale(kj1)).idx
    parents, counts, _ = _children_per_parent(fine, kj1 - kj)
    best = int(np.argmax(counts))
    ratio = Fraction(len(parents) * int(counts[best]), len(fine))
    return ratio, parents[best]


def subuniformity_constant(P: _CellFamily, scales: ScaleSequence) -> UniformityReport:
    """Smallest C such that ``P`` is sub-uniform with constant C along ``scales``."""
    if len(P) == 0:
        raise UndefinedError("the sub-uniformity constant of an empty family is undefined")
    if P.k < scales.delta.k:
        raise InvalidInputError(f"family scale {P.scale} is coarser than the ladder's {scales.delta}")
    consts = []
    best = None
    for j in range(scales.n):
        kj, kj1 = scales.level(j).k, scales.level(j + 1).k
        ratio, row = _level_ratio(P, kj, kj1)
        consts.append(ratio)
        if best is None or ratio > best[0]:
            best = (ratio, j, _cell(P, kj, row))
    return UniformityReport(scales, best[0], (best[1], best[2]), tuple(consts))


def level_ratio_at(P: _CellFamily, scales: ScaleSequence, j: int, cell) -> Fraction:
    """Recompute ``|P|_{D_j} |P ∩ cell|_{D_{j+1}} / |P|_{D_{j+1}}`` for one parent."""
    kj1 = scales.level(j + 1).k
    fine = P.at(Scale(kj1))
    coarse = P.at(scales.level(j))
    return Fraction(len(coarse) * len(fine.within(cell)), len(fine))


@dataclass(frozen=True)
class DistributionReport:
    """Largest ``|K|_R |K ∩ Q|_r / |K|_r`` over dyadic pairs ``r <= R``."""

    constant: Fraction
    witness: tuple[Scale, Scale, DyadicSquare]

    def as_dict(self) -> dict:
        R, r, Q = self.witness
        return {"constant": float(self.constant), "R": str(R), "r": str(r), "cell": str(Q)}


def subuniformly_distributed_constant(K: CubeSet, all_dyadic_pairs: bool = True) -> DistributionReport:
    """Finite-resolution sub-uniform distribution constant of ``K``.

    With ``all_dyadic_pairs`` every pair ``2^-kR >= 2^-kr`` down to the scale
    of ``K`` is scanned; otherwise only consecutive dyadic scales.
    """
    if len(K) == 0:
        raise UndefinedError("empty set")
    covers = [K.at(Scale(j)).idx for j in range(K.k + 1)]
    best = (Fraction(0), None)
    for kr in range(K.k + 1):
        fine = covers[kr]
        kRs = range(kr + 1) if all_dyadic_pairs else [max(kr - 1, 0)]
        for kR in kRs:
            parents, counts, _ = _children_per_parent(fine, kr - kR)
            i = int(np.argmax(counts))
            ratio = Fraction(len(parents) * int(counts[i]), len(fine))
            if ratio > best[0]:
                best = (ratio, (Scale(kR), Scale(kr), DyadicSquare(kR, *map(int, parents[i]))))
    return DistributionReport(best[0], best[1])


@dataclass(frozen=True)
class Partition:
    """Disjoint sub-uniform parts, ordered by signature.

    ``signatures[i][j]`` is the branching class used at ladder level j.
    """

    scales: ScaleSequence
    parts: tuple[_CellFamily, ...]
    signatures: tuple[tuple[int, ...], ...]
    constants: tuple[Fraction, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.parts)

    @property
    def count_bound(self) -> int:
        """``(log2 S^2 + 1)^n``."""
        return (2 * self.scales.step + 1) ** self.scales.n

    def as_dict(self) -> dict:
        return {
            "ladder": [str(s) for s in self.scales.levels],
            "count_bound": self.count_bound,
            "parts": [
                {"signature": list(sig), "size": len(part),
                 "constant": float(c) if c is not None else None}
                for sig, part, c in zip(self.signatures, self.parts,
                                        self.constants or [None] * len(self.parts))
            ],
        }


def decompose_subuniform(P: _CellFamily, scales: ScaleSequence, verify: bool = True) -> Partition:
    """Split ``P`` into parts that are sub-uniform with constant 2.

    Levels are processed from the finest upward. At level j every member of
    the current part is labelled by the branching class of its D_j-parent
    (the number of D_{j+1}-cells of the part inside it), and the part is
    split by label. Later, coarser splits keep whole D_j-subtrees together,
    so earlier levels stay balanced.
    """
    if P.k != scales.delta.k:
        raise InvalidInputError(f"family scale {P.scale} must equal the ladder's finest scale {scales.delta}")
    fam = type(P)
    k = P.k
    idx = P.idx
    parts: list[tuple[tuple[int, ...], np.ndarray]] = []
    if len(P):
        parts = [((), np.arange(len(P)))]
    for j in range(scales.n - 1, -1, -1):
        kj, kj1 = scales.level(j).k, scales.level(j + 1).k
        refined = []
        for sig, members in parts:
            fine_rows = idx[members] >> (k - kj1)
            (fkeys,) = row_keys(fine_rows)
            ukeys, first, inv_fine = np.unique(fkeys, return_index=True, return_inverse=True)
            fine_cells = fine_rows[first]
            _, counts, inv_par = _children_per_parent(fine_cells, kj1 - kj)
            labels = np.array([branching_class(c) for c in counts.tolist()], dtype=np.int64)
            member_label = labels[inv_par[inv_fine.reshape(-1)]]
            for lab in np.unique(member_label).tolist():
                refined.append(((lab,) + sig, members[member_label == lab]))
        parts = refined
    parts.sort(key=lambda t: t[0])
    families = tuple(fam(k, idx[m]) for _, m in parts)
    sigs = tuple(s for s, _ in parts)
    consts = tuple(subuniformity_constant(f, scales).constant for f in families) if verify else ()
    return Partition(scales, families, sigs, consts)
