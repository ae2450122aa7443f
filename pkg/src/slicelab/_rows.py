"""Helpers for treating rows of small integer matrices as hashable keys."""

from __future__ import annotations

import numpy as np


def row_keys(*arrays: np.ndarray) -> list[np.ndarray]:
    """Encode the rows of each (m, d) integer array as sortable scalar keys.

    All arrays share one encoding, so keys can be compared across them.
    Mixed-radix int64 keys are used when they fit; otherwise each row
    becomes a Python tuple in an object array.
    """
    arrays = [np.asarray(a, dtype=np.int64).reshape(len(a), -1) for a in arrays]
    d = max((a.shape[1] for a in arrays), default=0)
    nonempty = [a for a in arrays if len(a)]
    if not nonempty:
        return [np.empty(0, dtype=np.int64) for _ in arrays]
    stacked = np.concatenate(nonempty)
    lo = stacked.min(axis=0)
    span = stacked.max(axis=0) - lo + 1
    total = 1
    for w in span.tolist():
        total *= int(w)
    if total < (1 << 62):
        weights = np.ones(d, dtype=np.int64)
        for j in range(d - 2, -1, -1):
            weights[j] = weights[j + 1] * span[j + 1]
        return [((a - lo) * weights).sum(axis=1) if len(a) else np.empty(0, np.int64)
                for a in arrays]
    out = []
    for a in arrays:
        keys = np.empty(len(a), dtype=object)
        keys[:] = [tuple(r) for r in a.tolist()]
        out.append(keys)
    return out


def unique_rows(a: np.ndarray) -> np.ndarray:
    """Lexicographically sorted distinct rows of an integer matrix."""
    a = np.asarray(a, dtype=np.int64)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    if len(a) == 0:
        return a.reshape(0, a.shape[1])
    (keys,) = row_keys(a)
    if keys.dtype == object:
        return np.unique(a, axis=0)
    _, first = np.unique(keys, return_index=True)
    return a[first]


def rows_in(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Boolean mask marking the rows of ``a`` that also occur in ``b``."""
    if len(a) == 0:
        return np.zeros(0, dtype=bool)
    if len(b) == 0:
        return np.zeros(len(a), dtype=bool)
    ka, kb = row_keys(a, b)
    if ka.dtype == object:
        members = set(kb.tolist())
        return np.fromiter((k in members for k in ka.tolist()), dtype=bool, count=len(ka))
    return np.isin(ka, kb)
