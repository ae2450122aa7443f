"""Upper sums for Hausdorff content from explicit multi-scale covers."""

from __future__ import annotations

import math
from typing import Iterable

from .dyadic import as_scale
from .errors import InvalidParameterError


def content_sum(cover: Iterable[tuple], u: float) -> float:
    """``sum(scale**u * count)`` accumulated left to right."""
    if u < 0:
        raise InvalidParameterError(f"content exponent must be >= 0, got {u}")
    total = 0.0
    for scale, count in cover:
        total += math.ldexp(1.0, -as_scale(scale).k) ** u * int(count)
    return total
