"""Temporal pooling of per-frame XLR values."""

from __future__ import annotations

import math
from typing import Iterable


def pool_mxlr(series: Iterable[float]) -> float:
    """Arithmetic mean of the per-frame values."""
    values = [float(v) for v in series]
    if not values:
        raise ValueError("cannot pool an empty series")
    return math.fsum(values) / len(values)


def pool_msxlr(series: Iterable[float]) -> float:
    """Mean of the per-frame square roots (the linear-dimension score)."""
    values = [float(v) for v in series]
    if not values:
        raise ValueError("cannot pool an empty series")
    for i, v in enumerate(values):
        if v < 0 or math.isnan(v):
            raise ValueError(f"element {i} is negative or NaN: {v!r}")
    return math.fsum(math.sqrt(v) for v in values) / len(values)
