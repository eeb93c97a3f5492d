"""Pixel loss rate (XLR) toolkit.

Full-reference XLR from raw luma pairs, no-reference XLR estimated from a
packet trace, a brute-force mask propagation oracle, a simplified Gilbert
loss channel and the statistics used to compare real and estimated series.
"""

from xlrkit.types import (
    FrameMeta,
    FramePlane,
    FrameType,
    PacketRecord,
    Provenance,
    StreamTrace,
    TraceError,
    XlrSeries,
    validate_trace,
)
from xlrkit.structures import PatternEntry, PredictionStructure

__version__ = "0.1.0"

__all__ = [
    "FrameMeta",
    "FramePlane",
    "FrameType",
    "PacketRecord",
    "PatternEntry",
    "PredictionStructure",
    "Provenance",
    "StreamTrace",
    "TraceError",
    "XlrSeries",
    "validate_trace",
    "__version__",
]
