"""Full-reference XLR: pixel-exact and thresholded comparison of luma planes."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from xlrkit.pooling import pool_msxlr, pool_mxlr
from xlrkit.types import FramePlane, Provenance, XlrSeries

__all__ = [
    "CompareMode",
    "FrComparisonConfig",
    "PSNR_INF",
    "TruncatedStreamError",
    "iter_raw_frames",
    "pool_msxlr",
    "pool_mxlr",
    "psnr_frame",
    "read_raw_frames",
    "xlr_frame",
    "xlr_sequence",
]

# Sentinel PSNR for identical planes; serialized as the string "inf".
PSNR_INF = math.inf


class CompareMode(str, enum.Enum):
    EXACT = "exact"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class FrComparisonConfig:
    mode: CompareMode = CompareMode.EXACT
    threshold_q: int = 16

    def __post_init__(self):
        object.__setattr__(self, "mode", CompareMode(self.mode))
        if not 1 <= self.threshold_q <= 255:
            raise ValueError(f"threshold_q must be in [1, 255], got {self.threshold_q}")


class TruncatedStreamError(ValueError):
    pass


def _check_same_shape(a: FramePlane, b: FramePlane) -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"frame dimensions differ: original {a.width}x{a.height}, "
            f"distorted {b.width}x{b.height}")


def impaired_count(original: FramePlane, distorted: FramePlane,
                   config: FrComparisonConfig = FrComparisonConfig()) -> int:
    """Number of impaired pixels (exact integer count)."""
    _check_same_shape(original, distorted)
    if config.mode is CompareMode.EXACT:
        return int(np.count_nonzero(original.samples != distorted.samples))
    diff = np.abs(original.samples.astype(np.int16) - distorted.samples.astype(np.int16))
    return int(np.count_nonzero(diff >= config.threshold_q))


def xlr_frame(original: FramePlane, distorted: FramePlane,
              config: FrComparisonConfig = FrComparisonConfig()) -> float:
    """Fraction of pixels impaired by transmission errors.

    EXACT counts every position where the samples differ. THRESHOLD counts
    positions whose absolute difference is at least ``threshold_q``, which
    ignores the small mismatches left by a visually lossless reference.
    """
    count = impaired_count(original, distorted, config)
    return count / (original.width * original.height)


def psnr_frame(original: FramePlane, distorted: FramePlane) -> float:
    _check_same_shape(original, distorted)
    diff = original.samples.astype(np.int64) - distorted.samples.astype(np.int64)
    sse = int(np.sum(diff * diff))
    if sse == 0:
        return PSNR_INF
    mse = sse / diff.size
    return 10.0 * math.log10(255.0 ** 2 / mse)


def xlr_sequence(original_stream: Iterable[FramePlane], distorted_stream: Iterable[FramePlane],
                 config: FrComparisonConfig = FrComparisonConfig()) -> XlrSeries:
    values = []
    for k, pair in enumerate(itertools.zip_longest(original_stream, distorted_stream)):
        o, d = pair
        if o is None or d is None:
            short = "original" if o is None else "distorted"
            raise ValueError(f"{short} stream ends after {k} frames")
        try:
            values.append(xlr_frame(o, d, config))
        except ValueError as exc:
            raise ValueError(f"frame {k}: {exc}") from None
    if not values:
        raise ValueError("both streams are empty")
    return XlrSeries(
        per_frame=tuple(enumerate(values)),
        mxlr=pool_mxlr(values),
        msxlr=pool_msxlr(values),
        provenance=Provenance.FR,
    )


def iter_raw_frames(fh: BinaryIO, width: int, height: int) -> Iterator[FramePlane]:
    """Yield planar 8-bit luma frames from a frame-sequential raw stream."""
    frame_size = width * height
    if frame_size < 1:
        raise ValueError(f"bad frame dimensions {width}x{height}")
    offset = 0
    while True:
        chunk = fh.read(frame_size)
        if not chunk:
            return
        if len(chunk) < frame_size:
            raise TruncatedStreamError(
                f"stream truncated mid-frame at byte offset {offset + len(chunk)} "
                f"(frame {offset // frame_size} starts at {offset}, needs {frame_size} bytes)")
        yield FramePlane.from_bytes(chunk, width, height)
        offset += frame_size


def read_raw_frames(path: str | Path, width: int, height: int) -> list[FramePlane]:
    with open(path, "rb") as fh:
        return list(iter_raw_frames(fh, width, height))
