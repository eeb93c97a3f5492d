"""Domain types shared by every module, plus trace validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from xlrkit.pooling import pool_msxlr, pool_mxlr

if TYPE_CHECKING:
    from xlrkit.structures import PredictionStructure


class FrameType(str, enum.Enum):
    IDR = "IDR"
    I = "I"  # noqa: E741
    P = "P"
    B_REF = "B_ref"
    B_NONREF = "B_nonref"

    @property
    def is_intra(self) -> bool:
        return self in (FrameType.IDR, FrameType.I)


class Provenance(str, enum.Enum):
    FR = "FR"
    NR = "NR"
    ORACLE = "ORACLE"


class TraceError(ValueError):
    """Raised when an operation needs a valid trace and gets an invalid one."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            head += f"; ... and {more} more"
        super().__init__(f"invalid trace: {head}")


@dataclass(frozen=True)
class FramePlane:
    """One 8-bit luma plane, stored as a read-only (height, width) array."""

    width: int
    height: int
    samples: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"bad plane dimensions {self.width}x{self.height}")
        arr = np.asarray(self.samples, dtype=np.uint8)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"plane {self.width}x{self.height} needs {self.width * self.height} "
                f"samples, got {arr.size}"
            )
        arr = arr.reshape(self.height, self.width)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_bytes(cls, data: bytes, width: int, height: int) -> "FramePlane":
        return cls(width, height, np.frombuffer(data, dtype=np.uint8))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class FrameMeta:
    decode_index: int
    display_index: int
    frame_type: FrameType
    direct_refs: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "frame_type", FrameType(self.frame_type))
        object.__setattr__(self, "direct_refs", tuple(int(r) for r in self.direct_refs))


@dataclass(frozen=True)
class PacketRecord:
    global_index: int
    frame_decode_index: int
    index_in_frame: int
    size_octets: int
    lost: bool = False


@dataclass(frozen=True)
class StreamTrace:
    frames: tuple[FrameMeta, ...]
    packets: tuple[PacketRecord, ...]
    structure: "PredictionStructure | None" = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "packets", tuple(self.packets))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def packets_by_frame(self) -> dict[int, list[PacketRecord]]:
        """Packets grouped per owning frame, in index_in_frame order."""
        groups: dict[int, list[PacketRecord]] = {f.decode_index: [] for f in self.frames}
        for pkt in self.packets:
            groups.setdefault(pkt.frame_decode_index, []).append(pkt)
        for pkts in groups.values():
            pkts.sort(key=lambda p: p.index_in_frame)
        return groups

    def with_losses(self, lost: Sequence[bool]) -> "StreamTrace":
        """Copy of the trace with the lost flags replaced, in global order."""
        if len(lost) != len(self.packets):
            raise ValueError(f"{len(lost)} flags for {len(self.packets)} packets")
        packets = tuple(
            PacketRecord(p.global_index, p.frame_decode_index, p.index_in_frame,
                         p.size_octets, bool(flag))
            for p, flag in zip(self.packets, lost)
        )
        return StreamTrace(self.frames, packets, self.structure, self.warnings)

    @property
    def lost_count(self) -> int:
        return sum(1 for p in self.packets if p.lost)


@dataclass(frozen=True)
class XlrSeries:
    """Per-frame XLR values with both pooled scores.

    ``order`` says whether ``per_frame`` indices are decode or display
    indices; the estimator and oracle emit decode order by default.
    """

    per_frame: tuple[tuple[int, float], ...]
    mxlr: float
    msxlr: float
    provenance: Provenance
    order: str = "decode"

    @classmethod
    def from_values(cls, indices: Sequence[int], values: Sequence[float],
                    provenance: Provenance, order: str = "decode") -> "XlrSeries":
        if len(indices) != len(values):
            raise ValueError("indices and values differ in length")
        vals = [float(v) for v in values]
        for i, v in zip(indices, vals):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"xlr of frame {i} outside [0, 1]: {v}")
        return cls(
            per_frame=tuple((int(i), v) for i, v in zip(indices, vals)),
            mxlr=pool_mxlr(vals),
            msxlr=pool_msxlr(vals),
            provenance=Provenance(provenance),
            order=order,
        )

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.per_frame]

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.per_frame]

    def __len__(self) -> int:
        return len(self.per_frame)

    def reordered(self, trace: StreamTrace) -> "XlrSeries":
        """Re-sort a decode-order series into display order using ``trace``."""
        if self.order == "display":
            return self
        display = {f.decode_index: f.display_index for f in trace.frames}
        rows = sorted(((display[i], v) for i, v in self.per_frame), key=lambda r: r[0])
        return XlrSeries(tuple(rows), self.mxlr, self.msxlr, self.provenance, "display")


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


def validate_trace(trace: StreamTrace) -> list[Violation]:
    """Check every trace invariant; returns an empty list for a valid trace.

    Never raises on parseable input, so callers can report all problems at
    once.
    """
    out: list[Violation] = []
    frames = trace.frames
    if not frames:
        out.append(Violation("structure", "trace has no frames"))
    elif frames[0].frame_type is not FrameType.IDR:
        out.append(Violation("structure", f"first frame {frames[0].decode_index} is not IDR"))

    known = set()
    seen_display: dict[int, int] = {}
    referenced_by: dict[int, list[int]] = {}
    window_start = 0
    for pos, f in enumerate(frames):
        if f.decode_index != pos:
            out.append(Violation(
                "order", f"frame at position {pos} has decode_index {f.decode_index}"))
        if f.display_index in seen_display:
            out.append(Violation(
                "display", f"frame {f.decode_index} repeats display_index {f.display_index} "
                f"of frame {seen_display[f.display_index]}"))
        seen_display[f.display_index] = f.decode_index
        if f.frame_type is FrameType.IDR:
            window_start = f.decode_index
            if f.direct_refs:
                out.append(Violation(
                    "idr", f"IDR frame {f.decode_index} has references {list(f.direct_refs)}"))
        for r in f.direct_refs:
            if r >= f.decode_index:
                out.append(Violation(
                    "causality", f"frame {f.decode_index} references later frame {r}"))
            elif r not in known:
                out.append(Violation(
                    "reference", f"frame {f.decode_index} references unknown frame {r}"))
            elif r < window_start and f.frame_type is not FrameType.IDR:
                out.append(Violation(
                    "closed-gop", f"frame {f.decode_index} references frame {r} "
                    f"across IDR {window_start}"))
            referenced_by.setdefault(r, []).append(f.decode_index)
        known.add(f.decode_index)

    types = {f.decode_index: f.frame_type for f in frames}
    for r, users in sorted(referenced_by.items()):
        if types.get(r) is FrameType.B_NONREF:
            out.append(Violation(
                "b-nonref", f"non-reference B frame {r} is referenced by {users}"))

    per_frame: dict[int, list[int]] = {}
    last_frame = -1
    for pos, p in enumerate(trace.packets):
        if p.global_index != pos:
            out.append(Violation(
                "packet-order", f"packet at position {pos} has global_index {p.global_index}"))
        if p.frame_decode_index not in known:
            out.append(Violation(
                "packet-frame", f"packet {p.global_index} belongs to unknown frame "
                f"{p.frame_decode_index}"))
            continue
        if p.frame_decode_index < last_frame:
            out.append(Violation(
                "packet-order", f"packet {p.global_index} of frame {p.frame_decode_index} "
                f"follows packets of frame {last_frame}"))
        last_frame = max(last_frame, p.frame_decode_index)
        if p.size_octets < 1:
            out.append(Violation(
                "packet-size", f"packet {p.global_index} has size {p.size_octets}"))
        per_frame.setdefault(p.frame_decode_index, []).append(p.index_in_frame)
    for f, idx in sorted(per_frame.items()):
        if idx != list(range(1, len(idx) + 1)):
            out.append(Violation(
                "contiguity", f"frame {f} packet indices {idx} are not 1..{len(idx)}"))
    return out


def require_valid(trace: StreamTrace) -> None:
    violations = validate_trace(trace)
    if violations:
        raise TraceError(violations)
