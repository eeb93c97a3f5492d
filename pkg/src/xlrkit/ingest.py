"""Build a StreamTrace from an H.264 Annex-B elementary stream.

Only NAL unit headers and the first two slice-header fields
(first_mb_in_slice, slice_type) are parsed. Display order and references
come from the declared prediction structure; the stream's own slice types
and IDR flags override it where they disagree, with a warning.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

from xlrkit.structures import PatternEntry, PredictionStructure
from xlrkit.types import FrameMeta, FrameType, PacketRecord, StreamTrace

log = logging.getLogger(__name__)

START_CODE = b"\x00\x00\x01"
NAL_SLICE = 1
NAL_SLICE_DPA = 2
NAL_SLICE_DPB = 3
NAL_SLICE_DPC = 4
NAL_IDR = 5
TS_PACKET = 188
TS_PAYLOAD = 184

# slice_type % 5 -> coarse type; SP is predicted like P, SI is intra
_SLICE_KIND = {0: "P", 1: "B", 2: "I", 3: "P", 4: "I"}


class BitstreamError(ValueError):
    pass


@dataclass(frozen=True)
class NalUnit:
    byte_offset: int  # first byte of the NAL header
    size_octets: int  # header + payload, start code excluded
    nal_unit_type: int
    is_vcl: bool
    prefix_len: int = 3  # 3 or 4 byte start code

    @property
    def prefix_offset(self) -> int:
        return self.byte_offset - self.prefix_len

    @property
    def end(self) -> int:
        return self.byte_offset + self.size_octets


def split_annexb(stream: bytes) -> list[NalUnit]:
    """Locate every start code and return the NAL units between them.

    Emulation prevention bytes are left in place.
    """
    stream = bytes(stream)
    codes = []
    i = stream.find(START_CODE)
    while i != -1:
        codes.append(i)
        i = stream.find(START_CODE, i + 3)
    if not codes:
        raise BitstreamError("no start code found")

    prefixes = []
    prev_header = -1
    for pos in codes:
        # a zero byte right before 00 00 01 is part of a 4-byte start code,
        # unless it is the previous unit's header byte
        long_code = pos > 0 and stream[pos - 1] == 0 and pos - 1 > prev_header
        prefixes.append(pos - 1 if long_code else pos)
        prev_header = pos + 3

    units = []
    for k, pos in enumerate(codes):
        header = pos + 3
        end = prefixes[k + 1] if k + 1 < len(codes) else len(stream)
        if header >= end:
            continue
        ntype = stream[header] & 0x1F
        units.append(NalUnit(header, end - header, ntype, 1 <= ntype <= 5,
                             pos - prefixes[k] + 3))
    if not units:
        raise BitstreamError("start codes found but no NAL unit follows them")
    return units


def unescape_rbsp(data: bytes) -> bytes:
    """Drop emulation-prevention bytes (the 03 in 00 00 03)."""
    out = bytearray()
    zeros = 0
    for b in data:
        if zeros >= 2 and b == 3:
            zeros = 0
            continue
        out.append(b)
        zeros = zeros + 1 if b == 0 else 0
    return bytes(out)


class BitReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0  # in bits

    def read_bit(self) -> int:
        byte = self.pos >> 3
        if byte >= len(self.data):
            raise BitstreamError("truncated payload while reading slice header")
        bit = (self.data[byte] >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit

    def read_bits(self, n: int) -> int:
        v = 0
        for _ in range(n):
            v = (v << 1) | self.read_bit()
        return v

    def read_ue(self) -> int:
        zeros = 0
        while self.read_bit() == 0:
            zeros += 1
            if zeros > 32:
                raise BitstreamError("exp-Golomb code with more than 32 leading zeros")
        return (1 << zeros) - 1 + self.read_bits(zeros)


def parse_slice_header(payload: bytes) -> tuple[int, int]:
    """``(first_mb_in_slice, slice_type)`` from a slice NAL starting at its header."""
    if len(payload) < 2:
        raise BitstreamError("slice NAL unit too short for a slice header")
    reader = BitReader(unescape_rbsp(payload[1:33]))
    first_mb = reader.read_ue()
    slice_type = reader.read_ue()
    if slice_type > 9:
        raise BitstreamError(f"slice_type {slice_type} out of range")
    return first_mb, slice_type


def slice_type_of(vcl_nal: NalUnit, payload: bytes) -> str:
    """Coarse slice kind, ``"I"``, ``"P"`` or ``"B"``, of a slice NAL unit."""
    if not vcl_nal.is_vcl:
        raise ValueError(f"NAL unit type {vcl_nal.nal_unit_type} is not a slice")
    if vcl_nal.nal_unit_type in (NAL_SLICE_DPB, NAL_SLICE_DPC):
        raise ValueError("data partitions B/C carry no slice header")
    _, slice_type = parse_slice_header(payload)
    return _SLICE_KIND[slice_type % 5]


class PackMode(str, enum.Enum):
    FIXED_MTU = "mtu"
    TS188 = "ts188"


@dataclass(frozen=True)
class PacketizationModel:
    """How each frame's byte span is cut into packets.

    Every frame starts a new packet, as a PES-aligned transport mux does,
    so no packet straddles two frames. TS188 packets carry 184 payload
    octets; ``size_octets`` records payload octets.
    """

    mode: PackMode = PackMode.FIXED_MTU
    mtu_octets: int = 1400

    def __post_init__(self):
        object.__setattr__(self, "mode", PackMode(self.mode))
        if self.mode is PackMode.FIXED_MTU and self.mtu_octets < 64:
            raise ValueError(f"mtu must be >= 64 octets, got {self.mtu_octets}")

    @classmethod
    def parse(cls, text: str) -> "PacketizationModel":
        """Parse ``mtu:N``, ``mtu`` or ``ts188``."""
        text = text.strip().lower()
        if text == "ts188":
            return cls(PackMode.TS188)
        if text == "mtu":
            return cls(PackMode.FIXED_MTU)
        if text.startswith("mtu:"):
            try:
                return cls(PackMode.FIXED_MTU, int(text[4:]))
            except ValueError:
                raise ValueError(f"bad MTU in {text!r}") from None
        raise ValueError(f"unknown packetization {text!r}; use mtu:N or ts188")

    @property
    def payload_octets(self) -> int:
        return TS_PAYLOAD if self.mode is PackMode.TS188 else self.mtu_octets

    def split(self, span: int) -> list[int]:
        step = self.payload_octets
        sizes = [step] * (span // step)
        if span % step:
            sizes.append(span % step)
        return sizes


@dataclass
class Picture:
    """A coded frame as found in the stream."""

    span_start: int
    span_end: int
    kind: str
    is_idr: bool
    n_slices: int = 1


def group_pictures(stream: bytes, units: Sequence[NalUnit],
                   warnings: list[str]) -> list[Picture]:
    """Group NAL units into pictures and assign each its byte span.

    A picture opens at every slice with first_mb_in_slice == 0. Non-VCL
    units are charged to the picture that follows them; the spans tile the
    stream from the first start code to the end.
    """
    pictures: list[Picture] = []
    pending: int | None = None
    for u in units:
        if not u.is_vcl:
            if pending is None:
                pending = u.prefix_offset
            continue
        if u.nal_unit_type in (NAL_SLICE_DPB, NAL_SLICE_DPC):
            if pictures:
                pending = None
                continue
            raise BitstreamError("data partition B/C before any slice header")
        first_mb, slice_type = parse_slice_header(stream[u.byte_offset:u.end])
        kind = _SLICE_KIND[slice_type % 5]
        is_idr = u.nal_unit_type == NAL_IDR
        if first_mb == 0 or not pictures:
            start = pending if pending is not None else u.prefix_offset
            if pictures:
                pictures[-1].span_end = start
            pictures.append(Picture(start, len(stream), kind, is_idr))
        else:
            pic = pictures[-1]
            if pic.n_slices == 1:
                warnings.append(
                    f"frame {len(pictures) - 1}: several slices per picture; they are "
                    "merged into one frame and per-slice resynchronization is not modeled")
            pic.n_slices += 1
            if kind != pic.kind:
                warnings.append(
                    f"frame {len(pictures) - 1}: slice kinds differ ({pic.kind} then {kind}); "
                    f"keeping {pic.kind}")
        pending = None
    if not pictures:
        raise BitstreamError("stream holds no slice NAL units")
    return pictures


def _expected_layout(structure: PredictionStructure, window_len: int) -> list[tuple[int, PatternEntry]]:
    """Pattern entries for a window; windows longer than a period repeat it."""
    out = []
    offset = 0
    while offset < window_len:
        length = min(structure.period, window_len - offset)
        for e in structure.pattern_for(length):
            out.append((offset, e))
        offset += length
    return out


def _reconcile(pictures: list[Picture], structure: PredictionStructure,
               warnings: list[str]) -> list[FrameMeta]:
    if not pictures[0].is_idr:
        warnings.append("frame 0 is not an IDR picture; treated as IDR to open the first window")
        pictures[0].is_idr = True

    idr_at = [k for k, p in enumerate(pictures) if p.is_idr] + [len(pictures)]
    frames: list[FrameMeta] = []
    for w_start, w_end in zip(idr_at, idr_at[1:]):
        layout = _expected_layout(structure, w_end - w_start)
        # decode index of each (chunk offset, display position) in this window
        decode_of = {(off, e.display_pos): w_start + k for k, (off, e) in enumerate(layout)}
        for k, (off, e) in enumerate(layout):
            didx = w_start + k
            pic = pictures[didx]
            refs = tuple(decode_of[(off, r)] for r in e.refs)
            expected = e.frame_type
            ftype, note = _honour(pic, expected)
            if ftype is FrameType.IDR or ftype is FrameType.I:
                refs = ()
            elif ftype is FrameType.P and expected is not FrameType.P:
                refs = refs[:1] if refs else _last_reference(frames, w_start)
            elif ftype in (FrameType.B_REF, FrameType.B_NONREF) and not refs:
                refs = _last_reference(frames, w_start)
            if note:
                warnings.append(f"frame {didx}: {note}")
            frames.append(FrameMeta(didx, w_start + off + e.display_pos, ftype, refs))
    return frames


def _honour(pic: Picture, expected: FrameType) -> tuple[FrameType, str]:
    """Frame type the stream dictates, with a note when it departs from ``expected``."""
    if pic.is_idr:
        if expected is FrameType.IDR:
            return FrameType.IDR, ""
        return FrameType.IDR, f"IDR picture where the structure expects {expected.value}"
    if pic.kind == "I":
        if expected is FrameType.I:
            return FrameType.I, ""
        return FrameType.I, f"intra picture where the structure expects {expected.value}"
    if pic.kind == "P":
        if expected is FrameType.P:
            return FrameType.P, ""
        return FrameType.P, f"P slice where the structure expects {expected.value}"
    if expected in (FrameType.B_REF, FrameType.B_NONREF):
        return expected, ""
    return FrameType.B_REF, f"B slice where the structure expects {expected.value}"


def _last_reference(frames: list[FrameMeta], window_start: int) -> tuple[int, ...]:
    for f in reversed(frames):
        if f.decode_index < window_start:
            break
        if f.frame_type is not FrameType.B_NONREF:
            return (f.decode_index,)
    return ()


def build_trace(stream: bytes, structure: PredictionStructure,
                pack: PacketizationModel = PacketizationModel()) -> StreamTrace:
    """Frames, types, references and packets of an Annex-B stream.

    Inconsistencies between the stream and ``structure`` are reported in
    ``trace.warnings``; they never abort the build.
    """
    stream = bytes(stream)
    warnings: list[str] = []
    units = split_annexb(stream)
    pictures = group_pictures(stream, units, warnings)
    frames = _reconcile(pictures, structure, warnings)

    packets = []
    for f, pic in zip(frames, pictures):
        for i, size in enumerate(pack.split(pic.span_end - pic.span_start), start=1):
            packets.append(PacketRecord(len(packets), f.decode_index, i, size, False))
    for w in warnings:
        log.warning(w)
    return StreamTrace(tuple(frames), tuple(packets), structure, tuple(warnings))


def frame_spans(stream: bytes) -> list[tuple[int, int]]:
    """Byte span of every picture, as charged by :func:`build_trace`."""
    stream = bytes(stream)
    return [(p.span_start, p.span_end)
            for p in group_pictures(stream, split_annexb(stream), [])]
