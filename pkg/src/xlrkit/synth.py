"""Synthetic traces and Annex-B streams with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xlrkit.ingest import PacketizationModel
from xlrkit.structures import PredictionStructure
from xlrkit.types import FrameType, PacketRecord, StreamTrace

# rough relative frame sizes per type at a fixed bitrate
_SIZE_WEIGHT = {
    FrameType.IDR: 6.0,
    FrameType.I: 6.0,
    FrameType.P: 1.0,
    FrameType.B_REF: 0.7,
    FrameType.B_NONREF: 0.45,
}


def synthetic_trace(structure: PredictionStructure, n_frames: int, rng: np.random.Generator,
                    mean_p_bytes: int = 12000,
                    pack: PacketizationModel = PacketizationModel()) -> StreamTrace:
    """A loss-free trace with lognormal frame sizes cut by ``pack``."""
    frames = structure.layout(n_frames)
    packets = []
    for f in frames:
        mean = _SIZE_WEIGHT[f.frame_type] * mean_p_bytes
        size = max(1, int(rng.lognormal(np.log(mean), 0.35)))
        for i, s in enumerate(pack.split(size), start=1):
            packets.append(PacketRecord(len(packets), f.decode_index, i, s, False))
    return StreamTrace(tuple(frames), tuple(packets), structure)


class BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def write_bits(self, value: int, n: int) -> None:
        for k in range(n - 1, -1, -1):
            self.bits.append((value >> k) & 1)

    def write_ue(self, value: int) -> None:
        code = value + 1
        n = code.bit_length()
        self.write_bits(0, n - 1)
        self.write_bits(code, n)

    def to_bytes(self) -> bytes:
        bits = self.bits + [1]  # rbsp stop bit
        bits += [0] * (-len(bits) % 8)
        return bytes(int("".join(map(str, bits[i:i + 8])), 2) for i in range(0, len(bits), 8))


def escape_rbsp(rbsp: bytes) -> bytes:
    """Insert emulation-prevention bytes so no start code appears inside."""
    out = bytearray()
    zeros = 0
    for b in rbsp:
        if zeros >= 2 and b <= 3:
            out.append(3)
            zeros = 0
        out.append(b)
        zeros = zeros + 1 if b == 0 else 0
    if out and out[-1] == 0:
        out.append(3)
    return bytes(out)


def nal(nal_type: int, rbsp: bytes, ref_idc: int = 3, long_start: bool = True) -> bytes:
    prefix = b"\x00\x00\x00\x01" if long_start else b"\x00\x00\x01"
    return prefix + bytes([(ref_idc << 5) | nal_type]) + escape_rbsp(rbsp)


def slice_rbsp(first_mb: int, slice_type: int, body: bytes) -> bytes:
    w = BitWriter()
    w.write_ue(first_mb)
    w.write_ue(slice_type)
    w.write_ue(0)  # pic_parameter_set_id
    return w.to_bytes() + body


@dataclass(frozen=True)
class FixtureFrame:
    span_start: int
    span_end: int
    kind: str  # "I", "P" or "B"
    is_idr: bool


_KIND_OF = {
    FrameType.IDR: "I", FrameType.I: "I", FrameType.P: "P",
    FrameType.B_REF: "B", FrameType.B_NONREF: "B",
}
_SLICE_CODE = {"P": 5, "B": 6, "I": 7}


def synthetic_annexb(structure: PredictionStructure, n_frames: int, rng: np.random.Generator,
                     mean_p_bytes: int = 3000, slices_per_frame: int = 1,
                     kinds: list[str] | None = None) -> tuple[bytes, list[FixtureFrame]]:
    """An Annex-B byte stream with SPS/PPS up front and one picture per frame.

    Slice payloads are random bytes (escaped), so only the NAL and slice
    header syntax is meaningful. ``kinds`` overrides the slice kind per
    frame in decoding order. Returns the stream and the byte span, slice
    kind and IDR flag of every frame.
    """
    frames = structure.layout(n_frames)
    out = bytearray()
    truth = []
    for k, f in enumerate(frames):
        start = len(out)
        is_idr = f.frame_type is FrameType.IDR
        kind = kinds[k] if kinds is not None else _KIND_OF[f.frame_type]
        if is_idr:
            out += nal(7, bytes([0x42, 0x00, 0x1E]) + rng.bytes(6) + b"\x80")  # SPS
            out += nal(8, bytes([0xCE, 0x38, 0x80]))  # PPS
        size = max(8, int(rng.lognormal(np.log(_SIZE_WEIGHT[f.frame_type] * mean_p_bytes), 0.3)))
        for s in range(slices_per_frame):
            first_mb = 0 if s == 0 else s * 40
            body = rng.bytes(max(4, size // slices_per_frame))
            ref_idc = 0 if f.frame_type is FrameType.B_NONREF else 2
            out += nal(5 if is_idr else 1, slice_rbsp(first_mb, _SLICE_CODE[kind], body),
                       ref_idc=ref_idc, long_start=(s == 0))
        truth.append(FixtureFrame(start, len(out), kind, is_idr))
    return bytes(out), truth
