"""Trace builders shared by the tests."""

from __future__ import annotations

from hypothesis import strategies as st

from xlrkit.structures import PredictionStructure
from xlrkit.types import FrameMeta, FrameType, PacketRecord, StreamTrace


def make_trace(frames: list[FrameMeta], sizes: dict[int, list[int]],
               lost: set[tuple[int, int]] = frozenset()) -> StreamTrace:
    """Trace from per-frame packet sizes; ``lost`` holds (frame, index_in_frame)."""
    packets = []
    for f in frames:
        for i, s in enumerate(sizes.get(f.decode_index, []), start=1):
            packets.append(PacketRecord(len(packets), f.decode_index, i, s,
                                        (f.decode_index, i) in lost))
    return StreamTrace(tuple(frames), tuple(packets))


def uniform_trace(structure: str, n_frames: int, sizes: list[int],
                  lost: set[tuple[int, int]] = frozenset(), period: int = 25) -> StreamTrace:
    frames = PredictionStructure.preset(structure, period).layout(n_frames)
    return make_trace(frames, {f.decode_index: list(sizes) for f in frames}, lost)


def chain(n: int) -> list[FrameMeta]:
    return [FrameMeta(0, 0, FrameType.IDR)] + [
        FrameMeta(k, k, FrameType.P, (k - 1,)) for k in range(1, n)]


@st.composite
def lossy_traces(draw, max_frames=40):
    name = draw(st.sampled_from(["ipp", "ibbp", "hier"]))
    period = draw(st.integers(2, 13))
    n = draw(st.integers(1, max_frames))
    frames = PredictionStructure.preset(name, period).layout(n)
    packets = []
    for f in frames:
        for i in range(1, draw(st.integers(1, 5)) + 1):
            packets.append(PacketRecord(len(packets), f.decode_index, i,
                                        draw(st.integers(1, 2000)),
                                        draw(st.integers(0, 9)) == 0))
    return StreamTrace(tuple(frames), tuple(packets))
