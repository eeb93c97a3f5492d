"""No-reference XLR estimation from a packet trace.

A lost packet desynchronizes the decoder until the next NAL unit, so it
impairs the share of its frame carried by itself and every later packet of
that frame. Only the first lost packet of a frame matters. The impaired
share propagates unchanged to every frame that depends on it, directly or
indirectly, inside the same IDR window, and overlapping impairments count
once: each frame's estimate is the largest share among the effective
losses in the frame itself and its ancestors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from xlrkit.types import (
    FrameMeta,
    FrameType,
    PacketRecord,
    Provenance,
    StreamTrace,
    XlrSeries,
    require_valid,
)


@dataclass(frozen=True)
class LossImpact:
    packet: PacketRecord
    xi: float
    effective: bool


class DependencyCycleError(ValueError):
    pass


@dataclass(frozen=True)
class DependencyClosure:
    """Ancestors of every frame, keyed by decode index."""

    ancestors: Mapping[int, frozenset[int]]

    def __getitem__(self, decode_index: int) -> frozenset[int]:
        return self.ancestors[decode_index]

    def __len__(self) -> int:
        return len(self.ancestors)


def xi_for_loss(frame_packets: Sequence[PacketRecord], lost_index_in_frame: int) -> float:
    """Impaired share of a frame when its packet ``lost_index_in_frame`` is lost.

    Packet sizes stand in for the pixel area each packet carries, so the
    share is the byte count from the lost packet to the end of the frame
    over the frame's total byte count.
    """
    if not frame_packets:
        raise ValueError("frame has no packets")
    n = len(frame_packets)
    if not 1 <= lost_index_in_frame <= n:
        raise ValueError(f"lost packet index {lost_index_in_frame} outside 1..{n}")
    sizes = [p.size_octets for p in sorted(frame_packets, key=lambda p: p.index_in_frame)]
    if min(sizes) < 1:
        raise ValueError("packet sizes must be >= 1")
    return sum(sizes[lost_index_in_frame - 1:]) / sum(sizes)


def effective_losses(trace: StreamTrace) -> list[LossImpact]:
    """One impact per lost packet, in global order.

    The earliest lost packet of a frame is effective; the rest are shadowed
    by the desynchronization it causes and carry ``xi = 0``.
    """
    require_valid(trace)
    return _effective_losses(trace.packets_by_frame())


def _effective_losses(groups: Mapping[int, list[PacketRecord]]) -> list[LossImpact]:
    impacts = []
    for pkts in groups.values():
        first = True
        for pkt in pkts:
            if not pkt.lost:
                continue
            if first:
                impacts.append(LossImpact(pkt, xi_for_loss(pkts, pkt.index_in_frame), True))
                first = False
            else:
                impacts.append(LossImpact(pkt, 0.0, False))
    impacts.sort(key=lambda li: li.packet.global_index)
    return impacts


def _window_starts(frames: Sequence[FrameMeta]) -> dict[int, int]:
    starts = {}
    current = None
    for f in sorted(frames, key=lambda f: f.decode_index):
        if f.frame_type is FrameType.IDR or current is None:
            current = f.decode_index
        starts[f.decode_index] = current
    return starts


def dependency_closure(frames: Sequence[FrameMeta]) -> DependencyClosure:
    """Transitive ancestors of every frame, never crossing an IDR."""
    refs = {f.decode_index: f.direct_refs for f in frames}
    window = _window_starts(frames)
    done: dict[int, frozenset[int]] = {}
    on_path: set[int] = set()

    def visit(root: int) -> None:
        stack = [(root, iter(refs[root]))]
        on_path.add(root)
        while stack:
            node, it = stack[-1]
            advanced = False
            for r in it:
                if r not in refs or window[r] != window[node]:
                    continue
                if r in on_path:
                    raise DependencyCycleError(
                        f"reference cycle through frames {node} and {r}")
                if r not in done:
                    on_path.add(r)
                    stack.append((r, iter(refs[r])))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            on_path.discard(node)
            acc: set[int] = set()
            for r in refs[node]:
                if r in done and window[r] == window[node]:
                    acc.add(r)
                    acc |= done[r]
            done[node] = frozenset(acc)

    for f in frames:
        if f.decode_index not in done:
            visit(f.decode_index)
    return DependencyClosure(done)


def own_impairment(trace: StreamTrace) -> dict[int, float]:
    """Impaired share each frame suffers from its own effective loss.

    Frames with no packets at all are taken as wholly lost.
    """
    require_valid(trace)
    own = {f.decode_index: 0.0 for f in trace.frames}
    groups = trace.packets_by_frame()
    for fidx, pkts in groups.items():
        if not pkts:
            own[fidx] = 1.0
    for impact in _effective_losses(groups):
        if impact.effective:
            own[impact.packet.frame_decode_index] = impact.xi
    return own


def estimate_xlr(trace: StreamTrace) -> XlrSeries:
    own = own_impairment(trace)
    closure = dependency_closure(trace.frames)
    indices, values = [], []
    for f in trace.frames:
        idx = f.decode_index
        est = own[idx]
        for anc in closure[idx]:
            if own[anc] > est:
                est = own[anc]
        indices.append(idx)
        values.append(est)
    return XlrSeries.from_values(indices, values, Provenance.NR)
