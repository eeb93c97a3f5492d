"""Closed GOP prediction structures: IPP..., IBBP... and IB2B1B2P...

A structure describes one IDR-delimited window. Each :class:`PatternEntry`
gives a frame's display position inside the window, its type and the
display positions it predicts from; entries are listed in decoding order.
Reference rules for the presets: P frames reference the previous I/P
frame only; B frames reference the immediately previous and following
reference frames (I, P or, in the hierarchical case, B_ref).
"""

from __future__ import annotations

from dataclasses import dataclass

from xlrkit.types import FrameMeta, FrameType

PRESET_NAMES = ("IPP", "IBBP", "HIER_B2B1B2P")
_ALIASES = {
    "ipp": "IPP",
    "ibbp": "IBBP",
    "hier": "HIER_B2B1B2P",
    "hier_b2b1b2p": "HIER_B2B1B2P",
    "ib2b1b2p": "HIER_B2B1B2P",
}
_ANCHOR_STEP = {"IPP": 1, "IBBP": 3, "HIER_B2B1B2P": 4}


@dataclass(frozen=True)
class PatternEntry:
    display_pos: int
    frame_type: FrameType
    refs: tuple[int, ...] = ()  # display positions inside the window


def _preset_pattern(name: str, length: int) -> tuple[PatternEntry, ...]:
    step = _ANCHOR_STEP[name]
    anchors = list(range(0, length, step))
    if anchors[-1] != length - 1:
        # the tail of a window always closes on a P frame
        anchors.append(length - 1)

    entries = [PatternEntry(0, FrameType.IDR)]
    for a, b in zip(anchors, anchors[1:]):
        entries.append(PatternEntry(b, FrameType.P, (a,)))
        gap = b - a
        if gap < 2:
            continue
        if name == "HIER_B2B1B2P" and gap >= 3:
            mid = a + gap // 2
            entries.append(PatternEntry(mid, FrameType.B_REF, (a, b)))
            for d in range(a + 1, b):
                if d == mid:
                    continue
                refs = (a, mid) if d < mid else (mid, b)
                entries.append(PatternEntry(d, FrameType.B_NONREF, refs))
        else:
            for d in range(a + 1, b):
                entries.append(PatternEntry(d, FrameType.B_NONREF, (a, b)))
    return tuple(entries)


@dataclass(frozen=True)
class PredictionStructure:
    name: str
    period: int
    pattern: tuple[PatternEntry, ...]

    def __post_init__(self):
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")
        if len(self.pattern) != self.period:
            raise ValueError(
                f"pattern has {len(self.pattern)} entries for period {self.period}")
        if sorted(e.display_pos for e in self.pattern) != list(range(self.period)):
            raise ValueError("pattern display positions must cover 0..period-1 once")
        first = self.pattern[0]
        if first.display_pos != 0 or first.frame_type is not FrameType.IDR:
            raise ValueError("pattern must open with an IDR frame at display position 0")
        decoded: set[int] = set()
        referenced: set[int] = set()
        for e in self.pattern:
            for r in e.refs:
                if r not in decoded:
                    raise ValueError(
                        f"display position {e.display_pos} references {r} before it is decoded")
                referenced.add(r)
            decoded.add(e.display_pos)
        for e in self.pattern:
            if e.frame_type is FrameType.B_NONREF and e.display_pos in referenced:
                raise ValueError(f"B_nonref at display position {e.display_pos} is referenced")

    @classmethod
    def preset(cls, name: str, period: int = 25) -> "PredictionStructure":
        key = _ALIASES.get(name.lower(), name.upper())
        if key not in _ANCHOR_STEP:
            raise ValueError(f"unknown structure {name!r}; expected one of {PRESET_NAMES}")
        return cls(key, period, _preset_pattern(key, period))

    @classmethod
    def custom(cls, entries: list[PatternEntry]) -> "PredictionStructure":
        return cls("CUSTOM", len(entries), tuple(entries))

    def pattern_for(self, length: int) -> tuple[PatternEntry, ...]:
        """Pattern of a window holding only ``length`` frames."""
        if length == self.period:
            return self.pattern
        if not 1 <= length <= self.period:
            raise ValueError(f"window length {length} outside 1..{self.period}")
        if self.name in _ANCHOR_STEP:
            return _preset_pattern(self.name, length)
        kept = tuple(e for e in self.pattern if e.display_pos < length)
        for e in kept:
            if any(r >= length for r in e.refs):
                raise ValueError(
                    f"custom structure cannot be truncated to {length} frames: "
                    f"position {e.display_pos} references {max(e.refs)}")
        return kept

    def layout(self, n_frames: int) -> list[FrameMeta]:
        """Frame metadata for ``n_frames`` frames, one IDR window per period."""
        frames: list[FrameMeta] = []
        start = 0
        while start < n_frames:
            length = min(self.period, n_frames - start)
            pattern = self.pattern_for(length)
            decode_of = {e.display_pos: start + k for k, e in enumerate(pattern)}
            for k, e in enumerate(pattern):
                frames.append(FrameMeta(
                    decode_index=start + k,
                    display_index=start + e.display_pos,
                    frame_type=e.frame_type,
                    direct_refs=tuple(decode_of[r] for r in e.refs),
                ))
            start += length
        return frames
