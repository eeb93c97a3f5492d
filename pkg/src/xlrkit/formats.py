"""Text formats: the line-delimited trace file and the XLR series CSV.

Trace grammar (UTF-8, one record per line, ``#`` starts a comment line)::

    frame  <decode_index> <display_index> <type> <ref,ref,...|->
    packet <global_index> <frame_decode_index> <index_in_frame> <size_octets> <0|1>

The canonical form has no comments, all frame lines in decoding order
followed by all packet lines in global order, single spaces and a
trailing newline. ``serialize_trace(parse_trace(text)) == text`` for
canonical text.
"""

from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Iterable, TextIO

from xlrkit.types import FrameMeta, FrameType, PacketRecord, Provenance, StreamTrace, XlrSeries


class FormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


def _int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(lineno, f"{what} is not an integer: {tok!r}") from None


def parse_trace(text: str | Iterable[str]) -> StreamTrace:
    lines = text.splitlines() if isinstance(text, str) else text
    frames: list[FrameMeta] = []
    packets: list[PacketRecord] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        kind = tok[0]
        if kind == "frame":
            if len(tok) != 5:
                raise FormatError(lineno, f"frame record needs 4 fields, got {len(tok) - 1}")
            try:
                ftype = FrameType(tok[3])
            except ValueError:
                raise FormatError(lineno, f"unknown frame type {tok[3]!r}") from None
            refs = () if tok[4] == "-" else tuple(
                _int(r, lineno, "reference") for r in tok[4].split(","))
            frames.append(FrameMeta(_int(tok[1], lineno, "decode_index"),
                                    _int(tok[2], lineno, "display_index"), ftype, refs))
        elif kind == "packet":
            if len(tok) != 6:
                raise FormatError(lineno, f"packet record needs 5 fields, got {len(tok) - 1}")
            if tok[5] not in ("0", "1"):
                raise FormatError(lineno, f"lost flag must be 0 or 1, got {tok[5]!r}")
            packets.append(PacketRecord(
                _int(tok[1], lineno, "global_index"),
                _int(tok[2], lineno, "frame_decode_index"),
                _int(tok[3], lineno, "index_in_frame"),
                _int(tok[4], lineno, "size_octets"),
                tok[5] == "1",
            ))
        else:
            raise FormatError(lineno, f"unknown record kind {kind!r}")
    return StreamTrace(tuple(frames), tuple(packets))


def serialize_trace(trace: StreamTrace) -> str:
    out = io.StringIO()
    for f in trace.frames:
        refs = ",".join(str(r) for r in f.direct_refs) or "-"
        out.write(f"frame {f.decode_index} {f.display_index} {f.frame_type.value} {refs}\n")
    for p in trace.packets:
        out.write(f"packet {p.global_index} {p.frame_decode_index} {p.index_in_frame} "
                  f"{p.size_octets} {int(p.lost)}\n")
    return out.getvalue()


def read_trace(path: str | Path) -> StreamTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def write_trace(trace: StreamTrace, path: str | Path) -> None:
    Path(path).write_text(serialize_trace(trace), encoding="utf-8")


def format_number(x: float) -> str:
    """Shortest round-tripping text for a float; infinities become ``inf``."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return repr(float(x))


def write_series(series: XlrSeries, fh: TextIO) -> None:
    key = "display_index" if series.order == "display" else "decode_index"
    fh.write(f"# provenance={series.provenance.value} order={series.order}\n")
    fh.write(f"{key},xlr\n")
    for idx, v in series.per_frame:
        fh.write(f"{idx},{format_number(v)}\n")
    fh.write("mxlr,msxlr\n")
    fh.write(f"{format_number(series.mxlr)},{format_number(series.msxlr)}\n")


def series_to_csv(series: XlrSeries) -> str:
    buf = io.StringIO()
    write_series(series, buf)
    return buf.getvalue()


def parse_series(text: str) -> XlrSeries:
    provenance = Provenance.FR
    order = "decode"
    rows: list[tuple[int, float]] = []
    pooled: tuple[float, float] | None = None
    state = "header"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for item in line[1:].split():
                k, _, v = item.partition("=")
                if k == "provenance":
                    provenance = Provenance(v)
                elif k == "order":
                    order = v
            continue
        if state == "header":
            if line not in ("decode_index,xlr", "display_index,xlr"):
                raise FormatError(lineno, f"unexpected series header {line!r}")
            order = "display" if line.startswith("display") else "decode"
            state = "rows"
        elif state == "rows":
            if line == "mxlr,msxlr":
                state = "trailer"
                continue
            idx, _, val = line.partition(",")
            try:
                rows.append((int(idx), float(val)))
            except ValueError:
                raise FormatError(lineno, f"bad series row {line!r}") from None
        elif state == "trailer":
            a, _, b = line.partition(",")
            pooled = (float(a), float(b))
            state = "done"
        else:
            raise FormatError(lineno, "content after series trailer")
    if not rows:
        raise FormatError(0, "series has no rows")
    series = XlrSeries.from_values([r[0] for r in rows], [r[1] for r in rows],
                                   provenance, order)
    if pooled is not None:
        for name, stored, fresh in (("mxlr", pooled[0], series.mxlr),
                                    ("msxlr", pooled[1], series.msxlr)):
            if not math.isclose(stored, fresh, rel_tol=1e-9, abs_tol=1e-12):
                raise FormatError(0, f"trailer {name}={stored} disagrees with rows ({fresh})")
    return series


def read_series(path: str | Path) -> XlrSeries:
    return parse_series(Path(path).read_text(encoding="utf-8"))
