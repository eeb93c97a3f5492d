"""Grid experiments: sources x structures x loss rates x seeds.

Config grammar (INI)::

    [sweep]
    structures = ipp, ibbp, hier     ; presets, comma separated
    period = 25
    plr = 0.001, 0.005, 0.01
    burst_len = 2
    seeds = 1                        ; channel realisations per cell
    width = 320
    height = 180
    real = oracle                    ; oracle | drift
    heal_rate = 0.02                 ; drift only
    grow_rate = 0.02                 ; drift only
    pack = mtu:1400

    [source seeking]                 ; one section per source, exactly one of:
    synthetic_frames = 1000          ;   generated trace per structure
    mean_p_bytes = 12000             ;   (optional, synthetic only)
    stream = clips/seeking.264       ;   Annex-B stream ingested per structure
    trace = traces/seeking.trace     ;   ready trace, structures ignored

Relative paths resolve against the config file's directory. Each cell
draws its channel (and drift) seed from a hash of the master seed and the
cell key, so results do not depend on scheduling or ``jobs``.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from xlrkit.channel import GilbertParams, apply_channel
from xlrkit.formats import read_trace
from xlrkit.ingest import PacketizationModel, build_trace
from xlrkit.nr import estimate_xlr
from xlrkit.oracle import DriftConfig, simulate_drift, simulate_exact
from xlrkit.stats import REPORT_COLUMNS, evaluate_pair, pcc, report_row
from xlrkit.structures import PredictionStructure
from xlrkit.synth import synthetic_trace
from xlrkit.types import StreamTrace

SWEEP_COLUMNS = REPORT_COLUMNS + ("seed", "error")
POOLED_LABEL = "PCC of MXLR and MSXLR"


def derive_seed(master_seed: int, key: str) -> int:
    """64-bit seed from the master seed and a cell key."""
    h = hashlib.blake2b(f"{master_seed}|{key}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class Source:
    name: str
    kind: str  # synthetic | stream | trace
    path: Path | None = None
    frames: int = 0
    mean_p_bytes: int = 12000


@dataclass(frozen=True)
class SweepConfig:
    sources: tuple[Source, ...]
    structures: tuple[str, ...] = ("ipp", "ibbp", "hier")
    period: int = 25
    plrs: tuple[float, ...] = (0.001, 0.005, 0.01)
    burst_len: float = 2.0
    seeds: int = 1
    width: int = 320
    height: int = 180
    real: str = "oracle"
    heal_rate: float = 0.02
    grow_rate: float = 0.02
    pack: str = "mtu:1400"


@dataclass(frozen=True)
class Cell:
    source: Source
    structure: str
    plr: float
    seed_index: int
    config: SweepConfig = field(repr=False)
    master_seed: int = 0

    @property
    def key(self) -> str:
        return f"{self.source.name}|{self.structure}|{self.plr!r}|{self.seed_index}"


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def load_config(path: str | Path) -> SweepConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    base = path.parent
    sources = []
    for section in parser.sections():
        if not section.startswith("source"):
            continue
        name = section[len("source"):].strip() or f"source{len(sources)}"
        sec = parser[section]
        given = [k for k in ("synthetic_frames", "stream", "trace") if k in sec]
        if len(given) != 1:
            raise ValueError(f"[{section}] needs exactly one of synthetic_frames, stream, trace")
        if given[0] == "synthetic_frames":
            sources.append(Source(name, "synthetic", frames=sec.getint("synthetic_frames"),
                                  mean_p_bytes=sec.getint("mean_p_bytes", 12000)))
        else:
            sources.append(Source(name, given[0], path=base / sec[given[0]]))
    if not sources:
        raise ValueError(f"{path}: sweep config lists no [source ...] sections")
    sw = parser["sweep"] if parser.has_section("sweep") else parser[parser.default_section]
    get = sw.get
    cfg = SweepConfig(
        sources=tuple(sources),
        structures=tuple(s.strip() for s in get("structures", "ipp, ibbp, hier").split(",")
                         if s.strip()),
        period=int(get("period", "25")),
        plrs=_floats(get("plr", "0.001, 0.005, 0.01")),
        burst_len=float(get("burst_len", "2")),
        seeds=int(get("seeds", "1")),
        width=int(get("width", "320")),
        height=int(get("height", "180")),
        real=get("real", "oracle").strip().lower(),
        heal_rate=float(get("heal_rate", "0.02")),
        grow_rate=float(get("grow_rate", "0.02")),
        pack=get("pack", "mtu:1400"),
    )
    if cfg.real not in ("oracle", "drift"):
        raise ValueError(f"real must be oracle or drift, got {cfg.real!r}")
    if not cfg.plrs or not cfg.structures or cfg.seeds < 1:
        raise ValueError("sweep grid is empty")
    return cfg


def cells(config: SweepConfig, master_seed: int = 0) -> list[Cell]:
    out = []
    for src in config.sources:
        structures = ("trace",) if src.kind == "trace" else config.structures
        for st in structures:
            for plr in config.plrs:
                for k in range(config.seeds):
                    out.append(Cell(src, st, plr, k, config, master_seed))
    return out


def _source_trace(cell: Cell) -> StreamTrace:
    src, cfg = cell.source, cell.config
    pack = PacketizationModel.parse(cfg.pack)
    if src.kind == "trace":
        return read_trace(src.path)
    structure = PredictionStructure.preset(cell.structure, cfg.period)
    if src.kind == "stream":
        return build_trace(Path(src.path).read_bytes(), structure, pack)
    rng = np.random.default_rng(derive_seed(cell.master_seed, f"{src.name}|{cell.structure}"))
    return synthetic_trace(structure, src.frames, rng, src.mean_p_bytes, pack)


def run_cell(cell: Cell) -> dict:
    cfg = cell.config
    seed = derive_seed(cell.master_seed, cell.key)
    row = {c: "" for c in SWEEP_COLUMNS}
    row.update(sequence=cell.source.name, structure=cell.structure, plr=cell.plr, seed=seed)
    try:
        trace = _source_trace(cell)
        lossy = apply_channel(trace, GilbertParams(cell.plr, cfg.burst_len, seed))
        est = estimate_xlr(lossy)
        if cfg.real == "drift":
            drift = DriftConfig(cfg.heal_rate, cfg.grow_rate, derive_seed(seed, "drift"))
            real = simulate_drift(lossy, cfg.width, cfg.height, drift)
        else:
            real = simulate_exact(lossy, cfg.width, cfg.height)
        row.update(report_row(evaluate_pair(real, est), cell.source.name, cell.structure, cell.plr))
    except (ValueError, OSError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def pooled_pcc(rows: list[dict]) -> tuple[float, float]:
    """PCC of real vs estimated pooled scores across successful cells."""
    ok = [r for r in rows if not r["error"]]

    def corr(a, b):
        try:
            return pcc([r[a] for r in ok], [r[b] for r in ok])
        except ValueError:
            return math.nan

    return corr("real_mxlr", "est_mxlr"), corr("real_msxlr", "est_msxlr")


def run_sweep(config: SweepConfig, master_seed: int = 0, jobs: int = 1) -> list[dict]:
    todo = cells(config, master_seed)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, todo))
    else:
        rows = [run_cell(c) for c in todo]
    return rows


def summary_row(rows: list[dict]) -> dict:
    p_mxlr, p_msxlr = pooled_pcc(rows)
    row = {c: "" for c in SWEEP_COLUMNS}
    row.update(sequence=POOLED_LABEL, est_mxlr=p_mxlr, est_msxlr=p_msxlr)
    return row
