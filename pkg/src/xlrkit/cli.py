"""Command line entry point: ``xlrkit <subcommand> ...``.

Exit status: 0 success, 2 usage error, 3 invalid data (validation,
dimension mismatch, malformed input), 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path
from typing import Callable

from xlrkit import __version__
from xlrkit.channel import RNG_ALGORITHM, GilbertParams, apply_channel
from xlrkit.formats import (
    format_number,
    parse_trace,
    read_series,
    serialize_trace,
    series_to_csv,
)
from xlrkit.fr import CompareMode, FrComparisonConfig, psnr_frame, read_raw_frames, xlr_sequence
from xlrkit.ingest import PacketizationModel, build_trace
from xlrkit.nr import estimate_xlr
from xlrkit.oracle import DriftConfig, dump_masks, simulate_drift, simulate_exact
from xlrkit.stats import REPORT_COLUMNS, evaluate_pair, format_report, report_row
from xlrkit.structures import PredictionStructure
from xlrkit.sweep import SWEEP_COLUMNS, load_config, run_sweep, summary_row
from xlrkit.types import TraceError, validate_trace

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4

log = logging.getLogger("xlrkit")


def _digest(path: str) -> str:
    if path == "-":
        return "stdin"
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _emit(args, text: str, inputs: list[str], seeds: dict | None = None) -> None:
    """Write the result and, for file output, its manifest alongside."""
    if args.output in (None, "-"):
        sys.stdout.write(text)
        return
    out = Path(args.output)
    out.write_text(text, encoding="utf-8")
    params = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "tool": "xlrkit",
        "version": __version__,
        "subcommand": args.command,
        "parameters": params,
        "seeds": seeds or {},
        "rng_algorithm": RNG_ALGORITHM,
        "inputs": {p: _digest(p) for p in inputs},
        "output_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
    }
    Path(str(out) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def cmd_fr(args) -> int:
    config = FrComparisonConfig(CompareMode(args.mode), args.q)
    original = read_raw_frames(args.original, args.width, args.height)
    distorted = read_raw_frames(args.distorted, args.width, args.height)
    if len(original) != len(distorted):
        raise ValueError(f"frame counts differ: original {len(original)}, "
                         f"distorted {len(distorted)}")
    series = xlr_sequence(original, distorted, config)
    if args.psnr_out:
        lines = ["decode_index,psnr_db"]
        lines += [f"{k},{format_number(psnr_frame(o, d))}"
                  for k, (o, d) in enumerate(zip(original, distorted))]
        Path(args.psnr_out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    _emit(args, series_to_csv(series), [args.original, args.distorted])
    return EXIT_OK


def cmd_ingest(args) -> int:
    structure = PredictionStructure.preset(args.structure, args.period)
    pack = PacketizationModel.parse(args.pack)
    trace = build_trace(_read_bytes(args.stream), structure, pack)
    for w in trace.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(args, serialize_trace(trace), [args.stream])
    return EXIT_OK


def _load_trace(path: str):
    trace = parse_trace(_read_text(path))
    violations = validate_trace(trace)
    if violations:
        raise TraceError(violations)
    return trace


def cmd_channel(args) -> int:
    trace = _load_trace(args.trace)
    params = GilbertParams(args.plr, args.burst_len, args.seed)
    out = apply_channel(trace, params, compose=args.compose)
    log.info("channel marked %d of %d packets lost", out.lost_count, len(out.packets))
    _emit(args, serialize_trace(out), [args.trace], {"channel": args.seed})
    return EXIT_OK


def cmd_nr(args) -> int:
    trace = _load_trace(args.trace)
    series = estimate_xlr(trace)
    if args.display_order:
        series = series.reordered(trace)
    _emit(args, series_to_csv(series), [args.trace])
    return EXIT_OK


def cmd_oracle(args) -> int:
    trace = _load_trace(args.trace)
    drift = None
    seeds = {}
    if args.heal_rate is not None or args.grow_rate is not None:
        drift = DriftConfig(args.heal_rate or 0.0, args.grow_rate or 0.0, args.seed)
        seeds["drift"] = args.seed
        series = simulate_drift(trace, args.width, args.height, drift)
    else:
        series = simulate_exact(trace, args.width, args.height)
    if args.dump_masks:
        dump_masks(trace, args.width, args.height, args.dump_masks, drift)
    if args.display_order:
        series = series.reordered(trace)
    _emit(args, series_to_csv(series), [args.trace], seeds)
    return EXIT_OK


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: format_number(v) if isinstance(v, float) else v
                         for k, v in row.items()})
    return buf.getvalue()


def cmd_eval(args) -> int:
    real = read_series(args.real)
    est = read_series(args.estimated)
    report = evaluate_pair(real, est)
    sys.stderr.write(format_report(report))
    row = report_row(report, args.sequence, args.structure, args.plr)
    _emit(args, _csv_text(REPORT_COLUMNS, [row]), [args.real, args.estimated])
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    rows = run_sweep(config, args.seed, args.jobs)
    for r in rows:
        if r["error"]:
            print(f"cell {r['sequence']}/{r['structure']}/{r['plr']} failed: {r['error']}",
                  file=sys.stderr)
    rows.append(summary_row(rows))
    _emit(args, _csv_text(SWEEP_COLUMNS, rows), [args.config], {"master": args.seed})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master RNG seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers (sweep)")
    common.add_argument("--output", "-o", default=None,
                        help="output file (default stdout); a .manifest.json is written next to it")

    parser = argparse.ArgumentParser(
        prog="xlrkit",
        description="Pixel loss rate (XLR) from decoded frames or from packet traces.")
    parser.add_argument("--version", action="version", version=f"xlrkit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("fr", cmd_fr, "full-reference XLR of two raw luma files")
    p.add_argument("original")
    p.add_argument("distorted")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--mode", choices=[m.value for m in CompareMode], default="exact")
    p.add_argument("-q", "--threshold", dest="q", type=int, default=16)
    p.add_argument("--psnr-out", help="also write per-frame PSNR to this CSV")

    p = add("ingest", cmd_ingest, "trace from an Annex-B H.264 stream ('-' for stdin)")
    p.add_argument("stream")
    p.add_argument("--structure", choices=["ipp", "ibbp", "hier"], default="ipp")
    p.add_argument("--period", type=int, default=25)
    p.add_argument("--pack", default="mtu:1400", help="mtu:N or ts188")

    p = add("channel", cmd_channel, "mark packets lost with a Gilbert channel")
    p.add_argument("trace")
    p.add_argument("--plr", type=float, required=True)
    p.add_argument("--burst-len", type=float, default=2.0)
    p.add_argument("--compose", action="store_true", help="keep losses already in the trace")

    p = add("nr", cmd_nr, "no-reference XLR estimate of a trace")
    p.add_argument("trace")
    p.add_argument("--display-order", action="store_true")

    p = add("oracle", cmd_oracle, "pixel-mask propagation ground truth for a trace")
    p.add_argument("trace")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--heal-rate", type=float)
    p.add_argument("--grow-rate", type=float)
    p.add_argument("--dump-masks", metavar="DIR", help="write one PGM mask per frame")
    p.add_argument("--display-order", action="store_true")

    p = add("eval", cmd_eval, "compare a real and an estimated series")
    p.add_argument("real")
    p.add_argument("estimated")
    p.add_argument("--sequence", default="")
    p.add_argument("--structure", default="")
    p.add_argument("--plr", default="")

    p = add("sweep", cmd_sweep, "run a sources x structures x loss-rate grid")
    p.add_argument("config")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"xlrkit {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"xlrkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
