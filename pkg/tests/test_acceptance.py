"""Acceptance gate. Every criterion prints one PASS/FAIL line.

Run alone with ``pytest -m acceptance -s``; the lines are also collected
into the terminal summary of any run.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from xlrkit.channel import GilbertParams, apply_channel, burst_lengths, loss_pattern, preset_grid
from xlrkit.fr import CompareMode, FrComparisonConfig, pool_msxlr, pool_mxlr, xlr_frame
from xlrkit.ingest import PacketizationModel, build_trace
from xlrkit.nr import estimate_xlr
from xlrkit.oracle import DriftConfig, simulate_drift, simulate_exact
from xlrkit.stats import evaluate_pair, fit_cubic, mae, pcc, rmse, srocc
from xlrkit.structures import PredictionStructure
from xlrkit.synth import synthetic_annexb, synthetic_trace
from xlrkit.types import FramePlane, FrameType

pytestmark = pytest.mark.acceptance

STRUCTURES = ("ipp", "ibbp", "hier")


def verdict(number, ok, text):
    line = f"[{number}] {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_1_oracle_equivalence():
    w, h = 320, 180
    bound = 1 / (w * h)
    rng = np.random.default_rng(1)
    worst_frame, worst_mae, n_traces, n_frames = 0.0, 0.0, 0, 0
    t0 = time.perf_counter()
    for k in range(200):
        name = STRUCTURES[k % 3]
        structure = PredictionStructure.preset(name, 25)
        trace = synthetic_trace(structure, int(rng.integers(100, 1001)), rng)
        plr = float(rng.uniform(0.001, 0.01))
        lossy = apply_channel(trace, GilbertParams(plr, 2.0, k))
        est = estimate_xlr(lossy)
        real = simulate_exact(lossy, w, h)
        worst_frame = max(worst_frame, float(np.max(np.abs(np.subtract(est.values, real.values)))))
        worst_mae = max(worst_mae, evaluate_pair(real, est).mae)
        n_traces += 1
        n_frames += len(est)
    elapsed = time.perf_counter() - t0
    ok = worst_frame <= bound and worst_mae <= 1.8e-5 and elapsed < 30.0
    verdict(1, ok, f"oracle equivalence: {n_traces} traces, {n_frames} frames, max |est-oracle| "
                   f"{worst_frame:.3g} (<= {bound:.3g}), max MAE {worst_mae:.3g} (<= 1.8e-05), "
                   f"{elapsed:.1f} s (< 30 s)")


def _drift_run(run):
    """One sweep: 3 structures x 3 loss rates, 250 frames, 64x64, drift 0.02/0.02."""
    frame_pccs = []
    real_m, est_m, real_s, est_s = [], [], [], []
    for si, name in enumerate(STRUCTURES):
        structure = PredictionStructure.preset(name, 25)
        base = synthetic_trace(structure, 250, np.random.default_rng([run, si]))
        for pi, plr in enumerate((0.001, 0.005, 0.01)):
            seed = run * 100 + si * 10 + pi
            lossy = apply_channel(base, GilbertParams(plr, 2.0, seed))
            est = estimate_xlr(lossy)
            real = simulate_drift(lossy, 64, 64, DriftConfig(0.02, 0.02, seed))
            r = evaluate_pair(real, est)
            if not math.isnan(r.pcc):
                frame_pccs.append(r.pcc)
            real_m.append(r.real_mxlr)
            est_m.append(r.est_mxlr)
            real_s.append(r.real_msxlr)
            est_s.append(r.est_msxlr)
    return frame_pccs, pcc(real_m, est_m), pcc(real_s, est_s)


def test_2_drift_robustness():
    frame_pccs, wins = [], 0
    runs = 100
    for run in range(runs):
        cell_pccs, p_mxlr, p_msxlr = _drift_run(run)
        frame_pccs += cell_pccs
        wins += p_msxlr >= p_mxlr
    median = float(np.median(frame_pccs))
    share = wins / runs
    ok = median >= 0.90 and share >= 0.60
    verdict(2, ok, f"drift robustness: median frame PCC {median:.4f} over {len(frame_pccs)} cells "
                   f"(>= 0.90), pooled MSXLR PCC >= MXLR PCC in {share:.0%} of {runs} runs (>= 60%)")


def test_3_gilbert_calibration():
    n = 1_000_000
    worst_plr, worst_burst, failures = 0.0, 0.0, []
    for seed in range(10):
        for params in preset_grid(seed):
            lost = loss_pattern(n, params)
            plr_err = abs(lost.mean() / params.plr - 1)
            bursts = burst_lengths(lost)
            burst_err = abs(bursts.mean() / 2.0 - 1)
            worst_plr = max(worst_plr, plr_err)
            worst_burst = max(worst_burst, burst_err)
            if plr_err > 0.10 or burst_err > 0.10:
                failures.append((params.plr, seed, round(plr_err, 4), round(burst_err, 4)))
    verdict(3, not failures,
            f"Gilbert calibration: 3 presets x 10 seeds x 1e6 packets, worst PLR error "
            f"{worst_plr:.1%}, worst burst-length error {worst_burst:.1%} (each <= 10%)"
            + (f", failing (plr, seed, plr_err, burst_err): {failures}" if failures else ""))


def _naive(o, d, q):
    n = 0
    for i in range(o.shape[0]):
        for j in range(o.shape[1]):
            a, b = int(o[i, j]), int(d[i, j])
            n += (a != b) if q is None else (abs(a - b) >= q)
    return n


def test_4_fr_exactness():
    rng = np.random.default_rng(4)
    thr = FrComparisonConfig(CompareMode.THRESHOLD, 16)
    bad = 0
    for _ in range(50):
        h, w = (int(x) for x in rng.integers(1, 65, 2))
        o = rng.integers(0, 256, (h, w), dtype=np.uint8)
        d = o.copy()
        touched = rng.random((h, w)) < rng.random()
        d[touched] = np.clip(o[touched].astype(int) + rng.integers(-40, 41, touched.sum()), 0, 255)
        a, b = FramePlane(w, h, o), FramePlane(w, h, d)
        bad += xlr_frame(a, b) != _naive(o, d, None) / (w * h)
        bad += xlr_frame(a, b, thr) != _naive(o, d, 16) / (w * h)
    verdict(4, bad == 0, f"FR exactness: 50 random pairs, {bad} mismatches against naive "
                         "counts (EXACT and THRESHOLD Q=16, bit-exact)")


def test_5_pooling_identity():
    rng = np.random.default_rng(5)
    worst, dominated = 0.0, True
    for _ in range(1000):
        xs = [float(x) for x in rng.random(int(rng.integers(1, 300))) ** rng.uniform(0.2, 5)]
        m, s = pool_mxlr(xs), pool_msxlr(xs)
        naive_m = sum(xs) / len(xs)
        naive_s = sum(math.sqrt(x) for x in xs) / len(xs)
        worst = max(worst, abs(m - naive_m), abs(s - naive_s))
        dominated &= s >= m
    verdict(5, dominated and worst <= 1e-12,
            f"pooling identity: 1000 series, MSXLR >= MXLR everywhere: {dominated}, "
            f"max deviation from naive {worst:.2g} (<= 1e-12)")


def test_6_stats_oracles():
    checks = {
        "pcc": (pcc([1, 2, 3, 4], [1, 2, 3, 5]), 6.5 / math.sqrt(43.75)),
        "pcc_neg": (pcc([0.3, 1.1, 2.0, 5.0], [6.4, 4.8, 3.0, -3.0]), -1.0),
        "srocc_ties": (srocc([1, 2, 2, 4], [10, 20, 30, 40]), 4.5 / math.sqrt(22.5)),
        "rmse": (rmse([0, 0], [5, 0]), math.sqrt(12.5)),
        "mae": (mae([0.1, 0.5, 0.9], [0.2, 0.5, 0.6]), 0.4 / 3),
    }
    stat_err = max(abs(a - b) for a, b in checks.values())
    rng = np.random.default_rng(6)
    planted = [(1, 2, 0, -1), (0.5, 0, 0, 0), (-3, 4, 0, 0)]
    planted += [tuple(rng.uniform(-5, 5, 4)) for _ in range(20)]
    fit_err = 0.0
    for coeffs in planted:
        x = np.sort(rng.uniform(-2, 3, 40))
        y = np.polynomial.Polynomial(coeffs)(x)
        got = fit_cubic(x, y).coefficients
        fit_err = max(fit_err, max(abs(a - b) for a, b in zip(got, coeffs)))
    verdict(6, stat_err <= 1e-9 and fit_err <= 1e-6,
            f"stats oracles: PCC/SROCC/RMSE/MAE max error {stat_err:.2g} (<= 1e-9), cubic "
            f"recovery of {len(planted)} planted polynomials max error {fit_err:.2g} (<= 1e-6)")


def test_7_ingest_fixture():
    structure = PredictionStructure.preset("ibbp", 12)
    layout = structure.layout(48)
    kinds = {FrameType.IDR: "I", FrameType.P: "P", FrameType.B_NONREF: "B"}
    kinds = [kinds[f.frame_type] for f in layout]
    kinds[4] = kinds[17] = "I"  # intra-coded anchors inside a window
    stream, truth = synthetic_annexb(structure, 48, np.random.default_rng(7), kinds=kinds)
    trace = build_trace(stream, structure, PacketizationModel.parse("mtu:1400"))
    groups = trace.packets_by_frame()
    span_bad = sum(sum(p.size_octets for p in groups[f.decode_index]) != t.span_end - t.span_start
                   for f, t in zip(trace.frames, truth))
    coarse = {FrameType.IDR: "I", FrameType.I: "I", FrameType.P: "P",
              FrameType.B_REF: "B", FrameType.B_NONREF: "B"}
    kind_bad = sum(coarse[f.frame_type] != t.kind for f, t in zip(trace.frames, truth))
    count_ok = len(trace.frames) == len(truth) == 48
    sps = stream.count(b"\x00\x00\x00\x01\x67")
    ok = count_ok and span_bad == 0 and kind_bad == 0 and sps == 4
    verdict(7, ok, f"ingest: 48-frame fixture with {sps} SPS/PPS pairs and I/P/B slices, "
                   f"{span_bad} span mismatches, {kind_bad} slice-type mismatches")


def _small_lossy_trace(rng, k):
    name = STRUCTURES[k % 3]
    structure = PredictionStructure.preset(name, int(rng.integers(4, 26)))
    pack = PacketizationModel.parse("mtu:200")
    trace = synthetic_trace(structure, int(rng.integers(10, 60)), rng, mean_p_bytes=600, pack=pack)
    trace = apply_channel(trace, GilbertParams(float(rng.uniform(0.05, 0.3)), 2.5, k))
    return trace


def test_8_masking_invariant():
    rng = np.random.default_rng(8)
    n_traces = n_aug = violations = 0
    while n_traces < 100:
        trace = _small_lossy_trace(rng, n_traces)
        if len(trace.packets) > 500:
            continue
        n_traces += 1
        base = estimate_xlr(trace).values
        first = {}
        for p in trace.packets:
            if p.lost:
                first.setdefault(p.frame_decode_index, p.index_in_frame)
        flags = [p.lost for p in trace.packets]
        for p in trace.packets:
            f = p.frame_decode_index
            if p.lost or f not in first or p.index_in_frame < first[f]:
                continue
            aug = flags.copy()
            aug[p.global_index] = True
            n_aug += 1
            violations += estimate_xlr(trace.with_losses(aug)).values != base
    verdict(8, violations == 0 and n_aug > 0,
            f"masking invariant: {n_traces} traces, {n_aug} single-packet augmentations, "
            f"{violations} changed estimates")
