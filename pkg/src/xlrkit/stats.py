"""Cubic mapping fit and the correlation / error statistics used for evaluation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from xlrkit.types import XlrSeries

REPORT_COLUMNS = ("sequence", "structure", "plr", "real_mxlr", "est_mxlr",
                  "real_msxlr", "est_msxlr", "mae", "pcc", "srocc")


@dataclass(frozen=True)
class CubicFit:
    coefficients: tuple[float, float, float, float]  # c0 + c1 x + c2 x^2 + c3 x^3
    residual_rmse: float
    converged: bool
    iterations: int

    def predict(self, x) -> np.ndarray:
        c0, c1, c2, c3 = self.coefficients
        x = np.asarray(x, dtype=float)
        return c0 + x * (c1 + x * (c2 + x * c3))


def _pair(a: Sequence[float], b: Sequence[float], min_len: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < min_len:
        raise ValueError(f"need at least {min_len} pairs, got {x.size}")
    return x, y


def fit_cubic(objective: Sequence[float], subjective: Sequence[float],
              max_iter: int = 200) -> CubicFit:
    """Least-squares cubic mapping from objective scores to subjective scores.

    The normal-equations solution (on centred, scaled abscissae) seeds an
    SLSQP refinement of the same sum of squares; the refinement is kept only
    if it does not increase the residual.
    """
    x, y = _pair(objective, subjective, 4)
    if np.ptp(x) == 0:
        raise ValueError("all objective values are identical; the mapping is undetermined")

    centre = float(np.mean(x))
    scale = float(np.max(np.abs(x - centre)))
    t = (x - centre) / scale
    design = np.vander(t, 4, increasing=True)
    seed, *_ = np.linalg.lstsq(design, y, rcond=None)

    def sse(c):
        r = design @ c - y
        return float(r @ r)

    def grad(c):
        return 2.0 * design.T @ (design @ c - y)

    res = optimize.minimize(sse, seed, jac=grad, method="SLSQP",
                            options={"maxiter": max_iter, "ftol": 1e-15})
    best = res.x if sse(res.x) < sse(seed) else seed
    converged = res.status != 9  # SLSQP: iteration limit reached

    coeffs = _unscale(best, centre, scale)
    resid = np.polyval(coeffs[::-1], x) - y
    return CubicFit(
        coefficients=tuple(float(c) for c in coeffs),
        residual_rmse=float(np.sqrt(np.mean(resid * resid))),
        converged=converged,
        iterations=int(res.nit),
    )


def _unscale(c: np.ndarray, centre: float, scale: float) -> np.ndarray:
    # p(t) with t = (x - centre)/scale, expanded back into powers of x
    poly_t = np.polynomial.Polynomial(c)
    shift = np.polynomial.Polynomial([-centre / scale, 1.0 / scale])
    out = poly_t(shift).coef
    return np.pad(out, (0, 4 - out.size))


def pcc(a: Sequence[float], b: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    x, y = _pair(a, b, 2)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("correlation undefined: an input has zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def srocc(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation, ties resolved with average ranks."""
    x, y = _pair(a, b, 2)
    return pcc(stats.rankdata(x, method="average"), stats.rankdata(y, method="average"))


def rmse(a: Sequence[float], b: Sequence[float]) -> float:
    x, y = _pair(a, b, 1)
    d = x - y
    return math.sqrt(float(d @ d) / d.size)


def mae(a: Sequence[float], b: Sequence[float]) -> float:
    x, y = _pair(a, b, 1)
    return float(np.mean(np.abs(x - y)))


@dataclass(frozen=True)
class PairReport:
    mae: float
    pcc: float
    srocc: float
    real_mxlr: float
    est_mxlr: float
    real_msxlr: float
    est_msxlr: float
    n_frames: int

    def as_dict(self) -> dict:
        return asdict(self)


def _or_nan(fn, a, b) -> float:
    try:
        return fn(a, b)
    except ValueError:
        return math.nan


def evaluate_pair(real: XlrSeries, estimated: XlrSeries) -> PairReport:
    """Frame-to-frame comparison of two series over the same frames.

    Correlations are NaN when either series is constant.
    """
    if len(real) != len(estimated):
        raise ValueError(f"series lengths differ: {len(real)} vs {len(estimated)}")
    if real.indices != estimated.indices:
        raise ValueError("series cover different frames or differ in ordering")
    r, e = real.values, estimated.values
    return PairReport(
        mae=mae(r, e),
        pcc=_or_nan(pcc, r, e),
        srocc=_or_nan(srocc, r, e),
        real_mxlr=real.mxlr,
        est_mxlr=estimated.mxlr,
        real_msxlr=real.msxlr,
        est_msxlr=estimated.msxlr,
        n_frames=len(r),
    )


def report_row(report: PairReport, sequence: str = "", structure: str = "",
               plr: float | str = "") -> dict:
    """A row in results-table column order."""
    return {
        "sequence": sequence,
        "structure": structure,
        "plr": plr,
        "real_mxlr": report.real_mxlr,
        "est_mxlr": report.est_mxlr,
        "real_msxlr": report.real_msxlr,
        "est_msxlr": report.est_msxlr,
        "mae": report.mae,
        "pcc": report.pcc,
        "srocc": report.srocc,
    }


def format_report(report: PairReport) -> str:
    lines = [f"{k:>10}: {v}" for k, v in report.as_dict().items()]
    return "\n".join(lines) + "\n"
