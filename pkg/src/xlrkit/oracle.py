"""Brute-force pixel mask propagation used as ground truth for the estimator.

Every frame gets a boolean W x H mask. A lost packet marks the raster-order
suffix of its frame that the packet and all later packets of the frame
cover (decoding stops at the loss and resumes at the next frame). A frame
inherits the co-located impaired pixels of each of its direct references.
Nothing here reuses the estimator's code paths: losses are marked one by
one and overlaps are resolved by set union on real masks.

The drift variant perturbs the inherited part of a mask at every
propagation hop, to stand in for intra refresh (healing) and motion
(growth) that the estimator does not model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from xlrkit.types import FrameType, Provenance, StreamTrace, XlrSeries, require_valid

RNG_ALGORITHM = "numpy.random.Philox (Philox4x64-10)"


@dataclass(frozen=True)
class DriftConfig:
    heal_rate: float = 0.02
    grow_rate: float = 0.02
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("heal_rate", "grow_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")

    @property
    def is_null(self) -> bool:
        return self.heal_rate == 0 and self.grow_rate == 0


@dataclass
class LossMask:
    width: int
    height: int
    grids: dict[int, np.ndarray] = field(default_factory=dict)

    def xlr(self, decode_index: int) -> float:
        return int(self.grids[decode_index].sum()) / (self.width * self.height)


def suffix_pixels(suffix_octets: int, total_octets: int, n_pixels: int) -> int:
    """round-half-up(suffix/total * n_pixels), in exact integer arithmetic."""
    return (2 * suffix_octets * n_pixels + total_octets) // (2 * total_octets)


def _own_loss_masks(trace: StreamTrace, n_pixels: int) -> dict[int, np.ndarray]:
    """Flat masks of frames hit directly by losses (every lost packet marked)."""
    sizes: dict[int, list[int]] = {f.decode_index: [] for f in trace.frames}
    lost_at: dict[int, list[int]] = {}
    for p in trace.packets:
        sizes[p.frame_decode_index].append(p.size_octets)
        if p.lost:
            lost_at.setdefault(p.frame_decode_index, []).append(len(sizes[p.frame_decode_index]) - 1)
    masks = {}
    for fidx, s in sizes.items():
        if not s:
            masks[fidx] = np.ones(n_pixels, dtype=bool)
    for fidx, positions in lost_at.items():
        s = sizes[fidx]
        total = sum(s)
        m = np.zeros(n_pixels, dtype=bool)
        for pos in positions:
            k = suffix_pixels(sum(s[pos:]), total, n_pixels)
            if k:
                m[n_pixels - k:] = True
        masks[fidx] = m
    return masks


def _drift(mask: np.ndarray, drift: DriftConfig, rng: np.random.Generator) -> np.ndarray:
    """One propagation hop of healing and growth applied to a 2-D mask."""
    if not mask.any():
        return mask
    out = mask.copy()
    if drift.heal_rate > 0:
        rows, cols = np.nonzero(mask)
        heal = rng.random(rows.size) < drift.heal_rate
        out[rows[heal], cols[heal]] = False
    if drift.grow_rate > 0:
        near = np.zeros_like(mask)
        near[1:, :] |= mask[:-1, :]
        near[:-1, :] |= mask[1:, :]
        near[:, 1:] |= mask[:, :-1]
        near[:, :-1] |= mask[:, 1:]
        near &= ~mask
        rows, cols = np.nonzero(near)
        grow = rng.random(rows.size) < drift.grow_rate
        out[rows[grow], cols[grow]] = True
    return out


def iter_masks(trace: StreamTrace, width: int, height: int,
               drift: DriftConfig | None = None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(decode_index, mask)`` in decoding order; masks are (H, W)."""
    require_valid(trace)
    if width < 1 or height < 1:
        raise ValueError(f"bad frame dimensions {width}x{height}")
    n_pixels = width * height
    own = _own_loss_masks(trace, n_pixels)
    rng = None
    if drift is not None and not drift.is_null:
        rng = np.random.Generator(np.random.Philox(drift.rng_seed))
    live: dict[int, np.ndarray] = {}
    empty = np.zeros((height, width), dtype=bool)
    for f in trace.frames:
        if f.frame_type is FrameType.IDR:
            live.clear()  # closed window: nothing before an IDR is referenced again
        inherited = empty
        for r in f.direct_refs:
            inherited = inherited | live[r]
        if rng is not None and f.direct_refs:
            inherited = _drift(inherited, drift, rng)
        if f.decode_index in own:
            mask = inherited | own[f.decode_index].reshape(height, width)
        else:
            mask = inherited
        live[f.decode_index] = mask
        yield f.decode_index, mask


def _series(trace: StreamTrace, width: int, height: int,
            drift: DriftConfig | None) -> XlrSeries:
    n_pixels = width * height
    indices, values = [], []
    for idx, mask in iter_masks(trace, width, height, drift):
        indices.append(idx)
        values.append(int(np.count_nonzero(mask)) / n_pixels)
    return XlrSeries.from_values(indices, values, Provenance.ORACLE)


def simulate_exact(trace: StreamTrace, width: int, height: int) -> XlrSeries:
    return _series(trace, width, height, None)


def simulate_drift(trace: StreamTrace, width: int, height: int,
                   drift: DriftConfig) -> XlrSeries:
    return _series(trace, width, height, drift)


def loss_masks(trace: StreamTrace, width: int, height: int,
               drift: DriftConfig | None = None) -> LossMask:
    """All masks of a trace kept in memory; meant for small traces and dumps."""
    out = LossMask(width, height)
    for idx, mask in iter_masks(trace, width, height, drift):
        out.grids[idx] = mask
    return out


def write_pgm(mask: np.ndarray, path: str | Path) -> None:
    """Binary PGM (P5), impaired pixels white."""
    h, w = mask.shape
    body = np.where(mask, 255, 0).astype(np.uint8).tobytes()
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + body)


def dump_masks(trace: StreamTrace, width: int, height: int, directory: str | Path,
               drift: DriftConfig | None = None) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for idx, mask in iter_masks(trace, width, height, drift):
        p = directory / f"mask_{idx:06d}.pgm"
        write_pgm(mask, p)
        paths.append(p)
    return paths
