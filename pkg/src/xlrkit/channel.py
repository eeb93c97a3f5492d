"""Simplified Gilbert channel: Good always delivers, Bad always drops."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xlrkit.types import StreamTrace

RNG_ALGORITHM = "numpy.random.Philox (Philox4x64-10)"

# packet loss rates of the reference experiment grid, mean burst of 2 packets
PLR_PRESETS = (0.001, 0.005, 0.01)
PRESET_BURST_LEN = 2.0


@dataclass(frozen=True)
class GilbertParams:
    plr: float
    mean_burst_len: float = PRESET_BURST_LEN
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.plr < 1.0:
            raise ValueError(f"plr must be in [0, 1), got {self.plr}")
        if self.mean_burst_len < 1.0:
            raise ValueError(f"mean_burst_len must be >= 1, got {self.mean_burst_len}")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")


def preset_grid(seed: int = 0) -> list[GilbertParams]:
    return [GilbertParams(plr, PRESET_BURST_LEN, seed) for plr in PLR_PRESETS]


def derive_transitions(params: GilbertParams) -> tuple[float, float]:
    """Return ``(p_gb, p_bg)`` giving stationary loss rate ``plr``.

    The Bad sojourn is geometric with mean ``1/p_bg = L``. Stationarity,
    ``pi_B = p_gb / (p_gb + p_bg)``, then fixes ``p_gb = pi / (L (1 - pi))``.
    """
    pi, length = params.plr, params.mean_burst_len
    p_bg = 1.0 / length
    p_gb = pi / (length * (1.0 - pi))
    if p_gb > 1.0:
        raise ValueError(
            f"plr={pi} with mean burst {length} needs P(Good->Bad)={p_gb:.4g} > 1")
    return p_gb, p_bg


def loss_pattern(n_packets: int, params: GilbertParams) -> np.ndarray:
    """Boolean loss flags for ``n_packets`` consecutive packets.

    The chain starts in Good. Packet ``i`` draws one uniform ``u[i]``, the
    chain moves (Good->Bad if ``u[i] < p_gb``, Bad->Good if ``u[i] < p_bg``)
    and the packet is lost iff the new state is Bad. The scan below jumps
    between state changes instead of stepping packet by packet.
    """
    if n_packets < 0:
        raise ValueError("n_packets must be >= 0")
    p_gb, p_bg = derive_transitions(params)
    lost = np.zeros(n_packets, dtype=bool)
    if n_packets == 0:
        return lost
    rng = np.random.Generator(np.random.Philox(params.rng_seed))
    u = rng.random(n_packets)
    to_bad = np.flatnonzero(u < p_gb)
    to_good = np.flatnonzero(u < p_bg)
    pos = 0
    while pos < n_packets:
        k = np.searchsorted(to_bad, pos)
        if k == to_bad.size:
            break
        enter = int(to_bad[k])
        k = np.searchsorted(to_good, enter + 1)
        leave = int(to_good[k]) if k < to_good.size else n_packets
        lost[enter:leave] = True
        pos = leave + 1
    return lost


def apply_channel(trace: StreamTrace, params: GilbertParams, compose: bool = False) -> StreamTrace:
    """Mark packets lost, in global order, with a seeded Gilbert chain.

    With ``compose`` the new losses are OR-ed with losses already in the
    trace; without it a trace that already carries losses is rejected.
    """
    existing = [p.lost for p in trace.packets]
    if any(existing) and not compose:
        raise ValueError("trace already has lost packets; pass compose=True to combine")
    drawn = loss_pattern(len(trace.packets), params)
    return trace.with_losses([a or bool(b) for a, b in zip(existing, drawn)])


def burst_lengths(lost: np.ndarray) -> np.ndarray:
    """Lengths of maximal runs of consecutive losses."""
    lost = np.asarray(lost, dtype=np.int8)
    if lost.size == 0:
        return np.zeros(0, dtype=int)
    edges = np.diff(np.concatenate(([0], lost, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return ends - starts
