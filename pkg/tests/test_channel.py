import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from helpers import uniform_trace
from xlrkit.channel import (
    GilbertParams,
    apply_channel,
    burst_lengths,
    derive_transitions,
    loss_pattern,
    preset_grid,
)


def literal_chain(n, params):
    """Step the two-state chain one packet at a time."""
    p_gb, p_bg = derive_transitions(params)
    u = np.random.Generator(np.random.Philox(params.rng_seed)).random(n)
    bad = False
    out = []
    for x in u:
        bad = (x >= p_bg) if bad else (x < p_gb)
        out.append(bad)
    return np.array(out, dtype=bool)


def test_transitions_examples():
    assert derive_transitions(GilbertParams(0.5, 2)) == pytest.approx((0.5, 0.5))
    p_gb, p_bg = derive_transitions(GilbertParams(0.01, 2))
    assert p_bg == 0.5
    assert p_gb == pytest.approx(0.01 / (2 * 0.99), rel=1e-15)
    assert p_gb == pytest.approx(0.0050505050505, rel=1e-10)


def test_stationary_rate_recovered_from_transitions():
    for plr in (0.001, 0.05, 0.3):
        for length in (1.0, 2.0, 7.5):
            p_gb, p_bg = derive_transitions(GilbertParams(plr, length))
            assert p_gb / (p_gb + p_bg) == pytest.approx(plr, rel=1e-12)


def test_infeasible_parameters_raise():
    with pytest.raises(ValueError, match="> 1"):
        derive_transitions(GilbertParams(0.9, 1.0))
    with pytest.raises(ValueError):
        GilbertParams(1.0)
    with pytest.raises(ValueError):
        GilbertParams(0.1, 0.5)


def test_zero_rate_loses_nothing():
    assert not loss_pattern(100_000, GilbertParams(0.0)).any()


def test_pattern_is_deterministic_per_seed():
    a = loss_pattern(50_000, GilbertParams(0.05, 3, 11))
    assert np.array_equal(a, loss_pattern(50_000, GilbertParams(0.05, 3, 11)))
    assert not np.array_equal(a, loss_pattern(50_000, GilbertParams(0.05, 3, 12)))


def test_prefix_stability():
    # the first k flags do not depend on how many packets follow
    long = loss_pattern(20_000, GilbertParams(0.1, 2, 4))
    assert np.array_equal(long[:5000], loss_pattern(5000, GilbertParams(0.1, 2, 4)))


@given(st.floats(0.0, 0.45), st.floats(1.0, 6.0), st.integers(0, 2 ** 32), st.integers(0, 3000))
@settings(max_examples=80)
def test_fast_scan_matches_literal_chain(plr, length, seed, n):
    params = GilbertParams(plr, length, seed)
    try:
        derive_transitions(params)
    except ValueError:
        return
    assert np.array_equal(loss_pattern(n, params), literal_chain(n, params))


def _chain_sigma(plr, length, n):
    p_gb, p_bg = derive_transitions(GilbertParams(plr, length))
    lam = 1.0 - p_gb - p_bg
    return math.sqrt(plr * (1 - plr) * (1 + lam) / (1 - lam) / n)


def test_long_run_loss_rate():
    n = 1_000_000
    lost = loss_pattern(n, GilbertParams(0.01, 2, 0))
    rate = lost.mean()
    assert 0.009 <= rate <= 0.011
    assert abs(rate - 0.01) <= 3 * _chain_sigma(0.01, 2, n)


def test_mean_burst_length_and_geometric_shape():
    plr, length = 0.2, 2.0
    lost = loss_pattern(1_000_000, GilbertParams(plr, length, 3))
    bursts = burst_lengths(lost[: np.flatnonzero(~lost)[-1]])  # drop a run cut by the end
    assert bursts.size > 100_000
    assert bursts.mean() == pytest.approx(length, rel=0.02)
    # chi-square against Geometric(1/L), tail pooled so every bin expects >= 5
    p = 1.0 / length
    kmax = 12
    observed = np.bincount(np.minimum(bursts, kmax), minlength=kmax + 1)[1:]
    probs = np.array([(1 - p) ** (k - 1) * p for k in range(1, kmax)] + [(1 - p) ** (kmax - 1)])
    _, pvalue = sps.chisquare(observed, probs * bursts.size)
    assert pvalue > 0.01


@pytest.mark.parametrize("lost, expected", [
    ([], []),
    ([0, 0], []),
    ([1, 1, 0, 1, 0, 0, 1, 1, 1], [2, 1, 3]),
])
def test_burst_lengths(lost, expected):
    assert burst_lengths(np.array(lost, dtype=bool)).tolist() == expected


def test_preset_grid():
    grid = preset_grid(5)
    assert [g.plr for g in grid] == [0.001, 0.005, 0.01]
    assert all(g.mean_burst_len == 2.0 and g.rng_seed == 5 for g in grid)


def test_apply_channel_marks_in_global_order():
    trace = uniform_trace("ibbp", 200, [100, 100, 100])
    params = GilbertParams(0.1, 2, 1)
    out = apply_channel(trace, params)
    assert [p.lost for p in out.packets] == loss_pattern(600, params).tolist()
    assert out.frames == trace.frames


def test_apply_channel_compose():
    trace = uniform_trace("ipp", 50, [10, 10], {(0, 1)})
    with pytest.raises(ValueError, match="compose"):
        apply_channel(trace, GilbertParams(0.05))
    out = apply_channel(trace, GilbertParams(0.05, 2, 2), compose=True)
    drawn = loss_pattern(100, GilbertParams(0.05, 2, 2))
    expected = drawn.copy()
    expected[0] = True
    assert [p.lost for p in out.packets] == expected.tolist()
