import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dstream.core import RadioParams
from d2dstream.mwis import MwisProblem, solve_exact
from d2dstream.schedulers import (
    estimate_rate,
    estimate_rates,
    flashlinq_priorities,
    flashlinq_priority,
    max_weight_weights,
    pairwise_feasible,
    schedule_centralized,
    schedule_flashlinq,
)
from d2dstream.topology import ConflictGraph

from conftest import erdos_renyi

RADIO = RadioParams(tx_power=1.0, noise_power=1.0, interference_threshold_db=0.0)  # noise + gamma = 2


def diag_gains(values, cross=0.0):
    n = len(values)
    g = np.full((n, n), cross, dtype=float)
    np.fill_diagonal(g, values)
    return g


@pytest.mark.parametrize("snr_over_denominator,expected", [(1.0, 1.0), (3.0, 2.0)])
def test_estimate_rate_examples(snr_over_denominator, expected):
    g = diag_gains([2.0 * snr_over_denominator])
    assert estimate_rate(0, g, RADIO) == pytest.approx(expected, rel=1e-12)


def test_estimate_rate_silent_link():
    g = diag_gains([1.0, 1.0])
    g[1, 1] = 0.0
    assert estimate_rates(g, RADIO)[1] == 0.0


def test_gamma_as_interference_to_noise_ratio():
    radio = RadioParams(tx_power=1.0, noise_power=2.0, interference_threshold_db=10.0)
    assert estimate_rate(0, diag_gains([22.0]), radio) == pytest.approx(1.0)


def test_centralized_examples():
    graph = ConflictGraph.from_edges(3, [(0, 1), (1, 2)])
    g = diag_gains([2.0, 2.0, 2.0])
    assert not schedule_centralized(np.zeros(3), g, RADIO, graph).active_links.any()
    single = ConflictGraph(1, np.zeros((1, 1), bool))
    assert schedule_centralized([5.0], diag_gains([2.0]), RADIO, single).active_ids == [0]
    assert schedule_centralized([1.0, 3.0, 1.0], g, RADIO, graph).active_ids == [1]


def test_centralized_zero_backlog_never_active(rng):
    for _ in range(50):
        n = 10
        graph = erdos_renyi(rng, n, 0.3)
        backlog = rng.random(n) * (rng.random(n) < 0.5)
        s = schedule_centralized(backlog, diag_gains(rng.random(n) + 0.1), RADIO, graph)
        assert graph.is_independent(s.active_links)
        assert not np.any(s.active_links & (backlog == 0))


def test_max_weight_scale_invariance(rng):
    for _ in range(50):
        n = int(rng.integers(1, 13))
        graph = erdos_renyi(rng, n, 0.3)
        rates = estimate_rates(diag_gains(rng.random(n) + 0.1), RADIO)
        backlog = rng.integers(0, 5, n).astype(float)
        base = solve_exact(MwisProblem(graph, max_weight_weights(backlog, rates))).selected
        scaled = solve_exact(MwisProblem(graph, max_weight_weights(backlog * 7.5, rates))).selected
        assert np.array_equal(base, scaled)


def test_priority_examples():
    # gain 6 gives r = log2(1 + 6/2) = 2
    assert flashlinq_priority(0, [4.0], diag_gains([6.0]), RADIO) == pytest.approx(0.125)
    assert math.isinf(flashlinq_priority(0, [0.0], diag_gains([6.0]), RADIO))
    # r = 0.5: 6/2 replaced by sqrt(2) - 1
    g = diag_gains([2.0 * (math.sqrt(2) - 1)])
    assert flashlinq_priority(0, [8.0], g, RADIO) == pytest.approx(0.25)


@given(st.floats(0.01, 1e6), st.floats(0.01, 1e6), st.floats(0.1, 100))
def test_priority_decreasing_in_backlog(q1, dq, gain):
    u = flashlinq_priorities([q1, q1 + dq], diag_gains([gain, gain]), RADIO)
    assert u[1] <= u[0]


def test_flashlinq_examples(rng):
    assert schedule_flashlinq([3.0], diag_gains([2.0]), RADIO).active_ids == [0]
    conflicting = diag_gains([2.0, 2.0], cross=10.0)
    # link 0 has the larger backlog, hence the smaller waiting time
    assert schedule_flashlinq([5.0, 1.0], conflicting, RADIO).active_ids == [0]
    assert schedule_flashlinq([1.0, 5.0], conflicting, RADIO).active_ids == [1]
    far = diag_gains([2.0, 2.0], cross=1e-9)
    for randomize in (False, True):
        assert schedule_flashlinq([1.0, 5.0], far, RADIO, randomize=randomize, rng=rng).active_ids == [0, 1]


def test_flashlinq_tie_goes_to_lower_id():
    assert schedule_flashlinq([2.0, 2.0], diag_gains([2.0, 2.0], cross=10.0), RADIO).active_ids == [0]


def test_flashlinq_one_way_interference_blocks():
    g = diag_gains([2.0, 2.0])
    g[0, 1] = 10.0  # only TX0 hurts RX1
    assert schedule_flashlinq([1.0, 5.0], g, RADIO).active_ids == [1]


def test_flashlinq_feasible_and_work_conserving(rng):
    for _ in range(200):
        n = 10
        g = rng.exponential(0.3, size=(n, n))
        np.fill_diagonal(g, rng.random(n) + 0.5)
        backlog = rng.random(n) * (rng.random(n) < 0.7)
        for randomize in (False, True):
            s = schedule_flashlinq(backlog, g, RADIO, randomize=randomize, rng=rng)
            assert pairwise_feasible(s.active_links, g, RADIO)
            assert not np.any(s.active_links & (backlog == 0))
        u = flashlinq_priorities(backlog, g, RADIO)
        if np.isfinite(u).any():
            top = int(np.lexsort((np.arange(n), u))[0])
            assert schedule_flashlinq(backlog, g, RADIO).active_links[top]


def test_randomized_needs_rng():
    with pytest.raises(ValueError):
        schedule_flashlinq([1.0], diag_gains([2.0]), RADIO, randomize=True)
