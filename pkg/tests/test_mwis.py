import itertools
import json

import numpy as np
import pytest

from conftest import erdos_renyi, random_tree, uniform_weights
from d2dstream.mwis import (
    InstanceTooLarge,
    MessagePassingSolver,
    MwisProblem,
    dump_problem,
    greedy_baseline,
    load_problem,
    repair,
    solve_exact,
    solve_message_passing,
)
from d2dstream.topology import ConflictGraph

PATH3 = ConflictGraph.from_edges(3, [(0, 1), (1, 2)])
TRIANGLE = ConflictGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
STAR = ConflictGraph.from_edges(5, [(0, k) for k in range(1, 5)])


def brute_force(p: MwisProblem) -> float:
    best = 0.0
    n = p.graph.num_nodes
    for mask in itertools.product([False, True], repeat=n):
        sel = np.array(mask)
        if p.graph.is_independent(sel):
            best = max(best, float(p.weights[sel].sum()))
    return best


def test_exact_examples():
    s = solve_exact(MwisProblem(ConflictGraph(2, np.zeros((2, 2), bool)), [2.0, 5.0]))
    assert s.nodes == [0, 1] and s.total_weight == 7.0 and s.exact
    s = solve_exact(MwisProblem(PATH3, [1.0, 3.0, 1.0]))
    assert s.nodes == [1] and s.total_weight == 3.0
    s = solve_exact(MwisProblem(TRIANGLE, [1.0, 1.0, 1.0]))
    assert s.nodes == [0] and s.total_weight == 1.0


def test_exact_matches_brute_force(rng):
    for _ in range(150):
        n = int(rng.integers(1, 10))
        p = MwisProblem(erdos_renyi(rng, n, 0.4), np.round(uniform_weights(rng, n), 1))
        assert solve_exact(p).total_weight == pytest.approx(brute_force(p), abs=1e-12)


def test_exact_never_selects_zero_weight():
    s = solve_exact(MwisProblem(ConflictGraph(3, np.zeros((3, 3), bool)), [0.0, 1.0, 0.0]))
    assert s.nodes == [1]


def test_exact_size_guard():
    with pytest.raises(InstanceTooLarge):
        solve_exact(MwisProblem(ConflictGraph(26, np.zeros((26, 26), bool)), np.ones(26)))


def test_exact_scale_invariant(rng):
    for _ in range(100):
        n = int(rng.integers(1, 13))
        g = erdos_renyi(rng, n, 0.3)
        w = np.round(uniform_weights(rng, n) * 4) / 4  # coarse weights create ties
        base = solve_exact(MwisProblem(g, w)).selected
        for c in (0.5, 3.0, 1e6):
            assert np.array_equal(solve_exact(MwisProblem(g, w * c)).selected, base)


def test_message_passing_examples():
    edgeless = ConflictGraph(4, np.zeros((4, 4), bool))
    assert solve_message_passing(MwisProblem(edgeless, [1.0, 2.0, 3.0, 0.5])).nodes == [0, 1, 2, 3]
    tri = solve_message_passing(MwisProblem(TRIANGLE, [1.0, 1.0, 1.0]))
    assert len(tri.nodes) == 1 and tri.total_weight == 1.0 and not tri.exact
    assert solve_message_passing(MwisProblem(PATH3, [1.0, 3.0, 1.0])).nodes == [1]


def test_message_passing_exact_on_trees(rng):
    for _ in range(200):
        n = int(rng.integers(1, 16))
        p = MwisProblem(random_tree(rng, n), uniform_weights(rng, n))
        assert solve_message_passing(p).total_weight == pytest.approx(solve_exact(p).total_weight, abs=1e-9)
        assert solve_message_passing(p, greedy_floor=False).total_weight == pytest.approx(
            solve_exact(p).total_weight, abs=1e-9
        )


def test_message_passing_floor_and_feasibility(rng):
    for _ in range(200):
        n = int(rng.integers(2, 19))
        p = MwisProblem(erdos_renyi(rng, n, 0.3), uniform_weights(rng, n))
        for sol in (solve_message_passing(p), solve_message_passing(p, greedy_floor=False), greedy_baseline(p)):
            assert p.graph.is_independent(sol.selected)
            assert sol.total_weight == pytest.approx(float(p.weights[sol.selected].sum()), rel=1e-9)
        assert solve_message_passing(p).total_weight >= greedy_baseline(p).total_weight - 1e-12


def test_zero_weights_never_selected(rng):
    for _ in range(100):
        n = int(rng.integers(1, 12))
        w = uniform_weights(rng, n) * (rng.random(n) < 0.5)
        p = MwisProblem(erdos_renyi(rng, n, 0.3), w)
        for sol in (solve_message_passing(p), greedy_baseline(p), solve_exact(p)):
            assert not np.any(sol.selected & (w == 0))


def test_repair_is_maximal(rng):
    for _ in range(100):
        n = int(rng.integers(1, 12))
        g = erdos_renyi(rng, n, 0.4)
        w = uniform_weights(rng, n)
        out = repair(g, w, rng.random(n) < 0.6)
        assert g.is_independent(out)
        for i in np.flatnonzero(~out):
            assert np.any(g.adjacency[i] & out)


def test_greedy_examples():
    edgeless = ConflictGraph(3, np.zeros((3, 3), bool))
    assert greedy_baseline(MwisProblem(edgeless, [1.0, 1.0, 1.0])).nodes == [0, 1, 2]
    assert greedy_baseline(MwisProblem(PATH3, [1.0, 3.0, 1.0])).nodes == [1]
    star = greedy_baseline(MwisProblem(STAR, [10.0, 1.0, 1.0, 1.0, 1.0]))
    assert star.nodes == [0] and star.total_weight == 10.0


def test_solver_reuse_and_convergence_flags(rng):
    g = random_tree(rng, 10)
    solver = MessagePassingSolver(g)
    for _ in range(5):
        w = uniform_weights(rng, 10)
        sol = solver.solve(w)
        assert sol.converged and sol.iterations <= 200
        assert np.array_equal(solver.select(w), sol.selected)
    with pytest.raises(ValueError):
        MessagePassingSolver(g, damping=1.0)


def test_weights_validated():
    with pytest.raises(ValueError):
        MwisProblem(PATH3, [1.0, -1.0, 0.0])
    with pytest.raises(ValueError):
        MwisProblem(PATH3, [1.0, 1.0])


def test_problem_json_round_trip(tmp_path):
    p = MwisProblem(STAR, [10.0, 1.0, 1.0, 1.0, 1.0])
    path = tmp_path / "inst.json"
    dump_problem(path, p)
    doc = json.loads(path.read_text())
    assert doc["adjacency"][0] == [1, 2, 3, 4] and doc["num_nodes"] == 5
    q = load_problem(path)
    assert np.array_equal(q.graph.adjacency, p.graph.adjacency)
    assert np.array_equal(q.weights, p.weights)
