"""Maximum-weight independent set: exhaustive oracle, max-product message passing, greedy floor."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .topology import ConflictGraph

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is optional
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

EXACT_MAX_NODES = 25


@dataclass(frozen=True)
class MwisProblem:
    graph: ConflictGraph
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size != self.graph.num_nodes:
            raise ValueError(f"{w.size} weights for {self.graph.num_nodes} nodes")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class MwisSolution:
    selected: np.ndarray
    total_weight: float
    exact: bool
    iterations: int = 0
    converged: bool = True

    @property
    def nodes(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.selected)]


def _solution(p: MwisProblem, selected: np.ndarray, exact: bool, **extra) -> MwisSolution:
    selected = np.asarray(selected, dtype=bool)
    return MwisSolution(selected, float(p.weights[selected].sum()), exact, **extra)


class InstanceTooLarge(ValueError):
    pass


def solve_exact(p: MwisProblem) -> MwisSolution:
    """Branch and bound over nodes in index order.

    Zero-weight nodes are never selected. Among optimal sets the one with the
    lexicographically smallest sorted index list wins: the search tries
    "include" before "exclude" at every node and only replaces the incumbent
    on a strict improvement.
    """
    n = p.graph.num_nodes
    if n > EXACT_MAX_NODES:
        raise InstanceTooLarge(f"exact solver is limited to {EXACT_MAX_NODES} nodes, got {n}")
    w = [float(x) for x in p.weights]
    nbr = [0] * n
    for j, k in p.graph.edges:
        nbr[j] |= 1 << k
        nbr[k] |= 1 << j
    positive = 0
    for i in range(n):
        if w[i] > 0:
            positive |= 1 << i
    scale = max(w, default=0.0)
    eps = 1e-12 * max(scale, 1e-300) * max(n, 1)

    best_weight = 0.0
    best_mask = 0

    def remaining(cand: int) -> float:
        total = 0.0
        while cand:
            low = cand & -cand
            total += w[low.bit_length() - 1]
            cand ^= low
        return total

    def search(cand: int, chosen: int, weight: float) -> None:
        nonlocal best_weight, best_mask
        if not cand:
            if weight > best_weight + eps:
                best_weight, best_mask = weight, chosen
            return
        if weight + remaining(cand) <= best_weight + eps:
            return
        low = cand & -cand
        i = low.bit_length() - 1
        search(cand & ~low & ~nbr[i], chosen | low, weight + w[i])
        search(cand & ~low, chosen, weight)

    search(positive, 0, 0.0)
    selected = np.array([(best_mask >> i) & 1 for i in range(n)], dtype=bool)
    return _solution(p, selected, exact=True)


def _directed_edges(graph: ConflictGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    edges = graph.edges
    m = len(edges)
    src = np.empty(2 * m, dtype=np.int64)
    dst = np.empty(2 * m, dtype=np.int64)
    rev = np.empty(2 * m, dtype=np.int64)
    for e, (j, k) in enumerate(edges):
        src[2 * e], dst[2 * e] = j, k
        src[2 * e + 1], dst[2 * e + 1] = k, j
        rev[2 * e], rev[2 * e + 1] = 2 * e + 1, 2 * e
    return src, dst, rev


@njit(cache=True)
def _max_product(w, src, dst, rev, damping, max_iters, tol):
    n = w.shape[0]
    ne = src.shape[0]
    msg = np.zeros(ne)
    new = np.zeros(ne)
    incoming = np.zeros(n)
    iters = 0
    converged = ne == 0
    while iters < max_iters and not converged:
        iters += 1
        incoming[:] = 0.0
        for e in range(ne):
            incoming[dst[e]] += msg[e]
        delta = 0.0
        for e in range(ne):
            i = src[e]
            target = w[i] - (incoming[i] - msg[rev[e]])
            if target < 0.0:
                target = 0.0
            v = (1.0 - damping) * target + damping * msg[e]
            d = abs(v - msg[e])
            if d > delta:
                delta = d
            new[e] = v
        msg[:] = new
        converged = delta < tol
    incoming[:] = 0.0
    for e in range(ne):
        incoming[dst[e]] += msg[e]
    return incoming, iters, converged


def _weight_order(w: np.ndarray) -> np.ndarray:
    # descending weight, ties to the lower index
    return np.argsort(-w, kind="mergesort")


@njit(cache=True)
def _greedy_pass(order, adj, weights, allowed, selected, blocked):
    for i in order:
        if weights[i] > 0 and allowed[i] and not selected[i] and not blocked[i]:
            selected[i] = True
            for k in range(adj.shape[1]):
                if adj[i, k]:
                    blocked[k] = True


@njit(cache=True)
def _repair(w, estimate, adj):
    n = w.shape[0]
    order = np.argsort(-w, kind="mergesort")
    selected = np.zeros(n, dtype=np.bool_)
    blocked = np.zeros(n, dtype=np.bool_)
    _greedy_pass(order, adj, w, estimate, selected, blocked)
    _greedy_pass(order, adj, w, np.ones(n, dtype=np.bool_), selected, blocked)
    return selected


@njit(cache=True)
def _greedy_ratio(w, adj, degrees):
    n = w.shape[0]
    order = np.argsort(-(w / (1.0 + degrees)), kind="mergesort")
    selected = np.zeros(n, dtype=np.bool_)
    blocked = np.zeros(n, dtype=np.bool_)
    _greedy_pass(order, adj, w, np.ones(n, dtype=np.bool_), selected, blocked)
    return selected


@njit(cache=True)
def _solve_kernel(w, src, dst, rev, adj, degrees, damping, max_iters, tol, floor):
    scale = w.max()
    if scale <= 0.0:
        return np.zeros(w.shape[0], dtype=np.bool_), 0, True
    wn = w / scale
    incoming, iters, converged = _max_product(wn, src, dst, rev, damping, max_iters, tol)
    selected = _repair(w, wn > incoming, adj)
    if floor:
        alt = _greedy_ratio(w, adj, degrees)
        if w[alt].sum() > w[selected].sum():
            selected = alt
    return selected, iters, converged


def repair(graph: ConflictGraph, weights: np.ndarray, estimate: np.ndarray) -> np.ndarray:
    """Turn an arbitrary 0/1 estimate into a maximal independent set of positive-weight nodes.

    Estimated nodes are kept in descending weight order unless they conflict
    with a heavier kept node; then every remaining compatible node is added.
    """
    w = np.asarray(weights, dtype=float)
    return _repair(w, np.asarray(estimate, dtype=np.bool_), graph.adjacency)


class MessagePassingSolver:
    """Max-product MWIS solver bound to one conflict graph.

    Precomputes the directed edge arrays so repeated solves on the same graph
    (one per scheduling slot) only pay for the iterations.
    """

    def __init__(
        self,
        graph: ConflictGraph,
        max_iters: int = 200,
        damping: float = 0.5,
        tol: float = 1e-8,
        greedy_floor: bool = True,
    ):
        if not 0.0 <= damping < 1.0:
            raise ValueError(f"damping must be in [0, 1), got {damping}")
        self.graph = graph
        self.max_iters = int(max_iters)
        self.damping = float(damping)
        self.tol = float(tol)
        self.greedy_floor = greedy_floor
        self._src, self._dst, self._rev = _directed_edges(graph)
        self._adj = np.ascontiguousarray(graph.adjacency)
        self._deg = graph.degrees.astype(float)

    def select(self, weights: np.ndarray) -> np.ndarray:
        """Selection mask only; ``weights`` must already be a valid float vector."""
        return self._run(weights)[0]

    def _run(self, w: np.ndarray):
        # messages run on weights normalised to [0, 1] so tol is relative;
        # with the floor on, loopy graphs never fall below the degree-weighted greedy set
        return _solve_kernel(
            w, self._src, self._dst, self._rev, self._adj, self._deg,
            self.damping, self.max_iters, self.tol, self.greedy_floor,
        )

    def solve(self, weights) -> MwisSolution:
        p = weights if isinstance(weights, MwisProblem) else MwisProblem(self.graph, weights)
        selected, iters, converged = self._run(p.weights)
        return _solution(p, selected, exact=False, iterations=int(iters), converged=bool(converged))


def solve_message_passing(
    p: MwisProblem,
    max_iters: int = 200,
    damping: float = 0.5,
    tol: float = 1e-8,
    greedy_floor: bool = True,
) -> MwisSolution:
    """Damped max-product estimate followed by a feasibility repair.

    ``greedy_floor=False`` returns the repaired estimate alone.
    """
    return MessagePassingSolver(p.graph, max_iters, damping, tol, greedy_floor).solve(p)


def greedy_baseline(p: MwisProblem) -> MwisSolution:
    """Pick nodes by descending ``w / (1 + degree)``, skipping conflicts and zero weights."""
    selected = _greedy_ratio(p.weights, p.graph.adjacency, p.graph.degrees.astype(float))
    return _solution(p, selected, exact=False)


def problem_to_dict(p: MwisProblem) -> dict:
    return {
        "num_nodes": p.graph.num_nodes,
        "adjacency": [[int(k) for k in p.graph.neighbors(i)] for i in range(p.graph.num_nodes)],
        "weights": [float(x) for x in p.weights],
    }


def problem_from_dict(doc: dict) -> MwisProblem:
    n = int(doc["num_nodes"])
    adj = doc["adjacency"]
    if len(adj) != n:
        raise ValueError(f"adjacency lists {len(adj)} nodes, expected {n}")
    edges = {(min(i, k), max(i, k)) for i, nbrs in enumerate(adj) for k in nbrs}
    graph = ConflictGraph.from_edges(n, sorted(edges))
    return MwisProblem(graph, np.array(doc["weights"], dtype=float))


def dump_problem(path: str | Path, p: MwisProblem) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(p), indent=2))


def load_problem(path: str | Path) -> MwisProblem:
    return problem_from_dict(json.loads(Path(path).read_text()))
