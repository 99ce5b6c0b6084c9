import numpy as np
import pytest

from d2dstream.topology import ConflictGraph


def random_tree(rng: np.random.Generator, n: int) -> ConflictGraph:
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    return ConflictGraph.from_edges(n, edges)


def erdos_renyi(rng: np.random.Generator, n: int, p: float) -> ConflictGraph:
    upper = np.triu(rng.random((n, n)) < p, k=1)
    return ConflictGraph(n, upper | upper.T)


def uniform_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    # uniform on (0, 1]
    return 1.0 - rng.random(n)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))
