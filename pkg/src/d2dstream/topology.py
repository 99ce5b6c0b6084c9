"""Synthetic D2D layouts, pathloss gains, per-slot fading and the conflict graph."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .core import ChannelGains, Link, LinkSet, RadioParams

MAX_PLACEMENT_ATTEMPTS = 10_000


class Fading(str, Enum):
    NONE = "none"
    RAYLEIGH_PER_SLOT = "rayleigh_per_slot"


class TopologyConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    cell_side_m: float = Field(500.0, gt=0)
    num_links: int = Field(8, ge=1)
    max_d2d_distance_m: float = Field(50.0, gt=0)
    min_d2d_distance_m: float = Field(1.0, gt=0)
    pathloss_exponent: float = Field(3.68, gt=0)
    pathloss_ref_gain: float = Field(10 ** -3.86, gt=0)
    fading: Fading = Fading.RAYLEIGH_PER_SLOT
    num_files: int = Field(4, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _geometry(self) -> "TopologyConfig":
        if self.max_d2d_distance_m >= self.cell_side_m:
            raise ValueError("max_d2d_distance_m must be smaller than cell_side_m")
        if self.min_d2d_distance_m > self.max_d2d_distance_m:
            raise ValueError("min_d2d_distance_m exceeds max_d2d_distance_m")
        return self


def pathloss_gain(distance_m, ref_gain: float, exponent: float):
    """Mean power gain ``ref_gain * d**-exponent``; distances are floored at 1 cm."""
    d = np.maximum(np.asarray(distance_m, dtype=float), 1e-2)
    return ref_gain * d ** (-exponent)


def generate_topology(cfg: TopologyConfig, rng: np.random.Generator | None = None) -> tuple[LinkSet, ChannelGains]:
    """Drop links uniformly in the cell and compute mean pathloss gains.

    Each RX is placed uniformly in the annulus ``[min_d2d, max_d2d]`` around its
    TX, re-drawn until it lands inside the cell.
    """
    if rng is None:
        rng = np.random.Generator(np.random.Philox(cfg.seed))
    side = cfg.cell_side_m
    links = []
    for i in range(cfg.num_links):
        tx = rng.uniform(0.0, side, size=2)
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            # uniform over the annulus area
            r = math.sqrt(rng.uniform(cfg.min_d2d_distance_m**2, cfg.max_d2d_distance_m**2))
            theta = rng.uniform(0.0, 2 * math.pi)
            rx = tx + r * np.array([math.cos(theta), math.sin(theta)])
            if 0.0 <= rx[0] <= side and 0.0 <= rx[1] <= side:
                break
        else:
            raise ValueError(f"could not place receiver of link {i} inside the cell")
        links.append(
            Link(
                id=i,
                tx_position=(float(tx[0]), float(tx[1])),
                rx_position=(float(rx[0]), float(rx[1])),
                file_id=f"video{i % cfg.num_files}",
            )
        )
    link_set = LinkSet(tuple(links))
    return link_set, mean_gains(link_set, cfg.pathloss_ref_gain, cfg.pathloss_exponent)


def mean_gains(links: LinkSet, ref_gain: float, exponent: float) -> ChannelGains:
    tx = links.tx_positions
    rx = links.rx_positions
    dist = np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=-1)
    return ChannelGains(pathloss_gain(dist, ref_gain, exponent))


class FadingSampler:
    """Per-slot gain matrices: mean gains times unit-mean exponential (Rayleigh power) draws.

    Draws are generated in blocks from a single stream, so the sequence of
    matrices only depends on the generator state.
    """

    def __init__(self, mean: ChannelGains, fading: Fading, rng: np.random.Generator, block: int = 512):
        self.mean = mean.gains
        self.fading = Fading(fading)
        self.rng = rng
        self.block = block
        self._buf: np.ndarray | None = None
        self._pos = 0

    def sample(self) -> np.ndarray:
        if self.fading is Fading.NONE:
            return self.mean
        if self._buf is None or self._pos == self.block:
            n = self.mean.shape[0]
            self._buf = self.rng.exponential(1.0, size=(self.block, n, n))
            self._pos = 0
        g = self.mean * self._buf[self._pos]
        self._pos += 1
        return g


@dataclass(frozen=True)
class ConflictGraph:
    """Symmetric, loop-free link conflict graph."""

    num_nodes: int
    adjacency: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.adjacency, dtype=bool)
        if a.shape != (self.num_nodes, self.num_nodes):
            raise ValueError(f"adjacency shape {a.shape} does not match {self.num_nodes} nodes")
        if np.any(np.diag(a)):
            raise ValueError("conflict graph must not contain self-loops")
        if not np.array_equal(a, a.T):
            raise ValueError("conflict graph must be symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "ConflictGraph":
        a = np.zeros((num_nodes, num_nodes), dtype=bool)
        for j, k in edges:
            if j == k:
                raise ValueError(f"self-loop on node {j}")
            a[j, k] = a[k, j] = True
        return cls(num_nodes, a)

    @property
    def edges(self) -> list[tuple[int, int]]:
        j, k = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(a), int(b)) for a, b in zip(j, k)]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def is_independent(self, selected) -> bool:
        s = np.asarray(selected, dtype=bool)
        return not np.any(self.adjacency[np.ix_(s, s)])


def interference_violations(gains: np.ndarray, radio: RadioParams) -> np.ndarray:
    """Boolean matrix, (j, i) true iff TX j alone puts more than gamma*noise at RX i."""
    g = np.asarray(gains, dtype=float)
    over = radio.tx_power * g > radio.gamma_power
    np.fill_diagonal(over, False)
    return over


def build_conflict_graph(links: LinkSet, gains: ChannelGains, radio: RadioParams) -> ConflictGraph:
    n = len(links)
    if gains.num_links != n:
        raise ValueError(f"gain matrix is {gains.num_links}x{gains.num_links} but there are {n} links")
    over = interference_violations(gains.gains, radio)
    return ConflictGraph(n, over | over.T)


def topology_to_dict(links: LinkSet, gains: ChannelGains, seed: int | None = None) -> dict:
    return {
        "seed": seed,
        "links": [
            {"id": l.id, "tx": list(l.tx_position), "rx": list(l.rx_position), "file_id": l.file_id}
            for l in links
        ],
        "gains": gains.gains.tolist(),
    }


def topology_from_dict(doc: dict) -> tuple[LinkSet, ChannelGains]:
    links = LinkSet(
        tuple(
            Link(id=d["id"], tx_position=tuple(d["tx"]), rx_position=tuple(d["rx"]), file_id=d["file_id"])
            for d in doc["links"]
        )
    )
    gains = ChannelGains(np.array(doc["gains"], dtype=float))
    if gains.num_links != len(links):
        raise ValueError("gain matrix does not match link count")
    return links, gains


def dump_topology(path: str | Path, links: LinkSet, gains: ChannelGains, seed: int | None = None) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(links, gains, seed), indent=2))


def load_topology(path: str | Path) -> tuple[LinkSet, ChannelGains]:
    return topology_from_dict(json.loads(Path(path).read_text()))
