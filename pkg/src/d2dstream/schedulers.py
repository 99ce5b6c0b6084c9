"""Per-slot link scheduling: centralized max-weight (MWIS) and FlashLinQ-style yielding."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .core import RadioParams
from .mwis import MessagePassingSolver
from .topology import ConflictGraph, interference_violations


class SchedulerKind(str, Enum):
    CENTRALIZED_MAX_WEIGHT = "mpMWIS-QP"
    DISTRIBUTED_FLASHLINQ = "FlashLinQ-QP"
    RANDOMIZED_BASELINE = "FlashLinQ-Q"


class MwisConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iters: int = Field(200, ge=1)
    damping: float = Field(0.5, ge=0.0, lt=1.0)
    tol: float = Field(1e-8, gt=0)
    greedy_floor: bool = True


@dataclass(frozen=True)
class Schedule:
    active_links: np.ndarray
    slot_index: int

    @property
    def active_ids(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.active_links)]


def _as_matrix(gains) -> np.ndarray:
    return gains.gains if hasattr(gains, "gains") else np.asarray(gains, dtype=float)


def estimate_rates(gains, radio: RadioParams) -> np.ndarray:
    """Interference-agnostic rate estimate in bit/s/Hz for every link.

    The admissible interference (gamma relative to noise) is added to the
    noise floor, i.e. the denominator is ``noise * (1 + gamma_linear)``.
    """
    g = np.diag(_as_matrix(gains))
    return np.log2(1.0 + radio.tx_power * g / (radio.noise_power + radio.gamma_power))


def estimate_rate(link_index: int, gains, radio: RadioParams) -> float:
    return float(estimate_rates(gains, radio)[link_index])


def max_weight_weights(backlog_bits, rates) -> np.ndarray:
    return np.asarray(backlog_bits, dtype=float) * np.asarray(rates, dtype=float)


def schedule_centralized(
    backlog_bits,
    gains,
    radio: RadioParams,
    graph: ConflictGraph,
    mwis_cfg: MwisConfig | None = None,
    slot_index: int = 0,
    solver: MessagePassingSolver | None = None,
) -> Schedule:
    """Max-weight schedule: MWIS on the conflict graph with weights Q_i * r_i."""
    if solver is None:
        cfg = mwis_cfg or MwisConfig()
        solver = MessagePassingSolver(graph, cfg.max_iters, cfg.damping, cfg.tol, cfg.greedy_floor)
    w = max_weight_weights(backlog_bits, estimate_rates(gains, radio))
    if w.size != graph.num_nodes:
        raise ValueError(f"{w.size} links but the conflict graph has {graph.num_nodes} nodes")
    return Schedule(solver.solve(w).selected, slot_index)


def flashlinq_priorities(backlog_bits, gains, radio: RadioParams) -> np.ndarray:
    """Waiting time ``1 / (r_i * Q_i)``; ``inf`` for links that cannot transmit."""
    product = max_weight_weights(backlog_bits, estimate_rates(gains, radio))
    with np.errstate(divide="ignore"):
        return np.where(product > 0, 1.0 / np.where(product > 0, product, 1.0), np.inf)


def flashlinq_priority(link_index: int, backlog_bits, gains, radio: RadioParams) -> float:
    return float(flashlinq_priorities(backlog_bits, gains, radio)[link_index])


def yielding_pass(order, compatible: np.ndarray, eligible: np.ndarray) -> np.ndarray:
    """Admit links in priority order if they are compatible with everyone already admitted."""
    n = compatible.shape[0]
    active = np.zeros(n, dtype=bool)
    allowed = np.ones(n, dtype=bool)
    for i in order:
        if eligible[i] and allowed[i]:
            active[i] = True
            allowed &= compatible[i]
    return active


def schedule_flashlinq(
    backlog_bits,
    gains,
    radio: RadioParams,
    randomize: bool = False,
    rng: np.random.Generator | None = None,
    slot_index: int = 0,
    interference_gains=None,
    compatible: np.ndarray | None = None,
) -> Schedule:
    """Priority-ordered yielding.

    A candidate joins iff its TX keeps every active RX under ``gamma * noise``
    and every active TX keeps the candidate's RX under the same level.
    ``randomize=True`` replaces the max-weight priorities by a uniform random
    permutation (the quality-only baseline). ``interference_gains`` default to
    ``gains``; ``compatible`` may pass a precomputed pairwise compatibility matrix.
    """
    backlog = np.asarray(backlog_bits, dtype=float)
    n = backlog.size
    if compatible is None:
        ig = _as_matrix(gains if interference_gains is None else interference_gains)
        over = interference_violations(ig, radio)
        compatible = ~(over | over.T)
    u = flashlinq_priorities(backlog, gains, radio)
    eligible = np.isfinite(u)
    if randomize:
        if rng is None:
            raise ValueError("randomized scheduling needs an rng")
        order = rng.permutation(n)
    else:
        order = np.lexsort((np.arange(n), u))
    return Schedule(yielding_pass(order, compatible, eligible), slot_index)


def pairwise_feasible(active, gains, radio: RadioParams) -> bool:
    """True iff every pair of active links passes both single-interferer tests."""
    a = np.asarray(active, dtype=bool)
    over = interference_violations(_as_matrix(gains), radio)
    return not np.any(over[np.ix_(a, a)])
