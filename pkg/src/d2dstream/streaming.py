"""Quality-aware chunk placement, Shannon departures and the per-slot simulation step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .core import ChannelGains, LinkSet, QueueState, RadioParams, TimingConfig, queue_update
from .mwis import MessagePassingSolver
from .playback import NEVER, PlaybackState, advance_playout, delivered_count
from .schedulers import (
    MwisConfig,
    Schedule,
    SchedulerKind,
    estimate_rates,
    flashlinq_priorities,
    max_weight_weights,
    yielding_pass,
)
from .topology import ConflictGraph, FadingSampler, interference_violations
from .traces import VideoTrace


class StreamingConfig(BaseModel):
    """``alpha`` weighs queue growth against PSNR; units are dB per bit squared."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(2e-13, ge=0)
    quality_modes: int = Field(4, ge=1)


@dataclass(frozen=True)
class ChunkDecision:
    link_id: int
    chunk_index: int
    chosen_mode: int
    psnr_db: float
    bits: float


def quality_scores(psnr_db, bits, backlog_bits: float, alpha: float) -> np.ndarray:
    return np.asarray(psnr_db, dtype=float) - alpha * np.asarray(bits, dtype=float) * backlog_bits


def choose_mode_index(psnr_db, bits, backlog_bits: float, alpha: float) -> int:
    """0-based index maximizing ``psnr - alpha * bits * Q``; ties go to fewer bits."""
    psnr = np.asarray(psnr_db, dtype=float)
    b = np.asarray(bits, dtype=float)
    if psnr.size == 0:
        raise ValueError("no quality modes to choose from")
    scores = quality_scores(psnr, b, backlog_bits, alpha)
    best = np.flatnonzero(scores == scores.max())
    return int(best[np.argmin(b[best])])


def choose_quality(
    entry_set: Sequence[tuple[float, float]],
    backlog_bits: float,
    alpha: float,
    link_id: int = 0,
    chunk_index: int = 0,
) -> ChunkDecision:
    """Pick the mode of one chunk. ``entry_set`` holds (psnr_db, bits) per mode."""
    if len(entry_set) == 0:
        raise ValueError("no quality modes to choose from")
    psnr = [e[0] for e in entry_set]
    bits = [e[1] for e in entry_set]
    q = choose_mode_index(psnr, bits, backlog_bits, alpha)
    return ChunkDecision(link_id, chunk_index, q + 1, float(psnr[q]), float(bits[q]))


def place_chunks(
    slot_index: int,
    timing: TimingConfig,
    traces: Sequence[VideoTrace],
    backlog_bits,
    cfg: StreamingConfig,
) -> tuple[list[ChunkDecision], np.ndarray]:
    """Chunk decisions and arrival vector for one slot.

    ``traces[i]`` is the trace streamed over link i. Arrivals happen only on
    chunk boundaries; a link whose trace is exhausted gets no arrival.
    """
    if slot_index < 0:
        raise ValueError("slot_index must be non-negative")
    backlog = np.asarray(backlog_bits, dtype=float)
    lam = np.zeros(len(traces))
    if slot_index % timing.slots_per_chunk:
        return [], lam
    tau = slot_index // timing.slots_per_chunk
    decisions = []
    for i, tr in enumerate(traces):
        if tau >= tr.num_chunks:
            continue
        q = choose_mode_index(tr.psnr[tau], tr.bits[tau], float(backlog[i]), cfg.alpha)
        d = ChunkDecision(i, tau, q + 1, float(tr.psnr[tau, q]), float(tr.bits[tau, q]))
        decisions.append(d)
        lam[i] = d.bits
    return decisions, lam


def departures(active, gains, radio: RadioParams, timing: TimingConfig) -> np.ndarray:
    """Bits each link can send this slot: ``slot * B * log2(1 + SINR)`` with the actual interference."""
    a = np.asarray(active, dtype=bool)
    g = gains.gains if hasattr(gains, "gains") else np.asarray(gains, dtype=float)
    p = radio.tx_power
    received = p * (g * a[:, None])  # rows are transmitters; only active ones radiate
    signal = np.diag(received)
    interference = received.sum(axis=0) - signal
    sinr = signal / (radio.noise_power + interference)
    return np.where(a, timing.slot_seconds * radio.bandwidth_hz * np.log2(1.0 + sinr), 0.0)


@dataclass
class SlotRecord:
    slot: int
    backlog_bits: np.ndarray
    mu_bits: np.ndarray
    active: np.ndarray


class Simulation:
    """One run: schedule -> departures -> arrivals -> queue update -> playout, every slot.

    Owns all mutable state; ``rng`` drives only the randomized scheduler and
    ``fading`` supplies per-slot gain matrices.
    """

    def __init__(
        self,
        links: LinkSet,
        mean_gains: ChannelGains,
        radio: RadioParams,
        timing: TimingConfig,
        streaming: StreamingConfig,
        scheduler: SchedulerKind,
        traces: Sequence[VideoTrace],
        fading: FadingSampler,
        rng: np.random.Generator,
        pbt_seconds: float,
        mwis_cfg: MwisConfig | None = None,
        record_slots: bool = False,
        check_invariants: bool = False,
        flashlinq_instantaneous: bool = False,
    ):
        n = len(links)
        if len(traces) != n:
            raise ValueError(f"{len(traces)} traces for {n} links")
        self.links = links
        self.mean_gains = mean_gains
        self.radio = radio
        self.timing = timing
        self.streaming = streaming
        self.scheduler = SchedulerKind(scheduler)
        self.traces = list(traces)
        self.fading = fading
        self.rng = rng
        self.check_invariants = check_invariants
        self.record_slots = record_slots
        self.flashlinq_instantaneous = flashlinq_instantaneous

        over = interference_violations(mean_gains.gains, radio)
        self.graph = ConflictGraph(n, over | over.T)
        self.compatible = ~self.graph.adjacency
        cfg = mwis_cfg or MwisConfig()
        self.solver = MessagePassingSolver(self.graph, cfg.max_iters, cfg.damping, cfg.tol, cfg.greedy_floor)

        self.slot = 0
        self.queues = QueueState.empty(n)
        self.decisions: list[ChunkDecision] = []
        self.prefix_bits: list[list[float]] = [[] for _ in range(n)]
        self.delivered = np.zeros(n, dtype=int)
        self.delivery_slots: list[list[int]] = [[] for _ in range(n)]
        self.playback = [
            PlaybackState(i, pbt_seconds, total_chunks=tr.num_chunks) for i, tr in enumerate(self.traces)
        ]
        self.backlog_sum = 0.0
        self.slot_log: list[SlotRecord] = []
        self.violations = 0

    @property
    def num_links(self) -> int:
        return len(self.links)

    def schedule(self, gains: np.ndarray) -> Schedule:
        backlog = self.queues.backlog_bits
        if self.scheduler is SchedulerKind.CENTRALIZED_MAX_WEIGHT:
            w = max_weight_weights(backlog, estimate_rates(gains, self.radio))
            active = self.solver.select(w)
        else:
            u = flashlinq_priorities(backlog, gains, self.radio)
            eligible = np.isfinite(u)
            if self.scheduler is SchedulerKind.RANDOMIZED_BASELINE:
                order = self.rng.permutation(self.num_links)
            else:
                order = np.lexsort((np.arange(self.num_links), u))
            if self.flashlinq_instantaneous:
                over = interference_violations(gains, self.radio)
                compatible = ~(over | over.T)
            else:
                compatible = self.compatible
            active = yielding_pass(order, compatible, eligible)
        return Schedule(active, self.slot)

    def _check(self, sched: Schedule) -> None:
        a = sched.active_links
        if np.any(self.graph.adjacency[np.ix_(a, a)]):
            self.violations += 1
        if np.any(a & (self.queues.backlog_bits <= 0)):
            self.violations += 1

    def step(self) -> None:
        gains = self.fading.sample()
        sched = self.schedule(gains)
        if self.check_invariants:
            self._check(sched)
        mu = departures(sched.active_links, gains, self.radio, self.timing)
        decisions, lam = place_chunks(self.slot, self.timing, self.traces, self.queues.backlog_bits, self.streaming)
        for d in decisions:
            prev = self.prefix_bits[d.link_id][-1] if self.prefix_bits[d.link_id] else 0.0
            self.prefix_bits[d.link_id].append(prev + d.bits)
        self.decisions.extend(decisions)
        self.queues = queue_update(self.queues, mu, lam)
        backlog = self.queues.backlog_bits
        self.backlog_sum += float(backlog.sum())

        served = self.queues.served_bits
        for i, pb in enumerate(self.playback):
            if self.delivered[i] < len(self.prefix_bits[i]):
                k = delivered_count(served[i], self.prefix_bits[i])
                if k > self.delivered[i]:
                    self.delivery_slots[i].extend([self.slot] * (k - self.delivered[i]))
                    self.delivered[i] = k
            pb.delivered_chunks = int(self.delivered[i])
            advance_playout(pb, self.slot, self.timing)
        if self.record_slots:
            self.slot_log.append(SlotRecord(self.slot, backlog.copy(), mu, sched.active_links))
        self.slot += 1

    def run(self, num_slots: int) -> None:
        for _ in range(num_slots):
            self.step()

    @property
    def mean_backlog_bits(self) -> float:
        if self.slot == 0:
            return 0.0
        return self.backlog_sum / (self.slot * self.num_links)

    def delivery_table(self) -> list[list[int]]:
        """Per link, the delivery slot of every placed chunk (``NEVER`` if still queued)."""
        return [
            ds + [NEVER] * (len(pb) - len(ds)) for ds, pb in zip(self.delivery_slots, self.prefix_bits)
        ]
