"""Receiver playout buffers: pre-buffering, stall detection and run metrics.

Slot semantics. Playback starts at the first slot where the delivered content
covers the pre-buffering target. The chunk being played occupies
``slots_per_chunk`` slots; at its end the next chunk must already be delivered,
otherwise a stall opens at that slot. A stall closes at the slot the missing
chunk completes, and that chunk starts playing in the same slot.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import TimingConfig

NEVER = -1


class Phase(str, Enum):
    PREBUFFERING = "prebuffering"
    PLAYING = "playing"
    STALLED = "stalled"
    FINISHED = "finished"


@dataclass
class PlaybackState:
    link_id: int
    prebuffer_target_s: float
    delivered_chunks: int = 0
    playhead_chunk: int = 0
    phase: Phase = Phase.PREBUFFERING
    stall_log: list[list[int | None]] = field(default_factory=list)
    total_chunks: int | None = None
    start_slot: int | None = None
    next_boundary: int | None = None

    @property
    def stall_count(self) -> int:
        return len(self.stall_log)

    @property
    def open_stall(self) -> bool:
        return bool(self.stall_log) and self.stall_log[-1][1] is None


def chunks_to_start(pbt_s: float, chunk_seconds: float, total_chunks: int | None = None) -> int:
    """Number of delivered chunks needed before playback may begin."""
    k = max(1, math.ceil(pbt_s / chunk_seconds - 1e-9))
    if total_chunks is not None:
        k = min(k, total_chunks)
    return k


def delivered_count(served_bits: float, prefix_bits: list[float]) -> int:
    """Chunks fully drained under FIFO, given cumulative chunk sizes in placement order."""
    # tolerate float residue from the queue recursion
    return bisect.bisect_right(prefix_bits, served_bits + 1e-6 + 1e-12 * abs(served_bits))


def register_delivery(state: PlaybackState, served_bits: float, prefix_bits: list[float]) -> PlaybackState:
    state.delivered_chunks = max(state.delivered_chunks, delivered_count(served_bits, prefix_bits))
    return state


def advance_playout(state: PlaybackState, slot_index: int, timing: TimingConfig) -> PlaybackState:
    spc = timing.slots_per_chunk
    if state.phase is Phase.PREBUFFERING:
        if state.total_chunks == 0:
            state.phase = Phase.FINISHED
            return state
        need = chunks_to_start(state.prebuffer_target_s, timing.chunk_seconds, state.total_chunks)
        if state.delivered_chunks >= need:
            state.phase = Phase.PLAYING
            state.playhead_chunk = 0
            state.start_slot = slot_index
            state.next_boundary = slot_index + spc
        return state
    if state.phase is Phase.PLAYING:
        if slot_index < state.next_boundary:
            return state
        nxt = state.playhead_chunk + 1
        if state.total_chunks is not None and nxt >= state.total_chunks:
            state.phase = Phase.FINISHED
        elif state.delivered_chunks > nxt:
            state.playhead_chunk = nxt
            state.next_boundary += spc
        else:
            state.phase = Phase.STALLED
            state.stall_log.append([slot_index, None])
        return state
    if state.phase is Phase.STALLED:
        nxt = state.playhead_chunk + 1
        if state.delivered_chunks > nxt:
            state.playhead_chunk = nxt
            state.stall_log[-1][1] = slot_index
            state.phase = Phase.PLAYING
            state.next_boundary = slot_index + spc
    return state


@dataclass(frozen=True)
class PlaybackSummary:
    stall_count: int
    stall_log: tuple[tuple[int, int | None], ...]
    start_slot: int | None
    finished: bool


def replay_playback(
    delivery_slots,
    total_chunks: int | None,
    num_slots: int,
    pbt_s: float,
    timing: TimingConfig,
) -> PlaybackSummary:
    """Event-driven equivalent of running ``advance_playout`` over ``num_slots`` slots.

    ``delivery_slots[k]`` is the slot at which chunk k completed, or ``NEVER``.
    ``total_chunks`` is None while the trace is still being placed.
    """
    spc = timing.slots_per_chunk
    d = [int(x) for x in delivery_slots]
    known = len(d)

    def done(k: int) -> int:
        if k < known and d[k] != NEVER:
            return d[k]
        return NEVER

    if total_chunks == 0:
        return PlaybackSummary(0, (), None, True)
    need = chunks_to_start(pbt_s, timing.chunk_seconds, total_chunks)
    start = done(need - 1)
    if start == NEVER or start >= num_slots:
        return PlaybackSummary(0, (), None, False)
    stalls: list[tuple[int, int | None]] = []
    play = start
    k = 0
    while True:
        boundary = play + spc
        if boundary >= num_slots:
            return PlaybackSummary(len(stalls), tuple(stalls), start, False)
        k += 1
        if total_chunks is not None and k >= total_chunks:
            return PlaybackSummary(len(stalls), tuple(stalls), start, True)
        dk = done(k)
        if dk != NEVER and dk <= boundary:
            play = boundary
            continue
        if dk == NEVER or dk >= num_slots:
            stalls.append((boundary, None))
            return PlaybackSummary(len(stalls), tuple(stalls), start, False)
        stalls.append((boundary, dk))
        play = dk


@dataclass(frozen=True)
class RunMetrics:
    expected_stalls: float
    avg_psnr_db: float
    mean_backlog_bits: float
    stall_counts: tuple[int, ...]
    chunks_placed: int
    num_slots: int

    def to_dict(self) -> dict:
        return {
            "expected_stalls": self.expected_stalls,
            "avg_psnr_db": None if math.isnan(self.avg_psnr_db) else self.avg_psnr_db,
            "mean_backlog_bits": self.mean_backlog_bits,
            "stall_counts": list(self.stall_counts),
            "chunks_placed": self.chunks_placed,
            "num_slots": self.num_slots,
        }


def summarize(stall_counts, decisions, mean_backlog_bits: float = 0.0, num_slots: int = 0) -> RunMetrics:
    """Mean stall count over links and arithmetic-mean PSNR (dB) over all placed chunks."""
    counts = tuple(int(c) for c in stall_counts)
    psnr = [d.psnr_db for d in decisions]
    return RunMetrics(
        expected_stalls=float(np.mean(counts)) if counts else 0.0,
        avg_psnr_db=float(np.mean(psnr)) if psnr else float("nan"),
        mean_backlog_bits=float(mean_backlog_bits),
        stall_counts=counts,
        chunks_placed=len(psnr),
        num_slots=num_slots,
    )
