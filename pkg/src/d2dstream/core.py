"""Shared domain types: links, radio parameters, channel gains, timing and queues."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


def db_to_linear(x_db: float) -> float:
    """Convert a decibel value to a linear power ratio."""
    if not math.isfinite(x_db):
        raise ValueError(f"dB value must be finite, got {x_db}")
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise ValueError(f"linear ratio must be positive, got {x}")
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class Link:
    """A D2D transmitter/receiver pair requesting one video file."""

    id: int
    tx_position: tuple[float, float]
    rx_position: tuple[float, float]
    file_id: str

    def __post_init__(self) -> None:
        if self.distance <= 0:
            raise ValueError(f"link {self.id}: tx and rx must not coincide")

    @property
    def distance(self) -> float:
        return math.dist(self.tx_position, self.rx_position)


@dataclass(frozen=True)
class LinkSet:
    links: tuple[Link, ...]

    def __post_init__(self) -> None:
        for pos, link in enumerate(self.links):
            if link.id != pos:
                raise ValueError(f"link at position {pos} has id {link.id}")

    def __len__(self) -> int:
        return len(self.links)

    def __iter__(self) -> Iterator[Link]:
        return iter(self.links)

    def __getitem__(self, i: int) -> Link:
        return self.links[i]

    @property
    def tx_positions(self) -> np.ndarray:
        return np.array([l.tx_position for l in self.links], dtype=float).reshape(-1, 2)

    @property
    def rx_positions(self) -> np.ndarray:
        return np.array([l.rx_position for l in self.links], dtype=float).reshape(-1, 2)


class RadioParams(BaseModel):
    """Transmit power, noise, bandwidth and the single-interferer threshold.

    ``interference_threshold_db`` is an interference-to-noise ratio: the
    admissible interference power from one interferer is
    ``gamma_linear * noise_power``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    tx_power: float = Field(0.01, gt=0)
    noise_power: float = Field(10 ** (-13.5), gt=0)
    interference_threshold_db: float = 5.0
    bandwidth_hz: float = Field(1.0e6, gt=0)

    @property
    def gamma_linear(self) -> float:
        return db_to_linear(self.interference_threshold_db)

    @property
    def gamma_power(self) -> float:
        """Admissible single-interferer received power in watts."""
        return self.gamma_linear * self.noise_power


@dataclass(frozen=True)
class ChannelGains:
    """Power gains; entry (j, i) is from the TX of link j to the RX of link i."""

    gains: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.gains, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"gain matrix must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError("gains must be finite and non-negative")
        if np.any(np.diag(g) <= 0):
            raise ValueError("desired-link gains must be positive")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @property
    def num_links(self) -> int:
        return self.gains.shape[0]

    @property
    def direct(self) -> np.ndarray:
        return np.diag(self.gains)


class TimingConfig(BaseModel):
    """Slot clock (scheduling, departures) and chunk clock (arrivals)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    slot_seconds: float = Field(0.01, gt=0)
    chunk_seconds: float = Field(0.5, gt=0)

    @model_validator(mode="after")
    def _integer_ratio(self) -> "TimingConfig":
        ratio = self.chunk_seconds / self.slot_seconds
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ValueError("chunk_seconds must be a positive integer multiple of slot_seconds")
        return self

    @property
    def slots_per_chunk(self) -> int:
        return int(round(self.chunk_seconds / self.slot_seconds))


def _two_sum(total, comp, x):
    """Neumaier step: returns the rounded sum and the updated compensation."""
    t = total + x
    err = np.where(np.abs(total) >= np.abs(x), (total - t) + x, (x - t) + total)
    return t, comp + err


@dataclass
class QueueState:
    """Bit-fluid transmit queue(s).

    Fields may be floats (one queue) or equal-length arrays (one entry per
    link). ``truncation_credit`` accumulates the offered service that found
    the queue empty, so that ``backlog = arrivals - departures + credit``.
    Offered service can exceed the backlog by many orders of magnitude, so the
    cumulative fields carry compensation terms (``*_comp``) and
    :meth:`conservation_residual` evaluates the identity with them.
    """

    backlog_bits: float | np.ndarray = 0.0
    cumulative_arrivals_bits: float | np.ndarray = 0.0
    cumulative_departures_bits: float | np.ndarray = 0.0
    truncation_credit_bits: float | np.ndarray = 0.0
    # accumulated separately: departures - credit cancels badly once offered service dwarfs the queue
    served_bits: float | np.ndarray = 0.0
    arrivals_comp: float | np.ndarray = 0.0
    departures_comp: float | np.ndarray = 0.0
    credit_comp: float | np.ndarray = 0.0

    @classmethod
    def empty(cls, num_links: int) -> "QueueState":
        return cls(*(np.zeros(num_links) for _ in range(8)))

    def conservation_residual(self) -> np.ndarray:
        """``arrivals - departures + credit - backlog`` per queue, summed without cancellation."""
        parts = [
            np.atleast_1d(x)
            for x in (
                self.cumulative_arrivals_bits,
                self.arrivals_comp,
                -np.asarray(self.cumulative_departures_bits),
                -np.asarray(self.departures_comp),
                self.truncation_credit_bits,
                self.credit_comp,
                -np.asarray(self.backlog_bits),
            )
        ]
        return np.array([math.fsum(col) for col in zip(*parts)])


def queue_update(q: QueueState, mu_bits, lambda_bits) -> QueueState:
    """Advance a queue one step: ``max(0, Q - mu) + lambda``."""
    mu = np.asarray(mu_bits, dtype=float)
    lam = np.asarray(lambda_bits, dtype=float)
    if np.any(mu < 0) or np.any(lam < 0):
        raise ValueError("departures and arrivals must be non-negative")
    backlog = np.asarray(q.backlog_bits, dtype=float)
    served = np.minimum(backlog, mu)
    # credit is mu - served exactly when mu >= Q, so the step identity only carries
    # the rounding of Q + lambda
    credit = mu - served
    new_backlog = (backlog - served) + lam
    arr, arr_c = _two_sum(q.cumulative_arrivals_bits, q.arrivals_comp, lam)
    dep, dep_c = _two_sum(q.cumulative_departures_bits, q.departures_comp, mu)
    cred, cred_c = _two_sum(q.truncation_credit_bits, q.credit_comp, credit)
    fields = [new_backlog, arr, dep, cred, q.served_bits + served, arr_c, dep_c, cred_c]
    if np.ndim(new_backlog) == 0:
        fields = [float(x) for x in fields]
    return QueueState(*fields)


def replay_queue(pairs: Sequence[tuple[float, float]], initial: float = 0.0) -> list[float]:
    """Backlog trajectory for a sequence of (mu, lambda) pairs, scalar arithmetic."""
    out = []
    q = initial
    for mu, lam in pairs:
        q = max(0.0, q - mu) + lam
        out.append(q)
    return out
