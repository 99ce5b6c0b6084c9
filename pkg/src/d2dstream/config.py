"""Run and sweep configuration documents (JSON), with dotted-path overrides."""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core import RadioParams, TimingConfig
from .schedulers import MwisConfig, SchedulerKind
from .streaming import StreamingConfig
from .topology import TopologyConfig
from .traces import RateDistortionParams


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


class TraceSource(BaseModel):
    """Either trace files (``paths``) or a synthetic generator spec.

    With ``paths`` link i streams ``paths[i % len(paths)]``; otherwise one
    synthetic trace per file id ``video0 .. video{num_files-1}`` is generated,
    ``num_chunks`` defaulting to cover the whole run.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    paths: list[str] | None = None
    num_chunks: int | None = Field(None, ge=1)
    rd: RateDistortionParams = RateDistortionParams()


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    topology: TopologyConfig = TopologyConfig()
    topology_file: str | None = None
    radio: RadioParams = RadioParams()
    timing: TimingConfig = TimingConfig()
    streaming: StreamingConfig = StreamingConfig()
    scheduler: SchedulerKind = SchedulerKind.CENTRALIZED_MAX_WEIGHT
    mwis: MwisConfig = MwisConfig()
    traces: TraceSource = TraceSource()
    pbt_seconds: float = Field(8.0, ge=0)
    duration_s: float = Field(200.0, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    check_invariants: bool = False
    flashlinq_instantaneous_yielding: bool = False

    @model_validator(mode="after")
    def _durations(self) -> "RunConfig":
        if self.duration_s < self.pbt_seconds:
            raise ValueError("duration_s must be at least pbt_seconds")
        return self

    @property
    def num_slots(self) -> int:
        return int(round(self.duration_s / self.timing.slot_seconds))


class SweepAxis(str, Enum):
    PBT = "pbt"
    ALPHA = "alpha"
    SEED = "seed"


class SweepSpec(BaseModel):
    """Grid of runs: every scheduler x axis value x repetition.

    Repetition r of every point uses the same run seed, derived from the
    master seed (``base.seed``, or the value itself on the seed axis).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    base: RunConfig = RunConfig()
    axis: SweepAxis = SweepAxis.PBT
    values: list[float] = Field(min_length=1)
    repetitions: int = Field(1, ge=1)
    schedulers: list[SchedulerKind] | None = None

    @model_validator(mode="after")
    def _values(self) -> "SweepSpec":
        if self.axis is SweepAxis.PBT:
            for v in self.values:
                if v < 0 or v > self.base.duration_s:
                    raise ValueError(f"pbt value {v} outside [0, duration_s]")
        if self.axis is SweepAxis.ALPHA and any(v < 0 for v in self.values):
            raise ValueError("alpha values must be non-negative")
        if self.axis is SweepAxis.SEED and any(v < 0 or v != int(v) for v in self.values):
            raise ValueError("seed values must be non-negative integers")
        return self

    @property
    def scheduler_list(self) -> list[SchedulerKind]:
        return list(self.schedulers) if self.schedulers else [self.base.scheduler]


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{path}: {err['msg']}")
    return "; ".join(parts)


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` assignments; values are parsed as JSON when possible."""
    doc = json.loads(json.dumps(doc))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form path=value")
        path, raw = item.split("=", 1)
        keys = [k for k in path.strip().split(".") if k]
        if not keys:
            raise ConfigError(f"override {item!r} has an empty path")
        node = doc
        for k in keys[:-1]:
            nxt = node.setdefault(k, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"{path}: {k} is not an object")
            node = nxt
        node[keys[-1]] = parse_value(raw)
    return doc


def run_config_from_dict(doc: dict, overrides: list[str] | None = None) -> RunConfig:
    doc = apply_overrides(doc, overrides or [])
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def sweep_spec_from_dict(doc: dict) -> SweepSpec:
    try:
        return SweepSpec.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def load_json(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc
