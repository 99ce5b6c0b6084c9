"""Experiment orchestration: single runs, parameter sweeps, results tables and plot data.

Random streams
--------------
All randomness uses the Philox-4x64 counter-based generator seeded through
``numpy.random.SeedSequence``. A run seed ``s`` is split with
``SeedSequence(s).spawn(4)`` into the topology, trace, fading and scheduler
streams, in that order. Sweep repetition ``r`` with master seed ``m`` runs with
seed ``SeedSequence(m, spawn_key=(r,)).generate_state(1, uint64)[0]``.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ConfigError, RunConfig, SweepAxis, SweepSpec
from .core import LinkSet
from .playback import RunMetrics, replay_playback, summarize
from .schedulers import SchedulerKind
from .streaming import Simulation
from .topology import FadingSampler, generate_topology, load_topology
from .traces import TraceError, VideoTrace, generate_synthetic, load_trace

WORKERS_ENV = "D2DSTREAM_WORKERS"
STREAMS = ("topology", "traces", "fading", "scheduler")


class RunError(RuntimeError):
    """A simulation failed at runtime; ``config`` echoes the offending run."""

    def __init__(self, message: str, config: RunConfig | None = None):
        super().__init__(message)
        self.config = config


def run_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.Philox(ss)) for name, ss in zip(STREAMS, children)}


def derive_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=(index,)).generate_state(1, np.uint64)[0])


def build_traces(cfg: RunConfig, links: LinkSet, rng: np.random.Generator) -> tuple[LinkSet, list[VideoTrace]]:
    """Per-link traces, relabelling link file ids to the trace each link streams."""
    src = cfg.traces
    chunk_s = cfg.timing.chunk_seconds
    if src.paths:
        try:
            files = [load_trace(p) for p in src.paths]
        except (OSError, TraceError) as exc:
            raise ConfigError(f"traces.paths: {exc}") from None
        for f in files:
            if f.num_modes != cfg.streaming.quality_modes:
                raise ConfigError(
                    f"traces.paths: {f.file_id} has {f.num_modes} modes, streaming.quality_modes is {cfg.streaming.quality_modes}"
                )
    else:
        num_chunks = src.num_chunks or max(1, math.ceil(cfg.duration_s / chunk_s))
        files = [
            generate_synthetic(num_chunks, cfg.streaming.quality_modes, rng, src.rd, f"video{k}", chunk_s)
            for k in range(cfg.topology.num_files)
        ]
    per_link = [files[i % len(files)] for i in range(len(links))]
    relabelled = LinkSet(tuple(replace(l, file_id=t.file_id) for l, t in zip(links, per_link)))
    return relabelled, per_link


def build_simulation(cfg: RunConfig, scheduler: SchedulerKind | None = None, record_slots: bool = False) -> Simulation:
    streams = run_streams(cfg.seed)
    if cfg.topology_file:
        try:
            links, gains = load_topology(cfg.topology_file)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"topology_file: {exc}") from None
    else:
        try:
            links, gains = generate_topology(cfg.topology, streams["topology"])
        except ValueError as exc:
            raise ConfigError(f"topology: {exc}") from None
    links, traces = build_traces(cfg, links, streams["traces"])
    return Simulation(
        links=links,
        mean_gains=gains,
        radio=cfg.radio,
        timing=cfg.timing,
        streaming=cfg.streaming,
        scheduler=scheduler or cfg.scheduler,
        traces=traces,
        fading=FadingSampler(gains, cfg.topology.fading, streams["fading"]),
        rng=streams["scheduler"],
        pbt_seconds=cfg.pbt_seconds,
        mwis_cfg=cfg.mwis,
        record_slots=record_slots,
        check_invariants=cfg.check_invariants,
        flashlinq_instantaneous=cfg.flashlinq_instantaneous_yielding,
    )


@dataclass
class RunResult:
    config: RunConfig
    metrics: RunMetrics
    simulation: Simulation

    @property
    def decisions(self):
        return self.simulation.decisions


def run_single(cfg: RunConfig, record_slots: bool = False) -> RunResult:
    sim = build_simulation(cfg, record_slots=record_slots)
    sim.run(cfg.num_slots)
    metrics = summarize(
        [pb.stall_count for pb in sim.playback], sim.decisions, sim.mean_backlog_bits, sim.slot
    )
    return RunResult(cfg, metrics, sim)


def metrics_for_pbt(sim: Simulation, pbt_s: float) -> RunMetrics:
    """Recompute playback for another pre-buffering target from the run's delivery log."""
    table = sim.delivery_table()
    counts = [
        replay_playback(table[i], tr.num_chunks, sim.slot, pbt_s, sim.timing).stall_count
        for i, tr in enumerate(sim.traces)
    ]
    return summarize(counts, sim.decisions, sim.mean_backlog_bits, sim.slot)


# --- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    scheduler: str
    axis: str
    value: float
    rep: int
    seed: int
    alpha: float
    pbt_s: float
    metrics: RunMetrics


@dataclass(frozen=True)
class AggregateRow:
    scheduler: str
    axis: str
    value: float
    alpha: float
    pbt_s: float
    n: int
    mean_stalls: float
    stderr_stalls: float
    mean_psnr_db: float
    stderr_psnr_db: float
    mean_backlog_bits: float
    stderr_backlog_bits: float


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    aggregates: list[AggregateRow] = field(default_factory=list)


@dataclass(frozen=True)
class _Task:
    index: int
    cfg: RunConfig
    scheduler: SchedulerKind
    value: float | None
    rep: int
    pbts: tuple[float, ...]


def _execute(task: _Task) -> list[tuple[float, float, RunMetrics]]:
    """Run one simulation; returns (value, pbt, metrics) for every PBT evaluated."""
    try:
        sim = build_simulation(task.cfg, scheduler=task.scheduler)
        sim.run(task.cfg.num_slots)
    except ConfigError:
        raise
    except Exception as exc:  # re-raised with the run echoed
        raise RunError(
            f"run failed ({type(exc).__name__}: {exc}); scheduler={task.scheduler.value} "
            f"config={task.cfg.model_dump_json()}",
            task.cfg,
        ) from exc
    out = []
    for pbt in task.pbts:
        value = pbt if task.value is None else task.value
        out.append((value, pbt, metrics_for_pbt(sim, pbt)))
    return out


def _tasks(spec: SweepSpec) -> list[_Task]:
    base = spec.base
    tasks = []
    for sched in spec.scheduler_list:
        if spec.axis is SweepAxis.PBT:
            pbts = tuple(float(v) for v in spec.values)
            for rep in range(spec.repetitions):
                cfg = base.model_copy(update={"seed": derive_seed(base.seed, rep), "scheduler": sched})
                tasks.append(_Task(len(tasks), cfg, sched, None, rep, pbts))
            continue
        for value in spec.values:
            for rep in range(spec.repetitions):
                if spec.axis is SweepAxis.ALPHA:
                    streaming = base.streaming.model_copy(update={"alpha": float(value)})
                    cfg = base.model_copy(
                        update={"streaming": streaming, "seed": derive_seed(base.seed, rep), "scheduler": sched}
                    )
                else:
                    cfg = base.model_copy(update={"seed": derive_seed(int(value), rep), "scheduler": sched})
                tasks.append(_Task(len(tasks), cfg, sched, float(value), rep, (base.pbt_seconds,)))
    return tasks


def worker_count() -> int:
    env = os.environ.get(WORKERS_ENV)
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return cap


def _stderr(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def aggregate(rows: list[SweepRow], spec: SweepSpec) -> list[AggregateRow]:
    out = []
    keys: list[tuple[str, float]] = []
    for r in rows:
        if (r.scheduler, r.value) not in keys:
            keys.append((r.scheduler, r.value))
    for sched, value in keys:
        group = [r for r in rows if r.scheduler == sched and r.value == value]
        stalls = np.array([r.metrics.expected_stalls for r in group])
        psnr = np.array([r.metrics.avg_psnr_db for r in group])
        backlog = np.array([r.metrics.mean_backlog_bits for r in group])
        out.append(
            AggregateRow(
                scheduler=sched,
                axis=spec.axis.value,
                value=value,
                alpha=group[0].alpha,
                pbt_s=group[0].pbt_s,
                n=len(group),
                mean_stalls=float(stalls.mean()),
                stderr_stalls=_stderr(stalls),
                mean_psnr_db=float(psnr.mean()),
                stderr_psnr_db=_stderr(psnr),
                mean_backlog_bits=float(backlog.mean()),
                stderr_backlog_bits=_stderr(backlog),
            )
        )
    return out


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Run every (scheduler, value, repetition) combination.

    The PBT axis only changes the playout model, so each (scheduler,
    repetition) is simulated once and replayed for every PBT value. Results
    are ordered by task index whatever the completion order.
    """
    tasks = _tasks(spec)
    workers = workers or worker_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_execute, tasks))
    else:
        outputs = [_execute(t) for t in tasks]
    rows = []
    for task, out in zip(tasks, outputs):
        for value, pbt, m in out:
            rows.append(
                SweepRow(
                    scheduler=task.scheduler.value,
                    axis=spec.axis.value,
                    value=value,
                    rep=task.rep,
                    seed=task.cfg.seed,
                    alpha=task.cfg.streaming.alpha,
                    pbt_s=pbt,
                    metrics=m,
                )
            )
    # canonical order: scheduler, value, repetition
    sched_order = {s.value: i for i, s in enumerate(spec.scheduler_list)}
    value_order = {float(v): i for i, v in enumerate(spec.values)}
    rows.sort(key=lambda r: (sched_order[r.scheduler], value_order[r.value], r.rep))
    return SweepResult(spec, rows, aggregate(rows, spec))


# --- tables -----------------------------------------------------------------

RESULT_COLUMNS = [
    "row_type",
    "scheduler",
    "axis",
    "value",
    "rep",
    "seed",
    "alpha",
    "pbt_s",
    "n",
    "expected_stalls",
    "expected_stalls_stderr",
    "avg_psnr_db",
    "avg_psnr_db_stderr",
    "mean_backlog_bits",
    "mean_backlog_bits_stderr",
]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.9g" % float(x)
    return str(x)


def _write_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def run_rows(rows: list[SweepRow]) -> list[list]:
    return [
        [
            "run", r.scheduler, r.axis, r.value, r.rep, r.seed, r.alpha, r.pbt_s, 1,
            r.metrics.expected_stalls, None, r.metrics.avg_psnr_db, None, r.metrics.mean_backlog_bits, None,
        ]
        for r in rows
    ]


def results_csv(result: SweepResult) -> str:
    """Run rows followed by one ``mean`` row per (scheduler, value)."""
    agg = [
        [
            "mean", a.scheduler, a.axis, a.value, None, None, a.alpha, a.pbt_s, a.n,
            a.mean_stalls, a.stderr_stalls, a.mean_psnr_db, a.stderr_psnr_db,
            a.mean_backlog_bits, a.stderr_backlog_bits,
        ]
        for a in result.aggregates
    ]
    return _write_csv(RESULT_COLUMNS, run_rows(result.rows) + agg)


def single_run_csv(result: RunResult) -> str:
    cfg = result.config
    row = SweepRow(cfg.scheduler.value, "single", float("nan"), 0, cfg.seed, cfg.streaming.alpha, cfg.pbt_seconds, result.metrics)
    return _write_csv(RESULT_COLUMNS, run_rows([row]))


class PlotDataError(ValueError):
    pass


def emit_plot_data(result: SweepResult, kind: str) -> str:
    """Tidy CSV for one figure type, one series per scheduler, sorted by x."""
    if not result.aggregates:
        raise PlotDataError("no results to emit")
    if kind == "stall_vs_pbt":
        if result.spec.axis is not SweepAxis.PBT:
            raise PlotDataError("stall_vs_pbt needs a sweep over the pbt axis")
        series = _by_scheduler(result)
        out = [
            [a.scheduler, a.pbt_s, a.mean_stalls, a.stderr_stalls]
            for sched in series
            for a in sorted(series[sched], key=lambda a: a.pbt_s)
        ]
        return _write_csv(["scheduler", "pbt", "mean_stalls", "stderr"], out)
    if kind == "quality_vs_stalls":
        if result.spec.axis is not SweepAxis.ALPHA:
            raise PlotDataError("quality_vs_stalls needs a sweep over the alpha axis")
        series = _by_scheduler(result)
        out = [
            [a.scheduler, a.alpha, a.mean_stalls, a.mean_psnr_db]
            for sched in series
            for a in sorted(series[sched], key=lambda a: (a.mean_stalls, a.alpha))
        ]
        return _write_csv(["scheduler", "alpha", "mean_stalls", "mean_psnr_db"], out)
    raise PlotDataError(f"unknown plot kind {kind!r}")


def _by_scheduler(result: SweepResult) -> dict[str, list[AggregateRow]]:
    series: dict[str, list[AggregateRow]] = {}
    for a in result.aggregates:
        series.setdefault(a.scheduler, []).append(a)
    return series
