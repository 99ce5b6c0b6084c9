"""D2D video streaming simulator: max-weight link scheduling with quality-aware chunk placement."""

from .config import ConfigError, RunConfig, SweepSpec, run_config_from_dict, sweep_spec_from_dict
from .core import ChannelGains, Link, LinkSet, QueueState, RadioParams, TimingConfig, queue_update
from .harness import emit_plot_data, results_csv, run_single, run_sweep
from .mwis import MwisProblem, MwisSolution, greedy_baseline, solve_exact, solve_message_passing
from .schedulers import SchedulerKind
from .topology import ConflictGraph, TopologyConfig, build_conflict_graph, generate_topology
from .traces import VideoTrace, generate_synthetic, load_trace, save_trace

__version__ = "0.1.0"

__all__ = [
    "ChannelGains",
    "ConfigError",
    "ConflictGraph",
    "Link",
    "LinkSet",
    "MwisProblem",
    "MwisSolution",
    "QueueState",
    "RadioParams",
    "RunConfig",
    "SchedulerKind",
    "SweepSpec",
    "TimingConfig",
    "TopologyConfig",
    "VideoTrace",
    "build_conflict_graph",
    "emit_plot_data",
    "generate_synthetic",
    "generate_topology",
    "greedy_baseline",
    "load_trace",
    "queue_update",
    "results_csv",
    "run_config_from_dict",
    "run_single",
    "run_sweep",
    "save_trace",
    "solve_exact",
    "solve_message_passing",
    "sweep_spec_from_dict",
]
