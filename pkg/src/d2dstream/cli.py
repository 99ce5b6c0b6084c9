"""Command line entry point: ``d2dstream {run,sweep,gen-trace,validate-trace,solve-mwis}``.

Exit codes: 0 success, 2 invalid configuration or input, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import ConfigError, SweepAxis, load_json, run_config_from_dict, sweep_spec_from_dict
from .harness import (
    PlotDataError,
    RunError,
    emit_plot_data,
    results_csv,
    run_single,
    run_sweep,
    single_run_csv,
)
from .mwis import (
    InstanceTooLarge,
    greedy_baseline,
    load_problem,
    solve_exact,
    solve_message_passing,
)
from .topology import topology_to_dict
from .traces import RateDistortionParams, TraceError, generate_synthetic, load_trace, save_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

PLOT_KIND = {SweepAxis.PBT: "stall_vs_pbt", SweepAxis.ALPHA: "quality_vs_stalls"}


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args: argparse.Namespace) -> int:
    doc = load_json(args.config) if args.config else {}
    cfg = run_config_from_dict(doc, args.set)
    result = run_single(cfg, record_slots=args.slots)
    out = _out_dir(args.out)
    sim = result.simulation
    (out / "config.json").write_text(cfg.model_dump_json(indent=2) + "\n")
    metrics = result.metrics.to_dict()
    metrics["scheduler"] = cfg.scheduler.value
    metrics["invariant_violations"] = sim.violations if cfg.check_invariants else None
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    (out / "results.csv").write_text(single_run_csv(result))
    (out / "topology.json").write_text(json.dumps(topology_to_dict(sim.links, sim.mean_gains), indent=2) + "\n")
    with open(out / "chunks.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link", "chunk", "mode", "psnr_db", "bits", "delivered_slot"])
        table = sim.delivery_table()
        for d in sim.decisions:
            w.writerow([d.link_id, d.chunk_index, d.chosen_mode, repr(d.psnr_db), repr(d.bits), table[d.link_id][d.chunk_index]])
    if args.slots:
        with open(out / "slots.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", "link", "active", "mu_bits", "backlog_bits"])
            for rec in sim.slot_log:
                for i in range(sim.num_links):
                    w.writerow([rec.slot, i, int(rec.active[i]), repr(float(rec.mu_bits[i])), repr(float(rec.backlog_bits[i]))])
    print(json.dumps(metrics))
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values: cannot parse {text!r}") from None


def cmd_sweep(args: argparse.Namespace) -> int:
    doc = load_json(args.config) if args.config else {}
    if "base" in doc or "axis" in doc:
        spec_doc = dict(doc)
    else:
        spec_doc = {"base": doc}
    if args.set:
        base = run_config_from_dict(spec_doc.get("base", {}), args.set)
        spec_doc["base"] = json.loads(base.model_dump_json())
    if args.axis:
        spec_doc["axis"] = args.axis
    if args.values:
        spec_doc["values"] = _parse_values(args.values)
    if args.reps is not None:
        spec_doc["repetitions"] = args.reps
    if args.schedulers:
        spec_doc["schedulers"] = [s for s in args.schedulers.split(",") if s]
    spec = sweep_spec_from_dict(spec_doc)
    result = run_sweep(spec, workers=args.workers)
    out = _out_dir(args.out)
    (out / "sweep.json").write_text(spec.model_dump_json(indent=2) + "\n")
    (out / "results.csv").write_text(results_csv(result))
    kind = PLOT_KIND.get(spec.axis)
    if kind:
        (out / f"{kind}.csv").write_text(emit_plot_data(result, kind))
    print(f"{len(result.rows)} runs written to {out}")
    return EXIT_OK


def cmd_gen_trace(args: argparse.Namespace) -> int:
    rd = RateDistortionParams.model_validate(load_json(args.rd)) if args.rd else RateDistortionParams()
    trace = generate_synthetic(args.chunks, args.modes, args.seed, rd, args.file_id or Path(args.out).stem, args.chunk_seconds)
    save_trace(trace, args.out)
    print(f"wrote {args.out} ({trace.num_chunks} chunks x {trace.num_modes} modes)")
    return EXIT_OK


def cmd_validate_trace(args: argparse.Namespace) -> int:
    trace = load_trace(args.path)
    print(f"ok: {trace.file_id} {trace.num_chunks} chunks x {trace.num_modes} modes")
    return EXIT_OK


def cmd_solve_mwis(args: argparse.Namespace) -> int:
    problem = load_problem(args.instance)
    if args.method == "exact":
        sol = solve_exact(problem)
    elif args.method == "greedy":
        sol = greedy_baseline(problem)
    else:
        sol = solve_message_passing(problem, args.max_iters, args.damping)
    print(
        json.dumps(
            {
                "method": args.method,
                "selected": [int(i) for i in sol.nodes],
                "total_weight": sol.total_weight,
                "exact": sol.exact,
                "iterations": sol.iterations,
                "converged": sol.converged,
            }
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="d2dstream", description="D2D video streaming scheduling simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one configuration")
    r.add_argument("--config", help="run configuration JSON (defaults if omitted)")
    r.add_argument("--set", action="append", default=[], metavar="PATH=VALUE", help="override a config field")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--slots", action="store_true", help="also write the per-slot log")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--config", help="sweep spec JSON, or a run config used as the base")
    s.add_argument("--set", action="append", default=[], metavar="PATH=VALUE", help="override a base config field")
    s.add_argument("--axis", choices=[a.value for a in SweepAxis])
    s.add_argument("--values", help="comma-separated axis values")
    s.add_argument("--reps", type=int, help="repetitions per point")
    s.add_argument("--schedulers", help="comma-separated scheduler names")
    s.add_argument("--workers", type=int, help="worker processes (default: D2DSTREAM_WORKERS or CPU count)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-trace", help="write a synthetic trace (CSV + JSON sidecar)")
    g.add_argument("--chunks", type=int, required=True)
    g.add_argument("--modes", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--chunk-seconds", type=float, default=0.5)
    g.add_argument("--file-id")
    g.add_argument("--rd", help="rate-distortion parameters JSON")
    g.add_argument("--out", required=True, help="CSV path; the sidecar goes next to it")
    g.set_defaults(func=cmd_gen_trace)

    v = sub.add_parser("validate-trace", help="check a trace file")
    v.add_argument("path")
    v.set_defaults(func=cmd_validate_trace)

    m = sub.add_parser("solve-mwis", help="solve a weighted independent set instance")
    m.add_argument("instance", help="JSON with num_nodes, adjacency, weights")
    m.add_argument("--method", choices=["mp", "exact", "greedy"], default="mp")
    m.add_argument("--max-iters", type=int, default=200)
    m.add_argument("--damping", type=float, default=0.5)
    m.set_defaults(func=cmd_solve_mwis)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceError, PlotDataError, InstanceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
