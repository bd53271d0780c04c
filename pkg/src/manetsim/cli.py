"""Command line front end: single runs and the experiment matrix."""

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

from . import engine, metrics
from .config import (ConfigError, PROTOCOLS, ScenarioConfig, load_config,
                     set1_config, set2_config)
from .mobility import Trace

MATRIX_NODES = (50, 100)
MATRIX_VMAX = (5.0, 10.0, 20.0, 30.0, 40.0, 50.0)
MATRIX_SESSIONS = (15, 30)


@dataclass(frozen=True)
class Cell:
    protocol: str
    node_count: int
    v_max: float
    session_count: int
    tpc: bool


def matrix_cells(protocols=PROTOCOLS, nodes=MATRIX_NODES, vmax=MATRIX_VMAX,
                 sessions=MATRIX_SESSIONS, tpc=(False, True)):
    return [Cell(p, n, v, s, t)
            for p in protocols for n in nodes for v in vmax
            for s in sessions for t in tpc]


def cell_config(cell: Cell, preset, seed, base=None):
    make = {"set1": set1_config, "set2": set2_config}.get(preset)
    if make is None:
        if base is None:
            raise ConfigError(f"unknown preset {preset!r} and no base config")
        cfg = base
    else:
        cfg = make()
    return cfg.replace(protocol=cell.protocol, node_count=cell.node_count,
                       v_max=cell.v_max, session_count=cell.session_count,
                       tpc=cell.tpc, seed=seed)


def _run_cell(args):
    cell, preset, seed, base = args
    cfg = cell_config(cell, preset, seed, base)
    result = engine.run(cfg)
    return cell, seed, metrics.compute_report(result)


def run_matrix(preset, replications, out_dir, cells=None, base_seed=1,
               base=None, workers=1):
    """Run every cell of the matrix with paired seeds and write CSV tables.

    Replication k uses seed base_seed + k for every cell, so all protocol and
    TPC variants of a cell replay the same mobility and the same sessions.
    Returns the list of (cell, seed, report) rows in deterministic order.
    """
    if cells is None:
        cells = matrix_cells()
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(cell, preset, base_seed + rep, base)
            for cell in cells for rep in range(replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))  # preserves job order
    else:
        rows = [_run_cell(job) for job in jobs]
    write_run_rows(rows, os.path.join(out_dir, "runs.csv"))
    write_comparison_table(rows, replications,
                           os.path.join(out_dir, "comparison.csv"))
    return rows


_METRIC_FIELDS = [f.name for f in fields(metrics.MetricsReport)]


def write_run_rows(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("protocol", "nodes", "sessions", "v_max", "tpc", "seed",
                    "metric", "value"))
        for cell, seed, report in rows:
            for name in _METRIC_FIELDS:
                value = getattr(report, name)
                w.writerow((cell.protocol, cell.node_count, cell.session_count,
                            repr(cell.v_max), int(cell.tpc), seed, name,
                            "" if value is None else repr(value)))


def write_comparison_table(rows, replications, path):
    """Tidy aggregated table: one row per cell-metric."""
    by_cell = {}
    for cell, _, report in rows:
        by_cell.setdefault(cell, []).append(report)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("protocol", "nodes", "sessions", "v_max", "tpc", "metric",
                    "mean", "stddev", "n_reps"))
        for cell, reports in by_cell.items():
            if len(reports) >= 2:
                mean, std = metrics.aggregate(reports)
            else:
                mean, std = reports[0], metrics.MetricsReport()
            for name in _METRIC_FIELDS:
                m, s = getattr(mean, name), getattr(std, name)
                w.writerow((cell.protocol, cell.node_count, cell.session_count,
                            repr(cell.v_max), int(cell.tpc), name,
                            "" if m is None else repr(m),
                            "" if s is None else repr(s), len(reports)))


# --- argument parsing ---------------------------------------------------------

def _add_scenario_flags(p):
    p.add_argument("--config", help="key = value scenario file; flags override")
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--nodes", type=int, dest="node_count")
    p.add_argument("--vmax", type=float, dest="v_max")
    p.add_argument("--sessions", type=int, dest="session_count")
    p.add_argument("--tpc", choices=("on", "off"))
    p.add_argument("--battery", type=float, dest="initial_battery")
    p.add_argument("--duration", type=float)
    p.add_argument("--kappa", type=float)


def _apply_flags(cfg, args):
    overrides = {}
    for name in ("protocol", "node_count", "v_max", "session_count",
                 "initial_battery", "duration", "kappa"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "tpc", None) is not None:
        overrides["tpc"] = args.tpc == "on"
    if getattr(args, "duration", None) is not None:
        overrides["until_first_failure"] = False
    overrides["seed"] = args.seed
    return cfg.replace(**overrides).validate()


def build_parser():
    parser = argparse.ArgumentParser(prog="manetsim",
                                     description="MANET routing comparison simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="execute a single scenario")
    _add_scenario_flags(runp)
    runp.add_argument("--preset", choices=("set1", "set2"))
    runp.add_argument("--seed", type=int, required=True)
    runp.add_argument("--out-dir", required=True)
    runp.add_argument("--trace-in", help="replay a mobility trace CSV")
    runp.add_argument("--trace-out", help="record the mobility trace CSV")
    runp.add_argument("--emit-packets", action="store_true")
    runp.add_argument("--emit-routes", action="store_true")

    matp = sub.add_parser("matrix", help="run the experiment matrix")
    matp.add_argument("--preset", choices=("set1", "set2"), required=True)
    matp.add_argument("--reps", type=int, default=1)
    matp.add_argument("--seed", type=int, required=True)
    matp.add_argument("--out-dir", required=True)
    matp.add_argument("--workers", type=int, default=1)
    matp.add_argument("--protocol", choices=PROTOCOLS, action="append")
    matp.add_argument("--nodes", type=int, action="append")
    matp.add_argument("--vmax", type=float, action="append")
    matp.add_argument("--sessions", type=int, action="append")
    matp.add_argument("--tpc", choices=("on", "off", "both"), default="both")
    return parser


def _cmd_run(args):
    if args.preset == "set1":
        cfg = set1_config()
    elif args.preset == "set2":
        cfg = set2_config()
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = ScenarioConfig()
    if args.config and args.preset:
        cfg = load_config(args.config)
    cfg = _apply_flags(cfg, args)
    os.makedirs(args.out_dir, exist_ok=True)
    trace = Trace.load(args.trace_in) if args.trace_in else None
    result = engine.run(cfg, trace=trace, trace_out=args.trace_out)
    report = metrics.compute_report(result)
    with open(os.path.join(args.out_dir, "metrics.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("metric", "value"))
        for name in _METRIC_FIELDS:
            value = getattr(report, name)
            w.writerow((name, "" if value is None else repr(value)))
    result.ledger.write_csv(os.path.join(args.out_dir, "ledger.csv"))
    if args.emit_packets:
        engine.write_packets_csv(result, os.path.join(args.out_dir, "packets.csv"))
    if args.emit_routes:
        engine.write_routes_csv(result, os.path.join(args.out_dir, "routes.csv"))
    return 0


def _cmd_matrix(args):
    tpc = {"on": (True,), "off": (False,), "both": (False, True)}[args.tpc]
    cells = matrix_cells(protocols=tuple(args.protocol or PROTOCOLS),
                         nodes=tuple(args.nodes or MATRIX_NODES),
                         vmax=tuple(args.vmax or MATRIX_VMAX),
                         sessions=tuple(args.sessions or MATRIX_SESSIONS),
                         tpc=tpc)
    run_matrix(args.preset, args.reps, args.out_dir, cells=cells,
               base_seed=args.seed, workers=args.workers)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_matrix(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
