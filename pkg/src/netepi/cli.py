"""Command-line entry point ``netepi``.

Exit codes: 0 success, 1 input error, 2 validation failure, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .equilibria import REPORT_FIELDS, analyze, compute_r0_closed, format_value
from .errors import (
    ConvergenceFailure,
    NoBracket,
    NotConnected,
    ParameterError,
    ParseError,
    UnstableStep,
)
from .graph import build_laplacian, check_connected, load_matrix_market
from .model import COMPARTMENTS
from .scenario import Scenario, load_scenario
from .simulation import integrate, monitor_for

EXIT_OK, EXIT_INPUT, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3

SWEEPABLE = ("epsilon", "sigma", "xi", "eta", "p", "r", "beta", "beta_over_N", "gamma")

SWEEP_FIELDS = (
    "param", "value", "R0", "peak_total_I", "peak_total_time",
    "peak_node_I", "peak_node", "peak_node_time", "far_peak_I",
    "converged_at", "descent_ok", "error",
)


def thread_cap() -> int:
    raw = os.environ.get("NETEPI_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def _load_graph(sc: Scenario):
    g = load_matrix_market(sc.graph_path, sc.coords_path)
    return g, build_laplacian(g)


def cmd_validate_graph(args) -> int:
    g = load_matrix_market(args.path, args.coords)
    L = build_laplacian(g)
    connected = check_connected(g)
    print(f"nodes = {g.node_count}")
    print(f"edges = {g.edge_count}")
    print(f"laplacian_nnz = {L.nnz}")
    print(f"connected = {format_value(connected)}")
    if g.edge_count:
        print(f"weight_min = {format_value(float(g.w.min()))}")
        print(f"weight_max = {format_value(float(g.w.max()))}")
    return EXIT_OK if connected else EXIT_INVALID


def cmd_equilibria(args) -> int:
    sc = load_scenario(args.scenario)
    L = _load_graph(sc)[1] if args.spectral else None
    report = analyze(sc.params, L)
    sys.stdout.write(report.to_text())
    if args.csv:
        row = report.as_row()
        if args.csv == "-":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(REPORT_FIELDS)
            writer.writerow([format_value(row[k]) for k in REPORT_FIELDS])
            sys.stdout.write(buf.getvalue())
        else:
            write_csv(args.csv, REPORT_FIELDS, [[row[k] for k in REPORT_FIELDS]])
    return EXIT_OK


def _timeseries_rows(traj, per_node):
    for k, t in enumerate(traj.times):
        agg = traj.aggregates[k]
        row = [t]
        for c in range(4):
            row += [agg[c, 0], agg[c, 1], agg[c, 2]]
        if per_node:
            snap = traj.snapshots[k]
            for name in COMPARTMENTS:
                row += getattr(snap, name).tolist()
        yield row


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    if args.source_node is not None:
        sc = sc.with_source_node(args.source_node)
    g, L = _load_graph(sc)
    n = g.node_count
    out = Path(args.out or sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    per_node = n <= 64
    cfg = dataclasses.replace(sc.integrator, keep_snapshots=per_node)
    want = set(sc.artifacts)
    monitor, kind = monitor_for(sc.params, sc.lyapunov)
    initial = sc.initial_state(n)
    traj = integrate(sc.params, L, initial, cfg, lyapunov=monitor,
                     capture_times=sc.snapshot_times if "snapshots" in want else ())

    if "timeseries" in want:
        header = ["t"] + [f"{c}_{stat}" for c in COMPARTMENTS for stat in ("sum", "max", "min")]
        if per_node:
            header += [f"{c}_{k}" for c in COMPARTMENTS for k in range(1, n + 1)]
        write_csv(out / "timeseries.csv", header, _timeseries_rows(traj, per_node))
    if "snapshots" in want:
        xy = g.coords if g.coords is not None else np.full((n, 2), np.nan)
        for t_req, st in traj.captured.items():
            rows = ([k + 1, xy[k, 0], xy[k, 1], st.S[k], st.V[k], st.I[k], st.R[k]]
                    for k in range(n))
            write_csv(out / f"snapshot_t{t_req:g}.csv", ["node", "x", "y", "S", "V", "I", "R"], rows)
    if "lyapunov" in want and traj.lyapunov_series is not None:
        write_csv(out / "lyapunov.csv", ["t", "L", "monitor"],
                  ([t, v, kind] for t, v in traj.lyapunov_series))
    if "equilibria_report" in want:
        report = analyze(sc.params)
        (out / "equilibria.txt").write_text(report.to_text())
        row = report.as_row()
        write_csv(out / "equilibria.csv", REPORT_FIELDS, [[row[k] for k in REPORT_FIELDS]])

    cert = traj.certificate
    pk = traj.peaks
    report = {
        "scenario": sc.name,
        "nodes": n,
        "steps": traj.steps,
        "t_final": traj.times[-1],
        "R0_closed": compute_r0_closed(sc.params),
        "convergence_target": sc.integrator.convergence_target,
        "converged_at": traj.converged_at,
        "monitor": kind,
        "descent_ok": cert.descent_ok if cert else None,
        "first_violation": None if not cert or not cert.first_violation
        else f"t={format_value(cert.first_violation[0])} dL={format_value(cert.first_violation[1])}",
        "lyapunov_undefined": cert.undefined if cert else None,
        "clamp_count": traj.clamp_count,
        "max_total_drift": traj.max_total_drift,
        "peak_node_I": pk.node_value,
        "peak_node": pk.node_index + 1,
        "peak_node_time": pk.node_time,
        "peak_total_I": pk.total_value,
        "peak_total_time": pk.total_time,
    }
    (out / "run_report.txt").write_text(
        "".join(f"{k} = {format_value(v)}\n" for k, v in report.items()))
    print(f"wrote {out}")
    return EXIT_OK


def hop_distances(L, source: int) -> np.ndarray:
    """Unweighted graph distance (in edges) from a 0-based source node."""
    return shortest_path(abs(L.matrix), directed=False, unweighted=True, indices=source)


def _sweep_one(job):
    sc, L, name, value, far_mask = job
    row = dict.fromkeys(SWEEP_FIELDS)
    row["param"], row["value"] = name, value
    try:
        if name == "beta_over_N":
            params = sc.params.replace(beta=value / sc.params.N)
        else:
            params = sc.params.replace(**{name: value})
        row["R0"] = compute_r0_closed(params)
        cfg = sc.integrator
        if cfg.convergence_target != "none":
            target = "dfe" if row["R0"] < 1 else "endemic"
            cfg = dataclasses.replace(cfg, convergence_target=target)
        cfg = dataclasses.replace(cfg, keep_snapshots=False)
        monitor, _ = monitor_for(params, sc.lyapunov)
        traj = integrate(params, L, sc.initial_state(L.n), cfg, lyapunov=monitor)
        pk = traj.peaks
        row.update(peak_total_I=pk.total_value, peak_total_time=pk.total_time,
                   peak_node_I=pk.node_value, peak_node=pk.node_index + 1,
                   peak_node_time=pk.node_time, converged_at=traj.converged_at,
                   far_peak_I=float(pk.node_peak[far_mask].max()) if far_mask.any() else None,
                   descent_ok=traj.certificate.descent_ok if traj.certificate else None)
    except Exception as exc:  # recorded per row; the sweep carries on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(sc: Scenario, L, name: str, values, far_hops: int = 10, workers=None):
    """One simulation per value; rows come back in the order of ``values``."""
    if name not in SWEEPABLE:
        raise ParseError(f"cannot sweep {name!r}; choose from {', '.join(SWEEPABLE)}")
    for v in values:
        if name == "beta_over_N":
            sc.params.replace(beta=v / sc.params.N)
        else:
            sc.params.replace(**{name: v})
    if sc.source_node is not None:
        far_mask = hop_distances(L, sc.source_node - 1) >= far_hops
    else:
        far_mask = np.zeros(L.n, dtype=bool)
    jobs = [(sc, L, name, float(v), far_mask) for v in values]
    workers = min(len(jobs), workers or thread_cap())
    if workers <= 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_one, jobs))


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ParseError(f"--values must be comma separated numbers: {args.values!r}") from None
    _, L = _load_graph(sc)
    if not check_connected(L):
        raise NotConnected("simulation requires a connected graph")
    rows = run_sweep(sc, L, args.param, values, far_hops=args.far_hops)
    out = Path(args.out or sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{args.param}.csv"
    write_csv(path, SWEEP_FIELDS, ([r[k] for k in SWEEP_FIELDS] for r in rows))
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netepi", description="SVIRS epidemics on weighted networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-graph", help="summarize and check a Matrix Market graph")
    p.add_argument("path")
    p.add_argument("--coords", help="optional 'x y' coordinates file")
    p.set_defaults(func=cmd_validate_graph)

    p = sub.add_parser("equilibria", help="equilibria and R0 for a scenario")
    p.add_argument("scenario")
    p.add_argument("--spectral", action="store_true",
                   help="also compute R0 from the next-generation matrix on the graph")
    p.add_argument("--csv", help="write the report as CSV to this path ('-' for stdout)")
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("simulate", help="integrate a scenario and write run artifacts")
    p.add_argument("scenario")
    p.add_argument("--out", help="output directory (overrides the scenario)")
    p.add_argument("--source-node", type=int, help="move the first seed to this 1-based node")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="one run per parameter value")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, choices=SWEEPABLE)
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--out", help="output directory (overrides the scenario)")
    p.add_argument("--far-hops", type=int, default=10,
                   help="nodes at least this many edges from the source count as far (default 10)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ParameterError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NotConnected as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (UnstableStep, ConvergenceFailure, NoBracket) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
