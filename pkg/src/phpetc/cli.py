"""Command line front end.

Verbs: certify (one LMI cell), simulate (one run), table1 (threshold
frontier over the delay-bound axis), table2 (metrics over the threshold
axis, delay-free by default), table3 (metrics over the delay axis), sweep
(full grid). Every verb reads one scenario file, writes its artifacts under
the output directory and records them in a run manifest.

Exit codes: 0 success, 2 configuration error, 3 solver undecided or
misbehaving, 4 simulation divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .artifacts import (
    run_name,
    write_manifest,
    write_markdown_table,
    write_table_csv,
)
from .config import (
    Scenario,
    build_model,
    derive_seed,
    load_scenario,
    trigger_config,
    vertex_bounds,
)
from .errors import (
    ConfigError,
    NoFeasiblePoint,
    NonFiniteState,
    SolverFailure,
    ToolkitError,
)
from .lmi import UNDECIDED, certify_polytopic, sigma_max
from .sim import simulate, trace_to_csv
from .trigger import events_to_csv

_METRIC_COLS = ("avg_inter_event", "ISE", "IAE", "ITAE")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phpetc",
        description="Simulate and certify event-triggered interconnections "
                    "of port-Hamiltonian systems over a delayed channel.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (
        ("certify", "decide the stability LMIs at the configured cell"),
        ("simulate", "integrate one run and export its trace"),
        ("table1", "largest certified threshold per delay bound"),
        ("table2", "run metrics across the threshold axis (delay-free default)"),
        ("table3", "run metrics across the delay axis"),
        ("sweep", "simulate the full threshold x delay x seed grid"),
    ):
        p = sub.add_parser(verb, help=text)
        p.add_argument("--config", metavar="PATH", default=None,
                       help="scenario TOML file (defaults cover the built-in pendulum)")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (overrides [output].dir)")
        p.add_argument("--seed", metavar="U64", type=int, default=None,
                       help="root seed (overrides [network].seed)")
        p.add_argument("--jobs", metavar="N", type=int, default=1,
                       help="worker threads for sweep cells")
    return parser


def _scenario(args) -> Scenario:
    sc = load_scenario(args.config)
    updates = {}
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        updates["seed"] = args.seed
    if updates:
        sc = dataclasses.replace(sc, **updates)
    return sc


def _outdir(sc: Scenario) -> Path:
    out = Path(sc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario_desc(sc: Scenario) -> dict:
    desc = dataclasses.asdict(sc)
    desc.pop("provided")
    for key, value in list(desc.items()):
        if isinstance(value, tuple):
            desc[key] = list(value)
        elif isinstance(value, np.ndarray):
            desc[key] = value.tolist()
    parts = desc.get("linear_parts")
    if parts:
        desc["linear_parts"] = {k: np.asarray(v).tolist() for k, v in parts.items()}
    return desc


def _run_cells(cells, worker, jobs: int):
    """Evaluate worker over the cells, optionally on a thread pool.

    Results come back in cell order regardless of completion order, so the
    assembled tables do not depend on scheduling.
    """
    if jobs <= 1 or len(cells) <= 1:
        return [worker(c) for c in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, cells))


def cmd_certify(args) -> int:
    sc = _scenario(args)
    model = build_model(sc)
    cfg = trigger_config(sc)
    out = _outdir(sc)
    started = time.perf_counter()
    cert = certify_polytopic(model, cfg.delta_M, cfg.sigma, vertex_bounds(sc),
                             validity_radius=sc.validity_radius)
    elapsed = time.perf_counter() - started
    cert_path = out / "certificate.json"
    cert.to_json(cert_path)
    write_manifest(out / "run_manifest.json", "certify", _scenario_desc(sc),
                   [{"path": cert_path.name, "kind": "certificate",
                     "params": {"delta_M": cert.delta_M, "sigma": cert.sigma,
                                "alpha": cert.alpha, "eps": cert.eps}}],
                   timing={"certify": elapsed})
    alpha = "none" if cert.alpha is None else f"{cert.alpha:g}"
    print(f"verdict: {cert.verdict} at delta_M = {cert.delta_M:g}, "
          f"sigma = {cert.sigma:g} (alpha = {alpha})")
    print(f"wrote {cert_path}")
    return 0 if cert.verdict != UNDECIDED else 3


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    model = build_model(sc)
    cfg = trigger_config(sc)
    out = _outdir(sc)
    trace = simulate(model, cfg, sc.x0, sc.T, sc.dt)
    name = run_name(sc.model_kind, cfg.sigma, cfg.tau_M, sc.seed)
    trace_path = out / f"{name}.csv"
    events_path = out / f"{name}_events.csv"
    trace_to_csv(trace, trace_path)
    events_to_csv(trace.log, events_path)
    params = {"sigma": cfg.sigma, "tau_m": cfg.tau_m, "tau_M": cfg.tau_M,
              "h": cfg.h, "seed": sc.seed, "T": sc.T, "dt": sc.dt}
    write_manifest(out / "run_manifest.json", "simulate", _scenario_desc(sc),
                   [{"path": trace_path.name, "kind": "trace", "params": params},
                    {"path": events_path.name, "kind": "events", "params": params}])
    final = float(np.linalg.norm(trace.states[-1]))
    print(f"transmissions: {trace.log.transmission_count}, "
          f"final state norm: {final:.3e}")
    print(", ".join(f"{k} = {v:.6g}" for k, v in trace.indices.items()))
    print(f"wrote {trace_path}")
    return 0


def cmd_table1(args) -> int:
    sc = _scenario(args)
    model = build_model(sc)
    bounds = vertex_bounds(sc)
    out = _outdir(sc)
    axis = sorted(sc.delta_M_axis)

    def worker(delta_M: float):
        started = time.perf_counter()
        try:
            smax = sigma_max(model, delta_M, vertex_bounds=bounds)
            cert = certify_polytopic(model, delta_M, smax, bounds,
                                     validity_radius=sc.validity_radius)
            alpha = cert.alpha if cert.feasible else None
            result = (smax, alpha)
        except NoFeasiblePoint:
            result = (None, None)
        return result + (time.perf_counter() - started,)

    results = _run_cells(axis, worker, args.jobs)
    rows = [(dM, smax, alpha) for dM, (smax, alpha, _) in zip(axis, results)]
    md_rows = [(dM, smax, alpha, dt_) for dM, (smax, alpha, dt_) in zip(axis, results)]

    csv_path = out / "table1.csv"
    md_path = out / "table1.md"
    write_table_csv(csv_path, ["delta_M", "sigma_max", "alpha"], rows)
    write_markdown_table(md_path, "Largest certified threshold per delay bound",
                         ["delta_M", "sigma_max", "alpha", "solve_time_s"], md_rows)
    write_manifest(out / "run_manifest.json", "table1", _scenario_desc(sc),
                   [{"path": csv_path.name, "kind": "table",
                     "params": {"axis": list(axis)}},
                    {"path": md_path.name, "kind": "markdown",
                     "params": {"axis": list(axis)}}],
                   timing={f"delta_M={dM:g}": r[2] for dM, r in zip(axis, results)})
    for dM, (smax, alpha, _) in zip(axis, results):
        shown = "-" if smax is None else f"{smax:.4g}"
        print(f"delta_M = {dM:g}: sigma_max = {shown}")
    print(f"wrote {csv_path}")
    return 0


def _metric_row(trace) -> list:
    return [trace.indices[k] for k in _METRIC_COLS]


def _simulate_cell(sc: Scenario, model, out: Path, *, h: float, sigma: float,
                   tau_m: float, tau_M: float, seed_idx: int):
    """One sweep cell: simulate, export the trace, return the table row tail.

    Divergent cells are flagged rather than fatal: the row carries status
    "diverged" with empty metrics.
    """
    run_seed = derive_seed(sc.seed, sigma, tau_M, seed_idx)
    cfg = trigger_config(sc, h=h, sigma=sigma, tau_m=min(tau_m, tau_M),
                         tau_M=tau_M, seed=run_seed)
    traces_dir = out / "traces"
    traces_dir.mkdir(exist_ok=True)
    name = run_name(sc.model_kind, sigma, tau_M, seed_idx)
    path = traces_dir / f"{name}.csv"
    params = {"sigma": sigma, "tau_m": cfg.tau_m, "tau_M": tau_M, "h": h,
              "seed": seed_idx, "derived_seed": run_seed, "T": sc.T, "dt": sc.dt}
    try:
        trace = simulate(model, cfg, sc.x0, sc.T, sc.dt)
    except NonFiniteState:
        return ["diverged", None, None, None, None], None, params
    trace_to_csv(trace, path)
    artifact = {"path": f"traces/{path.name}", "kind": "trace", "params": params}
    return ["ok"] + _metric_row(trace), artifact, params


def _metrics_table(sc: Scenario, args, verb: str, axis_name: str, cells,
                   cell_kw) -> int:
    """Shared body of table2/table3/sweep: simulate cells, emit artifacts."""
    model = build_model(sc)
    out = _outdir(sc)

    def worker(cell):
        return _simulate_cell(sc, model, out, **cell_kw(cell))

    results = _run_cells(cells, worker, args.jobs)

    header = [axis_name] if isinstance(axis_name, str) else list(axis_name)
    header += ["seed", "status", *_METRIC_COLS]
    rows = []
    artifacts = []
    for cell, (tail, artifact, _) in zip(cells, results):
        key = cell[:-1]
        rows.append(list(key) + [cell[-1]] + tail)
        if artifact is not None:
            artifacts.append(artifact)

    csv_path = out / f"{verb}.csv"
    md_path = out / f"{verb}.md"
    titles = {
        "table2": "Metrics across the trigger threshold axis",
        "table3": "Metrics across the delay bound axis",
        "sweep": "Metrics across the full sweep grid",
    }
    write_table_csv(csv_path, header, rows)
    write_markdown_table(md_path, titles[verb], header, rows)
    artifacts += [
        {"path": csv_path.name, "kind": "table", "params": {}},
        {"path": md_path.name, "kind": "markdown", "params": {}},
    ]
    write_manifest(out / "run_manifest.json", verb, _scenario_desc(sc), artifacts)
    print(f"{len(rows)} rows -> {csv_path}")
    return 0


def cmd_table2(args) -> int:
    sc = _scenario(args)
    h = sc.h if sc.was_set("trigger.h") else 0.3
    tau_m = sc.tau_m if sc.was_set("network.tau_m") else 0.0
    tau_M = sc.tau_M if sc.was_set("network.tau_M") else 0.0
    cells = [(sigma, seed) for sigma in sorted(sc.sigma_axis)
             for seed in sc.seeds]
    return _metrics_table(
        sc, args, "table2", "sigma", cells,
        lambda cell: dict(h=h, sigma=cell[0], tau_m=tau_m, tau_M=tau_M,
                          seed_idx=cell[1]))


def cmd_table3(args) -> int:
    sc = _scenario(args)
    h = sc.h if sc.was_set("trigger.h") else 0.2
    sigma = sc.sigma if sc.was_set("trigger.sigma") else 0.2
    tau_m = sc.tau_m if sc.was_set("network.tau_m") else 0.01
    cells = [(tau_M, seed) for tau_M in sorted(sc.tau_M_axis)
             for seed in sc.seeds]
    return _metrics_table(
        sc, args, "table3", "tau_M", cells,
        lambda cell: dict(h=h, sigma=sigma, tau_m=tau_m, tau_M=cell[0],
                          seed_idx=cell[1]))


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    tau_m = sc.tau_m if sc.was_set("network.tau_m") else 0.01
    cells = [(sigma, tau_M, seed) for sigma in sorted(sc.sigma_axis)
             for tau_M in sorted(sc.tau_M_axis) for seed in sc.seeds]
    return _metrics_table(
        sc, args, "sweep", ("sigma", "tau_M"), cells,
        lambda cell: dict(h=sc.h, sigma=cell[0], tau_m=tau_m, tau_M=cell[1],
                          seed_idx=cell[2]))


_COMMANDS = {
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "table3": cmd_table3,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except NonFiniteState as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return 4
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
