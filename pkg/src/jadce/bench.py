"""Benchmark harness: declarative sweep configs, execution, and data emission.

A bench config is an INI file with three sections::

    [instance]
    devices = 500, 1000, 2000   ; any of these four may be a sweep list
    antennas = 100
    seq_length = 10
    active = 50
    noise_var = 0.01            ; optional, with signature_var / channel_var

    [solve]
    solvers = aladin, admm, fista, proxgrad
    gamma_scale = 0.5
    rho_scale = 0.8
    tol = 1e-5
    max_iter = 20000
    threads = 1
    deterministic = false

    [bench]
    seeds = 0:30                ; "a:b" range or a comma list
    repetitions = 1
    jobs = 1
    output = bench_out

Each (instance config, seed, solver, repetition) cell regenerates its
instance, solves, and contributes one row to ``runs.csv``.  Aggregates are
written to ``fig1_<solver>.csv`` (iteration vs. objective gap and step
norm on the first seed of the largest sweep point), ``fig2.csv`` (devices
vs. median iterations per solver), ``table1.csv`` (per-iteration time
split at the largest sweep point), and ``report.json``.
"""

import configparser
import csv
import hashlib
import json
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import metrics, solvers
from .errors import ConfigError
from .instance import InstanceConfig, generate, to_problem

ENV_OUTPUT_DIR = "JADCE_OUTPUT_DIR"
RUNS_HEADER = [
    "devices", "antennas", "seq_length", "active", "seed", "rep", "solver",
    "status", "iterations", "final_objective", "kkt_residual", "gamma",
    "gamma_max", "missed_detection_rate", "false_alarm_rate", "nmse",
    "wall_s", "parallel_ms_per_iter", "consensus_ms_per_iter",
    "config_hash", "version", "error",
]


@dataclass
class BenchConfig:
    devices: list
    antennas: list
    seq_lengths: list
    actives: list
    signature_var: float
    noise_var: float
    channel_var: float
    solvers: list
    gamma_scale: float
    rho_scale: float
    tol: float
    max_iter: int
    threads: int
    deterministic: bool
    seeds: list
    repetitions: int
    jobs: int
    output_dir: str | None
    allow_solver_threads: bool = False
    trace_every: int = 0

    def validate(self):
        if not self.solvers:
            raise ConfigError("bench config selects no solvers")
        unknown = sorted(set(self.solvers) - set(solvers.SOLVERS))
        if unknown:
            raise ConfigError(f"unknown solvers {unknown}; available: {sorted(solvers.SOLVERS)}")
        if not self.seeds:
            raise ConfigError("bench config lists no seeds")
        if self.repetitions < 1 or self.jobs < 1:
            raise ConfigError("repetitions and jobs must be >= 1")


def _parse_int_list(text):
    out = []
    for tok in text.replace(",", " ").split():
        out.append(int(tok))
    return out


def _parse_seeds(text):
    text = text.strip()
    if ":" in text and "," not in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return _parse_int_list(text)


def _parse_name_list(text):
    return [tok for tok in text.replace(",", " ").split() if tok]


def read_config(path):
    """Parse a bench config file into a :class:`BenchConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    found = parser.read(path)
    if not found:
        raise ConfigError(f"config file {path} not found or unreadable")
    try:
        inst = parser["instance"]
    except KeyError:
        raise ConfigError("config file has no [instance] section") from None
    solve_sec = parser["solve"] if parser.has_section("solve") else {}
    bench_sec = parser["bench"] if parser.has_section("bench") else {}

    def fget(sec, key, default):
        return float(sec.get(key, default))

    try:
        cfg = BenchConfig(
            devices=_parse_int_list(inst.get("devices", "")),
            antennas=_parse_int_list(inst.get("antennas", "")),
            seq_lengths=_parse_int_list(inst.get("seq_length", "")),
            actives=_parse_int_list(inst.get("active", "")),
            signature_var=fget(inst, "signature_var", 1.0),
            noise_var=fget(inst, "noise_var", 0.01),
            channel_var=fget(inst, "channel_var", 1.0),
            solvers=_parse_name_list(solve_sec.get("solvers", "aladin, admm, fista, proxgrad")),
            gamma_scale=fget(solve_sec, "gamma_scale", 0.5),
            rho_scale=fget(solve_sec, "rho_scale", 0.8),
            tol=fget(solve_sec, "tol", 1e-5),
            max_iter=int(solve_sec.get("max_iter", 20000)),
            threads=int(solve_sec.get("threads", 1)),
            deterministic=str(solve_sec.get("deterministic", "false")).lower() in ("1", "true", "yes"),
            seeds=_parse_seeds(bench_sec.get("seeds", "0")),
            repetitions=int(bench_sec.get("repetitions", 1)),
            jobs=int(bench_sec.get("jobs", 1)),
            output_dir=bench_sec.get("output", None),
            allow_solver_threads=str(bench_sec.get("allow_solver_threads", "false")).lower()
            in ("1", "true", "yes"),
            trace_every=int(bench_sec.get("trace_every", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"malformed value in config file: {exc}") from exc
    for name, values in (
        ("devices", cfg.devices),
        ("antennas", cfg.antennas),
        ("seq_length", cfg.seq_lengths),
        ("active", cfg.actives),
    ):
        if not values:
            raise ConfigError(f"[instance] {name} must list at least one value")
    cfg.validate()
    return cfg


def instance_config_from(cfg, devices, antennas, seq_length, active, seed):
    return InstanceConfig(
        n_devices=devices,
        n_antennas=antennas,
        seq_length=seq_length,
        n_active=active,
        signature_var=cfg.signature_var,
        noise_var=cfg.noise_var,
        channel_var=cfg.channel_var,
        seed=seed,
    )


def config_hash(cfg):
    """Short stable digest of a bench config (ties output rows to their config)."""
    payload = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:12]


def _per_iter_ms(values):
    """Median per-iteration milliseconds, skipping the first 5 warm-up iterations."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size > 5:
        arr = arr[5:]
    if arr.size == 0:
        return 0.0
    return float(np.median(arr)) * 1e3


def run_cell(cell):
    """Execute one (instance, seed, solver, repetition) cell; never raises."""
    from . import __version__

    row = {key: "" for key in RUNS_HEADER}
    row.update(
        devices=cell["devices"], antennas=cell["antennas"],
        seq_length=cell["seq_length"], active=cell["active"],
        seed=cell["seed"], rep=cell["rep"], solver=cell["solver"],
        config_hash=cell["config_hash"], version=__version__,
    )
    try:
        icfg = InstanceConfig(
            n_devices=cell["devices"], n_antennas=cell["antennas"],
            seq_length=cell["seq_length"], n_active=cell["active"],
            signature_var=cell["signature_var"], noise_var=cell["noise_var"],
            channel_var=cell["channel_var"], seed=cell["seed"],
        )
        inst = generate(icfg)
        problem = to_problem(inst, gamma_scale=cell["gamma_scale"])
        opts = solvers.SolverOptions(
            rho_scale=cell["rho_scale"], tol=cell["tol"],
            max_iterations=cell["max_iter"], trace_every=cell["trace_every"],
            threads=cell["threads"], deterministic=cell["deterministic"],
        )
        report = solvers.solve(problem, cell["solver"], opts)
        det = metrics.detect(report.final_x, inst)
        row.update(
            status=report.status,
            iterations=report.iterations,
            final_objective=repr(metrics.objective(problem, report.final_x)),
            kkt_residual=repr(metrics.kkt_residual(problem, report.final_x)),
            gamma=repr(problem.gamma),
            gamma_max=repr(problem.gamma_max),
            missed_detection_rate=repr(det.missed_detection_rate),
            false_alarm_rate=repr(det.false_alarm_rate),
            nmse=repr(metrics.nmse(report.final_x, inst)),
            wall_s=repr(report.wall_s),
            parallel_ms_per_iter=repr(_per_iter_ms(report.parallel_s)),
            consensus_ms_per_iter=repr(_per_iter_ms(report.consensus_s)),
        )
    except Exception as exc:  # partial failures become rows, the sweep continues
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def _cells(cfg):
    digest = config_hash(cfg)
    threads = cfg.threads
    if cfg.jobs > 1 and not cfg.allow_solver_threads:
        threads = 1
    for devices, antennas, seq_length, active in product(
        cfg.devices, cfg.antennas, cfg.seq_lengths, cfg.actives
    ):
        for seed in cfg.seeds:
            for solver in cfg.solvers:
                for rep in range(cfg.repetitions):
                    yield {
                        "devices": devices, "antennas": antennas,
                        "seq_length": seq_length, "active": active,
                        "seed": seed, "solver": solver, "rep": rep,
                        "signature_var": cfg.signature_var,
                        "noise_var": cfg.noise_var,
                        "channel_var": cfg.channel_var,
                        "gamma_scale": cfg.gamma_scale,
                        "rho_scale": cfg.rho_scale,
                        "tol": cfg.tol, "max_iter": cfg.max_iter,
                        "trace_every": 0,
                        "threads": threads,
                        "deterministic": cfg.deterministic,
                        "config_hash": digest,
                    }


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _emit_fig1(cfg, outdir):
    """Convergence curves (objective gap and step norm) on one instance."""
    devices = max(cfg.devices)
    icfg = instance_config_from(
        cfg, devices, max(cfg.antennas), max(cfg.seq_lengths), max(cfg.actives),
        cfg.seeds[0],
    )
    inst = generate(icfg)
    problem = to_problem(inst, gamma_scale=cfg.gamma_scale)
    base = dict(
        rho_scale=cfg.rho_scale, max_iterations=cfg.max_iter,
        threads=1, deterministic=cfg.deterministic,
    )
    ref = solvers.aladin_solve(
        problem,
        solvers.SolverOptions(tol=min(cfg.tol * 1e-4, 1e-9), trace_every=0, **base),
    )
    best = metrics.objective(problem, ref.final_x)
    reports = {}
    for name in cfg.solvers:
        report = solvers.solve(
            problem, name, solvers.SolverOptions(tol=cfg.tol, trace_every=1, **base)
        )
        reports[name] = report
        best = min(best, metrics.objective(problem, report.final_x))
    for name, report in reports.items():
        rows = [
            (row.iteration, repr(max(row.objective - best, 0.0)), repr(row.max_step))
            for row in report.trace
        ]
        _write_csv(outdir / f"fig1_{name}.csv", ["iter", "objective_gap", "max_step"], rows)


def _emit_fig2(cfg, rows, outdir):
    table = []
    for devices in sorted(set(cfg.devices)):
        for name in cfg.solvers:
            iters = [
                int(r["iterations"])
                for r in rows
                if r["solver"] == name and r["devices"] == devices and r["status"] != "error"
            ]
            if not iters:
                continue
            lo, hi = np.percentile(iters, [25, 75])
            table.append(
                (
                    devices, name,
                    repr(float(statistics.median(iters))),
                    repr(float(statistics.fmean(iters))),
                    repr(float(hi - lo)),
                    len(iters),
                )
            )
    _write_csv(
        outdir / "fig2.csv",
        ["devices", "solver", "median_iterations", "mean_iterations", "iqr_iterations", "runs"],
        table,
    )


def _emit_table1(cfg, rows, outdir):
    devices = max(cfg.devices)
    table = []
    for name in cfg.solvers:
        par = [
            float(r["parallel_ms_per_iter"])
            for r in rows
            if r["solver"] == name and r["devices"] == devices and r["status"] != "error"
        ]
        con = [
            float(r["consensus_ms_per_iter"])
            for r in rows
            if r["solver"] == name and r["devices"] == devices and r["status"] != "error"
        ]
        if not par:
            continue
        par_ms = statistics.fmean(par)
        con_ms = statistics.fmean(con)
        total = par_ms + con_ms
        par_pct = 100.0 * par_ms / total if total > 0 else 0.0
        table.append(
            (
                name, repr(total), repr(par_ms), repr(con_ms),
                repr(par_pct), repr(100.0 - par_pct if total > 0 else 0.0),
            )
        )
    _write_csv(
        outdir / "table1.csv",
        ["solver", "total_ms", "parallel_ms", "consensus_ms", "parallel_pct", "consensus_pct"],
        table,
    )


def run_bench(cfg, output_dir=None):
    """Execute the full sweep; returns the list of per-run row dicts."""
    from . import __version__

    cfg.validate()
    outdir = Path(
        output_dir
        or cfg.output_dir
        or os.environ.get(ENV_OUTPUT_DIR)
        or "bench_out"
    )
    outdir.mkdir(parents=True, exist_ok=True)

    cells = list(_cells(cfg))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(cell) for cell in cells]
    rows.sort(key=lambda r: (r["devices"], r["antennas"], r["seq_length"],
                             r["active"], r["seed"], r["solver"], r["rep"]))

    _write_csv(outdir / "runs.csv", RUNS_HEADER, [[r[k] for k in RUNS_HEADER] for r in rows])
    _emit_fig1(cfg, outdir)
    _emit_fig2(cfg, rows, outdir)
    _emit_table1(cfg, rows, outdir)

    ok = [r for r in rows if r["status"] != "error"]
    report = {
        "version": __version__,
        "config_hash": config_hash(cfg),
        "config": asdict(cfg),
        "cells_total": len(rows),
        "cells_failed": len(rows) - len(ok),
        "by_solver": {
            name: {
                "runs": sum(1 for r in ok if r["solver"] == name),
                "converged": sum(
                    1 for r in ok if r["solver"] == name and r["status"] == "converged"
                ),
                "median_iterations": float(
                    statistics.median(
                        int(r["iterations"]) for r in ok if r["solver"] == name
                    )
                )
                if any(r["solver"] == name for r in ok)
                else None,
            }
            for name in cfg.solvers
        },
    }
    with open(outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return rows
