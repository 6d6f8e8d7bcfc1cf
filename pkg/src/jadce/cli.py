"""Command line interface: ``gen``, ``solve``, ``bench``, and ``inspect``.

Exit codes: 0 on success, 1 on runtime failures (unreadable or degenerate
inputs, solver breakdown), 2 on configuration errors (bad bounds, unknown
names, malformed config files).
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__, bench, instance, metrics, solvers
from .errors import ConfigError, JadceError

ENV_OUTPUT_DIR = bench.ENV_OUTPUT_DIR


def _default_outdir():
    return Path(os.environ.get(ENV_OUTPUT_DIR) or ".")


def _cmd_gen(args):
    cfg = bench.read_config(args.config)
    scalars = {}
    for name, values in (
        ("devices", cfg.devices),
        ("antennas", cfg.antennas),
        ("seq_length", cfg.seq_lengths),
        ("active", cfg.actives),
    ):
        if len(values) != 1:
            raise ConfigError(
                f"gen needs a single value for [instance] {name}, got {values}"
            )
        scalars[name] = values[0]
    seed = args.seed if args.seed is not None else (cfg.seeds[0] if cfg.seeds else 0)
    icfg = bench.instance_config_from(
        cfg, scalars["devices"], scalars["antennas"], scalars["seq_length"],
        scalars["active"], seed,
    )
    inst = instance.generate(icfg)
    out = Path(args.output) if args.output else _default_outdir() / "instance.bin"
    out.parent.mkdir(parents=True, exist_ok=True)
    instance.save(inst, out)
    digest = hashlib.sha256(out.read_bytes()).hexdigest()[:12]
    print(
        f"wrote {out}: L={icfg.seq_length} M={icfg.n_antennas} "
        f"N={icfg.n_devices} K={icfg.n_active} seed={icfg.seed} sha256={digest}"
    )
    return 0


def _cmd_solve(args):
    inst = instance.load(args.instance)
    problem = instance.to_problem(inst, gamma_scale=args.gamma_scale)
    opts = solvers.SolverOptions(
        rho_scale=args.rho_scale,
        tol=args.tol,
        max_iterations=args.max_iter,
        trace_every=args.trace_every,
        threads=args.threads,
        deterministic=args.deterministic,
    )
    report = solvers.solve(problem, args.solver, opts)

    outdir = Path(args.output) if args.output else _default_outdir()
    outdir.mkdir(parents=True, exist_ok=True)
    trace_path = outdir / f"trace_{args.solver}.csv"
    solvers.write_trace_csv(report, trace_path, include_timings=not args.deterministic)

    det = metrics.detect(report.final_x, inst)
    kkt = metrics.kkt_residual(problem, report.final_x)
    summary = {
        "solver": args.solver,
        "status": report.status,
        "iterations": report.iterations,
        "final_objective": metrics.objective(problem, report.final_x),
        "kkt_residual": kkt,
        "kkt_residual_normalized": kkt / max(1.0, problem.gamma),
        "gamma": problem.gamma,
        "gamma_max": problem.gamma_max,
        "gamma_scale": args.gamma_scale,
        "rho": report.rho,
        "tol": args.tol,
        "detection": {
            "missed_detection_rate": det.missed_detection_rate,
            "false_alarm_rate": det.false_alarm_rate,
            "estimated_count": int(det.estimated_active.size),
        },
        "nmse": metrics.nmse(report.final_x, inst),
        "timing": {
            "wall_s": 0.0 if args.deterministic else report.wall_s,
            "parallel_s": 0.0 if args.deterministic else float(report.parallel_s.sum()),
            "consensus_s": 0.0 if args.deterministic else float(report.consensus_s.sum()),
        },
        "instance_seed": inst.config.seed,
        "version": __version__,
    }
    summary_path = outdir / f"summary_{args.solver}.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(
        f"{args.solver} {report.status} in {report.iterations} iterations: "
        f"objective={summary['final_objective']:.6g} "
        f"kkt={kkt:.3g} -> {trace_path}, {summary_path}"
    )
    return 0 if report.status != solvers.DEGENERATE else 1


def _cmd_bench(args):
    cfg = bench.read_config(args.config)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    rows = bench.run_bench(cfg, output_dir=args.output)
    failed = sum(1 for r in rows if r["status"] == "error")
    outdir = args.output or cfg.output_dir or os.environ.get(ENV_OUTPUT_DIR) or "bench_out"
    print(f"bench complete: {len(rows)} cells ({failed} failed) -> {outdir}")
    return 0 if failed == 0 else 1


def _cmd_inspect(args):
    inst = instance.load(args.instance)
    cfg = inst.config
    print(f"instance file:   {args.instance}")
    print(f"format version:  {instance.FORMAT_VERSION}")
    print(f"devices (N):     {cfg.n_devices}")
    print(f"antennas (M):    {cfg.n_antennas}")
    print(f"seq length (L):  {cfg.seq_length}")
    print(f"active (K):      {cfg.n_active}")
    print(f"variances:       signature={cfg.signature_var} noise={cfg.noise_var} "
          f"channel={cfg.channel_var}")
    print(f"seed:            {cfg.seed}")
    print(f"gamma_max:       {instance.gamma_max_of(inst):.6g}")
    print(f"active devices:  {inst.active.tolist()}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jadce",
        description="Group-lasso solvers and benchmarks for joint activity "
        "detection and channel estimation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file from a config")
    gen.add_argument("config", help="INI config with an [instance] section")
    gen.add_argument("-o", "--output", help="instance file path (.json for the JSON mirror)")
    gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    gen.set_defaults(func=_cmd_gen)

    solve = sub.add_parser("solve", help="run one solver on an instance file")
    solve.add_argument("instance", help="instance file written by gen")
    solve.add_argument("--solver", required=True, choices=sorted(solvers.SOLVERS))
    solve.add_argument("--gamma-scale", type=float, default=0.5)
    solve.add_argument("--rho-scale", type=float, default=0.8)
    solve.add_argument("--tol", type=float, default=1e-5)
    solve.add_argument("--max-iter", type=int, default=20000)
    solve.add_argument("--trace-every", type=int, default=1)
    solve.add_argument("--threads", type=int, default=1)
    solve.add_argument("--deterministic", action="store_true",
                       help="fixed reduction order; timing columns written as 0")
    solve.add_argument("-o", "--output", help="output directory")
    solve.set_defaults(func=_cmd_solve)

    bench_p = sub.add_parser("bench", help="run a sweep from a bench config")
    bench_p.add_argument("config", help="INI config with [instance]/[solve]/[bench] sections")
    bench_p.add_argument("-o", "--output", help="output directory override")
    bench_p.add_argument("--jobs", type=int, default=None, help="worker processes")
    bench_p.set_defaults(func=_cmd_bench)

    inspect = sub.add_parser("inspect", help="print the header of an instance file")
    inspect.add_argument("instance", help="instance file")
    inspect.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (JadceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
