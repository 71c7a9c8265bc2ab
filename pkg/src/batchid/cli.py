"""Command-line entry point: ``batchid <subcommand>``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from . import io
from .estimator import MultiplicityEvidence, map_estimate
from .evolution import default_load_grid
from .experiment import (ExperimentConfig, figure_sweep, monte_carlo, run_contention_period,
                         run_seed, table1_configs)
from .model import ConfigError, SystemConfig

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def cmd_de_sweep(args) -> int:
    grid = default_load_grid(args.grid, args.upper)
    curves = figure_sweep(args.pA, args.K, grid, range(1, args.beta_max + 1))
    if args.schema == "evolution":
        io.export(io.evolution_rows(curves), args.out, args.format, io.EVOLUTION_COLUMNS)
    else:
        io.export(curves, args.out, args.format, io.CURVE_COLUMNS)
    io.write_metadata(args.out, {"p_A": args.pA, "K": args.K, "grid_step": args.grid,
                                 "upper": args.upper, "beta_max": args.beta_max})
    for K in args.K:
        pts = [c for c in curves if c.K == K]
        best = max(pts, key=lambda c: c.T_star)
        print(f"K={K}: max T*={best.T_star:.4f} at M/N={best.M_over_N:.3f} (beta*={best.beta_star}, "
              f"p_R*={best.p_R_star:.4f})")
    return EXIT_OK


def _print_aggregate(agg) -> None:
    m, s = agg.mean, agg.stderr
    print(f"K={agg.K} beta={agg.beta:3d} runs={agg.runs_used} f_RE={m['f_RE']:.3f} f_RA={m['f_RA']:.3f} "
          f"T={m['T']:.3f}+-{s['T']:.3f} dn={m['delta_nE']:+.3f} |dn|={m['abs_delta_nE']:.3f} "
          f"M={m['M']:.1f} truncated={agg.truncation_count}", flush=True)


def cmd_simulate(args) -> int:
    doc = _load_json(args.config)
    for key, val in (("runs", args.runs), ("seed", args.seed), ("H", args.H)):
        if val is not None:
            doc[key] = val
    if args.beta:
        doc["beta_grid"] = args.beta
    exp = ExperimentConfig.from_dict(doc)
    res = monte_carlo(exp, progress=_print_aggregate, workers=args.workers)
    print(f"beta* = {res.beta_star}")
    io.export(res.records, args.out, args.format, io.RUN_COLUMNS)
    io.write_metadata(args.out, exp.to_dict() | {"beta_star": res.beta_star})
    if args.summary:
        io.export(res.per_beta.values(), args.summary, args.format, io.AGGREGATE_COLUMNS)
    if args.trace_out:
        trace: list = []
        run_contention_period(exp, res.beta_star, run_seed(exp.seed, 0), trace=trace)
        write_trace(args.trace_out, exp.cfg.with_beta(res.beta_star), trace)
    return EXIT_OK


def cmd_table1(args) -> int:
    rows = []
    for exp in table1_configs(runs=args.runs, seed=args.seed, Ks=args.K, spread=args.spread):
        print(f"K={exp.cfg.K}: scanning beta {exp.beta_grid[0]}..{exp.beta_grid[-1]}", flush=True)
        res = monte_carlo(exp, progress=_print_aggregate if args.verbose else None, workers=args.workers)
        _print_aggregate(res.best)
        rows.append(res.best)
    io.export(rows, args.out, args.format, io.AGGREGATE_COLUMNS)
    io.write_metadata(args.out, {"runs": args.runs, "seed": args.seed, "K": args.K, "spread": args.spread})
    return EXIT_OK


def write_trace(path, cfg: SystemConfig, trace: list[dict]) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(json.dumps({"config": cfg.to_dict()}) + "\n")
            for row in trace:
                fh.write(json.dumps(row) + "\n")
    except OSError as exc:
        raise io.ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc


def replay_trace(path) -> list[dict]:
    """Feed a recorded trace to the estimator; one estimate per slot."""
    cfg, out = None, []
    evidence = MultiplicityEvidence()
    hint = None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if "config" in row:
                cfg = SystemConfig.from_dict(row["config"])
                continue
            if cfg is None:
                raise ConfigError(f"{path}: trace has no config header")
            evidence.extend((int(d), int(a)) for d, a in row.get("exact", []))
            est = map_estimate(evidence, cfg, int(row.get("N_R", 0)), hint=hint)
            hint = est.n_hat
            out.append({"j": row["j"], "m_exact": len(evidence), "N_R": row.get("N_R", 0), "N_E": est.n_hat})
    return out


def cmd_estimate_demo(args) -> int:
    for row in replay_trace(args.trace):
        print(f"slot {row['j']:4d}: exact slots={row['m_exact']:4d} N_R={row['N_R']:4d} N_E={row['N_E']:4d}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="batchid", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    de = sub.add_parser("de-sweep", help="asymptotic p_R*, T*, beta* curves over M/N")
    de.add_argument("--pA", type=float, default=0.2)
    de.add_argument("--K", type=int, nargs="+", default=[1, 2, 4, 8])
    de.add_argument("--grid", type=float, default=0.005, help="M/N step")
    de.add_argument("--upper", type=float, default=1.0, help="largest M/N")
    de.add_argument("--beta-max", type=int, default=100)
    de.add_argument("--schema", choices=("curves", "evolution"), default="curves")
    de.add_argument("--format", choices=("csv", "json"), default="csv")
    de.add_argument("--out", required=True)
    de.set_defaults(func=cmd_de_sweep)

    sim = sub.add_parser("simulate", help="Monte Carlo of one configuration")
    sim.add_argument("--config", required=True)
    sim.add_argument("--beta", type=int, nargs="+")
    sim.add_argument("--runs", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--H", type=float)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--format", choices=("csv", "json"), default="csv")
    sim.add_argument("--summary", help="per-beta aggregate output")
    sim.add_argument("--trace-out", help="record the per-slot trace of run 0 at beta*")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    t1 = sub.add_parser("table1", help="non-asymptotic evaluation for K in {1,2,4,8}")
    t1.add_argument("--runs", type=int, default=500)
    t1.add_argument("--seed", type=int, default=0)
    t1.add_argument("--K", type=int, nargs="+", default=[1, 2, 4, 8])
    t1.add_argument("--spread", type=float, default=0.5, help="beta grid = asymptotic beta* * (1 +- spread)")
    t1.add_argument("--workers", type=int, default=1)
    t1.add_argument("--format", choices=("csv", "json"), default="csv")
    t1.add_argument("--verbose", action="store_true")
    t1.add_argument("--out", required=True)
    t1.set_defaults(func=cmd_table1)

    demo = sub.add_parser("estimate-demo", help="replay a recorded trace through the estimator")
    demo.add_argument("--trace", required=True)
    demo.set_defaults(func=cmd_estimate_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
