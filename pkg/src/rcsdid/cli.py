"""Command-line interface: ``rcsdid {estimate,weights,simulate}``.

Exit codes: 0 success, 1 validation / input error, 2 degenerate design or
solver failure. Diagnostics go to stderr; results to stdout or ``--out``
(written atomically: temp file + rename).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .data import SchemaError, ValidationError, aggregate, load_long_csv, write_long_csv, _atomic_write
from .dgp import ScenarioConfig, simulate_dataset
from .estimators import DegenerateDesignError, estimate_all, estimate_did, estimate_rcsdid, estimate_sdid_baseline
from .harness import (
    TABLE_IDS,
    resolve_threads,
    rows_to_csv,
    rows_to_markdown,
    run_table,
    table_spec,
)
from .streams import substream
from .weights import compute_zeta, cross_sectional_weights, solve_time_weights, solve_unit_weights

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DEGENERATE = 2


def _add_input_opts(parser):
    parser.add_argument("--input", required=True, help="long-format CSV file")
    parser.add_argument("--kco", type=int, help="number of control groups (treated sorted last)")
    parser.add_argument("--tpre", type=int, required=True, help="number of pre-treatment periods")
    parser.add_argument("--treated-col", help="0/1 column marking treated groups (alternative to --kco)")
    parser.add_argument("--group-col", default="group")
    parser.add_argument("--time-col", default="time")
    parser.add_argument("--outcome-col", default="outcome")


def _load(args):
    if (args.kco is None) == (args.treated_col is None):
        raise SchemaError("pass exactly one of --kco or --treated-col")
    return load_long_csv(
        args.input,
        k_co=args.kco,
        t_pre=args.tpre,
        group_col=args.group_col,
        time_col=args.time_col,
        outcome_col=args.outcome_col,
        treated_col=args.treated_col,
    )


def _emit(text: str, out_path):
    if out_path:
        _atomic_write(out_path, text)
    else:
        sys.stdout.write(text)


def _cmd_estimate(args) -> int:
    data = _load(args)
    if args.method == "all":
        estimates = estimate_all(data).values()
    else:
        fn = {
            "did": estimate_did,
            "sdid": estimate_sdid_baseline,
            "rcsdid": estimate_rcsdid,
        }[args.method]
        estimates = [fn(data)]
    lines = ["method,tau_hat,n_obs,unit_solver_converged,time_solver_converged"]
    for est in estimates:
        unit = est.weights_used.unit
        time = est.weights_used.time
        lines.append(
            f"{est.method},{est.tau_hat!r},{est.n_obs},"
            f"{'' if unit is None else unit.solver_report.converged},"
            f"{'' if time is None else time.solver_report.converged}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_weights(args) -> int:
    data = _load(args)
    panel = aggregate(data)
    zres = compute_zeta(panel)
    unit = solve_unit_weights(panel, zres.zeta)
    time = solve_time_weights(panel)
    nu = cross_sectional_weights(panel)
    lines = ["kind,index,value"]
    lines.append(f"zeta,,{zres.zeta!r}")
    lines.append(f"sigma_hat,,{zres.sigma_hat!r}")
    for k, wk in enumerate(unit.omega, start=1):
        lines.append(f"omega,{k},{float(wk)!r}")
    lines.append(f"omega0,,{unit.omega0!r}")
    for t, lt in enumerate(time.lam, start=1):
        lines.append(f"lambda,{t},{float(lt)!r}")
    lines.append(f"lambda0,,{time.lambda0!r}")
    lay = panel.layout
    for k in range(lay.k):
        for t in range(lay.t):
            lines.append(f"nu,{k + 1}:{t + 1},{float(nu.nu[k, t])!r}")
    for name, rep in (("unit", unit.solver_report), ("time", time.solver_report)):
        lines.append(f"solver_{name}_iterations,,{rep.iterations}")
        lines.append(f"solver_{name}_objective,,{rep.final_objective!r}")
        lines.append(f"solver_{name}_gap,,{rep.gradient_gap!r}")
        lines.append(f"solver_{name}_converged,,{rep.converged}")
    _emit("\n".join(lines) + "\n", args.out)
    if not (unit.solver_report.converged and time.solver_report.converged):
        print("warning: weight solver did not converge", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


_CONFIG_FIELDS = {
    "k_co", "k_tr", "t", "t_pre", "tau", "r", "w", "rho", "base_rc", "s_range", "seed",
}


def _scenario_from_args(args) -> ScenarioConfig:
    values = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        bad = set(loaded) - _CONFIG_FIELDS
        if bad:
            raise ValidationError(f"unknown config keys: {sorted(bad)}")
        values.update(loaded)
    for name in _CONFIG_FIELDS:
        arg = getattr(args, name, None)
        if arg is not None:
            values[name] = arg
    if "s_range" in values:
        values["s_range"] = tuple(int(v) for v in values["s_range"])
    return ScenarioConfig(**values)


def _cmd_simulate(args) -> int:
    cfg = _scenario_from_args(args)
    if args.emit_data:
        data = simulate_dataset(cfg, substream(args.seed if args.seed is not None else cfg.seed, "emit"))
        write_long_csv(data, args.out) if args.out else _emit(
            "group,time,outcome\n"
            + "\n".join(f"{g},{t},{float(y)!r}" for g, t, y in zip(data.group, data.time, data.outcome))
            + "\n",
            None,
        )
        return EXIT_OK
    spec = table_spec(
        args.table,
        base=cfg,
        replications=args.reps,
        meta_replications=args.meta_reps,
        meta_seed=args.seed if args.seed is not None else cfg.seed,
        redraw_counts=args.redraw_counts,
    )
    rows = run_table(spec, threads=args.threads)
    text = rows_to_markdown(rows) if args.format == "md" else rows_to_csv(rows)
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcsdid",
        description="Synthetic difference-in-differences for repeated cross-sections",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate treatment effects from a CSV")
    _add_input_opts(p_est)
    p_est.add_argument("--method", choices=["did", "sdid", "rcsdid", "all"], default="all")
    p_est.add_argument("--out", help="output CSV path (default: stdout)")
    p_est.set_defaults(func=_cmd_estimate)

    p_w = sub.add_parser("weights", help="compute and print the weight families")
    _add_input_opts(p_w)
    p_w.add_argument("--out", help="output CSV path (default: stdout)")
    p_w.set_defaults(func=_cmd_weights)

    p_sim = sub.add_parser("simulate", help="run Monte Carlo tables or emit a simulated dataset")
    p_sim.add_argument("--table", choices=list(TABLE_IDS) + ["custom"], default="custom")
    p_sim.add_argument("--reps", type=int, default=1000)
    p_sim.add_argument("--meta-reps", type=int, default=1)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--config", help="JSON file with scenario fields (flags override)")
    p_sim.add_argument("--out", help="output path (default: stdout)")
    p_sim.add_argument("--format", choices=["csv", "md"], default="csv")
    p_sim.add_argument("--emit-data", action="store_true", help="write one simulated dataset instead of running tables")
    p_sim.add_argument("--redraw-counts", action="store_true", help="redraw cell counts every replication")
    p_sim.add_argument("--threads", type=int, help="worker processes (env RCSDID_THREADS, default: all cores)")
    for name, typ in (
        ("k_co", int), ("k_tr", int), ("t", int), ("t_pre", int), ("tau", float),
        ("r", int), ("w", float), ("rho", float), ("base_rc", int),
    ):
        p_sim.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ)
    p_sim.add_argument("--s-range", dest="s_range", type=int, nargs=2, metavar=("LO", "HI"))
    p_sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DegenerateDesignError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SchemaError, ValidationError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
