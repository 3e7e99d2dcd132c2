"""Command-line interface: generate, mask, fit, benchmark and report.

Series files are comma-separated numeric tables with one row per time step
and one column per dimension; the literal token NaN marks a missing entry.
Truth bundles and fit results are JSON documents.  Every subcommand exits
with code 0 on success and a nonzero code with a JSON error record on
stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchmark
from .benchmark import (aggregate_rows, config_from_dict, config_to_dict,
                        read_report_csv, run_case, spec_from_dict, spec_to_dict,
                        write_aggregate_csv)
from .core import FemmConfig, TimeSeriesWithMask
from .driver import fit
from .synthetic import GeneratorSpec, inject_mcar, make_dataset


def write_series(path, series):
    """Write a (dim x T) series as rows of comma-separated values, NaN for missing."""
    values = series.values if isinstance(series, TimeSeriesWithMask) else np.asarray(series, float)
    mask = series.mask if isinstance(series, TimeSeriesWithMask) else np.isnan(values)
    with open(path, "w") as fh:
        for t in range(values.shape[1]):
            cells = ["NaN" if mask[d, t] else format(values[d, t], ".17g")
                     for d in range(values.shape[0])]
            fh.write(",".join(cells) + "\n")


def read_series(path):
    """Read a series file back into a TimeSeriesWithMask."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(cell) for cell in line.split(",")])
    values = np.asarray(rows, dtype=float).T
    return TimeSeriesWithMask.from_array(values)


def _load_config_file(path):
    with open(path) as fh:
        payload = json.load(fh)
    femm = config_from_dict(payload["femm"]) if "femm" in payload else None
    gen = spec_from_dict(payload["generator"]) if "generator" in payload else None
    return femm, gen


def _resolve_config(args, preset_default="desk"):
    """Merge preset, config file and command-line overrides."""
    preset = getattr(args, "preset", None) or preset_default
    config = benchmark.paper_config() if preset == "paper" else benchmark.desk_config()
    gen = GeneratorSpec()
    if getattr(args, "config", None):
        file_config, file_gen = _load_config_file(args.config)
        if file_config is not None:
            config = file_config
        if file_gen is not None:
            gen = file_gen
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
        gen = replace(gen, seed=args.seed)
    return config, gen


def _with_series_length(spec, T):
    """Override the series length, pruning regime blocks that start beyond it."""
    path = tuple(p for p in spec.regime_path if p[0] <= T)
    return replace(spec, T=T, regime_path=path if path else None)


def _model_set_to_dict(model_set):
    return [{"offset": m.offset.tolist(),
             "interactions": m.interactions.tolist(),
             "controls": m.controls.tolist()} for m in model_set]


def _cmd_generate(args):
    config, spec = _resolve_config(args)
    if args.T is not None:
        spec = _with_series_length(spec, args.T)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x, u, weights = make_dataset(spec)
    write_series(out / "x.csv", TimeSeriesWithMask.complete(x))
    write_series(out / "u.csv", TimeSeriesWithMask.complete(u))
    truth = {
        "generator": spec_to_dict(spec),
        "theta_true": _model_set_to_dict(spec.theta),
        "x_init": spec.x_init.tolist(),
        "gamma_true": weights.weights.tolist(),
        "regime_path": [list(p) for p in spec.regime_path],
    }
    with open(out / "truth.json", "w") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    print(f"wrote x.csv, u.csv, truth.json to {out}")
    return 0


def _parse_fractions(text_values):
    fractions = [float(v) for v in text_values]
    for f in fractions:
        if not 0.0 <= f < 1.0:
            raise ValueError(f"fraction {f} outside [0, 1)")
    return fractions


def _cmd_mask(args):
    fractions = _parse_fractions(args.fractions)
    x = read_series(args.x)
    u = read_series(args.u)
    out = Path(args.out)
    for fraction in fractions:
        pct = int(round(100 * fraction))
        sub = out / f"frac_{pct:02d}"
        sub.mkdir(parents=True, exist_ok=True)
        xm, um = x, u
        if args.case in ("x", "both"):
            xm = inject_mcar(x, fraction, seed=np.random.SeedSequence(args.seed, spawn_key=(1, pct, 0)))
        if args.case in ("u", "both"):
            um = inject_mcar(u, fraction, seed=np.random.SeedSequence(args.seed, spawn_key=(1, pct, 1)))
        write_series(sub / "x.csv", xm)
        write_series(sub / "u.csv", um)
        print(f"wrote masked series ({pct}% {args.case}) to {sub}")
    return 0


def _cmd_fit(args):
    config, _ = _resolve_config(args)
    x = read_series(args.x)
    u = read_series(args.u)
    result = fit(x, u, config, n_jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_series(out / "x_filled.csv", TimeSeriesWithMask.complete(result.x_filled))
    write_series(out / "u_filled.csv", TimeSeriesWithMask.complete(result.u_filled))
    np.savetxt(out / "gamma.csv", result.gamma.weights.T, delimiter=",", fmt="%.17g")
    payload = {
        "objective": result.objective,
        "objective_trace": result.objective_trace.tolist(),
        "converged": result.converged,
        "restart_index": result.restart_index,
        "warnings": result.warnings,
        "config": config_to_dict(config),
        "theta": _model_set_to_dict(result.model_set),
    }
    with open(out / "result.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(f"fit finished: objective {result.objective:.6g}, "
          f"converged {result.converged}; results in {out}")
    return 0


def _cmd_benchmark(args):
    config, spec = _resolve_config(args)
    if args.T is not None:
        spec = _with_series_length(spec, args.T)
    fractions = _parse_fractions(args.fractions) if args.fractions else list(benchmark.PAPER_FRACTIONS)
    grid = None
    if args.lambda_grid or args.eta_grid:
        lams = [float(v) for v in args.lambda_grid] if args.lambda_grid else [config.ridge_x]
        etas = [float(v) for v in args.eta_grid] if args.eta_grid else [config.ridge_u]
        grid = [(lam, eta) for lam in lams for eta in etas]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    combined = None
    for seed in args.seeds:
        report = run_case(args.case, fractions, seed, generator_spec=spec,
                          config=config, ridge_grid=grid,
                          fit_baseline=args.fit_baseline, n_jobs=args.jobs)
        if combined is None:
            combined = report
            combined.summary = {"runs": [report.summary]}
        else:
            combined.rows.extend(report.rows)
            combined.summary["runs"].append(report.summary)
    combined.to_csv(out / "report.csv")
    combined.write_summary(out / "summary.json")
    print(f"benchmark case '{args.case}' finished: {len(combined.rows)} metric rows in {out}")
    return 0


def _cmd_report(args):
    reports = [read_report_csv(p) for p in args.inputs]
    rows = aggregate_rows(reports)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_aggregate_csv(rows, out / "aggregate.csv")
    with open(out / "aggregate.json", "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    print(f"aggregated {len(args.inputs)} report(s) into {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="femmvarx",
        description="Regime-switching VARX estimation with missing-value reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit synthetic data and the truth bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--preset", choices=("paper", "desk"), default=None)
    p.add_argument("--config", default=None)
    p.add_argument("-T", type=int, default=None, help="override the series length")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("mask", help="inject completely-at-random missing values")
    p.add_argument("--x", required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--case", choices=("x", "u", "both"), default="both")
    p.add_argument("--fractions", nargs="+", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("fit", help="fit one masked data set")
    p.add_argument("--x", required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--preset", choices=("paper", "desk"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("benchmark", help="run the masked-data protocol")
    p.add_argument("--case", choices=("x", "u", "both"), required=True)
    p.add_argument("--fractions", nargs="+", default=None)
    p.add_argument("--seeds", nargs="+", type=int, default=[0])
    p.add_argument("--preset", choices=("paper", "desk"), default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--lambda-grid", nargs="+", default=None,
                   help="ridge grid for the series-side reconstruction")
    p.add_argument("--eta-grid", nargs="+", default=None,
                   help="ridge grid for the covariate-side reconstruction")
    p.add_argument("--fit-baseline", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-T", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("report", help="merge and aggregate benchmark reports")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
