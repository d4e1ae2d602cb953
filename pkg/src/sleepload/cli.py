"""Command-line interface.

Subcommands: ``synth`` (generate a CDR CSV), ``ingest-check`` (validate one),
``estimate`` (estimate sleeping-cell loads), ``experiment`` (run a sweep and
write summary CSVs), ``power`` (network power from per-station loads).

Exit codes: 0 on success, 1 on runtime or input errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

from . import __version__
from ._util import derive_seed, format_float
from .clustering import MlcConfig, mlc_estimate
from .data import (
    ClusteredConfig,
    IngestError,
    SyntheticConfig,
    TrafficGrid,
    generate_clustered,
    generate_synthetic,
    ingest_cdr,
    make_windows,
    normalize_loads,
    remove_outliers_zscore,
    write_cdr_csv,
)
from .evaluation import (
    ExperimentConfig,
    mape,
    run_mlc_experiment,
    run_spatial_experiment,
    run_temporal_experiment,
    write_fig2_csv,
    write_fig3_csv,
    write_fig7_csv,
    write_results_csv,
)
from .lstm import TrainConfig, predict, train
from .power import DEFAULT_HAPS, DEFAULT_MBS, DEFAULT_SBS, bs_power, network_power
from .spatial import (
    estimate_distance_weighted,
    estimate_unweighted_mean,
    select_nearest,
    select_random,
)

METHODS = ("mean", "idw", "random", "random-idw", "mlc", "lstm")
FIGURES = ("fig2", "fig3", "fig7")

DEFAULT_CONFIG = {
    "data": {
        "source": "synthetic",
        "path": None,
        "grid_side": None,
        "cell_size": None,
        "slots_per_day": None,
        "slot_duration": None,
        "synthetic": {},
        "clustered": {},
    },
    "experiment": {},
    "mlc": {},
    "train": {},
}


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _build(cls, data: dict, label: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {label} keys: {sorted(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**kwargs)


def load_config(path: str | None) -> dict:
    config = DEFAULT_CONFIG
    if path is not None:
        with open(path) as handle:
            try:
                user = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ValueError(f"invalid config JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        config = _merge(config, user)
    return config


def _apply_seed(config: dict, seed: int | None) -> dict:
    if seed is None:
        return config
    config = json.loads(json.dumps(config))
    config["data"]["synthetic"]["seed"] = seed
    config["data"]["clustered"]["seed"] = seed
    config["experiment"]["seed"] = seed
    config["mlc"]["seed"] = seed
    config["train"]["seed"] = seed
    return config


def _ingest_kwargs(config: dict) -> dict:
    data = config["data"]
    return {key: data[key]
            for key in ("grid_side", "cell_size", "slots_per_day", "slot_duration")
            if data.get(key) is not None}


def _load_grid(config: dict) -> TrafficGrid:
    data = config["data"]
    source = data.get("source", "synthetic")
    if source == "synthetic":
        return generate_synthetic(_build(SyntheticConfig, data["synthetic"], "synthetic"))
    if source == "clustered":
        grid, _ = generate_clustered(_build(ClusteredConfig, data["clustered"], "clustered"))
        return grid
    if source == "csv":
        path = data.get("path")
        if not path:
            raise ValueError('data.source "csv" requires data.path')
        grid = ingest_cdr(path, **_ingest_kwargs(config))
        return normalize_loads(grid)
    raise ValueError(f"unknown data source {source!r}")


def _experiment_config(config: dict) -> ExperimentConfig:
    section = dict(config["experiment"])
    train_section = {**config["train"], **section.pop("train", {})}
    train_config = _build(TrainConfig, train_section, "train")
    built = _build(ExperimentConfig, section, "experiment")
    return dataclasses.replace(built, train=train_config)


def cmd_synth(args, config: dict) -> int:
    kind = args.kind
    out_path = os.path.join(args.out, f"{kind}.csv")
    if kind == "clustered":
        grid, _ = generate_clustered(_build(ClusteredConfig, config["data"]["clustered"],
                                            "clustered"))
    else:
        grid = generate_synthetic(_build(SyntheticConfig, config["data"]["synthetic"],
                                         "synthetic"))
    os.makedirs(args.out, exist_ok=True)
    write_cdr_csv(grid, out_path)
    print(f"wrote {out_path} ({grid.num_cells} cells, {grid.num_slots} slots)")
    return 0


def cmd_ingest_check(args, config: dict) -> int:
    grid = ingest_cdr(args.data, **_ingest_kwargs(config))
    peak = float(grid.loads.max())
    print(f"ok: {grid.num_cells} cells, {grid.num_slots} slots "
          f"({grid.num_days} days of {grid.slots_per_day}), peak load {format_float(peak)}")
    return 0


def _estimate_spatial(grid, method, targets, slot, args, config):
    profile_grid = grid.with_loads(grid.day_profiles())
    results = {}
    for target in targets:
        exclude = [t for t in targets if t != target]
        if method in ("mean", "idw"):
            neighbors = select_nearest(profile_grid, target, args.neighbors, slot, exclude)
        else:
            seed = derive_seed(config["experiment"].get("seed", 0), "cli", int(target))
            neighbors = select_random(profile_grid, target, args.neighbors, slot, seed, exclude)
        if method in ("mean", "random"):
            results[target] = estimate_unweighted_mean(neighbors)
        else:
            results[target] = estimate_distance_weighted(neighbors, args.exponent)
    return results


def _estimate_lstm(grid, targets, args, config):
    train_config = _build(TrainConfig, {**config["train"], "hidden": args.units}, "train")
    results = {}
    for target in targets:
        series = grid.loads[grid.index_of(target)]
        if series.size < args.window + 2:
            raise ValueError(f"cell {target} has too little history for window {args.window}")
        samples = make_windows(series[:-1], args.window)
        fitted = train(samples, train_config)
        results[target] = predict(fitted.params, series[-1 - args.window : -1])
    return results, {t: float(grid.loads[grid.index_of(t)][-1]) for t in targets}


def cmd_estimate(args, config: dict) -> int:
    grid = _load_grid(config)
    targets = [int(t) for t in args.target]
    method = args.method
    slot = args.slot

    if method == "lstm":
        estimates, actuals = _estimate_lstm(grid, targets, args, config)
    else:
        profiles = grid.day_profiles()
        if not (0 <= slot < grid.slots_per_day):
            raise ValueError(f"slot {slot} out of range [0, {grid.slots_per_day})")
        actuals = {t: float(profiles[grid.index_of(t), slot]) for t in targets}
        if method == "mlc":
            mlc_config = _build(MlcConfig, config["mlc"], "mlc")
            if args.layers is not None:
                mlc_config = dataclasses.replace(mlc_config, max_layers=args.layers)
            estimates = mlc_estimate(grid, targets, slot, mlc_config)
        else:
            estimates = _estimate_spatial(grid, method, targets, slot, args, config)

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("cell_id", "method", "estimate", "actual", "ape_percent"))
    for target in targets:
        est, act = estimates[target], actuals[target]
        ape = mape([act], [est])
        writer.writerow((target, method, format_float(est), format_float(act),
                         format_float(ape)))
    return 0


def cmd_experiment(args, config: dict) -> int:
    grid = _load_grid(config)
    experiment = _experiment_config(config)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    figures = FIGURES if args.figure == "all" else (args.figure,)
    for figure in figures:
        if figure == "fig2":
            fig_rows = run_spatial_experiment(grid, experiment)
            write_fig2_csv(fig_rows, os.path.join(args.out, "fig2.csv"))
        elif figure == "fig3":
            fig_rows = run_mlc_experiment(grid, experiment)
            write_fig3_csv(fig_rows, os.path.join(args.out, "fig3.csv"))
        else:
            fig_rows = run_temporal_experiment(grid, experiment)
            write_fig7_csv(fig_rows, os.path.join(args.out, "fig7.csv"))
        rows.extend(fig_rows)
        print(f"{figure}: {len(fig_rows)} rows")
    write_results_csv(rows, os.path.join(args.out, "results.csv"))
    print(f"wrote {os.path.join(args.out, 'results.csv')}")
    return 0


def _power_rows(args) -> list[tuple[str, float]]:
    rows: list[tuple[str, float]] = []
    if args.loads is not None:
        with open(args.loads, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["role", "load"]:
                raise ValueError('power loads file must start with header "role,load"')
            for record in reader:
                if not record:
                    continue
                if len(record) != 2:
                    raise ValueError(f"line {reader.line_num}: expected 2 fields")
                rows.append((record[0].strip().lower(), float(record[1])))
    else:
        if args.haps is None or args.mbs is None:
            raise ValueError("provide --loads FILE or both --haps and --mbs")
        rows.append(("haps", args.haps))
        rows.append(("mbs", args.mbs))
        rows.extend(("sbs", v) for v in args.sbs or [])
    return rows


def cmd_power(args, config: dict) -> int:
    rows = _power_rows(args)
    haps = [v for role, v in rows if role == "haps"]
    mbs = [v for role, v in rows if role == "mbs"]
    sbs = [v for role, v in rows if role == "sbs"]
    bad = {role for role, _ in rows} - {"haps", "mbs", "sbs"}
    if bad:
        raise ValueError(f"unknown roles: {sorted(bad)}")
    if len(haps) != 1 or len(mbs) != 1:
        raise ValueError("exactly one haps load and one mbs load are required")

    breakdown = network_power(haps[0], mbs[0], sbs)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("component", "load", "power_watts"))
    writer.writerow(("haps", format_float(haps[0]), format_float(breakdown.haps)))
    writer.writerow(("mbs", format_float(mbs[0]), format_float(breakdown.mbs)))
    for i, (load, watts) in enumerate(zip(sbs, breakdown.sbs)):
        writer.writerow((f"sbs{i}", format_float(load), format_float(watts)))
    writer.writerow(("total", "", format_float(breakdown.total)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sleepload",
        description="Estimate traffic loads of sleeping small cells and the "
                    "power they would burn.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override every configured seed")
    parser.add_argument("--out", metavar="DIR", default=".", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="write a synthetic CDR CSV")
    p_synth.add_argument("--kind", choices=("synthetic", "clustered"), default="synthetic")
    p_synth.set_defaults(func=cmd_synth)

    p_check = sub.add_parser("ingest-check", help="validate a CDR CSV")
    p_check.add_argument("--data", required=True, metavar="PATH")
    p_check.set_defaults(func=cmd_ingest_check)

    p_est = sub.add_parser("estimate", help="estimate sleeping-cell loads")
    p_est.add_argument("--method", choices=METHODS, required=True)
    p_est.add_argument("--target", action="append", required=True, metavar="CELL_ID",
                       help="sleeping cell id (repeatable)")
    p_est.add_argument("--slot", type=int, default=0, help="day slot to estimate")
    p_est.add_argument("--neighbors", type=int, default=10)
    p_est.add_argument("--exponent", type=float, default=3.0)
    p_est.add_argument("--layers", type=int, default=None, help="refinement layers (mlc)")
    p_est.add_argument("--window", type=int, default=12, help="input window (lstm)")
    p_est.add_argument("--units", type=int, default=10, help="hidden units (lstm)")
    p_est.set_defaults(func=cmd_estimate)

    p_exp = sub.add_parser("experiment", help="run an experiment sweep")
    p_exp.add_argument("--figure", choices=FIGURES + ("all",), required=True)
    p_exp.set_defaults(func=cmd_experiment)

    p_pow = sub.add_parser("power", help="compute network power draw")
    p_pow.add_argument("--loads", metavar="PATH", help='CSV with header "role,load"')
    p_pow.add_argument("--haps", type=float, help="relay load in (0,1)")
    p_pow.add_argument("--mbs", type=float, help="macro load in (0,1)")
    p_pow.add_argument("--sbs", type=float, action="append",
                       help="small-cell load in [0,1] (repeatable)")
    p_pow.set_defaults(func=cmd_power)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0

    try:
        config = _apply_seed(load_config(args.config), args.seed)
        return args.func(args, config)
    except (ValueError, IngestError, OSError, KeyError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
