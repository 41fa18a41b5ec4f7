"""Command-line front end.

Subcommands:
  simulate    generate a scenario batch and write one CSV per run
  identify    fit a sparse model from training runs and write it with metrics
  predict     free-run a saved model over a record and score it
  experiment  run the degree / snr / samplerate sweeps, with tables and figures

Every command writes a manifest.json listing the files it produced and is
deterministic for a fixed (config, seed). Exit codes: 0 success, 2 config
error, 3 pipeline error, 4 divergence during prediction.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import identify_config_from, load_config
from .dataset import read_csv, write_csv, TimeSeriesDataset
from .errors import ConfigError, HysidError, PipelineError
from .experiments import TABLE_HEADER, preprocess_runs, run_sweep, simulate_batch
from .model import load_model, render_equations, save_model
from .pipeline import identify, predict_free_run
from .plotting import save_sweep_figure, save_trajectory_figure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PIPELINE = 3
EXIT_DIVERGED = 4


def _apply_overrides(config: dict, args) -> dict:
    out = json.loads(json.dumps(config))  # deep copy, JSON-safe by construction
    if args.seed is not None:
        out["seed"] = int(args.seed)
    if getattr(args, "lam", None) is not None:
        out["regression"]["lambda"] = float(args.lam)
    if getattr(args, "degree", None) is not None:
        out["library"]["degree"] = int(args.degree)
    if getattr(args, "hysteron", None) is not None:
        out["hysterons"]["kind"] = args.hysteron
    return out


def _write_manifest(out_dir: str, command: str, seed, files) -> None:
    doc = {"command": command, "seed": seed, "files": sorted(files)}
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _trajectory_csv(path, times, true_values, predicted) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time,true,predicted\n")
        for t, a, b in zip(times, true_values, predicted):
            fh.write(f"{float(t)!r},{float(a)!r},{float(b)!r}\n")


def cmd_simulate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    os.makedirs(args.out, exist_ok=True)
    train, val = simulate_batch(config)
    files = []
    for i, run in enumerate(train + val):
        name = f"run_{i:02d}.csv"
        write_csv(run, os.path.join(args.out, name))
        files.append(name)
    _write_manifest(args.out, "simulate", config["seed"], files)
    print(f"wrote {len(files)} runs to {args.out}")
    return EXIT_OK


def _load_runs(data_dir: str):
    names = sorted(
        n for n in os.listdir(data_dir) if n.startswith("run_") and n.endswith(".csv")
    )
    if not names:
        raise ConfigError(f"no run_*.csv files in {data_dir}")
    return [read_csv(os.path.join(data_dir, n)) for n in names]


def cmd_identify(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    os.makedirs(args.out, exist_ok=True)
    if args.data:
        runs = _load_runs(args.data)
        count = int(config["split"]["train_count"])
        if not 0 < count < len(runs) + 1:
            raise ConfigError("train_count exceeds available runs")
        train_raw = runs[:count]
    else:
        train_raw, _ = simulate_batch(config)
    train = preprocess_runs(train_raw, config)
    model, info = identify(train, identify_config_from(config))

    files = ["model.json", "equations.txt", "metrics.json"]
    save_model(model, os.path.join(args.out, "model.json"))
    with open(os.path.join(args.out, "equations.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_equations(model))

    level = model.predicted_channels[0]
    reports = []
    for run in train:
        pred, report = predict_free_run(model, run)
        reports.append(report.to_dict())
    _write_json(
        os.path.join(args.out, "metrics.json"),
        {"info": info, "training_runs": reports},
    )

    pred, _ = predict_free_run(model, train[0])
    if pred is not None:
        start = model.lag_q
        save_trajectory_figure(
            os.path.join(args.out, "training_fit.png"),
            train[0].times()[start:],
            train[0].channel(level)[start:],
            pred.channel(level),
            ylabel=level,
            title="free run on first training run",
        )
        files.append("training_fit.png")

    _write_manifest(args.out, "identify", config["seed"], files)
    print(render_equations(model), end="")
    print(f"library columns: {info['library_columns']}, rows: {info['rows']}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    record = read_csv(args.data)
    os.makedirs(args.out, exist_ok=True)
    if args.n_steps is not None:
        end = model.lag_q + int(args.n_steps) + 1
        if end > record.n_samples:
            raise ConfigError("record too short for the requested horizon")
        record = TimeSeriesDataset(
            record.names, record.data[:, :end], record.sample_period
        )
    pred, report = predict_free_run(model, record)
    files = ["metrics.json"]
    _write_json(os.path.join(args.out, "metrics.json"), report.to_dict())
    if pred is None:
        _write_manifest(args.out, "predict", None, files)
        print(f"diverged at step {report.diverged_at}", file=sys.stderr)
        return EXIT_DIVERGED

    level = model.predicted_channels[0]
    start = model.lag_q
    times = record.times()[start:]
    write_csv(pred, os.path.join(args.out, "prediction.csv"))
    _trajectory_csv(
        os.path.join(args.out, "trajectory.csv"),
        times,
        record.channel(level)[start:],
        pred.channel(level),
    )
    save_trajectory_figure(
        os.path.join(args.out, "trajectory.png"),
        times,
        record.channel(level)[start:],
        pred.channel(level),
        ylabel=level,
    )
    files += ["prediction.csv", "trajectory.csv", "trajectory.png"]
    _write_manifest(args.out, "predict", None, files)
    print(f"rmse_scaled={report.rmse_scaled!r} missed={len(report.switch.missed)}")
    return EXIT_OK


_SWEEP_XLABEL = {
    "degree": "polynomial degree",
    "snr": "SNR",
    "samplerate": "decimation factor",
}


def _write_sweep_outputs(out_dir: str, sweep: str, points) -> list:
    files = []
    by_label = {}
    for p in points:
        by_label.setdefault(p.label, []).append(p)
    for label, pts in by_label.items():
        suffix = f"_{label}" if label else ""
        table = f"{sweep}{suffix}_table.csv"
        with open(os.path.join(out_dir, table), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(TABLE_HEADER + "\n")
            for p in pts:
                fh.write(p.table_row() + "\n")
        files.append(table)
        for p in pts:
            if p.trajectory is None:
                continue
            stem = f"{sweep}{suffix}_{p.sweep_value}_trajectory"
            _trajectory_csv(os.path.join(out_dir, stem + ".csv"), *p.trajectory)
            save_trajectory_figure(
                os.path.join(out_dir, stem + ".png"),
                *p.trajectory,
                title=f"{_SWEEP_XLABEL[sweep]} = {p.sweep_value}"
                + (f" ({label})" if label else ""),
            )
            files += [stem + ".csv", stem + ".png"]
    fig = f"{sweep}_rmse.png"
    save_sweep_figure(
        os.path.join(out_dir, fig),
        points,
        xlabel=_SWEEP_XLABEL[sweep],
        logx=(sweep == "snr"),
        title=f"{sweep} sweep",
    )
    files.append(fig)
    return files


def cmd_experiment(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    os.makedirs(args.out, exist_ok=True)
    sweeps = ["degree", "snr", "samplerate"] if args.sweep == "all" else [args.sweep]
    files = []
    for sweep in sweeps:
        points = run_sweep(sweep, config, workers=args.workers)
        files += _write_sweep_outputs(args.out, sweep, points)
        for p in points:
            tag = f" [{p.label}]" if p.label else ""
            status = f"error: {p.error}" if p.error else f"rmse={p.rmse:.3e}"
            print(
                f"{sweep}{tag} {p.sweep_value}: {status} "
                f"terms={p.active_terms} missed={p.missed_switches}"
            )
    _write_manifest(args.out, "experiment", config["seed"], files)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hysid",
        description="Sparse identification of hysteresis-controlled dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (merged over defaults)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the batch seed")

    p = sub.add_parser("simulate", help="generate a scenario batch as CSV files")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="fit a sparse model from training runs")
    common(p)
    p.add_argument("--data", help="directory of run_*.csv files (default: simulate)")
    p.add_argument("--lambda", dest="lam", type=float, help="sparsity threshold")
    p.add_argument("--degree", type=int, help="max polynomial degree")
    p.add_argument("--hysteron", choices=["relay", "proximity"])
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("predict", help="free-run a saved model over a record")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--data", required=True, help="record CSV file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-steps", type=int, help="prediction horizon (default: full)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="run a sweep and write tables + figures")
    common(p)
    p.add_argument(
        "--sweep",
        choices=["degree", "snr", "samplerate", "all"],
        default="all",
    )
    p.add_argument("--lambda", dest="lam", type=float, help="sparsity threshold")
    p.add_argument("--degree", type=int, help="max polynomial degree")
    p.add_argument("--hysteron", choices=["relay", "proximity"])
    p.add_argument("--workers", type=int, default=1, help="parallel sweep points")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as e:
        print(f"pipeline error: {e}", file=sys.stderr)
        return EXIT_PIPELINE
    except HysidError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
