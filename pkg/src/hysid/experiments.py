"""The three experiment sweeps: polynomial degree, measurement noise and
sample rate (the last with both hysteron kinds).

Each sweep point is an independent identify + free-run evaluation; point
failures are recorded and the sweep continues. Results merge in sweep
order regardless of worker completion order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import identify_config_from, scenario_from
from .dataset import add_noise, downsample, split_scenarios
from .errors import HysidError
from .pipeline import identify, predict_free_run
from .tanksim import make_scenario_batch, simulate

TABLE_HEADER = "sweep_value,rmse,active_terms,missed_switches,library_columns"


@dataclass
class SweepPoint:
    sweep_value: object
    rmse: float
    active_terms: int
    missed_switches: int
    library_columns: int
    error: str | None = None
    # first validation run, for trajectory output: (time, true, predicted)
    trajectory: tuple | None = None
    label: str = ""

    def table_row(self) -> str:
        return ",".join(
            [
                str(self.sweep_value),
                repr(float(self.rmse)),
                str(self.active_terms),
                str(self.missed_switches),
                str(self.library_columns),
            ]
        )


def simulate_batch(config: dict):
    """Seeded scenario batch split into raw training and validation runs."""
    base = scenario_from(config)
    batch = make_scenario_batch(
        base,
        int(config["batch"]["n_runs"]),
        config["batch"]["variations"],
        int(config["seed"]),
    )
    runs = [simulate(sc) for sc in batch]
    return split_scenarios(runs, int(config["split"]["train_count"]))


def preprocess_runs(runs, config: dict, *, noise: bool = True):
    """Apply noise (per-run seeds) and decimation per the config.

    Noise models measurement corruption of the identification data; pass
    noise=False for validation runs so models are scored against the clean
    system response.
    """
    pre = config["preprocess"]
    out = []
    for i, run in enumerate(runs):
        ds = run
        if noise and pre["snr"] is not None:
            ds = add_noise(
                ds,
                float(pre["snr"]),
                int(pre["noise_seed"]) + i,
                pre["noise_channels"],
            )
        if int(pre["downsample"]) > 1:
            ds = downsample(ds, int(pre["downsample"]))
        out.append(ds)
    return out


def evaluate_point(config: dict, train_raw, val_raw, sweep_value, label="") -> SweepPoint:
    """Identify on the (preprocessed) training runs and score the model by
    free-running over every validation run."""
    try:
        train = preprocess_runs(train_raw, config)
        val = preprocess_runs(val_raw, config, noise=False)
        cfg = identify_config_from(config)
        model, info = identify(train, cfg)
        level = cfg.predicted[0]
        rmses = []
        missed = 0
        traj = None
        for i, record in enumerate(val):
            pred, report = predict_free_run(model, record)
            rmses.append(report.rmse_scaled)
            missed += len(report.switch.missed)
            if i == 0 and pred is not None:
                start = model.lag_q
                traj = (
                    record.times()[start:],
                    record.channel(level)[start:],
                    pred.channel(level),
                )
        return SweepPoint(
            sweep_value=sweep_value,
            rmse=float(np.mean(rmses)),
            active_terms=report.active_terms[level],
            missed_switches=missed,
            library_columns=info["library_columns"],
            trajectory=traj,
            label=label,
        )
    except HysidError as e:
        return SweepPoint(
            sweep_value=sweep_value,
            rmse=math.inf,
            active_terms=0,
            missed_switches=0,
            library_columns=0,
            error=str(e),
            label=label,
        )


def _config_for_degree(config: dict, degree: int) -> dict:
    exp = config["experiment"]
    out = {**config, "library": {**config["library"], "degree": int(degree)}}
    out["preprocess"] = {
        **config["preprocess"],
        "snr": exp["degree_snr"],
        "downsample": exp["degree_downsample"],
    }
    out["regression"] = {**config["regression"], "lambda": exp["degree_lambda"]}
    return out


def _config_for_snr(config: dict, snr: float) -> dict:
    exp = config["experiment"]
    out = {**config}
    out["preprocess"] = {
        **config["preprocess"],
        "snr": float(snr),
        "downsample": exp["snr_downsample"],
    }
    out["regression"] = {**config["regression"], "lambda": exp["snr_lambda"]}
    return out


def _config_for_samplerate(config: dict, factor: int, kind: str) -> dict:
    out = {**config}
    out["preprocess"] = {**config["preprocess"], "downsample": int(factor)}
    out["hysterons"] = {**config["hysterons"], "kind": kind}
    return out


def run_sweep(sweep: str, config: dict, workers: int = 1) -> list:
    """Run one named sweep; returns SweepPoints in deterministic order."""
    exp = config["experiment"]
    if sweep == "degree" and exp.get("degree_n_steps"):
        # shorter records keep the cumulative switch-phase drift of the
        # higher-degree models inside the matching tolerance, so the sweep
        # compares model structure rather than horizon length
        config = {
            **config,
            "scenario": {
                **config["scenario"],
                "n_steps": int(exp["degree_n_steps"]),
            },
        }
    train_raw, val_raw = simulate_batch(config)

    tasks = []
    if sweep == "degree":
        for d in exp["degree_values"]:
            tasks.append((_config_for_degree(config, d), d, ""))
    elif sweep == "snr":
        for s in exp["snr_values"]:
            tasks.append((_config_for_snr(config, s), s, ""))
    elif sweep == "samplerate":
        for kind in ("relay", "proximity"):
            for f in exp["samplerate_factors"]:
                tasks.append((_config_for_samplerate(config, f, kind), f, kind))
    else:
        raise HysidError(f"unknown sweep {sweep!r}")

    def run_task(task):
        cfg, value, label = task
        return evaluate_point(cfg, train_raw, val_raw, value, label)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_task, tasks))
    return [run_task(t) for t in tasks]
