"""Run configuration: a single versioned JSON document that parameterizes
the whole pipeline. Unknown keys are rejected so typos fail loudly.
"""
from __future__ import annotations

import copy
import json

from .errors import ConfigError, HysidError
from .pipeline import IdentifyConfig
from .regression import StlsqConfig
from .tanksim import TankScenario

CONFIG_VERSION = 1

DEFAULT_CONFIG = {
    "config_version": CONFIG_VERSION,
    "seed": 0,
    "scenario": {
        "h0": 0.31,
        "h_min": 0.25,
        "h_max": 0.45,
        "q_in": 1.3e-4,
        "q_out": -0.6e-4,
        "pipe_delay_lp": 0,
        "n_steps": 12000,
        "base_step": 0.001,
        "initial_pump": 0,
    },
    "batch": {
        "n_runs": 20,
        "variations": {
            "q_in": [1.2e-4, 1.6e-4],
            "q_out": [-0.70e-4, -0.45e-4],
            "h0": [0.28, 0.40],
            "h_min": [0.23, 0.27],
            "h_max": [0.41, 0.45],
        },
    },
    "preprocess": {
        "scale_lo": -1.0,
        "scale_hi": 1.0,
        "snr": None,
        "noise_seed": 1234,
        "noise_channels": ["h"],
        "downsample": 1,
        "lag_q": 0,
    },
    "hysterons": {
        "kind": "proximity",
        "groups": [["h", "h_min", "h_max"]],
        "thresholds": {},
    },
    "library": {"degree": 1},
    "regression": {"lambda": 1.5e-4, "max_iterations": 20, "ridge": 0.0},
    "split": {"train_count": 16},
    "channels": ["h", "q_in", "q_out", "h_min", "h_max"],
    "predicted": ["h"],
    "experiment": {
        "degree_values": [1, 2, 3],
        "degree_snr": 1e6,
        "degree_downsample": 3,
        "degree_lambda": 3e-4,
        "degree_n_steps": 6000,
        "snr_values": [1000, 100, 50, 10],
        "snr_downsample": 5,
        "snr_lambda": 2e-3,
        "samplerate_factors": [10, 20, 25, 40, 50],
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key not in (
            "variations",
            "thresholds",
        ):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None) -> dict:
    """Defaults merged with the JSON file at `path` (if given)."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    version = doc.get("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {version}")
    return _merge(DEFAULT_CONFIG, doc)


def scenario_from(config: dict) -> TankScenario:
    try:
        return TankScenario(**config["scenario"])
    except (TypeError, HysidError) as e:
        raise ConfigError(f"invalid scenario: {e}") from e


def identify_config_from(config: dict) -> IdentifyConfig:
    pre = config["preprocess"]
    reg = config["regression"]
    hyst = config["hysterons"]
    if hyst["kind"] not in ("relay", "proximity"):
        raise ConfigError(f"unknown hysteron kind {hyst['kind']!r}")
    return IdentifyConfig(
        channels=tuple(config["channels"]),
        predicted=tuple(config["predicted"]),
        groups=tuple(tuple(g) for g in hyst["groups"]),
        thresholds=dict(hyst["thresholds"]),
        hysteron_kind=hyst["kind"],
        degree=int(config["library"]["degree"]),
        lag_q=int(pre["lag_q"]),
        scale_lo=float(pre["scale_lo"]),
        scale_hi=float(pre["scale_hi"]),
        stlsq=StlsqConfig(
            threshold=float(reg["lambda"]),
            max_iterations=int(reg["max_iterations"]),
            ridge=float(reg["ridge"]),
        ),
    )
