import copy

import numpy as np
import pytest

from hysid.config import DEFAULT_CONFIG
from hysid.dataset import TimeSeriesDataset
from hysid.tanksim import TankScenario, simulate


@pytest.fixture
def scenario():
    return TankScenario(
        h0=0.31,
        h_min=0.25,
        h_max=0.45,
        q_in=1.3e-4,
        q_out=-0.6e-4,
        n_steps=8000,
        base_step=0.001,
    )


@pytest.fixture
def tank_run(scenario):
    return simulate(scenario)


@pytest.fixture
def small_config():
    """Fast variant of the default configuration for end-to-end tests."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    cfg["scenario"]["n_steps"] = 6000
    cfg["batch"]["n_runs"] = 10
    cfg["split"]["train_count"] = 8
    cfg["experiment"]["degree_values"] = [1, 2]
    cfg["experiment"]["degree_n_steps"] = 6000
    cfg["experiment"]["snr_values"] = [1000, 10]
    cfg["experiment"]["samplerate_factors"] = [10, 25]
    return cfg


def make_dataset(n=100, channels=("a", "b"), period=0.01, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(len(channels), n))
    return TimeSeriesDataset(tuple(channels), data, period)


def build_true_tank_model(channels=("h", "q_in", "q_out", "h_min", "h_max")):
    """Hand-built exact model of the tank loop: h(k+1) = h + q_in*Hb1 + q_out,
    with the hysteron thresholds taken from the record's set-point channels."""
    from hysid.hysteron import HysteronSpec
    from hysid.library import enumerate_basis
    from hysid.model import HysteronRef, SparseModel

    descriptors = enumerate_basis(channels, 1, 1)
    coef = np.zeros((len(descriptors), 1))
    by_name = {d.name: i for i, d in enumerate(descriptors)}
    coef[by_name["h"], 0] = 1.0
    coef[by_name["q_in*Hb1"], 0] = 1.0
    coef[by_name["q_out"], 0] = 1.0
    return SparseModel(
        descriptors=tuple(descriptors),
        coefficients=coef,
        hysteron_specs=(HysteronSpec("h", 0.25, 0.45),),
        scaling={},
        lag_q=0,
        predicted_channels=("h",),
        state_channels=tuple(channels),
        hysteron_refs=(HysteronRef("h", "h_min", "h_max"),),
    )
