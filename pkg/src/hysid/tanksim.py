"""Ground-truth generator: a tank whose level is kept between two set
points by a two-point pump controller, with an optional pipe delay.

Discrete dynamics, one step per sample:

    h(t+1) = h(t) + u(t) + q_out,    u(t) = q_in * cmd(t - l_p)

where cmd is the controller output: on when h <= h_min, off when h > h_max,
held in between. The resulting level is a sawtooth.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import HysidError, InfeasibleVariation


@dataclass(frozen=True)
class TankScenario:
    h0: float
    h_min: float
    h_max: float
    q_in: float  # level gain per step while the pump output is on, > 0
    q_out: float  # constant drain per step, < 0
    pipe_delay_lp: int = 0
    n_steps: int = 10000
    base_step: float = 0.001  # seconds per simulation step
    initial_pump: int = 0  # 0 off, 1 on

    def __post_init__(self):
        if not self.h_min < self.h_max:
            raise HysidError("require h_min < h_max")
        if not (self.q_in > 0 > self.q_out):
            raise HysidError("require q_in > 0 > q_out")
        if not self.q_in + self.q_out > 0:
            raise HysidError("level must be able to rise while the pump is on")
        if self.pipe_delay_lp < 0 or self.pipe_delay_lp >= self.n_steps:
            raise HysidError("require 0 <= pipe_delay_lp < n_steps")
        if self.n_steps < 2:
            raise HysidError("n_steps must be >= 2")
        if not self.base_step > 0:
            raise HysidError("base_step must be positive")
        if self.initial_pump not in (0, 1):
            raise HysidError("initial_pump must be 0 or 1")


def simulate(sc: TankScenario) -> TimeSeriesDataset:
    """Run the closed loop and emit h, u, pump_cmd plus the scenario
    constants (q_in, q_out, h_min, h_max) as data channels.

    The controller samples h at the current step; command history before
    t = 0 equals initial_pump.
    """
    n = sc.n_steps
    h = np.empty(n)
    u = np.empty(n)
    cmd = np.empty(n, dtype=np.int8)

    h[0] = sc.h0
    prev_cmd = sc.initial_pump
    # command history for the pipe delay, cmd[t] for t < 0
    history = [sc.initial_pump] * sc.pipe_delay_lp

    for t in range(n):
        if t > 0:
            h[t] = h[t - 1] + u[t - 1] + sc.q_out
        if h[t] <= sc.h_min:
            c = 1
        elif h[t] > sc.h_max:
            c = 0
        else:
            c = prev_cmd
        cmd[t] = c
        prev_cmd = c
        delayed = history[t - sc.pipe_delay_lp] if t < sc.pipe_delay_lp else cmd[t - sc.pipe_delay_lp]
        u[t] = sc.q_in * delayed

    const = np.ones(n)
    data = np.vstack(
        [h, u, cmd.astype(float), sc.q_in * const, sc.q_out * const,
         sc.h_min * const, sc.h_max * const]
    )
    names = ("h", "u", "pump_cmd", "q_in", "q_out", "h_min", "h_max")
    return TimeSeriesDataset(names, data, sc.base_step)


def make_scenario_batch(
    base: TankScenario,
    n_runs: int,
    variations: dict | None,
    seed: int,
) -> list:
    """Seeded batch of scenarios: the base unchanged, then n_runs - 1 copies
    with the listed fields drawn uniformly from (lo, hi) ranges.

    Integer fields are sampled over the inclusive integer range. A sampled
    combination violating the scenario invariants is retried up to 100
    times before InfeasibleVariation is raised.
    """
    if n_runs < 2:
        raise HysidError("n_runs must be >= 2")
    variations = variations or {}
    int_fields = {"pipe_delay_lp", "n_steps", "initial_pump"}
    rng = np.random.default_rng(seed)
    out = [base]
    for _ in range(n_runs - 1):
        for _attempt in range(100):
            fields = {}
            for name, (lo, hi) in variations.items():
                if name in int_fields:
                    fields[name] = int(rng.integers(int(lo), int(hi) + 1))
                else:
                    fields[name] = float(rng.uniform(lo, hi))
            try:
                out.append(replace(base, **fields))
                break
            except HysidError:
                continue
        else:
            raise InfeasibleVariation(
                "could not sample a feasible scenario within 100 attempts"
            )
    return out
