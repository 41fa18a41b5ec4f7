"""Uniformly sampled multichannel time series and the preprocessing steps
used before identification: affine scaling, noise injection, decimation,
lag embedding and train/validation splitting.

All operations are pure: they return new datasets and never mutate their
inputs. Data arrays are made read-only on construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ConstantChannel,
    HysidError,
    LengthMismatch,
    UnknownChannel,
)


@dataclass(frozen=True)
class ChannelScaling:
    """Affine map applied to a channel: scaled = gain * raw + offset."""

    offset: float
    gain: float

    def apply(self, x):
        return self.gain * np.asarray(x, dtype=float) + self.offset

    def invert(self, x):
        return (np.asarray(x, dtype=float) - self.offset) / self.gain


IDENTITY_SCALING = ChannelScaling(offset=0.0, gain=1.0)


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Named, uniformly sampled signal channels with a common sample period.

    `scaling` records the affine map that was applied per channel, if any;
    inverting it recovers the original values.
    """

    names: tuple
    data: np.ndarray  # shape (n_channels, n_samples)
    sample_period: float
    scaling: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise HysidError("data must be 2-D (channels x samples)")
        if data.shape[0] != len(self.names):
            raise HysidError("channel count does not match data rows")
        if len(set(self.names)) != len(self.names):
            raise HysidError("duplicate channel names")
        if data.shape[1] < 2:
            raise HysidError("channels must have length >= 2")
        if not self.sample_period > 0:
            raise HysidError("sample_period must be positive")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "data", data)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownChannel(name) from None

    def channel(self, name: str) -> np.ndarray:
        return self.data[self.index(name)]

    def has_channel(self, name: str) -> bool:
        return name in self.names

    def select(self, names: Sequence[str]) -> "TimeSeriesDataset":
        rows = [self.index(n) for n in names]
        scaling = {n: self.scaling[n] for n in names if n in self.scaling}
        return TimeSeriesDataset(tuple(names), self.data[rows], self.sample_period, scaling)

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.sample_period


@dataclass(frozen=True)
class LagSpec:
    """Number of past steps embedded into the regression state (FIR style)."""

    horizon_q: int = 0

    def __post_init__(self):
        if self.horizon_q < 0:
            raise HysidError("horizon_q must be non-negative")


def fit_scaling(
    runs: Sequence[TimeSeriesDataset],
    lo: float,
    hi: float,
    skip_constant: bool = False,
) -> dict:
    """Compute per-channel affine maps sending the pooled min/max of the
    given runs to [lo, hi].

    Channels that are constant over all runs raise ConstantChannel unless
    `skip_constant` is set, in which case they get the identity map.
    """
    if not lo < hi:
        raise HysidError("require lo < hi")
    names = runs[0].names
    maps = {}
    for name in names:
        mn = min(float(np.min(r.channel(name))) for r in runs)
        mx = max(float(np.max(r.channel(name))) for r in runs)
        if mx == mn:
            if skip_constant:
                maps[name] = IDENTITY_SCALING
                continue
            raise ConstantChannel(name)
        gain = (hi - lo) / (mx - mn)
        maps[name] = ChannelScaling(offset=lo - gain * mn, gain=gain)
    return maps


def apply_scaling(ds: TimeSeriesDataset, maps: dict) -> TimeSeriesDataset:
    data = np.empty_like(ds.data)
    for i, name in enumerate(ds.names):
        m = maps.get(name, IDENTITY_SCALING)
        data[i] = m.apply(ds.data[i])
    scaling = {name: maps.get(name, IDENTITY_SCALING) for name in ds.names}
    return TimeSeriesDataset(ds.names, data, ds.sample_period, scaling)


def unscale(ds: TimeSeriesDataset) -> TimeSeriesDataset:
    data = np.empty_like(ds.data)
    for i, name in enumerate(ds.names):
        m = ds.scaling.get(name, IDENTITY_SCALING)
        data[i] = m.invert(ds.data[i])
    return TimeSeriesDataset(ds.names, data, ds.sample_period, {})


def scale_affine(
    ds: TimeSeriesDataset,
    lo: float,
    hi: float,
    skip_constant: bool = False,
) -> TimeSeriesDataset:
    """Affinely map every channel onto [lo, hi], recording the maps."""
    return apply_scaling(ds, fit_scaling([ds], lo, hi, skip_constant=skip_constant))


def add_noise(
    ds: TimeSeriesDataset,
    snr: float,
    seed: int,
    channels: Sequence[str] | None = None,
) -> TimeSeriesDataset:
    """Add zero-mean Gaussian noise with variance = mean-square(channel) / snr.

    `snr` is a linear power ratio. Deterministic for a fixed seed; only the
    listed channels (default: all) are disturbed.
    """
    if not snr > 0:
        raise HysidError("snr must be positive")
    rng = np.random.default_rng(seed)
    targets = list(channels) if channels is not None else list(ds.names)
    data = ds.data.copy()
    for name in targets:
        i = ds.index(name)
        power = float(np.mean(data[i] ** 2))
        sigma = np.sqrt(power / snr)
        data[i] = data[i] + rng.normal(0.0, sigma, size=ds.n_samples)
    return TimeSeriesDataset(ds.names, data, ds.sample_period, dict(ds.scaling))


def downsample(ds: TimeSeriesDataset, factor: int) -> TimeSeriesDataset:
    """Keep every factor-th sample starting at index 0."""
    if factor < 1:
        raise HysidError("factor must be >= 1")
    if ds.n_samples <= factor:
        raise HysidError("dataset too short for this decimation factor")
    return TimeSeriesDataset(
        ds.names, ds.data[:, ::factor], ds.sample_period * factor, dict(ds.scaling)
    )


def split_scenarios(runs: Sequence, train_count: int):
    """Positional split: the first `train_count` runs train, the rest validate."""
    if not 0 < train_count < len(runs):
        raise HysidError("require 0 < train_count < number of runs")
    return list(runs[:train_count]), list(runs[train_count:])


class RegressionPair(NamedTuple):
    """Aligned matrices for the discrete one-step regression.

    state rows are X(k) = [x(k), H(k-1), Hb(k-1), x(k-1), H(k-2), ...];
    target rows are the predicted channels at k+1. `hysterons_updated`
    carries H(k)/Hb(k) propagated through the current sample, which is what
    the library multiplies with. `signals` is the non-hysteron part of the
    state (current + lagged signal columns) used for polynomial terms.
    """

    state: np.ndarray
    target: np.ndarray
    hysterons_updated: np.ndarray
    signals: np.ndarray
    state_names: tuple
    signal_names: tuple
    target_names: tuple
    row_start: int


def build_regression_pair(
    ds: TimeSeriesDataset,
    lags: LagSpec,
    traces: Sequence,
    predicted_channels: Sequence[str] | None = None,
) -> RegressionPair:
    """Assemble state/target matrices with one-step-delayed hysteron entries.

    Hysteron states enter the state matrix as H(k-1); the pre-first-sample
    state of each trace stands in for H(-1). Rows start at k = horizon_q and
    end at the second-to-last sample (the last has no next-step target).
    """
    m = ds.n_samples
    q = lags.horizon_q
    if q >= m:
        raise HysidError("lag horizon must be smaller than the dataset length")
    for tr in traces:
        if len(tr.states) != m:
            raise LengthMismatch(
                f"trace length {len(tr.states)} differs from dataset length {m}"
            )
    pred = list(predicted_channels) if predicted_channels is not None else list(ds.names)

    k0 = q
    rows = slice(k0, m - 1)

    def delayed(tr, d):
        # H(k-d) with the resolved initial state filling indices before 0.
        pad = np.full(d, tr.init_state, dtype=float)
        return np.concatenate([pad, np.asarray(tr.states, dtype=float)[: m - d]])

    cols = []
    names = []
    sig_cols = []
    sig_names = []
    for lag in range(q + 1):
        for i, name in enumerate(ds.names):
            col = ds.data[i, k0 - lag : m - 1 - lag]
            label = name if lag == 0 else f"{name}(k-{lag})"
            cols.append(col)
            names.append(label)
            sig_cols.append(col)
            sig_names.append(label)
        for j, tr in enumerate(traces):
            h = delayed(tr, lag + 1)[rows]
            hb = 1.0 - h
            cols.append(h)
            names.append(f"H{j + 1}(k-{lag + 1})")
            cols.append(hb)
            names.append(f"Hb{j + 1}(k-{lag + 1})")

    state = np.column_stack(cols) if cols else np.empty((m - 1 - k0, 0))
    signals = np.column_stack(sig_cols)

    upd_cols = []
    for tr in traces:
        h = np.asarray(tr.states, dtype=float)[rows]
        upd_cols.append(h)
        upd_cols.append(1.0 - h)
    hyst_updated = (
        np.column_stack(upd_cols) if upd_cols else np.empty((state.shape[0], 0))
    )

    target = np.column_stack([ds.channel(name)[k0 + 1 : m] for name in pred])
    return RegressionPair(
        state=state,
        target=target,
        hysterons_updated=hyst_updated,
        signals=signals,
        state_names=tuple(names),
        signal_names=tuple(sig_names),
        target_names=tuple(pred),
        row_start=k0,
    )


# --- CSV interface -----------------------------------------------------------
#
# First column `time` in seconds (strictly increasing, uniform), then one
# column per channel. Header row carries the names; `.` decimal separator.

_REL_TOL_SPACING = 1e-9


def write_csv(ds: TimeSeriesDataset, path) -> None:
    times = ds.times()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["time", *ds.names]) + "\n")
        for k in range(ds.n_samples):
            row = [repr(float(times[k]))]
            row.extend(repr(float(v)) for v in ds.data[:, k])
            fh.write(",".join(row) + "\n")


def read_csv(path) -> TimeSeriesDataset:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "time":
            raise HysidError(f"{path}: first column must be 'time'")
        names = tuple(header[1:])
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    if raw.shape[1] != len(names) + 1:
        raise HysidError(f"{path}: column count does not match header")
    times = raw[:, 0]
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise HysidError(f"{path}: time must be strictly increasing")
    period = float(np.median(steps))
    if np.max(np.abs(steps - period)) > _REL_TOL_SPACING * max(abs(period), 1.0):
        raise HysidError(f"{path}: non-uniform sample spacing")
    return TimeSeriesDataset(names, raw[:, 1:].T, period)
