"""Relay and proximity hysterons plus the machinery that discovers candidate
threshold pairs from data: signal differences, indicator functions and
overlap-free pairing.

A relay hysteron switches to 1 at x >= beta, to 0 at x <= alpha and holds in
between. The proximity variant widens each threshold by an epsilon band and
fires at the extremum of each connected excursion into the band, or
immediately when the true threshold itself is reached.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import (
    HysidError,
    InvalidSample,
    NoSwitchObserved,
    UnknownChannel,
)

AUTO = "auto"


@dataclass(frozen=True)
class HysteronSpec:
    """Threshold pair with optional epsilon bands and initial-state policy."""

    signal_name: str
    alpha: float
    beta: float
    eps_alpha: float = 0.0
    eps_beta: float = 0.0
    initial_state: object = AUTO  # 0, 1 or "auto"

    def __post_init__(self):
        if not self.alpha < self.beta:
            raise HysidError("require alpha < beta")
        if self.eps_alpha < 0 or self.eps_beta < 0:
            raise HysidError("epsilon bands must be non-negative")
        if self.eps_alpha + self.eps_beta >= self.beta - self.alpha:
            raise HysidError("epsilon bands must not overlap")
        if self.initial_state not in (0, 1, AUTO):
            raise HysidError("initial_state must be 0, 1 or 'auto'")


@dataclass(frozen=True)
class HysteronTrace:
    """Evaluated binary state sequence of one hysteron.

    `init_state` is the resolved state *before* the first sample; it fills
    the H(k-1) slot at k = 0 during lag embedding. `switch_indices` lists
    (index, "up"|"down") state changes, which strictly alternate.
    """

    spec: HysteronSpec
    states: np.ndarray
    switch_indices: tuple
    init_state: int

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.int8)
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @property
    def complement(self) -> np.ndarray:
        return 1 - self.states


@dataclass(frozen=True)
class IndicatorTrace:
    """Binary mask of one side of a threshold comparison.

    kind: "upper" (x >= 0 on a difference) or "lower" (x < 0). `source` is
    the difference channel the mask came from; `signal`/`reference` keep the
    minuend/subtrahend so a numeric threshold can be recovered later.
    """

    values: np.ndarray
    kind: str
    source: str
    signal: str | None = None
    reference: object = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int8)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def build_differences(
    ds: TimeSeriesDataset,
    commensurable_groups: Sequence[Sequence[str]],
    thresholds: dict | None = None,
) -> list:
    """All pairwise differences within each group, plus differences against
    user-supplied candidate threshold constants.

    Returns (name, values, minuend, subtrahend) tuples named "<a>-<b>".
    """
    seen = set()
    for group in commensurable_groups:
        for name in group:
            if not ds.has_channel(name):
                raise UnknownChannel(name)
            if name in seen:
                raise HysidError(f"channel {name!r} appears in more than one group")
            seen.add(name)
    thresholds = thresholds or {}
    out = []
    for group in commensurable_groups:
        group = list(group)
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                out.append((f"{a}-{b}", ds.channel(a) - ds.channel(b), a, b))
        for a in group:
            for tname, tval in thresholds.items():
                out.append((f"{a}-{tname}", ds.channel(a) - tval, a, float(tval)))
    return out


def eval_indicators(diff: np.ndarray, source: str = "", signal: str | None = None,
                    reference: object = None):
    """Masks I (diff >= 0) and Ibar (diff < 0); they partition every index."""
    diff = np.asarray(diff, dtype=float)
    if not np.all(np.isfinite(diff)):
        raise InvalidSample(f"non-finite value in difference {source!r}")
    upper = (diff >= 0).astype(np.int8)
    return (
        IndicatorTrace(upper, "upper", source, signal, reference),
        IndicatorTrace(1 - upper, "lower", source, signal, reference),
    )


def pair_candidates(indicators: Sequence[IndicatorTrace]) -> list:
    """All (lower, upper) indicator pairs that are never simultaneously true.

    An indicator is never paired with its own complement: that pair has an
    empty hold region and degenerates to a memoryless step.
    """
    lowers = [t for t in indicators if t.kind == "lower"]
    uppers = [t for t in indicators if t.kind == "upper"]
    pairs = []
    for lo in lowers:
        for up in uppers:
            if lo.source == up.source:
                continue
            if np.any(lo.values & up.values):
                continue
            pairs.append((lo, up))
    return pairs


def _check_signal(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidSample("non-finite sample in hysteron input")
    return x


def _states_from_codes(codes: np.ndarray, initial_state) -> tuple:
    """Forward-fill switch codes (1 up, 0 down, -1 hold) into a state trace."""
    n = len(codes)
    idx = np.where(codes >= 0, np.arange(n), -1)
    np.maximum.accumulate(idx, out=idx)

    firing = np.flatnonzero(codes >= 0)
    if initial_state == AUTO:
        if firing.size == 0:
            raise NoSwitchObserved("cannot auto-initialize: no switch in the data")
        init = 1 - int(codes[firing[0]])
    else:
        init = int(initial_state)

    states = np.where(idx >= 0, codes[np.maximum(idx, 0)], init).astype(np.int8)

    prev = np.concatenate([[init], states[:-1]])
    changed = np.flatnonzero(states != prev)
    switches = tuple(
        (int(k), "up" if states[k] == 1 else "down") for k in changed
    )
    return states, switches, init


def eval_relay(spec: HysteronSpec, x: np.ndarray) -> HysteronTrace:
    """Three-case relay rule: 1 at x >= beta, 0 at x <= alpha, else hold."""
    if spec.eps_alpha != 0 or spec.eps_beta != 0:
        raise HysidError("eval_relay requires zero epsilon bands")
    x = _check_signal(x)
    codes = np.full(len(x), -1, dtype=np.int64)
    codes[x <= spec.alpha] = 0
    codes[x >= spec.beta] = 1
    states, switches, init = _states_from_codes(codes, spec.initial_state)
    return HysteronTrace(spec, states, switches, init)


def _runs_of(mask: np.ndarray):
    """Maximal connected index runs where mask holds, as (start, stop) slices."""
    padded = np.concatenate([[0], mask.astype(np.int8), [0]])
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1)
    return list(zip(starts, stops))


def eval_proximity(spec: HysteronSpec, x: np.ndarray) -> HysteronTrace:
    """Epsilon-band hysteron.

    Upper excursions are maximal runs with x >= beta - eps_beta. If an
    excursion reaches beta the up-switch fires at the first sample with
    x >= beta, regardless of where the extremum lies; otherwise it fires at
    the first sample attaining the excursion maximum. Lower excursions are
    handled symmetrically. With zero bands this reduces to eval_relay.
    """
    x = _check_signal(x)
    n = len(x)
    codes = np.full(n, -1, dtype=np.int64)

    upper_mask = x >= spec.beta - spec.eps_beta
    lower_mask = (x < spec.alpha + spec.eps_alpha) | (x <= spec.alpha)

    for start, stop in _runs_of(upper_mask):
        seg = x[start:stop]
        hit = np.flatnonzero(seg >= spec.beta)
        fire = start + (hit[0] if hit.size else int(np.argmax(seg)))
        codes[fire] = 1
    for start, stop in _runs_of(lower_mask):
        seg = x[start:stop]
        hit = np.flatnonzero(seg <= spec.alpha)
        fire = start + (hit[0] if hit.size else int(np.argmin(seg)))
        codes[fire] = 0

    states, switches, init = _states_from_codes(codes, spec.initial_state)
    return HysteronTrace(spec, states, switches, init)


def eval_hysteron(spec: HysteronSpec, x: np.ndarray, kind: str) -> HysteronTrace:
    if kind == "relay":
        if spec.eps_alpha or spec.eps_beta:
            spec = HysteronSpec(
                spec.signal_name, spec.alpha, spec.beta, 0.0, 0.0, spec.initial_state
            )
        return eval_relay(spec, x)
    if kind == "proximity":
        return eval_proximity(spec, x)
    raise HysidError(f"unknown hysteron kind {kind!r}")


def noise_sigma(x: np.ndarray) -> float:
    """Robust per-sample noise estimate from second differences.

    The second difference annihilates any locally linear trend, so for a
    piecewise-linear signal it is pure noise except at the few slope breaks,
    which the median absolute deviation ignores. Exactly zero for noise-free
    piecewise-linear data.
    """
    d2 = np.diff(np.asarray(x, dtype=float), n=2)
    if d2.size == 0:
        return 0.0
    mad = float(np.median(np.abs(d2 - np.median(d2))))
    return 1.4826 * mad / np.sqrt(6.0)


def signal_step(x: np.ndarray, sigma: float | None = None) -> float:
    """Per-sample signal increment, robust to noise far above the step.

    mean((x(k+L) - x(k))^2) equals the squared signal movement over L
    samples plus exactly 2 sigma^2, so subtracting the noise floor and
    dividing by L recovers the slope — but only once L is large enough
    that the movement dominates the floor's sampling error. The lag is
    doubled until that holds. Returns 0 when the signal never emerges from
    the noise (no resolvable slope).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        return 0.0
    if sigma is None:
        sigma = noise_sigma(x)
    if sigma == 0:
        return float(np.sqrt(np.mean(np.diff(x) ** 2)))
    lag = 1
    while lag <= n // 4:
        d = x[lag:] - x[:-lag]
        s2 = float(np.mean(d**2)) - 2.0 * sigma**2
        if s2 > 20.0 * sigma**2 / np.sqrt(d.size):
            return float(np.sqrt(s2)) / lag
        lag *= 2
    return 0.0


def smoothing_window(x: np.ndarray) -> int:
    """Odd moving-average window for pre-detection denoising.

    Averaging over w samples shrinks the noise by sqrt(w) but rounds true
    extrema over roughly w/2 samples; w ~ (5 sigma/step)^(2/3) balances the
    two error sources. Returns 1 (no smoothing) for noise-free data, and is
    capped at 5% of the record so short records are never oversmoothed.
    """
    x = np.asarray(x, dtype=float)
    sigma = noise_sigma(x)
    if sigma == 0 or x.size < 8:
        return 1
    step = signal_step(x, sigma)
    if step <= 0:
        w = x.size // 20
    else:
        w = int(np.ceil((5.0 * sigma / step) ** (2.0 / 3.0)))
    w = int(np.clip(w, 1, max(1, x.size // 20)))
    if w % 2 == 0:
        w += 1
    return w if w >= 3 else 1


def denoise(x: np.ndarray, window: int | None = None) -> np.ndarray:
    """Centered moving average with reflected ends; identity for window 1.

    Noise-free signals pass through untouched (smoothing_window returns 1),
    so threshold timing on clean data is never perturbed.
    """
    x = np.asarray(x, dtype=float)
    w = smoothing_window(x) if window is None else int(window)
    if w < 3:
        return x
    half = w // 2
    padded = np.concatenate([x[half:0:-1], x, x[-2 : -half - 2 : -1]])
    return np.convolve(padded, np.full(w, 1.0 / w), mode="valid")


def default_epsilon(x: np.ndarray, threshold: float, band: float) -> float:
    """Epsilon band sized so that every true threshold event of the
    denoised signal lands inside the band.

    Three effects set the width: (1) a trajectory that barely crosses the
    threshold and turns around between samples shows a sampled extremum up
    to one full step short of the threshold; (2) residual noise after
    moving-average denoising (sigma / sqrt(w)) shifts extrema further; and
    (3) the averaging rounds true corners by about w/4 steps. The step
    size is estimated from the de-noised mean square of the per-step
    changes near the threshold (a step carries signal variance plus twice
    the per-sample noise variance). For noise-free data this reduces to
    1.25 times the local step. The value is NOT capped here; callers that
    find it exceeding a sizable fraction of `band` should treat the
    threshold as undetectable at this noise level.
    """
    x = np.asarray(x, dtype=float)
    steps = np.diff(x)
    if steps.size == 0:
        return 0.0
    sigma = noise_sigma(x)
    if sigma == 0:
        # noise-free: local step near the threshold (rise and fall rates
        # may differ, and only the local one sets the sampled shortfall)
        reach = float(np.sqrt(np.mean(steps**2)))
        lo = np.minimum(x[:-1], x[1:])
        hi = np.maximum(x[:-1], x[1:])
        near = (lo <= threshold + reach) & (hi >= threshold - reach)
        local = steps[near] if np.any(near) else steps
        return 1.25 * float(np.sqrt(np.mean(local**2)))
    w = smoothing_window(x)
    step = signal_step(x, sigma)
    rounding = 0.0 if w == 1 else w * step / 4.0
    return 1.25 * step + 3.0 * sigma / np.sqrt(w) + rounding
