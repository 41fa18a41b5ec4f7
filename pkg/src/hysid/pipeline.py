"""End-to-end identification: candidate hysterons from data, scaling,
library assembly, sparse regression and free-run evaluation.

Threshold candidates are discovered structurally (which signal against
which reference channel or constant) and resolved to numeric thresholds
per run, so scenario batches may vary the set points between runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import library as blib
from .dataset import (
    IDENTITY_SCALING,
    ChannelScaling,
    LagSpec,
    TimeSeriesDataset,
    apply_scaling,
    build_regression_pair,
)
from .errors import DivergenceDetected, HysidError, NoSwitchObserved, PipelineError
from .hysteron import (
    HysteronSpec,
    build_differences,
    default_epsilon,
    denoise,
    eval_hysteron,
    eval_indicators,
    noise_sigma,
    pair_candidates,
    smoothing_window,
)
from .metrics import MetricsReport, match_switches, rmse, toggle_indices
from .model import HysteronRef, SparseModel, active_term_count, free_run
from .regression import StlsqConfig, stlsq


@dataclass(frozen=True)
class CandidateHysteron:
    """Structural threshold pair: signal plus lower/upper references, each a
    channel name or a numeric constant."""

    signal: str
    lower_ref: object
    upper_ref: object


@dataclass(frozen=True)
class IdentifyConfig:
    channels: tuple = ("h", "q_in", "q_out", "h_min", "h_max")
    predicted: tuple = ("h",)
    groups: tuple = (("h", "h_min", "h_max"),)
    thresholds: dict = field(default_factory=dict)
    hysteron_kind: str = "proximity"
    degree: int = 1
    lag_q: int = 0
    scale_lo: float = -1.0
    scale_hi: float = 1.0
    stlsq: StlsqConfig = field(default_factory=StlsqConfig)


def enumerate_candidates(
    ds: TimeSeriesDataset,
    groups: Sequence[Sequence[str]],
    thresholds: dict | None = None,
) -> list:
    """Discover candidate hysterons on one run: build differences, derive
    indicator pairs with empty overlap, keep those that express a relay on a
    single signal (shared minuend, distinct references)."""
    diffs = build_differences(ds, groups, thresholds)
    indicators = []
    for name, values, minuend, reference in diffs:
        up, lo = eval_indicators(values, source=name, signal=minuend, reference=reference)
        indicators.extend([up, lo])
    out = []
    seen = set()
    for lo, up in pair_candidates(indicators):
        if lo.signal != up.signal:
            continue
        key = (lo.signal, str(lo.reference), str(up.reference))
        if key in seen:
            continue
        seen.add(key)
        out.append(CandidateHysteron(lo.signal, lo.reference, up.reference))
    return out


def _resolve_ref(ref, ds: TimeSeriesDataset) -> float | None:
    if isinstance(ref, str):
        ch = ds.channel(ref)
        if np.ptp(ch) != 0:
            return None  # non-constant reference: no numeric threshold this run
        return float(ch[0])
    return float(ref)


def resolve_spec(
    cand: CandidateHysteron,
    ds: TimeSeriesDataset,
    kind: str,
) -> HysteronSpec | None:
    """Numeric spec for one run, or None when the candidate is not a valid
    relay on this run (unresolvable or inverted thresholds). Proximity
    epsilon bands follow the default policy evaluated on this run; a
    candidate whose required band exceeds a quarter of the threshold
    separation is rejected — at that noise level the switch locations
    cannot be told apart from noise excursions, and identification must
    proceed without the hysteron rather than with a fabricated state."""
    alpha = _resolve_ref(cand.lower_ref, ds)
    beta = _resolve_ref(cand.upper_ref, ds)
    if alpha is None or beta is None or not alpha < beta:
        return None
    eps_a = eps_b = 0.0
    if kind == "proximity":
        x = ds.channel(cand.signal)
        band = beta - alpha
        eps_a = default_epsilon(x, alpha, band)
        eps_b = default_epsilon(x, beta, band)
        if max(eps_a, eps_b) > 0.2 * band:
            return None
    return HysteronSpec(cand.signal, alpha, beta, eps_a, eps_b)


def evaluate_candidates(
    candidates: Sequence[CandidateHysteron],
    runs: Sequence[TimeSeriesDataset],
    kind: str,
):
    """Per-run traces for every candidate that is viable on all runs.

    Returns (kept_candidates, specs_first_run, traces) where traces[r][j]
    is candidate j evaluated on run r. Candidates that cannot be resolved
    or never switch on some run are dropped.
    """
    kept = []
    first_specs = []
    per_candidate = []
    for cand in candidates:
        specs = []
        traces = []
        try:
            for run in runs:
                spec = resolve_spec(cand, run, kind)
                if spec is None:
                    raise NoSwitchObserved("unresolvable candidate")
                x = denoise(run.channel(cand.signal))
                traces.append(eval_hysteron(spec, x, kind))
                specs.append(spec)
        except NoSwitchObserved:
            continue
        kept.append(cand)
        first_specs.append(specs[0])
        per_candidate.append(traces)
    by_run = [
        [per_candidate[j][r] for j in range(len(kept))] for r in range(len(runs))
    ]
    return kept, first_specs, by_run


def fit_scaling_policy(
    runs: Sequence[TimeSeriesDataset],
    channels: Sequence[str],
    lo: float,
    hi: float,
) -> dict:
    """Affine maps from the pooled training min/max.

    Channels that are constant within every run are per-run parameters
    (set points, flow rates); scaling them would fold their values into
    offsets and hide them from the regression, so they keep the identity.
    """
    maps = {}
    for name in channels:
        varies = any(np.ptp(r.channel(name)) > 0 for r in runs)
        if not varies:
            maps[name] = IDENTITY_SCALING
            continue
        mn = min(float(np.min(r.channel(name))) for r in runs)
        mx = max(float(np.max(r.channel(name))) for r in runs)
        gain = (hi - lo) / (mx - mn)
        maps[name] = ChannelScaling(offset=lo - gain * mn, gain=gain)
    return maps


def _denoise_run(run: TimeSeriesDataset, channels: Sequence[str]) -> TimeSeriesDataset:
    """Copy of a run with each noisy listed channel replaced by its
    moving-average estimate (see hysteron.denoise).

    One-step regression on raw noisy samples suffers errors-in-variables
    attenuation: the per-step signal increment can be far below the noise
    floor, shrinking the identified state coefficient and making free runs
    decay to the mean. Regressing on the smoothed signal instead removes
    the bias to second order, because regressor and target share almost
    the same averaging window, and is exact on the linear stretches that
    the row filter keeps. Noise-free channels pass through untouched.
    """
    data = run.data.copy()
    changed = False
    for name in channels:
        i = run.index(name)
        smoothed = denoise(data[i])
        if smoothed is not data[i]:
            data[i] = smoothed
            changed = True
    if not changed:
        return run
    return TimeSeriesDataset(run.names, data, run.sample_period, dict(run.scaling))


def _consistent_rows(run, traces, row_start: int, n_rows: int) -> np.ndarray:
    """Mask of regression rows whose hysteron states are trustworthy.

    Two kinds of rows are dropped: (1) rows straddling a detected switch —
    the physical toggle happened inside the sample interval, so the row
    mixes both controller states; (2) rows where the signal lies within an
    uncertainty margin (twice the epsilon band) of a threshold — detected
    switch timing can be off by up to one band width there, so the hysteron
    state is ambiguous. The distance test runs on the denoised signal:
    selecting rows by the measured value would condition the retained noise
    (rows survive because their noise pushed them away from the threshold),
    which silently biases the regression. The margin is capped at a quarter
    of the threshold band so it can never exhaust the data.
    """
    keep = np.ones(n_rows, dtype=bool)
    for tr in traces:
        # the guard widens with the smoothing window: a moving average
        # straddling a turnaround blends the incoming and outgoing slopes,
        # so every row whose window (or whose target's window) overlaps
        # the switch carries a mixed increment
        w = smoothing_window(run.channel(tr.spec.signal_name))
        guard = max(2, w // 2 + 2)
        for s, _direction in tr.switch_indices:
            k = s - row_start
            keep[max(k - guard, 0) : k + guard] = False
    for spec in (tr.spec for tr in traces):
        raw = run.channel(spec.signal_name)
        x = denoise(raw)[row_start : row_start + n_rows]
        # the reflect-padded moving average flattens the slope where its
        # window touches a record boundary; those rows carry biased
        # increments and must not enter the regression
        w = smoothing_window(raw)
        if w > 1:
            keep[: max(0, w - row_start)] = False
            keep[n_rows - w :] = False
        band = spec.beta - spec.alpha
        for threshold, eps in (
            (spec.alpha, spec.eps_alpha),
            (spec.beta, spec.eps_beta),
        ):
            margin = min(2.0 * eps, 0.25 * band)
            if margin > 0:
                keep &= np.abs(x - threshold) > margin
    return keep


def identify(
    train_runs: Sequence[TimeSeriesDataset],
    cfg: IdentifyConfig,
):
    """Full pipeline on training runs. Returns (model, info) where info
    reports the library size and candidate count."""
    if not train_runs:
        raise HysidError("no training runs")

    try:
        candidates = enumerate_candidates(train_runs[0], cfg.groups, cfg.thresholds)
        candidates, specs, traces_by_run = evaluate_candidates(
            candidates, train_runs, cfg.hysteron_kind
        )
    except HysidError as e:
        raise PipelineError("hysterons", e) from e

    clean_runs = [_denoise_run(run, cfg.channels) for run in train_runs]
    try:
        # fit on the denoised runs: the pooled min/max of a raw noisy
        # channel is inflated by the noise extremes, which would shrink the
        # gain and make scaled quantities incomparable across noise levels
        maps = fit_scaling_policy(clean_runs, cfg.channels, cfg.scale_lo, cfg.scale_hi)
    except HysidError as e:
        raise PipelineError("scaling", e) from e

    lags = LagSpec(cfg.lag_q)
    thetas = []
    targets = []
    descriptors = None
    try:
        for run, clean, traces in zip(train_runs, clean_runs, traces_by_run):
            scaled = apply_scaling(clean.select(cfg.channels), maps)
            pair = build_regression_pair(scaled, lags, traces, cfg.predicted)
            if descriptors is None:
                descriptors = blib.enumerate_basis(
                    pair.signal_names, len(traces), cfg.degree
                )
            lib = blib.evaluate(descriptors, pair.signals, pair.hysterons_updated)
            keep = _consistent_rows(run, traces, pair.row_start, lib.matrix.shape[0])
            thetas.append(lib.matrix[keep])
            targets.append(pair.target[keep])
        theta = np.vstack(thetas)
        target = np.vstack(targets)
    except HysidError as e:
        raise PipelineError("library", e) from e

    try:
        coefs, _ = stlsq(theta, target, cfg.stlsq)
    except HysidError as e:
        raise PipelineError("regression", e) from e

    refs = tuple(
        HysteronRef(c.signal, c.lower_ref, c.upper_ref) for c in candidates
    )
    model = SparseModel(
        descriptors=tuple(descriptors),
        coefficients=coefs,
        hysteron_specs=tuple(specs),
        scaling={name: maps[name] for name in cfg.channels},
        lag_q=cfg.lag_q,
        predicted_channels=cfg.predicted,
        state_channels=cfg.channels,
        hysteron_refs=refs,
    )
    info = {
        "library_columns": len(descriptors),
        "candidates": len(candidates),
        "rows": int(theta.shape[0]),
    }
    return model, info


def true_switches(record: TimeSeriesDataset) -> np.ndarray:
    """Reference switch indices: pump command toggles when available."""
    if record.has_channel("pump_cmd"):
        return toggle_indices(record.channel("pump_cmd"))
    return np.array([], dtype=int)


def predict_free_run(model: SparseModel, record: TimeSeriesDataset):
    """Free-run the model over a validation record and score it.

    Returns (prediction_dataset_or_None, MetricsReport). On divergence the
    dataset is None and the report carries the failing step.
    """
    level = model.predicted_channels[0]
    start = model.lag_q
    lib_cols = len(model.descriptors)
    truth_raw = record.channel(level)[start:]
    try:
        pred = free_run(model, record)
    except DivergenceDetected as e:
        report = MetricsReport(
            rmse_scaled=math.inf,
            rmse_raw=math.inf,
            switch=match_switches(true_switches(record) - start, []),
            active_terms=active_term_count(model),
            library_columns=lib_cols,
            diverged_at=e.step,
        )
        return None, report

    pred_raw = pred.channel(level)
    scale = model.scaling_for(level)
    report = MetricsReport(
        rmse_scaled=rmse(scale.apply(truth_raw), scale.apply(pred_raw)),
        rmse_raw=rmse(truth_raw, pred_raw),
        switch=match_switches(
            true_switches(record) - start,
            toggle_indices(pred.channel("H1")) if model.hysteron_specs else [],
        ),
        active_terms=active_term_count(model),
        library_columns=lib_cols,
    )
    return pred, report
