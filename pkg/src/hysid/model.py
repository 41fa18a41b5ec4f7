"""Identified sparse models: coefficients over a basis library plus the
hysteron specs needed to propagate discrete states during prediction.

Prediction runs in scaled space (the space the regression saw) and results
are unscaled only for reporting. Free-running prediction feeds model
outputs back as inputs; exogenous channels are held from the record.
Hysterons switch with plain relay semantics during prediction: the epsilon
bands exist only to robustify identification.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .dataset import ChannelScaling, IDENTITY_SCALING, TimeSeriesDataset
from .errors import DivergenceDetected, HysidError, NoSwitchObserved
from .hysteron import AUTO, HysteronSpec, eval_hysteron, eval_relay
from .library import BasisDescriptor

FORMAT_TAG = "hysid-model/1"
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class HysteronRef:
    """Threshold provenance: channel names (resolved per record) or constants."""

    signal: str
    lower: object  # channel name or numeric constant
    upper: object


@dataclass(frozen=True)
class SparseModel:
    descriptors: tuple
    coefficients: np.ndarray  # (n_library_columns, n_predicted)
    hysteron_specs: tuple
    scaling: dict
    lag_q: int
    predicted_channels: tuple
    state_channels: tuple
    hysteron_refs: tuple = ()

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.ndim == 1:
            coef = coef[:, None]
        if coef.shape != (len(self.descriptors), len(self.predicted_channels)):
            raise HysidError("coefficient matrix shape does not match model")
        for d in self.descriptors:
            if d.hysteron_index is not None and not (
                0 <= d.hysteron_index < len(self.hysteron_specs)
            ):
                raise HysidError(f"descriptor {d.name} references a missing hysteron")
        coef = coef.copy()
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "descriptors", tuple(self.descriptors))
        object.__setattr__(self, "hysteron_specs", tuple(self.hysteron_specs))
        object.__setattr__(self, "predicted_channels", tuple(self.predicted_channels))
        object.__setattr__(self, "state_channels", tuple(self.state_channels))
        object.__setattr__(self, "hysteron_refs", tuple(self.hysteron_refs))

    def scaling_for(self, name: str) -> ChannelScaling:
        return self.scaling.get(name, IDENTITY_SCALING)

    @property
    def n_signal_columns(self) -> int:
        return len(self.state_channels) * (self.lag_q + 1)


def _relay_step(spec: HysteronSpec, x: float, prev: int) -> int:
    if x >= spec.beta:
        return 1
    if x <= spec.alpha:
        return 0
    return prev


def _row(model: SparseModel, signal_vec: np.ndarray, hyst: np.ndarray) -> np.ndarray:
    row = np.empty(len(model.descriptors))
    for c, d in enumerate(model.descriptors):
        v = 1.0
        for i, p in enumerate(d.powers):
            if p:
                v *= signal_vec[i] ** p
        if d.hysteron_index is not None:
            h = hyst[d.hysteron_index]
            v *= (1 - h) if d.complement else h
        row[c] = v
    return row


def resolve_thresholds(model: SparseModel, record: TimeSeriesDataset) -> list:
    """Numeric (alpha, beta) per hysteron, taken from the record's constant
    threshold channels when the model carries channel references."""
    out = []
    for j, spec in enumerate(model.hysteron_specs):
        alpha, beta = spec.alpha, spec.beta
        if j < len(model.hysteron_refs):
            ref = model.hysteron_refs[j]
            for which, value in (("lower", ref.lower), ("upper", ref.upper)):
                if isinstance(value, str) and record.has_channel(value):
                    ch = record.channel(value)
                    if np.ptp(ch) == 0:
                        if which == "lower":
                            alpha = float(ch[0])
                        else:
                            beta = float(ch[0])
        out.append((alpha, beta))
    return out


def predict_one_step(
    model: SparseModel,
    values: dict,
    hysteron_states,
    lag_buffer=None,
):
    """One prediction step from raw-unit channel values.

    `values` maps every state channel to its current value;
    `hysteron_states` are the H(k-1) states; `lag_buffer` holds the q most
    recent past value dicts, newest first. Hysterons are updated first with
    the current signal values (relay semantics), then the library row is
    evaluated and multiplied into the coefficients.

    Returns (next_values, updated_hysteron_states) with next_values in raw
    units covering the predicted channels.
    """
    lag_buffer = list(lag_buffer or [])
    if len(lag_buffer) < model.lag_q:
        raise HysidError("lag buffer shorter than the model's lag horizon")

    updated = []
    for j, spec in enumerate(model.hysteron_specs):
        x = float(values[spec.signal_name])
        updated.append(_relay_step(spec, x, int(hysteron_states[j])))

    frames = [values] + lag_buffer[: model.lag_q]
    signal_vec = np.array(
        [
            model.scaling_for(name).apply(frame[name])
            for frame in frames
            for name in model.state_channels
        ],
        dtype=float,
    )
    row = _row(model, signal_vec, np.asarray(updated))
    nxt_scaled = row @ model.coefficients
    if not np.all(np.isfinite(nxt_scaled)):
        raise DivergenceDetected(0)
    nxt = {
        name: float(model.scaling_for(name).invert(nxt_scaled[i]))
        for i, name in enumerate(model.predicted_channels)
    }
    return nxt, updated


def _initial_hysteron_states(model, record, thresholds, start):
    """Resolve the pre-run hysteron states from the record itself.

    For auto-initialized hysterons the proximity evaluation with the
    model's epsilon bands resolves the pre-run state (it equals the relay
    evaluation when the bands are zero, and unlike the bare relay it still
    sees threshold events on coarsely sampled records); as a last resort
    the state comes from which threshold the first sample is closer to.
    """
    states = []
    for j, spec in enumerate(model.hysteron_specs):
        alpha, beta = thresholds[j]
        x = record.channel(spec.signal_name)
        if spec.initial_state != AUTO:
            try:
                tr = eval_relay(
                    HysteronSpec(
                        spec.signal_name, alpha, beta, 0.0, 0.0, spec.initial_state
                    ),
                    x,
                )
            except NoSwitchObserved:
                states.append(int(spec.initial_state))
                continue
            states.append(int(tr.states[start - 1]) if start > 0 else tr.init_state)
            continue
        try:
            tr = eval_hysteron(
                HysteronSpec(
                    spec.signal_name,
                    alpha,
                    beta,
                    spec.eps_alpha,
                    spec.eps_beta,
                    AUTO,
                ),
                x,
                "proximity",
            )
        except NoSwitchObserved:
            tr = None
        if tr is None:
            states.append(1 if abs(x[start] - beta) < abs(x[start] - alpha) else 0)
        else:
            states.append(int(tr.states[start - 1]) if start > 0 else tr.init_state)
    return states


def free_run(
    model: SparseModel,
    record: TimeSeriesDataset,
    n_steps: int | None = None,
) -> TimeSeriesDataset:
    """Iterate one-step predictions from the record's initial state.

    Predicted channels feed back; exogenous channels are held from the
    record. The returned dataset carries the predicted channels (raw units)
    plus one Hj channel per hysteron; it starts at sample index lag_q of
    the record. Aborts with DivergenceDetected when any scaled value
    exceeds 1e6.
    """
    start = model.lag_q
    max_steps = record.n_samples - 1 - start
    if n_steps is None:
        n_steps = max_steps
    if n_steps < 1:
        raise HysidError("n_steps must be >= 1")
    if n_steps > max_steps:
        raise HysidError("record too short for the requested horizon")

    thresholds = resolve_thresholds(model, record)
    specs = [
        HysteronSpec(s.signal_name, a, b, 0.0, 0.0, s.initial_state)
        for s, (a, b) in zip(model.hysteron_specs, thresholds)
    ]
    hyst_states = _initial_hysteron_states(model, record, thresholds, start)

    n_ch = len(model.state_channels)
    scaled_record = np.empty((n_ch, record.n_samples))
    for i, name in enumerate(model.state_channels):
        scaled_record[i] = model.scaling_for(name).apply(record.channel(name))
    pred_idx = [model.state_channels.index(p) for p in model.predicted_channels]

    # rolling scaled state: current frame followed by q past frames
    frames = [scaled_record[:, start - l].copy() for l in range(model.lag_q + 1)]

    n_out = n_steps + 1
    out_pred = np.empty((len(pred_idx), n_out))
    out_hyst = np.empty((len(specs), n_out))
    out_pred[:, 0] = [frames[0][i] for i in pred_idx]

    raw_cache = {name: model.scaling_for(name) for name in model.state_channels}

    for step in range(n_steps):
        k = start + step
        current = frames[0]
        for j, spec in enumerate(specs):
            i = model.state_channels.index(spec.signal_name)
            x_raw = float(raw_cache[spec.signal_name].invert(current[i]))
            hyst_states[j] = _relay_step(spec, x_raw, hyst_states[j])
        out_hyst[:, step] = hyst_states

        signal_vec = np.concatenate(frames)
        row = _row(model, signal_vec, np.asarray(hyst_states, dtype=float))
        nxt = row @ model.coefficients
        if not np.all(np.isfinite(nxt)) or np.any(np.abs(nxt) > DIVERGENCE_LIMIT):
            raise DivergenceDetected(step + 1)

        new_frame = scaled_record[:, k + 1].copy()
        for col, i in enumerate(pred_idx):
            new_frame[i] = nxt[col]
        frames = [new_frame] + frames[:-1] if model.lag_q else [new_frame]
        out_pred[:, step + 1] = nxt

    # final hysteron update for reporting symmetry
    current = frames[0]
    for j, spec in enumerate(specs):
        i = model.state_channels.index(spec.signal_name)
        x_raw = float(raw_cache[spec.signal_name].invert(current[i]))
        hyst_states[j] = _relay_step(spec, x_raw, hyst_states[j])
    out_hyst[:, n_steps] = hyst_states

    names = []
    data = []
    for col, p in enumerate(model.predicted_channels):
        names.append(p)
        data.append(model.scaling_for(p).invert(out_pred[col]))
    for j in range(len(specs)):
        names.append(f"H{j + 1}")
        data.append(out_hyst[j])
    return TimeSeriesDataset(tuple(names), np.vstack(data), record.sample_period)


def active_term_count(model: SparseModel) -> dict:
    """Exact nonzero coefficient count per predicted channel."""
    return {
        name: int(np.count_nonzero(model.coefficients[:, i]))
        for i, name in enumerate(model.predicted_channels)
    }


def render_equations(model: SparseModel) -> str:
    """Readable report: one line per predicted channel, nonzero terms only,
    coefficients with 6 significant digits, descriptors in library order,
    followed by the three-case switching rule of each hysteron."""
    lines = []
    for i, name in enumerate(model.predicted_channels):
        terms = []
        for c, d in enumerate(model.descriptors):
            v = model.coefficients[c, i]
            if v == 0:
                continue
            mag = f"{abs(v):.6g}"
            body = mag if d.kind == "constant" else f"{mag}*{d.name}"
            if not terms:
                terms.append(body if v >= 0 else f"-{body}")
            else:
                terms.append(("+ " if v >= 0 else "- ") + body)
        rhs = " ".join(terms) if terms else "0"
        lines.append(f"{name}(k+1) = {rhs}")
    for j, spec in enumerate(model.hysteron_specs):
        lines.append(
            f"H{j + 1}(k) = 1 if {spec.signal_name} >= {spec.beta:.6g}; "
            f"0 if {spec.signal_name} <= {spec.alpha:.6g}; else H{j + 1}(k-1)"
        )
    return "\n".join(lines) + "\n"


_TERM_RE = re.compile(r"^(?:(?P<coef>[0-9.eE+-]+)\*)?(?P<name>.+)$")


def parse_equations(text: str) -> dict:
    """Inverse of render_equations for the equation lines: maps each
    predicted channel to a list of (descriptor_name, coefficient)."""
    out = {}
    for line in text.strip().splitlines():
        if line.startswith("H") and "if" in line:
            continue
        lhs, rhs = line.split(" = ", 1)
        channel = lhs[: lhs.index("(k+1)")]
        terms = []
        if rhs.strip() != "0":
            sign = 1.0
            first = True
            for tok in rhs.split():
                if tok == "+":
                    sign = 1.0
                    continue
                if tok == "-":
                    sign = -1.0
                    continue
                if first and tok.startswith("-"):
                    sign, tok = -1.0, tok[1:]
                first = False
                if "*" in tok:
                    coef_s, name = tok.split("*", 1)
                    terms.append((name, sign * float(coef_s)))
                else:
                    terms.append(("1", sign * float(tok)))
                sign = 1.0
        out[channel] = terms
    return out


# --- serialization -----------------------------------------------------------


def _spec_to_dict(s: HysteronSpec) -> dict:
    return {
        "signal_name": s.signal_name,
        "alpha": s.alpha,
        "beta": s.beta,
        "eps_alpha": s.eps_alpha,
        "eps_beta": s.eps_beta,
        "initial_state": s.initial_state,
    }


def model_to_dict(model: SparseModel) -> dict:
    return {
        "format": FORMAT_TAG,
        "descriptors": [
            {
                "kind": d.kind,
                "powers": list(d.powers),
                "hysteron_index": d.hysteron_index,
                "complement": d.complement,
                "name": d.name,
            }
            for d in model.descriptors
        ],
        "coefficients": model.coefficients.tolist(),
        "hysteron_specs": [_spec_to_dict(s) for s in model.hysteron_specs],
        "hysteron_refs": [
            {"signal": r.signal, "lower": r.lower, "upper": r.upper}
            for r in model.hysteron_refs
        ],
        "scaling": {
            name: {"offset": m.offset, "gain": m.gain}
            for name, m in sorted(model.scaling.items())
        },
        "lag_q": model.lag_q,
        "predicted_channels": list(model.predicted_channels),
        "state_channels": list(model.state_channels),
    }


def model_from_dict(doc: dict) -> SparseModel:
    if doc.get("format") != FORMAT_TAG:
        raise HysidError(f"unsupported model format {doc.get('format')!r}")
    descriptors = tuple(
        BasisDescriptor(
            kind=d["kind"],
            powers=tuple(d["powers"]),
            hysteron_index=d["hysteron_index"],
            complement=d["complement"],
            name=d["name"],
        )
        for d in doc["descriptors"]
    )
    specs = tuple(HysteronSpec(**s) for s in doc["hysteron_specs"])
    refs = tuple(
        HysteronRef(r["signal"], r["lower"], r["upper"])
        for r in doc.get("hysteron_refs", [])
    )
    scaling = {
        name: ChannelScaling(offset=m["offset"], gain=m["gain"])
        for name, m in doc["scaling"].items()
    }
    return SparseModel(
        descriptors=descriptors,
        coefficients=np.asarray(doc["coefficients"], dtype=float),
        hysteron_specs=specs,
        scaling=scaling,
        lag_q=doc["lag_q"],
        predicted_channels=tuple(doc["predicted_channels"]),
        state_channels=tuple(doc["state_channels"]),
        hysteron_refs=refs,
    )


def save_model(model: SparseModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> SparseModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
