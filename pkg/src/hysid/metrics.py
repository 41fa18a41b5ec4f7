"""Prediction-quality metrics: free-run RMSE and switch-detection accuracy.

Switch matching pairs predicted and true switch indices greedily by nearest
neighbor within a +-5 sample window; unmatched true switches count as
missed, unmatched predicted ones as spurious.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HysidError

MATCH_WINDOW = 5


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise HysidError("rmse operands must have equal shape")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def toggle_indices(states: np.ndarray) -> np.ndarray:
    """Indices where a binary sequence changes value (index of the new state)."""
    s = np.asarray(states)
    return np.flatnonzero(np.diff(s) != 0) + 1


@dataclass(frozen=True)
class SwitchReport:
    matched: tuple  # (true_index, predicted_index) pairs
    missed: tuple  # unmatched true switch indices
    spurious: tuple  # unmatched predicted switch indices

    @property
    def errors(self):
        return tuple(p - t for t, p in self.matched)

    @property
    def max_abs_error(self):
        return max((abs(e) for e in self.errors), default=0)

    def to_dict(self) -> dict:
        return {
            "matched": [list(p) for p in self.matched],
            "missed": list(self.missed),
            "spurious": list(self.spurious),
            "errors": list(self.errors),
        }


def match_switches(true_idx, pred_idx, window: int = MATCH_WINDOW) -> SwitchReport:
    true_idx = [int(i) for i in true_idx]
    pred_idx = [int(i) for i in pred_idx]
    unused = set(range(len(pred_idx)))
    matched = []
    missed = []
    for t in true_idx:
        best = None
        for j in unused:
            d = abs(pred_idx[j] - t)
            if d <= window and (best is None or d < abs(pred_idx[best] - t)):
                best = j
        if best is None:
            missed.append(t)
        else:
            matched.append((t, pred_idx[best]))
            unused.discard(best)
    spurious = sorted(pred_idx[j] for j in unused)
    return SwitchReport(tuple(matched), tuple(missed), tuple(spurious))


@dataclass(frozen=True)
class MetricsReport:
    rmse_scaled: float
    rmse_raw: float
    switch: SwitchReport
    active_terms: dict
    library_columns: int
    diverged_at: int | None = None

    def __post_init__(self):
        if self.rmse_scaled < 0 or self.rmse_raw < 0:
            raise HysidError("rmse must be non-negative")

    def to_dict(self) -> dict:
        return {
            "rmse_scaled": self.rmse_scaled,
            "rmse_raw": self.rmse_raw,
            "switch": self.switch.to_dict(),
            "active_terms": dict(self.active_terms),
            "library_columns": self.library_columns,
            "diverged_at": self.diverged_at,
        }
