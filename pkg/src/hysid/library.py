"""Candidate basis functions and their evaluation into the library matrix.

The library has three parts: polynomials of the (non-hysteron) state
columns, those same polynomials multiplied with each propagated hysteron
column, and the propagated hysteron columns alone. The constant-times-
hysteron products duplicate the bare hysteron columns and are dropped, so
the column count is C(n + d, d) * (2m + 1) for n state columns, m hysterons
and degree d.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb
from typing import Sequence

import numpy as np

from .errors import HysidError, NonFiniteValue


@dataclass(frozen=True)
class BasisDescriptor:
    """One library column.

    kind: constant | monomial | hysteron | cross. `powers` is the exponent
    multi-index over the state's signal columns (all zeros except for
    monomial/cross). `hysteron_index` selects the hysteron factor, with
    `complement` picking Hb instead of H.
    """

    kind: str
    powers: tuple
    hysteron_index: int | None
    complement: bool
    name: str


@dataclass(frozen=True)
class BasisLibrary:
    descriptors: tuple
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape[1] != len(self.descriptors):
            raise HysidError("column count does not match descriptor count")

    @property
    def names(self):
        return tuple(d.name for d in self.descriptors)


def _monomial_name(powers, names):
    parts = []
    for p, n in zip(powers, names):
        if p == 1:
            parts.append(n)
        elif p > 1:
            parts.append(f"{n}^{p}")
    return "*".join(parts) if parts else "1"


def _hysteron_name(index, complement):
    return f"{'Hb' if complement else 'H'}{index + 1}"


def enumerate_basis(
    signal_names: Sequence[str],
    n_hysterons: int,
    max_degree: int,
) -> list:
    """Deterministic descriptor list in graded lexicographic monomial order.

    Part 1: constant plus all monomials up to max_degree. Part 2: every
    non-constant part-1 descriptor times each of the 2*n_hysterons hysteron
    columns (the constant products are the part-3 columns and are not
    repeated). Part 3: the propagated hysteron columns alone.
    """
    if max_degree < 0:
        raise HysidError("max_degree must be >= 0")
    if n_hysterons < 0:
        raise HysidError("n_hysterons must be >= 0")
    names = list(signal_names)
    n = len(names)

    monomials = []
    for degree in range(max_degree + 1):
        for combo in combinations_with_replacement(range(n), degree):
            powers = [0] * n
            for i in combo:
                powers[i] += 1
            monomials.append(tuple(powers))

    zero = tuple([0] * n)
    part1 = [
        BasisDescriptor(
            kind="constant" if p == zero else "monomial",
            powers=p,
            hysteron_index=None,
            complement=False,
            name=_monomial_name(p, names),
        )
        for p in monomials
    ]

    hyst = [(j, comp) for j in range(n_hysterons) for comp in (False, True)]

    part2 = [
        BasisDescriptor(
            kind="cross",
            powers=d.powers,
            hysteron_index=j,
            complement=comp,
            name=f"{d.name}*{_hysteron_name(j, comp)}",
        )
        for d in part1
        if d.kind != "constant"
        for (j, comp) in hyst
    ]

    part3 = [
        BasisDescriptor(
            kind="hysteron",
            powers=zero,
            hysteron_index=j,
            complement=comp,
            name=_hysteron_name(j, comp),
        )
        for (j, comp) in hyst
    ]

    return part1 + part2 + part3


def count_columns(n_state_cols: int, n_hysterons: int, max_degree: int) -> int:
    """Closed-form column count after deduplication."""
    p = comb(n_state_cols + max_degree, max_degree)
    return p * (2 * n_hysterons + 1)


def evaluate(
    descriptors: Sequence[BasisDescriptor],
    signals: np.ndarray,
    hysterons: np.ndarray,
) -> BasisLibrary:
    """Evaluate descriptors into the library matrix.

    `signals` holds the non-hysteron state columns (current and lagged);
    `hysterons` holds the updated columns [H1, Hb1, H2, Hb2, ...] aligned to
    the same rows.
    """
    signals = np.asarray(signals, dtype=float)
    hysterons = np.asarray(hysterons, dtype=float)
    rows = signals.shape[0]
    if hysterons.size and hysterons.shape[0] != rows:
        raise HysidError("signal and hysteron row counts differ")

    cols = np.empty((rows, len(descriptors)))
    for c, d in enumerate(descriptors):
        col = np.ones(rows)
        for i, p in enumerate(d.powers):
            if p:
                col = col * signals[:, i] ** p
        if d.hysteron_index is not None:
            h = hysterons[:, 2 * d.hysteron_index + (1 if d.complement else 0)]
            col = col * h
        cols[:, c] = col

    bad = ~np.isfinite(cols)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFiniteValue(int(r), int(c))
    return BasisLibrary(tuple(descriptors), cols)
