from itertools import product
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hysid.errors import HysidError, NonFiniteValue
from hysid.library import BasisLibrary, count_columns, enumerate_basis, evaluate


def brute_force_monomials(n, max_degree):
    """Independent enumeration of exponent multi-indices with sum <= d."""
    out = set()
    for powers in product(range(max_degree + 1), repeat=n):
        if sum(powers) <= max_degree:
            out.add(powers)
    return out


def test_count_formula_trivial_cases():
    # P = C(n + d, d); columns = P * (2m + 1) after deduplication
    assert count_columns(1, 1, 1) == 2 * 3
    assert count_columns(3, 0, 2) == comb(5, 2)
    assert count_columns(0, 1, 0) == 3  # {1, H1, Hb1}
    assert count_columns(5, 1, 1) == 18  # tank benchmark library


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(0, 4),
    m=st.integers(0, 3),
    d=st.integers(0, 4),
)
def test_enumerate_matches_count_and_brute_force(n, m, d):
    names = [f"x{i}" for i in range(n)]
    basis = enumerate_basis(names, m, d)
    assert len(basis) == count_columns(n, m, d)
    # every descriptor name unique and order deterministic
    labels = [b.name for b in basis]
    assert len(set(labels)) == len(labels)
    assert [b.name for b in enumerate_basis(names, m, d)] == labels
    # monomial part enumerates exactly the multi-indices with sum <= d
    monos = {b.powers for b in basis if b.hysteron_index is None}
    assert monos == brute_force_monomials(n, d)
    # cross terms pair one non-constant monomial with one hysteron factor
    for b in basis:
        if b.kind == "cross":
            assert sum(b.powers) >= 1
            assert 0 <= b.hysteron_index < m
        if b.kind == "hysteron":
            assert sum(b.powers) == 0


def test_degree_zero_with_hysteron_deduplicates():
    basis = enumerate_basis([], 1, 0)
    assert [b.name for b in basis] == ["1", "H1", "Hb1"]


def test_enumerate_rejects_negative_arguments():
    with pytest.raises(HysidError):
        enumerate_basis(["x"], 0, -1)
    with pytest.raises(HysidError):
        enumerate_basis(["x"], -1, 0)


def test_evaluate_against_naive_oracle():
    rng = np.random.default_rng(1)
    signals = rng.normal(size=(40, 2))
    h = rng.integers(0, 2, size=40).astype(float)
    hyst = np.column_stack([h, 1 - h])
    basis = enumerate_basis(["a", "b"], 1, 2)
    lib = evaluate(basis, signals, hyst)
    assert isinstance(lib, BasisLibrary)
    assert lib.matrix.shape == (40, len(basis))
    for c, d in enumerate(basis):
        expected = signals[:, 0] ** d.powers[0] * signals[:, 1] ** d.powers[1]
        if d.hysteron_index is not None:
            expected = expected * ((1 - h) if d.complement else h)
        np.testing.assert_allclose(lib.matrix[:, c], expected, atol=1e-14)


def test_hysteron_and_complement_columns_sum_to_one():
    rng = np.random.default_rng(2)
    signals = rng.normal(size=(30, 1))
    h = rng.integers(0, 2, size=30).astype(float)
    basis = enumerate_basis(["x"], 1, 1)
    lib = evaluate(basis, signals, np.column_stack([h, 1 - h]))
    names = list(lib.names)
    s = lib.matrix[:, names.index("H1")] + lib.matrix[:, names.index("Hb1")]
    np.testing.assert_array_equal(s, np.ones(30))


def test_evaluate_rejects_non_finite_and_mismatched_rows():
    basis = enumerate_basis(["x"], 0, 2)
    with pytest.raises(NonFiniteValue):
        evaluate(basis, np.array([[1.0], [np.inf]]), np.empty((2, 0)))
    basis_h = enumerate_basis(["x"], 1, 1)
    with pytest.raises(HysidError):
        evaluate(basis_h, np.ones((4, 1)), np.ones((3, 2)))
