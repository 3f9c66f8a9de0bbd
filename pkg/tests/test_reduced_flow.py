import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cr_webster.criterion import AbstractCriticalData, PointData
from cr_webster.errors import FlowConsistencyError, InputError
from cr_webster.reduced_flow import (
    AT_INFINITY,
    BUDGET,
    CONVERGED,
    EXITED,
    NOT_ATTAINED,
    FlowConfig,
    alpha_equilibrium,
    balance_residual,
    classify_matrix,
    classify_tuple,
    integrate,
)


def two_maxima(G):
    pts = [PointData("y1", 1.0, -3.0, 0.0, 3), PointData("y2", 1.0, -3.0, 0.0, 3)]
    return AbstractCriticalData(pts, {("y1", "y2"): G})


def test_alpha_examples():
    assert np.allclose(alpha_equilibrium([2.0, 2.0, 2.0]), 1 / np.sqrt(3))
    a = alpha_equilibrium([1.0, 4.0])
    assert np.allclose(a, np.array([1.0, 0.5]) / np.hypot(1.0, 0.5))
    with pytest.raises(InputError):
        alpha_equilibrium([1.0, 0.0])


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=6))
def test_alpha_balance_residual_is_roundoff(K):
    a = alpha_equilibrium(K)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert balance_residual(a, K) < 1e-12


def test_identity_decays_exactly():
    lam0 = np.array([0.01, 0.02])
    tr = integrate(np.eye(2), lam0)
    assert tr.classification == CONVERGED
    expected = np.linalg.norm(lam0) * np.exp(-tr.s)
    assert np.allclose(np.linalg.norm(tr.states, axis=1), expected, rtol=1e-6)


def test_indefinite_diagonal_exits():
    tr = integrate(np.diag([1.0, -1.0]), np.array([0.01, 0.01]))
    assert tr.classification == EXITED
    assert tr.terminal_norm == pytest.approx(10 * np.hypot(0.01, 0.01), rel=1e-6)


def test_budget_exhausted_on_neutral_direction():
    tr = integrate(np.zeros((1, 1)), np.array([0.5]), FlowConfig(s_max=5.0))
    assert tr.classification == BUDGET and tr.s_end == 5.0


@given(st.integers(0, 5000))
@settings(max_examples=25, deadline=None)
def test_energy_is_monotone_for_definite_matrices(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, 3))
    M = B @ B.T + 0.1 * np.eye(3)
    tr = integrate(M, np.full(3, 0.01))
    assert tr.classification == CONVERGED
    assert np.all(np.diff(tr.energy) <= 1e-18)


def test_scale_equivariance():
    M = np.array([[2.0, -0.5], [-0.5, 1.0]])
    a = integrate(M, np.array([0.01, 0.02]), FlowConfig(s_max=3.0, converge_tol=1e-30))
    b = integrate(M, np.array([0.03, 0.06]), FlowConfig(s_max=3.0, converge_tol=1e-30))
    assert np.allclose(3 * a.states, b.states, rtol=1e-6, atol=1e-14)


def test_csv_rows_and_columns():
    tr = integrate(np.eye(3), np.full(3, 0.01), FlowConfig(samples=17))
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["s", "Lambda_1", "Lambda_2", "Lambda_3", "LtML"]
    assert len(rows) == 18


def test_nonpositive_start_rejected():
    with pytest.raises(InputError):
        integrate(np.eye(2), np.array([0.01, 0.0]))


def test_weak_and_strong_pairs():
    assert classify_tuple(two_maxima(0.4), ["y1", "y2"])[0] == AT_INFINITY
    assert classify_tuple(two_maxima(0.6), ["y1", "y2"])[0] == NOT_ATTAINED
    assert classify_tuple(two_maxima(0.6), ["y1"])[0] == AT_INFINITY


def test_disagreement_is_loud():
    # a budget that cannot reach convergence contradicts rho > 0
    with pytest.raises(FlowConsistencyError):
        classify_matrix(np.eye(2), cfg=FlowConfig(s_max=0.5))
