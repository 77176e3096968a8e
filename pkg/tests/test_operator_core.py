import math

import numpy as np
import pytest

from qsde_elim.errors import CapacityError, DimensionError, ParameterError, SingularityError
from qsde_elim.operator_core import (
    coherent_vector,
    dagger,
    hermitian_residual,
    kron,
    solve,
    spectral_norm,
    truncated_oscillator,
)

from conftest import random_hermitian


def power_iteration_norm(M, iters=2000):
    A = dagger(M) @ M
    x = np.ones(A.shape[0], dtype=complex)
    for _ in range(iters):
        x = A @ x
        x /= np.linalg.norm(x)
    return math.sqrt(abs(np.vdot(x, A @ x)))


def test_spectral_norm_identity_and_diagonal():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-15)
    assert spectral_norm(np.diag([0.5, -0.5])) == pytest.approx(0.5, abs=1e-15)


def test_spectral_norm_matches_power_iteration(rng):
    M = random_hermitian(rng, 4)
    assert abs(spectral_norm(M) - power_iteration_norm(M)) < 1e-10


def test_spectral_norm_rejects_non_square():
    with pytest.raises(DimensionError):
        spectral_norm(np.zeros((2, 3)))


def test_truncated_oscillator_entries():
    osc = truncated_oscillator(3)
    expected = np.zeros((3, 3))
    expected[0, 1], expected[1, 2] = 1.0, math.sqrt(2)
    assert np.array_equal(osc.b, expected)
    assert np.array_equal(osc.n_op, np.diag([0, 1, 2]))
    assert np.array_equal(osc.b_dag, expected.T)


def test_ccr_exact_on_interior():
    osc = truncated_oscillator(8)
    C = osc.b @ osc.b_dag - osc.b_dag @ osc.b - np.eye(8)
    # sqrt(k)**2 rounds, so "exact" means a few ulps of the level index
    assert np.max(np.abs(C[:7, :7])) <= 4 * np.finfo(float).eps * 7
    assert C[7, 7] != 0


def test_truncated_oscillator_rejects_small():
    with pytest.raises(ParameterError):
        truncated_oscillator(1)


def test_coherent_vector_examples():
    v0 = coherent_vector(0.0, 5)
    assert np.array_equal(v0, np.eye(5)[0])
    v1 = coherent_vector(1.0, 4)
    assert np.allclose(v1, [1, 1, 1 / math.sqrt(2), 1 / math.sqrt(6)], atol=1e-15)
    v = coherent_vector(0.5, 16)
    assert abs(np.vdot(v, v).real - math.exp(0.25)) < 1e-10


def test_kron_capacity():
    with pytest.raises(CapacityError):
        kron(np.eye(100), np.eye(100))


def test_solve_examples(rng):
    B = rng.normal(size=(2, 2))
    assert np.allclose(solve(np.eye(2), B), B)
    assert np.allclose(solve(np.diag([2.0, 4.0]), np.eye(2)), np.diag([0.5, 0.25]))
    A = random_hermitian(rng, 5) + 6 * np.eye(5)
    B = rng.normal(size=(5, 3))
    assert np.linalg.norm(A @ solve(A, B) - B) < 1e-10


def test_solve_singular():
    with pytest.raises(SingularityError):
        solve(np.zeros((2, 2)), np.eye(2))


def test_hermitian_residual(rng):
    assert hermitian_residual(random_hermitian(rng, 3)) < 1e-15
    assert hermitian_residual(np.array([[0, 1], [0, 0]])) == pytest.approx(1.0)
