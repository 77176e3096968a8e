import cmath
import math

import numpy as np
import pytest

from qsde_elim.convergence import scenario_doherty, spin_operators
from qsde_elim.elimination import (
    LimitModel,
    PrelimModel,
    checked_coefficients,
    eliminate,
    evans_from_limit,
    evans_matrix,
    evans_residuals,
    hp_unitarity_residuals,
    random_prelim_model,
    resummation_residual,
    validate_prelim,
)
from qsde_elim.errors import AmbiguityError, PreconditionError
from qsde_elim.regulated import RegulatedFunction

from conftest import random_hermitian


def scalar(e11, e10, e00, gamma):
    return PrelimModel.from_blocks([[e11]], [[e10]], [[e00]], gamma)


def test_validate_examples():
    z = PrelimModel.from_blocks(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), 1.0)
    rep = validate_prelim(z)
    assert rep.valid and rep.margin == pytest.approx(0.5)
    rep = validate_prelim(scalar(0.5, 1.0, 0.0, 2.0))
    assert rep.valid and rep.margin == pytest.approx(0.5)
    bad = PrelimModel.from_blocks(np.diag([1.2, -0.3]), np.eye(2), np.zeros((2, 2)), 2.0)
    rep = validate_prelim(bad)
    assert not rep.valid and rep.margin == pytest.approx(-0.2)


def test_boundary_norm_is_rejected():
    rep = validate_prelim(scalar(1.0, 1.0, 0.0, 2.0))
    assert not rep.valid
    with pytest.raises(PreconditionError):
        eliminate(scalar(1.0, 1.0, 0.0, 2.0))


def test_non_hermitian_e11_is_invalid():
    m = PrelimModel(np.array([[0, 0.1], [0, 0]], dtype=complex), np.eye(2), np.eye(2), np.zeros((2, 2)), 2.0)
    assert not validate_prelim(m).valid


@pytest.mark.parametrize("c,gamma", [(1.0, 2.0), (0.3 - 0.7j, 5.0)])
def test_eliminate_without_e11(c, gamma):
    lm = eliminate(scalar(0.0, c, 0.0, gamma))
    assert lm.S[0, 0] == pytest.approx(1.0)
    assert lm.L[0, 0] == pytest.approx(2j * c / math.sqrt(gamma), abs=1e-15)
    assert lm.H[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_eliminate_scalar_example():
    lm = eliminate(scalar(0.5, 1.0, 0.0, 2.0))
    assert abs(lm.S[0, 0] - (0.6 - 0.8j)) < 1e-15
    assert abs(lm.L[0, 0] - math.sqrt(2) * (0.4 + 0.8j)) < 1e-15
    assert abs(lm.H[0, 0] - (-0.4)) < 1e-15


def test_spin_example_matches_per_eigenvalue_formulas():
    gamma, chi, U = 4.0, 1.0, 1.0
    _, _, Fz = spin_operators(1)
    m = PrelimModel.from_blocks(chi * Fz, U * np.eye(2), np.zeros((2, 2)), gamma)
    lm = eliminate(m)
    for k, mz in enumerate(np.diag(Fz).real):
        den = gamma / 2 + 1j * chi * mz
        assert abs(lm.S[k, k] - (gamma / 2 - 1j * chi * mz) / den) < 1e-14
        assert abs(lm.L[k, k] - 1j * math.sqrt(gamma) * U / den) < 1e-14
        assert abs(lm.H[k, k] - (U * U / den).imag) < 1e-14
    assert np.count_nonzero(lm.S - np.diag(np.diag(lm.S))) == 0


@pytest.mark.parametrize("kappa,g0,delta", [(1.0, 0.5, 1.0), (2.0, 1.0, 0.8), (0.7, 0.3, -0.5), (3.0, 1.2, 2.5)])
def test_phase_form_of_gauge(kappa, g0, delta):
    s = scenario_doherty(kappa, g0, delta, levels=5)
    lm = eliminate(s.prelim)
    x = np.pi * (np.arange(5) + 0.5) / 5
    a = g0**2 / delta
    expected = np.exp(2j * np.arctan(a * np.cos(x) ** 2 / kappa))
    assert np.max(np.abs(np.diag(lm.S) - expected)) < 1e-12
    assert np.array_equal(lm.L, np.zeros_like(lm.L))


def test_evans_matrix_examples():
    z = PrelimModel.from_blocks(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), 1.0)
    ev = evans_matrix(z)
    for blk in (ev.L00, ev.L01, ev.L10, ev.L11):
        assert not np.any(blk)
    m = scalar(0.5, 1.0, 0.0, 2.0)
    ev = evans_matrix(m)
    assert abs(ev.L11[0, 0] - (-0.4 - 0.8j)) < 1e-15
    lm = eliminate(m)
    assert abs(ev.L10[0, 0] - lm.L[0, 0]) < 1e-12
    assert abs(ev.L01[0, 0] - evans_from_limit(lm).L01[0, 0]) < 1e-12


def test_evans_residuals_random(rng):
    m = random_prelim_model(rng, 4)
    assert max(evans_residuals(m).values()) < 1e-10
    assert max(hp_unitarity_residuals(eliminate(m))) < 1e-10


def test_hp_residuals_trivial_and_corrupted(rng):
    H = random_hermitian(rng, 3)
    assert hp_unitarity_residuals(LimitModel(np.eye(3), np.zeros((3, 3)), H)) == (0.0, 0.0, 0.0, 0.0)
    lm = eliminate(random_prelim_model(rng, 3))
    bad = LimitModel(1.01 * lm.S, lm.L, lm.H)
    assert hp_unitarity_residuals(bad)[0] == pytest.approx(0.0201, rel=1e-9)


def test_checked_coefficients_examples():
    gamma = 2.0
    m = PrelimModel.from_blocks([[0.3]], [[0.7 - 0.1j]], [[0.2]], gamma)
    z = RegulatedFunction.zero()
    chk = checked_coefficients(m, z, z, 0.5)
    assert abs(chk.E10[0, 0] - (-(2 / math.sqrt(gamma)) * (0.7 - 0.1j))) < 1e-15
    assert abs(chk.E00[0, 0] - 0.2) < 1e-15
    m = scalar(1.0, 0.0, 0.0, 4.0)
    chk = checked_coefficients(m, z, RegulatedFunction.indicator(0.0, 1.0, 2.0), 0.5)
    assert abs(chk.E10[0, 0] - 2.0) < 1e-15


def test_checked_coefficients_at_breakpoint():
    m = scalar(0.3, 1.0, 0.0, 2.0)
    f = RegulatedFunction.indicator(0.0, 1.0)
    with pytest.raises(AmbiguityError):
        checked_coefficients(m, f, f, 1.0)


def test_resummation_terminates_without_e11():
    m = scalar(0.0, 1.0 + 0.5j, 0.3, 2.0)
    f = RegulatedFunction.indicator(0.0, 1.0, 0.4)
    for R in (2, 3, 10):
        assert resummation_residual(m, f, f, 0.5, R).residual < 1e-15


def test_resummation_scalar_tail():
    m = scalar(0.5, 1.0, 0.0, 2.0)
    z = RegulatedFunction.zero()
    rep = resummation_residual(m, z, z, 0.5, 60)
    assert rep.residual < 1e-10
    assert rep.bridge_residual < 1e-12


def test_resummation_random_piecewise_constant(rng):
    m = random_prelim_model(rng, 3, e11_ratio=0.3)
    f1 = RegulatedFunction.from_segments([(0.0, 0.4, [0.5]), (0.4, 1.0, [-0.2 + 0.3j])])
    f2 = RegulatedFunction.from_segments([(0.0, 0.7, [1.0j])])
    rep = resummation_residual(m, f1, f2, 0.5, 80)
    assert rep.residual < 1e-9 and rep.bridge_residual < 1e-10


def test_resummation_refuses_slow_series():
    m = scalar(0.95, 1.0, 0.0, 2.0)
    z = RegulatedFunction.zero()
    with pytest.raises(PreconditionError):
        resummation_residual(m, z, z, 0.5, 80)


def test_random_models_are_valid(rng):
    for d in range(1, 7):
        m = random_prelim_model(rng, d)
        rep = validate_prelim(m)
        assert rep.valid and rep.norm_e11 <= 0.45 * m.gamma + 1e-12
