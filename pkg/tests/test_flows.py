import cmath
import math

import numpy as np
import pytest

from qsde_elim.convergence import spin_operators
from qsde_elim.elimination import LimitModel, PrelimModel, eliminate
from qsde_elim.errors import CapacityError, DimensionError, ParameterError
from qsde_elim.flows import (
    FlowTask,
    HPModel,
    cocycle_matrix_element,
    heisenberg_weyl_matrix_element,
    interaction_picture_matrix_element,
    prelim_as_hp,
)
from qsde_elim.operator_core import truncated_oscillator
from qsde_elim.regulated import ExponentialVectorSpec, RegulatedFunction, inner, prefactor

F1 = RegulatedFunction.from_segments([(0.0, 0.5, [0.3, 0.2j]), (0.5, 1.5, [-0.1 + 0.4j])])
F2 = RegulatedFunction.from_segments([(0.2, 1.1, [0.5 - 0.1j])])


def zero_hp(d):
    z = np.zeros((d, d))
    return HPModel(np.eye(d), z, z)


def test_prelim_as_hp_examples():
    m = PrelimModel.from_blocks(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), 2.0)
    hp = prelim_as_hp(m, 0.1, 5)
    assert not np.any(hp.H)
    assert np.allclose(hp.L, math.sqrt(20.0) * np.kron(np.eye(2), truncated_oscillator(5).b))
    m = PrelimModel.from_blocks([[0.0]], [[0.0]], [[1.0]], 2.0)
    assert np.array_equal(prelim_as_hp(m, 0.3, 4).H, np.eye(4))


def test_prelim_as_hp_limits():
    m = PrelimModel.from_blocks([[0.0]], [[1.0]], [[0.0]], 2.0)
    with pytest.raises(ParameterError):
        prelim_as_hp(m, 0.1, 3)
    with pytest.raises(ParameterError):
        prelim_as_hp(m, 0.0, 8)
    with pytest.raises(CapacityError):
        prelim_as_hp(m, 0.1, 300)


def test_identity_cocycle():
    bra = ExponentialVectorSpec([1.0, 0.5j], alpha=0.2, f=F1)
    ket = ExponentialVectorSpec([0.3, 1.0], alpha=-0.1j, f=F2)
    res = cocycle_matrix_element(FlowTask(zero_hp(2), bra, ket, 1.2))
    expected = np.vdot(bra.v, ket.v) * prefactor(bra, ket)
    assert abs(res.value - expected) < 1e-12
    assert abs(res.prefactor - prefactor(bra, ket)) < 1e-15


def test_scalar_phase():
    h, t = 0.7, 1.3
    hp = HPModel(np.eye(1), np.zeros((1, 1)), [[h]])
    v = ExponentialVectorSpec([1.0], f=F1)
    res = cocycle_matrix_element(FlowTask(hp, v, v, t))
    assert abs(res.normalized - cmath.exp(-1j * h * t)) < 1e-9


@pytest.mark.parametrize("lam", [1.0, 0.4 + 0.9j])
def test_scalar_emission_with_coherent_fields(lam):
    t = 1.3
    hp = HPModel(np.eye(1), [[lam]], np.zeros((1, 1)))
    bra = ExponentialVectorSpec([1.0], f=F1)
    ket = ExponentialVectorSpec([1.0], f=F2)
    res = cocycle_matrix_element(FlowTask(hp, bra, ket, t))
    ones = RegulatedFunction.indicator(0.0, t)
    f1, f2 = F1.truncate(t), F2.truncate(t)
    expo = -0.5 * abs(lam) ** 2 * t + lam * inner(f1, ones) - np.conj(lam) * inner(ones, f2)
    assert abs(res.normalized - cmath.exp(expo)) < 1e-9


def test_limit_model_with_zero_coefficients_is_trivial():
    m = PrelimModel.from_blocks(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), 2.0)
    hp = HPModel.from_limit(eliminate(m))
    bra = ExponentialVectorSpec([1.0, 0.0], alpha=0.5, f=F1)
    ket = ExponentialVectorSpec([0.6, 0.8], alpha=1j, f=F2)
    res = cocycle_matrix_element(FlowTask(hp, bra, ket, 1.0))
    assert abs(res.value - 0.6 * cmath.exp(0.5j) * cmath.exp(inner(F1, F2))) < 1e-12


def test_interaction_picture_emission_closed_form():
    gamma = 2.0
    m = PrelimModel.from_blocks([[0.0]], [[1.0]], [[0.0]], gamma)
    vac = ExponentialVectorSpec([1.0])
    for eps, N in ((0.2, 8), (0.05, 12)):
        res = interaction_picture_matrix_element(m, eps, N, vac, vac, 1.0)
        exact = math.exp(-1.0 + (2 * eps / gamma) * (1 - math.exp(-gamma / (2 * eps))))
        assert abs(res.value - exact) < 1e-8
        assert res.diagnostics["est_error"] < 1e-8


def test_interaction_picture_trivial_when_decoupled():
    m = PrelimModel.from_blocks(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), 2.0)
    bra = ExponentialVectorSpec([1.0], alpha=0.3, f=F1)
    ket = ExponentialVectorSpec([1.0], alpha=0.5j, f=F2)
    vals = [interaction_picture_matrix_element(m, e, 12, bra, ket, 1.0).normalized for e in (0.2, 0.05)]
    assert abs(vals[0] - 1.0) < 1e-9 and abs(vals[1] - 1.0) < 1e-9


def test_heisenberg_identity_is_conserved():
    _, _, Fz = spin_operators(1)
    lm = eliminate(PrelimModel.from_blocks(Fz, np.eye(2), np.array([[0, 0.5], [0.5, 0]]), 4.0))
    bra = ExponentialVectorSpec([1.0, 0.2], f=F1)
    ket = ExponentialVectorSpec([0.3j, 1.0], f=F2)
    res = heisenberg_weyl_matrix_element(FlowTask(HPModel.from_limit(lm), bra, ket, 1.2, X=np.eye(2)))
    assert abs(res.value - np.vdot(bra.v, ket.v) * prefactor(bra, ket)) < 1e-9


def test_weyl_characteristic_function():
    g = RegulatedFunction.from_segments([(0.1, 0.8, [0.3, 0.2j])])
    bra = ExponentialVectorSpec([1.0], f=F1)
    ket = ExponentialVectorSpec([1.0], f=F2)
    t = 1.2
    res = heisenberg_weyl_matrix_element(FlowTask(zero_hp(1), bra, ket, t, X=np.eye(1), g=g))
    f1, f2 = F1.truncate(t), F2.truncate(t)
    expected = cmath.exp(-0.5 * inner(g, g) + inner(f1, g) - inner(g, f2))
    assert abs(res.normalized - expected) < 1e-9


def test_heisenberg_adjoint_symmetry():
    # <u|U* X U|v> with Hermitian X equals the conjugate of <v|U* X U|u>
    _, _, Fz = spin_operators(1)
    lm = eliminate(PrelimModel.from_blocks(Fz, np.eye(2), np.array([[0, 1], [1, 0]]) * 0.5, 4.0))
    hp = HPModel.from_limit(lm)
    u = ExponentialVectorSpec([1.0, 0.3j], f=F1)
    v = ExponentialVectorSpec([0.2, 1.0], f=F2)
    a = heisenberg_weyl_matrix_element(FlowTask(hp, u, v, 1.2, X=2 * Fz)).value
    b = heisenberg_weyl_matrix_element(FlowTask(hp, v, u, 1.2, X=2 * Fz)).value
    assert abs(a - np.conj(b)) < 1e-8


def test_dimension_checks():
    with pytest.raises(DimensionError):
        cocycle_matrix_element(FlowTask(zero_hp(2), ExponentialVectorSpec([1.0]), ExponentialVectorSpec([1.0]), 1.0))
    with pytest.raises(DimensionError):
        HPModel(np.eye(2), np.zeros((3, 3)), np.zeros((2, 2)))


def test_diagnostics_present():
    hp = HPModel(np.eye(1), [[1.0]], [[0.0]])
    v = ExponentialVectorSpec([1.0], f=F1)
    res = cocycle_matrix_element(FlowTask(hp, v, v, 1.0))
    assert {"nfev", "segments", "est_error"} <= set(res.diagnostics)
    assert res.diagnostics["segments"] == 2  # cells [0, 0.5] and [0.5, 1]
