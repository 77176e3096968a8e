import numpy as np
import pytest

from qsde_elim.convergence import (
    Scenario,
    alpha_independence_check,
    scenario_doherty,
    scenario_emission,
    scenario_spin,
    spin_operators,
    sweep_epsilon,
)
from qsde_elim.elimination import PrelimModel, eliminate
from qsde_elim.errors import ParameterError, PreconditionError
from qsde_elim.flows import FlowTask, HPModel, heisenberg_weyl_matrix_element
from qsde_elim.regulated import ExponentialVectorSpec, RegulatedFunction

SHORT = dict(epsilons=(0.2, 0.1), osc_dims=(8, 10))


def zero_scenario(**kw):
    z = np.zeros((2, 2))
    m = PrelimModel.from_blocks(z, z, z, 2.0)
    v = ExponentialVectorSpec([0.6, 0.8], f=RegulatedFunction.indicator(0.0, 0.5, 0.2))
    return Scenario("zero", m, v, v, 1.0, **kw)


def test_spin_operators_commutation():
    for J2 in (1, 2, 3):
        Fx, Fy, Fz = spin_operators(J2)
        assert np.allclose(Fx @ Fy - Fy @ Fx, 1j * Fz, atol=1e-14)
        J = J2 / 2
        assert np.allclose(Fx @ Fx + Fy @ Fy + Fz @ Fz, J * (J + 1) * np.eye(J2 + 1), atol=1e-14)


def test_scenario_validation():
    with pytest.raises(ParameterError):
        zero_scenario(epsilons=(0.1, 0.2), osc_dims=(8, 8))
    with pytest.raises(ParameterError):
        zero_scenario(epsilons=(0.2, 0.1), osc_dims=(8,))
    m = PrelimModel.from_blocks([[0.0]], [[1.0]], [[0.0]], 2.0)
    v = ExponentialVectorSpec([1.0], f=RegulatedFunction.indicator(0.0, 1.0, 0.3))
    with pytest.raises(ParameterError):
        Scenario("on-jump", m, v, v, 1.0)
    with pytest.raises(PreconditionError):
        Scenario("bad", PrelimModel.from_blocks([[1.5]], [[1.0]], [[0.0]], 2.0), v, v, 0.7)
    with pytest.raises(PreconditionError):
        scenario_spin(1, chi=5.0, U_drive=1.0, gamma=4.0)


def test_zero_model_has_no_error():
    rep = sweep_epsilon(zero_scenario(**SHORT))
    assert all(r.abs_err == 0.0 or r.abs_err < 1e-12 for r in rep.rows)
    assert abs(rep.limit_value - 1.0 * np.exp(0.02)) < 1e-12


def test_commuting_observable_is_constant():
    s = scenario_doherty(1.0, 0.8, 1.0, levels=3, omega=0.0, **SHORT)
    rep = sweep_epsilon(s, "heisenberg")
    expected = np.vdot(s.ket.v, s.X @ s.ket.v)
    assert abs(rep.limit_value - expected) < 1e-9
    for r in rep.rows:
        assert abs(r.prelim_value - expected) < 1e-9


def test_emission_sweep_is_monotone():
    rep = sweep_epsilon(scenario_emission())
    errs = [r.abs_err for r in rep.rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert abs(abs(rep.limit_value) - np.exp(-1)) < 1e-9
    eps = rep.rows[-1].epsilon
    assert rep.final_rel_err == pytest.approx(np.exp(eps) - 1, rel=1e-6)


def spin_case(**kw):
    Fx, _, _ = spin_operators(1)
    return scenario_spin(1, 1.0, 1.0, 4.0, E00=Fx, **kw)


def test_spin_heisenberg_sweep_passes():
    rep = sweep_epsilon(spin_case())
    assert rep.mode == "heisenberg" and rep.verdict == "PASS"


def test_jobs_do_not_change_results():
    s = spin_case(**SHORT)
    a = sweep_epsilon(s, jobs=1)
    b = sweep_epsilon(s, jobs=2)
    assert [r.prelim_value for r in a.rows] == [r.prelim_value for r in b.rows]


def test_weyl_limit_uses_reflected_amplitude():
    g = RegulatedFunction.indicator(0.0, 0.8, 0.3)
    s = spin_case(g=g, X=np.eye(2), **SHORT)
    rep = sweep_epsilon(s, "weyl")
    hp = HPModel.from_limit(eliminate(s.prelim))
    direct = heisenberg_weyl_matrix_element(FlowTask(hp, s.bra, s.ket, s.t, X=np.eye(2), g=g.scale(-1.0))).value
    assert abs(rep.limit_value - direct) < 1e-12
    plus = heisenberg_weyl_matrix_element(FlowTask(hp, s.bra, s.ket, s.t, X=np.eye(2), g=g)).value
    assert abs(plus - direct) > 1e-3


def test_alpha_independence_trivial_model():
    rep = alpha_independence_check(zero_scenario(**SHORT), (0.0, 0.5, 1j), final_rel_err=0.01)
    assert max(rep.spreads) < 1e-12 and rep.within_tolerance


def test_alpha_dependence_shrinks_for_emission():
    rep = alpha_independence_check(scenario_emission(), (0.0, 0.5, 1j))
    assert rep.spreads[-1] < rep.spreads[0]
