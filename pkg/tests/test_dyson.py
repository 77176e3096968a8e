import math

import numpy as np
import pytest

from qsde_elim import dyson as D
from qsde_elim.errors import CapacityError, DivergenceError
from qsde_elim.regulated import OUKernel


@pytest.mark.parametrize("n", range(1, 7))
def test_partition_counts_are_bell(n):
    parts = D.enumerate_partitions(n)
    assert len(parts) == D.bell(n) == [1, 2, 5, 15, 52, 203][n - 1]
    assert len({p.partition for p in parts}) == len(parts)


def test_partition_cap():
    with pytest.raises(CapacityError):
        D.enumerate_partitions(11)


def test_occupation_examples():
    occ = D.occupation(D.GoldstoneDiagram(((1, 3), (2,), (4, 6, 8), (5,), (7, 9))))
    assert occ.counts == (2, 2, 1) and occ.E == 9 and occ.N == 5
    occ = D.occupation(D.GoldstoneDiagram(((1,), (2,), (3,), (4,))))
    assert occ.counts == (4,) and occ.E == 4 and occ.N == 4
    occ = D.occupation(D.GoldstoneDiagram(((1, 2, 3, 4, 5),)))
    assert occ.counts == (0, 0, 0, 0, 1) and occ.E == 5 and occ.N == 1


def test_occupation_sequences_cover_all_partitions():
    for E in range(1, 6):
        total = sum(len(D.partitions_with_occupation(s)) for s in D.occupation_sequences(E))
        assert total == D.bell(E)


def test_pairing_examples():
    (p,) = D.enumerate_pairings((1, 0), (0, 1))
    assert p.J == {1: 2}
    assert len(D.enumerate_pairings((1, 1, 0, 0), (0, 0, 1, 1))) == 2
    assert D.enumerate_pairings((0, 1), (1, 0)) == []


def test_diagram_pairing_round_trip():
    for n in range(1, 6):
        for d in D.enumerate_partitions(n):
            assert d.to_pairing().to_diagram() == d


def test_wick_moment_examples():
    K = OUKernel(2.0, 0.5)
    assert D.wick_vacuum_moment((1, 0), (0, 1), (0.0, 1.0), K) == pytest.approx(math.exp(-2), rel=1e-14)
    assert D.wick_vacuum_moment((0, 1), (1, 0), (0.0, 1.0), K) == 0.0
    assert D.normal_order_oracle((1, 0), (0, 1), (0.0, 1.0), K) == pytest.approx(math.exp(-2), rel=1e-14)
    assert D.normal_order_oracle((1, 1), (0, 0), (0.0, 1.0), K) == 0.0
    K = OUKernel(2.0, 0.3)
    args = ((1, 1, 0, 0), (0, 0, 1, 1), (0.0, 0.2, 0.5, 1.0), K)
    assert abs(D.wick_vacuum_moment(*args) - D.normal_order_oracle(*args)) < 1e-12


def test_wick_matches_oracle_random(rng):
    K = OUKernel(2.0, 0.3)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 7))
        a = tuple(int(x) for x in rng.integers(0, 2, n))
        b = tuple(int(x) for x in rng.integers(0, 2, n))
        s = np.sort(rng.uniform(0, 1, n))
        worst = max(worst, abs(D.wick_vacuum_moment(a, b, s, K) - D.normal_order_oracle(a, b, s, K)))
    assert worst < 1e-12


def test_simplex_integral_examples():
    K = OUKernel(2.0, 0.1)
    pair = D.GoldstoneDiagram(((1, 2),))
    assert D.simplex_integral(pair, 1.0, K) == pytest.approx(0.45 + 0.05 * math.exp(-10), rel=1e-13)
    assert D.simplex_integral(D.GoldstoneDiagram(((1,),)), 0.7, K) == pytest.approx(0.7)
    chain = D.GoldstoneDiagram(((1, 2), (3,)))
    K = OUKernel(2.0, 0.3)
    assert abs(D.simplex_integral(chain, 1.0, K) - D.simplex_integral_by_quadrature(chain, 1.0, K)) < 1e-8


@pytest.mark.parametrize("d", D.enumerate_partitions(3))
def test_simplex_integral_vs_quadrature_all_n3(d):
    K = OUKernel(2.0, 0.2)
    assert abs(D.simplex_integral(d, 0.8, K) - D.simplex_integral_by_quadrature(d, 0.8, K)) < 1e-8


def test_time_consecutive_examples():
    rep = D.time_consecutive_limit_check((2,), 1.0, [0.3, 0.1, 0.01, 0.001])
    assert rep.passed and abs(rep.values[-1] - 0.5) < 0.01 * 0.5
    K = OUKernel(2.0, 0.05)
    assert D.simplex_integral(D.GoldstoneDiagram.from_sizes((1, 1)), 1.0, K) == pytest.approx(0.5)
    assert D.time_consecutive_target((2, 1, 3), 2.0) == pytest.approx(2.0**3 / (2**3 * 6))


def test_vanishing_example():
    d = D.WickPairing((1, 1, 0, 0), (0, 0, 1, 1), {1: 3, 2: 4}).to_diagram()
    assert not d.is_time_consecutive()
    K = lambda e: OUKernel(2.0, e)
    assert D.simplex_integral(d, 1.0, K(1e-3)) < 0.01 * D.simplex_integral(d, 1.0, K(0.3))
    assert D.vanishing_check(d, 1.0, [0.3, 0.1, 0.01, 0.001]).passed


def test_pule_examples():
    K = OUKernel(2.0, 0.1)
    r = D.pule_check(D.OccupationSequence((2,)), 1.0, K)
    assert r.holds and r.lhs == pytest.approx(r.rhs) and r.rhs == pytest.approx(0.5)
    r = D.pule_check(D.OccupationSequence((0, 1)), 1.0, K)
    assert r.holds and r.lhs == pytest.approx(0.450002, abs=1e-6) and r.rhs == pytest.approx(0.5)


def test_omega_closed_form_and_partial_sums():
    res = D.omega_series(D.BoundParameters(1.0, 1.0, 1.0), cutoff=12)
    assert res.closed_form == pytest.approx(math.e**2, rel=1e-14)
    partial = np.cumsum(res.per_n)
    assert np.all(np.diff(partial) >= 0) and partial[-1] <= res.closed_form
    far = D.omega_series(D.BoundParameters(1.0, 1.0, 1.0), cutoff=30)
    assert abs(far.total - far.closed_form) < 1e-4


def test_omega_degenerate_branch_is_finite():
    for C in (0.5, 1.0):
        res = D.omega_series(D.BoundParameters(C, 0.0, 1.0), cutoff=30)
        assert abs(res.total - res.closed_form) < 1e-8 * res.closed_form
    res = D.omega_series(D.BoundParameters(3.0, 0.0, 1.0), cutoff=12)
    assert math.isfinite(res.closed_form) and res.total <= res.closed_form


def test_omega_divergent():
    with pytest.raises(DivergenceError):
        D.omega_series(D.BoundParameters(1.0, 2.0, 1.0))


def test_double_diagrams():
    assert D.enumerate_double_diagrams(1, 0) == [D.DoubleDiagram((1,), (), (0,), ())]
    assert len(D.enumerate_double_diagrams(0, 0)) == 1
    for dd in D.enumerate_double_diagrams(3, 2):
        assert sum(dd.kappa) == sum(dd.lam)
