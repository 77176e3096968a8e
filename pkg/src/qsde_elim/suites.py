"""Small self-checking suites behind the ``verify`` and ``diagrams`` subcommands."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dyson
from .elimination import (
    PrelimModel,
    checked_coefficients,
    eliminate,
    evans_residuals,
    hp_unitarity_residuals,
    resummation_residual,
    validate_prelim,
)
from .operator_core import dagger, spectral_norm
from .regulated import (
    OUKernel,
    RegulatedFunction,
    convolution_identity_residual,
    kernel_mass,
    smoothed_average,
)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""


def _le(suite, name, value, threshold, note=""):
    return Check(suite, name, float(value), float(threshold), bool(value <= threshold), note)


def elimination_checks(m: PrelimModel, tol: float = 1e-10) -> list:
    rep = validate_prelim(m)
    out = [Check("elimination", "valid_for_elimination", rep.margin, 0.0, rep.valid, "value is the margin gamma/2 - |E11|")]
    if not rep.valid:
        return out
    lm = eliminate(m)
    names = ("S_dag_S", "S_S_dag", "H_hermitian", "L00_unitarity")
    for name, r in zip(names, hp_unitarity_residuals(lm)):
        out.append(_le("elimination", f"hp_{name}", r, tol))
    for name, r in evans_residuals(m, lm).items():
        out.append(_le("elimination", f"evans_{name}", r, tol))
    f = RegulatedFunction.indicator(0.0, 1.0, 0.3 + 0.1j)
    chk = checked_coefficients(m, f, f, 0.5)
    out.append(_le("elimination", "checked_E01_adjoint_E10", spectral_norm(chk.E01 - dagger(chk.E10)), tol))
    if rep.norm_e11 <= 0.45 * m.gamma:
        rr = resummation_residual(m, f, f, 0.5, 80)
        out.append(_le("elimination", "resummation_R80", rr.residual, 1e-9))
        out.append(_le("elimination", "resummation_bridge", rr.bridge_residual, tol))
    else:
        out.append(Check("elimination", "resummation_R80", math.nan, 1e-9, True, "skipped: |E11| > 0.45 gamma"))
    return out


def kernel_checks() -> list:
    out = []
    worst = 0.0
    for gamma in (0.5, 1.0, 2.0, 4.0, 8.0):
        for eps in (1.0, 0.3, 0.1, 0.01, 0.001):
            worst = max(worst, abs(kernel_mass(OUKernel(gamma, eps), -math.inf, math.inf) - 1.0))
    out.append(_le("regulated", "kernel_unit_mass", worst, 1e-12))
    worst = 0.0
    K = OUKernel(2.0, 0.2)
    for t in (0.1, 0.4, 0.7, 1.0, 1.5):
        for tau in (0.05, 0.3, 0.6, 0.9, 1.3):
            worst = max(worst, convolution_identity_residual(K, t, tau))
    out.append(_le("regulated", "convolution_identity", worst, 1e-8))
    out.append(midpoint_law_check())
    return out


def midpoint_law_check(epsilons=(0.1, 0.01, 0.001)) -> Check:
    """Smoothed average at a jump tends to the midpoint; errors may underflow to 0, so decay is non-strict."""
    g = RegulatedFunction.from_segments([(0.9, 1.0, [1.0]), (1.0, 1.05, [-0.5])])
    mid = 0.5 * (g.left_limit(1.0) + g.right_limit(1.0))
    errs = [abs(smoothed_average(g, 1.0, OUKernel(2.0, e)) - mid) for e in epsilons]
    mono = all(b <= a for a, b in zip(errs, errs[1:])) and errs[-1] < errs[0]
    return Check("regulated", "midpoint_law_monotone", errs[-1], 1e-2, bool(mono and errs[-1] < 1e-2))


def wick_checks(seed: int = 7, cases: int = 20, n_max: int = 5) -> list:
    rng = np.random.default_rng(seed)
    K = OUKernel(2.0, 0.3)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, n_max + 1))
        alpha = tuple(int(x) for x in rng.integers(0, 2, n))
        beta = tuple(int(x) for x in rng.integers(0, 2, n))
        s = np.sort(rng.uniform(0.0, 1.0, n))
        worst = max(worst, abs(dyson.wick_vacuum_moment(alpha, beta, s, K) - dyson.normal_order_oracle(alpha, beta, s, K)))
    out = [_le("dyson", "wick_vs_normal_order", worst, 1e-12)]
    bad = [n for n in range(1, 7) if len(dyson.enumerate_partitions(n)) != dyson.bell(n)]
    out.append(Check("dyson", "bell_counts", float(len(bad)), 0.0, not bad))
    return out


def verify_suite(m: PrelimModel, tol: float = 1e-10) -> list:
    return elimination_checks(m, tol) + kernel_checks() + wick_checks()


def diagrams_suite(
    gamma: float = 2.0,
    t_grid=(0.5, 1.0, 2.0),
    eps_grid=(0.5, 0.1, 0.02),
    max_vertices: int = 4,
    limit_sweep=(0.3, 0.1, 0.03, 0.01, 0.003, 0.001),
    omega=(1.0, 1.0, 1.0, 12),
    limit_tol: float = 0.01,
) -> list:
    out = []
    # Pule inequality, exhaustive over E(n) <= 5
    fails, worst_gap = 0, -math.inf
    for E in range(1, 6):
        for seq in dyson.occupation_sequences(E):
            for t in t_grid:
                for eps in eps_grid:
                    r = dyson.pule_check(seq, t, OUKernel(gamma, eps))
                    fails += not r.holds
                    worst_gap = max(worst_gap, r.lhs - r.rhs)
    out.append(Check("diagrams", "pule_inequality", worst_gap, 1e-12, fails == 0, "value is max(lhs - rhs)"))
    # time-consecutive limit law and vanishing of the rest
    for n in range(1, max_vertices + 1):
        for d in dyson.enumerate_partitions(n):
            label = "/".join("".join(str(v) for v in b) for b in d.partition)
            if d.is_time_consecutive():
                r = tuple(len(b) for b in d.partition)
                rep = dyson.time_consecutive_limit_check(r, 1.0, [e for e in limit_sweep], gamma, limit_tol)
                out.append(Check("diagrams", f"limit_law {label}", rep.final_rel_error, limit_tol, rep.passed))
            else:
                rep = dyson.vanishing_check(d, 1.0, limit_sweep, gamma)
                out.append(Check("diagrams", f"vanishing {label}", rep.ratio, 0.05, rep.passed))
    C, C11, t, cutoff = omega
    res = dyson.omega_series(dyson.BoundParameters(C, C11, t), cutoff)
    partial = np.cumsum(res.per_n)
    bounded = bool(res.total <= res.closed_form * (1 + 1e-12))
    increasing = bool(np.all(np.diff(partial) >= 0))
    out.append(
        Check(
            "diagrams",
            "omega_partial_sums_bounded",
            res.closed_form - res.total,
            res.closed_form,
            bounded and increasing,
            "value is the remaining gap to the closed form",
        )
    )
    return out
