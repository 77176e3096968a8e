"""Epsilon sweeps comparing the cavity model against its eliminated limit.

Three comparison modes:

``unitary``     <psi1| U~_t(eps) psi2>  vs  <psi1| U~_t psi2>
``heisenberg``  <psi1| U_t(eps)^dag X U_t(eps) psi2>  vs  the limit cocycle
``weyl``        <psi1| U_t(eps)^dag X W(g_{t]}) U_t(eps) psi2>  vs  the limit with W(-g_{t]})

where U~ is the interaction-picture evolution.  Pre-limit values come from the
flows on the joint system/oscillator space; the limit value is computed once.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import collision, flows
from .elimination import PrelimModel, eliminate, validate_prelim
from .errors import AccuracyError, ParameterError, PreconditionError
from .flows import FlowTask, HPModel
from .regulated import ExponentialVectorSpec, RegulatedFunction

MODES = ("unitary", "heisenberg", "weyl")
DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)
DEFAULT_OSC_DIMS = (8, 10, 12, 16)
PASS_REL_ERR = 0.02
LEAK_RETRY_EXTRA = 8
DEFAULT_DTS = (1e-3, 5e-4, 2.5e-4, 1.25e-4)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    prelim: PrelimModel
    bra: ExponentialVectorSpec
    ket: ExponentialVectorSpec
    t: float
    X: np.ndarray | None = None
    g: RegulatedFunction | None = None
    epsilons: tuple = DEFAULT_EPSILONS
    osc_dims: tuple = DEFAULT_OSC_DIMS

    def __post_init__(self):
        rep = validate_prelim(self.prelim)
        if not rep.valid:
            raise PreconditionError(f"scenario {self.name!r}: model not valid for elimination", rep)
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ParameterError("epsilons must be positive and strictly decreasing")
        dims = tuple(int(n) for n in self.osc_dims)
        if len(dims) != len(eps):
            raise ParameterError("one osc_dim per epsilon is required")
        if not self.t > 0:
            raise ParameterError("horizon must be positive")
        for name, f in (("bra.f", self.bra.f), ("ket.f", self.ket.f), ("g", self.g)):
            if f is not None and f.is_breakpoint(self.t):
                raise ParameterError(f"horizon {self.t} is a breakpoint of {name}")
        for name, spec in (("bra", self.bra), ("ket", self.ket)):
            if spec.dim != self.prelim.dim:
                raise ParameterError(f"{name} dimension {spec.dim} != model dimension {self.prelim.dim}")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "osc_dims", dims)

    def default_mode(self) -> str:
        if self.g is not None:
            return "weyl"
        if self.X is not None:
            return "heisenberg"
        return "unitary"


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    osc_dim: int
    prelim_value: complex
    limit_value: complex
    abs_err: float
    rel_err: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CrossCheck:
    label: str
    flow_value: complex
    collision_values: tuple
    dts: tuple
    rel_diff: float
    refinement: tuple
    passed: bool


@dataclass(frozen=True)
class ConvergenceReport:
    scenario: str
    mode: str
    limit_value: complex
    rows: tuple
    slope: float
    monotone: bool
    final_rel_err: float
    verdict: str
    cross_checks: tuple = ()

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


def _limit_value(s: Scenario, mode: str) -> complex:
    hp = HPModel.from_limit(eliminate(s.prelim))
    if mode == "unitary":
        return flows.cocycle_matrix_element(FlowTask(hp, s.bra, s.ket, s.t)).value
    if mode == "heisenberg":
        return flows.heisenberg_weyl_matrix_element(FlowTask(hp, s.bra, s.ket, s.t, X=s.X)).value
    return flows.heisenberg_weyl_matrix_element(FlowTask(hp, s.bra, s.ket, s.t, X=s.X, g=-s.g)).value


def _prelim_once(s: Scenario, mode: str, eps: float, N: int):
    if mode == "unitary":
        return flows.interaction_picture_matrix_element(s.prelim, eps, N, s.bra, s.ket, s.t)
    hp = flows.prelim_as_hp(s.prelim, eps, N)
    g = s.g if mode == "weyl" else None
    return flows.heisenberg_weyl_matrix_element(FlowTask(hp, s.bra, s.ket, s.t, X=s.X, g=g))


def _prelim_point(s: Scenario, mode: str, eps: float, N: int):
    """Pre-limit value with one truncation retry on oscillator leakage."""
    r = _prelim_once(s, mode, eps, N)
    if not r.diagnostics["leak_flag"]:
        return r, N, False
    cap = flows.MAX_JOINT_DIM // s.prelim.dim
    N2 = min(N + LEAK_RETRY_EXTRA, cap)
    if N2 > N:
        r = _prelim_once(s, mode, eps, N2)
        if not r.diagnostics["leak_flag"]:
            return r, N2, True
    raise AccuracyError(
        f"oscillator truncation leak at eps={eps} persists at osc_dim={N2}", r.diagnostics
    )


def _check_mode(s: Scenario, mode: str) -> None:
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    if mode == "heisenberg" and s.X is None:
        raise ParameterError("heisenberg mode needs an observable")
    if mode == "weyl" and s.g is None:
        raise ParameterError("weyl mode needs a Weyl amplitude g")


def _fit_slope(eps, errs) -> float:
    pts = [(math.log(e), math.log(a)) for e, a in zip(eps, errs) if a > 0]
    if len(pts) < 2:
        return float("nan")
    x, y = zip(*pts)
    return float(np.polyfit(x, y, 1)[0])


def sweep_epsilon(
    s: Scenario, mode: str | None = None, jobs: int = 1, cross_check: bool = False, dts=DEFAULT_DTS
) -> ConvergenceReport:
    mode = mode or s.default_mode()
    _check_mode(s, mode)
    limit = _limit_value(s, mode)
    args = list(zip(s.epsilons, s.osc_dims))
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
            futures = [pool.submit(_prelim_point, s, mode, e, N) for e, N in args]
            points = [f.result() for f in futures]
    else:
        points = [_prelim_point(s, mode, e, N) for e, N in args]
    rows = []
    for (eps, _), (res, N, retried) in zip(args, points):
        err = abs(res.value - limit)
        rel = err / abs(limit) if abs(limit) > 0 else (0.0 if err == 0 else math.inf)
        diag = dict(res.diagnostics)
        diag["osc_dim_retry"] = retried
        rows.append(SweepRow(eps, N, res.value, limit, float(err), float(rel), diag))
    errs = [r.abs_err for r in rows]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    final = rows[-1].rel_err
    verdict = "PASS" if monotone and final < PASS_REL_ERR else "FAIL"
    checks = ()
    if cross_check:
        checks = tuple(oracle_cross_checks(s, mode, rows[-1], limit, dts))
    return ConvergenceReport(s.name, mode, limit, tuple(rows), _fit_slope(s.epsilons, errs), monotone, final, verdict, checks)


# ---------------------------------------------------------------------------
# collision cross-checks


def _cross(label: str, flow_value: complex, run, dts, tol: float = 1e-3) -> CrossCheck:
    vals = tuple(run(dt) for dt in dts)
    ref = abs(flow_value) if abs(flow_value) > 0 else 1.0
    rel = abs(vals[-1] - flow_value) / ref
    ref_factors = tuple(collision.refinement_factors(list(vals)))
    ok = rel < tol and all(f >= 1.8 for f in ref_factors)
    return CrossCheck(label, complex(flow_value), vals, tuple(dts), float(rel), ref_factors, bool(ok))


def oracle_cross_checks(s: Scenario, mode: str, last: SweepRow, limit: complex, dts=DEFAULT_DTS) -> list:
    """Collision oracle at the smallest epsilon and on the limit model."""
    eps, N = last.epsilon, last.osc_dim
    hp_lim = HPModel.from_limit(eliminate(s.prelim))
    out = []
    if mode == "unitary":
        out.append(
            _cross(
                f"prelim eps={eps:g}",
                last.prelim_value,
                lambda dt: collision.simulate_interaction_picture(s.prelim, eps, N, s.bra, s.ket, s.t, dt),
                dts,
            )
        )
        out.append(_cross("limit", limit, lambda dt: collision.simulate(hp_lim, s.bra, s.ket, s.t, dt), dts))
        return out
    hp = flows.prelim_as_hp(s.prelim, eps, N)
    g = s.g if mode == "weyl" else None
    g_lim = -s.g if mode == "weyl" else None
    out.append(
        _cross(
            f"prelim eps={eps:g}",
            last.prelim_value,
            lambda dt: collision.simulate(hp, s.bra, s.ket, s.t, dt, X=s.X, g=g, heisenberg=True),
            dts,
        )
    )
    out.append(
        _cross(
            "limit",
            limit,
            lambda dt: collision.simulate(hp_lim, s.bra, s.ket, s.t, dt, X=s.X, g=g_lim, heisenberg=True),
            dts,
        )
    )
    return out


# ---------------------------------------------------------------------------
# scenarios


def spin_operators(J2: int) -> tuple:
    """(F_x, F_y, F_z) for spin J = J2/2 in the basis m = J, J-1, ..., -J."""
    if J2 < 1:
        raise ParameterError("J2 must be >= 1")
    J = J2 / 2.0
    m = J - np.arange(J2 + 1)
    Fz = np.diag(m).astype(complex)
    # <m+1|F+|m> = sqrt(J(J+1) - m(m+1)); index of m+1 is one above m
    Fp = np.zeros((J2 + 1, J2 + 1), dtype=complex)
    for k in range(1, J2 + 1):
        Fp[k - 1, k] = math.sqrt(J * (J + 1) - m[k] * (m[k] + 1))
    Fx = 0.5 * (Fp + Fp.conj().T)
    Fy = -0.5j * (Fp - Fp.conj().T)
    return Fx, Fy, Fz


def scenario_emission(c: complex = 1.0, gamma: float = 2.0, t: float = 1.0, **kw) -> Scenario:
    """Scalar system, E11 = 0, E10 = c: the limit is pure emission with rate 2|c|^2/gamma."""
    m = PrelimModel.from_blocks([[0.0]], [[c]], [[0.0]], gamma)
    vac = ExponentialVectorSpec([1.0])
    return Scenario("emission", m, vac, vac, t, **kw)


def scenario_spin(
    J2: int,
    chi: float,
    U_drive: float,
    gamma: float,
    E00=None,
    v=None,
    f: RegulatedFunction | None = None,
    g: RegulatedFunction | None = None,
    X=None,
    t: float = 1.0,
    name: str = "spin",
    **kw,
) -> Scenario:
    """Spin J = J2/2 with E11 = chi F_z, E10 = E01 = U_drive I.

    ``X`` defaults to ``F_z / J`` (sigma_z for spin one half); ``v`` to the
    top ``m = J`` state.
    """
    J = J2 / 2.0
    if not chi * J < gamma / 2:
        raise PreconditionError(f"chi J = {chi * J:g} must be < gamma/2 = {gamma / 2:g}")
    _, _, Fz = spin_operators(J2)
    d = J2 + 1
    E00 = np.zeros((d, d)) if E00 is None else E00
    m = PrelimModel.from_blocks(chi * Fz, U_drive * np.eye(d), E00, gamma)
    if v is None:
        v = np.zeros(d)
        v[0] = 1.0
    spec = ExponentialVectorSpec(v, 0.0, f)
    X = Fz / J if X is None else X
    return Scenario(name, m, spec, spec, t, X=X, g=g, **kw)


def scenario_doherty(
    kappa: float, g0: float, Delta: float, levels: int, omega: float = 1.0, t: float = 1.0, **kw
) -> Scenario:
    """Bounded-position surrogate of the atom in a detuned cavity.

    The atomic position takes ``levels`` values x_i spread over [0, pi];
    E11 = -(g0^2/Delta) diag(cos^2 x_i), E10 = 0 (pure gauge limit) and
    E00 = omega diag(0, 1, ..., levels-1).
    """
    if levels < 1:
        raise ParameterError("levels must be >= 1")
    a = g0**2 / Delta
    if not abs(a) < kappa:
        raise PreconditionError(f"|g0^2/Delta| = {abs(a):g} must be < kappa = {kappa:g}")
    x = math.pi * (np.arange(levels) + 0.5) / levels
    c = np.cos(x) ** 2
    E11 = -a * np.diag(c)
    E00 = omega * np.diag(np.arange(levels, dtype=float))
    m = PrelimModel.from_blocks(E11, np.zeros((levels, levels)), E00, 2.0 * kappa)
    v = np.ones(levels) / math.sqrt(levels)
    spec = ExponentialVectorSpec(v)
    return Scenario("doherty", m, spec, spec, t, X=np.diag(c).astype(complex), **kw)


@dataclass(frozen=True)
class AlphaReport:
    alphas: tuple
    epsilons: tuple
    normalized: tuple  # per epsilon, per alpha
    spreads: tuple  # max pairwise deviation per epsilon
    tolerance: float
    within_tolerance: bool
    shrinking: bool


def alpha_independence_check(
    s: Scenario, alphas, epsilons=None, final_rel_err: float | None = None
) -> AlphaReport:
    """Normalized pre-limit values for several ket oscillator amplitudes.

    ``epsilons`` defaults to the first and last of the scenario grid.  The
    tolerance is twice the final relative error of the unitary sweep
    (computed when not supplied).
    """
    idx = {e: k for k, e in enumerate(s.epsilons)}
    eps_list = tuple(epsilons) if epsilons is not None else (s.epsilons[0], s.epsilons[-1])
    if final_rel_err is None:
        final_rel_err = sweep_epsilon(s, "unitary").final_rel_err
    normalized, spreads = [], []
    for eps in eps_list:
        N = s.osc_dims[idx[eps]] if eps in idx else s.osc_dims[-1]
        vals = []
        for a in alphas:
            sa = replace(s, ket=s.ket.with_alpha(a))
            res, _, _ = _prelim_point(sa, "unitary", eps, N)
            vals.append(res.normalized)
        normalized.append(tuple(vals))
        spreads.append(max((abs(x - y) for x in vals for y in vals), default=0.0))
    tol = 2.0 * final_rel_err
    return AlphaReport(
        tuple(complex(a) for a in alphas),
        eps_list,
        tuple(normalized),
        tuple(float(x) for x in spreads),
        float(tol),
        bool(spreads[-1] <= tol),
        bool(all(b <= a for a, b in zip(spreads, spreads[1:]))),
    )
