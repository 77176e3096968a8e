"""Matrix elements of Hudson-Parthasarathy cocycles by ODE integration.

Exponential-vector matrix elements of a cocycle ``dU = {(S-I)dLambda + L dA^dag
- L^dag S dA + (-iH - L^dag L/2) dt} U`` reduce to ordinary differential
equations on the initial space once the field parts are taken through with
the quantum Ito table.  Three flows are provided:

* ``cocycle_matrix_element``: <u e(f1)| U_t |v e(f2)>, a vector ODE.
* ``heisenberg_weyl_matrix_element``: <u e(f1)| U_t^dag X W(g_{t]}) U_t |v e(f2)>.
* ``interaction_picture_matrix_element``: <V_t psi1 | U_t psi2> for the
  cavity model, where V is the cavity-only evolution.

The last two are linear maps ``Z -> Phi_t(Z)`` on operators.  Rather than
propagating the map, we propagate its dual on the rank-one operator
``|ket><bra|``: if ``d Phi/ds = Phi o Theta_s`` then ``Sigma_s = Phi_s^*(Sigma_0)``
obeys ``d Sigma/ds = Theta_s^*(Sigma)`` and the value is ``tr(Sigma_t X)``.
A term ``Z -> A Z B`` has dual ``Sigma -> B Sigma A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .elimination import LimitModel, PrelimModel, hp_unitarity_residuals
from .errors import AccuracyError, CapacityError, DimensionError, ParameterError
from .operator_core import as_matrix, coherent_vector, dagger, kron, truncated_oscillator
from .regulated import ExponentialVectorSpec, RegulatedFunction, merged_grid, prefactor

MAX_JOINT_DIM = 256
LEAK_THRESHOLD = 1e-6
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class HPModel:
    """HP triple on ``sys_dim * max(osc_dim, 1)`` dimensions.

    ``osc_dim = 0`` means no oscillator factor: the oscillator amplitudes of
    the boundary data then only enter through ``exp(alpha1^* alpha2)``.
    """

    S: np.ndarray
    L: np.ndarray
    H: np.ndarray
    sys_dim: int = 0
    osc_dim: int = 0

    def __post_init__(self):
        S = as_matrix(self.S, "S")
        L = as_matrix(self.L, "L")
        H = as_matrix(self.H, "H")
        n = S.shape[0]
        for name, M in (("S", S), ("L", L), ("H", H)):
            if M.shape != (n, n):
                raise DimensionError(f"{name} has shape {M.shape}, expected {(n, n)}")
        sys_dim = self.sys_dim or n // max(self.osc_dim, 1)
        if sys_dim * max(self.osc_dim, 1) != n:
            raise DimensionError(f"sys_dim {sys_dim} x osc_dim {self.osc_dim} != {n}")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "sys_dim", sys_dim)

    @classmethod
    def from_limit(cls, lm: LimitModel) -> "HPModel":
        return cls(lm.S, lm.L, lm.H)

    @property
    def dim(self) -> int:
        return self.S.shape[0]

    def generators(self) -> dict:
        """Evans coefficients G_ab keyed by (alpha, beta)."""
        S, L, H = self.S, self.L, self.H
        Ld = dagger(L)
        return {
            (1, 1): S - np.eye(self.dim),
            (1, 0): L,
            (0, 1): -Ld @ S,
            (0, 0): -1j * H - 0.5 * Ld @ L,
        }

    def residuals(self) -> tuple:
        return hp_unitarity_residuals(LimitModel(self.S, self.L, self.H))

    def lift(self, spec: ExponentialVectorSpec) -> np.ndarray:
        if spec.dim != self.sys_dim:
            raise DimensionError(f"vector of size {spec.dim} for system dimension {self.sys_dim}")
        if self.osc_dim:
            return np.kron(spec.v, coherent_vector(spec.alpha, self.osc_dim))
        return np.array(spec.v)

    def ampliate(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape == (self.dim, self.dim):
            return X
        if self.osc_dim and X.shape == (self.sys_dim, self.sys_dim):
            return kron(X, np.eye(self.osc_dim))
        raise DimensionError(f"observable of shape {X.shape} for model dimension {self.dim}")

    def oscillator_alpha_factor(self, bra: ExponentialVectorSpec, ket: ExponentialVectorSpec) -> complex:
        """Part of the prefactor not already carried by the lifted vectors."""
        if self.osc_dim:
            return 1.0
        return complex(np.exp(np.conj(bra.alpha) * ket.alpha))


def prelim_as_hp(m: PrelimModel, epsilon: float, osc_dim: int) -> HPModel:
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if osc_dim < 4:
        raise ParameterError("osc_dim must be >= 4")
    if m.dim * osc_dim > MAX_JOINT_DIM:
        raise CapacityError(f"joint dimension {m.dim * osc_dim} exceeds {MAX_JOINT_DIM}")
    osc = truncated_oscillator(osc_dim)
    I_s = np.eye(m.dim)
    I_o = np.eye(osc_dim)
    H = (
        kron(m.E11, osc.n_op) / epsilon
        + (kron(m.E10, osc.b_dag) + kron(m.E01, osc.b)) / math.sqrt(epsilon)
        + kron(m.E00, I_o)
    )
    L = math.sqrt(m.gamma / epsilon) * kron(I_s, osc.b)
    return HPModel(np.eye(m.dim * osc_dim, dtype=complex), L, H, m.dim, osc_dim)


@dataclass(frozen=True, eq=False)
class FlowTask:
    model: HPModel
    bra: ExponentialVectorSpec
    ket: ExponentialVectorSpec
    t: float
    X: np.ndarray | None = None
    g: RegulatedFunction | None = None
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        if not self.t > 0:
            raise ParameterError("horizon must be positive")
        for name, spec in (("bra", self.bra), ("ket", self.ket)):
            if spec.dim != self.model.sys_dim:
                raise DimensionError(f"{name} has dimension {spec.dim}, model system dimension {self.model.sys_dim}")


@dataclass(frozen=True)
class FlowResult:
    value: complex
    prefactor: complex
    normalized: complex
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# integration


def _integrate(rhs, y0: np.ndarray, breakpoints, t: float, rtol: float, atol: float, observe=None):
    """Integrate piecewise between breakpoints; returns final state and diagnostics."""
    grid = [0.0] + sorted(x for x in set(breakpoints) if 0.0 < x < t) + [t]
    y = y0.astype(complex).ravel()
    nfev = 0
    peak = observe(y) if observe else 0.0
    for a, b in zip(grid, grid[1:]):
        seg = _Segment(a, b)
        sol = solve_ivp(lambda s, z: rhs(s, z, seg), (a, b), y, method="RK45", rtol=rtol, atol=atol)
        if sol.status < 0:
            raise AccuracyError(f"integrator failed on [{a}, {b}]: {sol.message}", {"interval": (a, b)})
        nfev += sol.nfev
        if observe:
            peak = max(peak, max(observe(sol.y[:, k]) for k in range(sol.y.shape[1])))
        y = sol.y[:, -1]
    return y, {"nfev": int(nfev), "segments": len(grid) - 1, "osc_top_level_weight": float(peak)}


def _vector_top_weight(model: HPModel):
    if not model.osc_dim:
        return None
    N, d = model.osc_dim, model.sys_dim

    def w(y):
        v = y.reshape(d, N)
        tot = np.vdot(v, v).real
        return float(np.vdot(v[:, -1], v[:, -1]).real / tot) if tot > 0 else 0.0

    return w


def _operator_top_weight(model: HPModel):
    if not model.osc_dim:
        return None
    N, d, n = model.osc_dim, model.sys_dim, model.dim
    top = np.zeros(n, dtype=bool)
    top[N - 1 :: N] = True

    def w(y):
        M = y.reshape(n, n)
        tot = np.vdot(M, M).real
        if tot == 0:
            return 0.0
        rows = np.vdot(M[top, :], M[top, :]).real
        cols = np.vdot(M[:, top], M[:, top]).real
        return float(max(rows, cols) / tot)

    return w


def _with_error_estimate(run, rtol: float, atol: float, estimate: bool):
    value, diag = run(rtol, atol)
    if estimate:
        fine, _ = run(rtol / 10.0, atol / 10.0)
        diag["est_error"] = float(abs(fine - value))
    else:
        diag["est_error"] = float("nan")
    return value, diag


def _finish(value, pref, diag, task_tol):
    diag["leak_flag"] = bool(diag.get("osc_top_level_weight", 0.0) > LEAK_THRESHOLD)
    est = diag.get("est_error", float("nan"))
    diag["accuracy_flag"] = bool(np.isfinite(est) and est > task_tol)
    return FlowResult(complex(value), complex(pref), complex(value / pref) if pref != 0 else complex("nan"), diag)


class _Segment:
    """Integration interval free of breakpoints; evaluates amplitudes by their piece on it."""

    def __init__(self, a: float, b: float):
        self.a, self.b = a, b
        self._cache = {}

    def __call__(self, f: RegulatedFunction | None, s: float) -> complex:
        if f is None:
            return 0.0
        P = self._cache.get(id(f))
        if P is None:
            P = self._cache[id(f)] = f.piece_on(self.a, self.b)
        return complex(P(s - self.a))


def cocycle_matrix_element(task: FlowTask, estimate_error: bool = True) -> FlowResult:
    """<u e(f1)| U_t |v e(f2)> by integrating dK = G(s) K dt on the ket."""
    if task.X is not None or task.g is not None:
        raise ParameterError("cocycle_matrix_element takes no observable or Weyl argument")
    m = task.model
    G = m.generators()
    f1, f2 = task.bra.f, task.ket.f
    u = m.lift(task.bra)
    v = m.lift(task.ket)

    def rhs(s, y, seg):
        f1c, f2v = np.conj(seg(f1, s)), seg(f2, s)
        gen = G[0, 0] + f1c * G[1, 0] + f2v * G[0, 1] + f1c * f2v * G[1, 1]
        return gen @ y

    bps = merged_grid(task.bra.f, task.ket.f)

    def run(rtol, atol):
        y, diag = _integrate(rhs, v, bps, task.t, rtol, atol, _vector_top_weight(m))
        return np.vdot(u, y), diag

    raw, diag = _with_error_estimate(run, task.rtol, task.atol, estimate_error)
    pref = prefactor(task.bra, task.ket)
    value = raw * prefactor(task.bra.with_alpha(0), task.ket.with_alpha(0)) * m.oscillator_alpha_factor(task.bra, task.ket)
    return _finish(value, pref, diag, task.atol + task.rtol * abs(value) * 10)


def _weyl_dual_rhs(model: HPModel, f1: RegulatedFunction, f2: RegulatedFunction, g: RegulatedFunction | None):
    S, L, H = model.S, model.L, model.H
    Sd, Ld = dagger(S), dagger(L)
    LdL = Ld @ L
    K_left = -1j * H - 0.5 * LdL  # multiplies Sigma from the left in theta00^*
    K_right = 1j * H - 0.5 * LdL
    LdS = Ld @ S
    n = model.dim

    def rhs(s, y, seg):
        Sig = y.reshape(n, n)
        f1c, f2v = np.conj(seg(f1, s)), seg(f2, s)
        gv = seg(g, s)
        gc = np.conj(gv)
        out = Sig @ K_right + K_left @ Sig + L @ Sig @ Ld
        if gv != 0:
            out += -0.5 * abs(gv) ** 2 * Sig + gv * (Sig @ Ld) - gc * (L @ Sig)
        if f1c != 0:
            t10 = L @ Sig @ Sd - Sig @ Sd @ L
            if gv != 0:
                t10 = t10 + gv * (Sig @ Sd)
            out += f1c * t10
        if f2v != 0:
            t01 = S @ Sig @ Ld - LdS @ Sig
            if gc != 0:
                t01 = t01 - gc * (S @ Sig)
            out += f2v * t01
        if f1c != 0 and f2v != 0:
            out += f1c * f2v * (S @ Sig @ Sd - Sig)
        return out.ravel()

    return rhs


def heisenberg_weyl_matrix_element(task: FlowTask, estimate_error: bool = True) -> FlowResult:
    """<u e(f1)| U_t^dag X W(g_{t]}) U_t |v e(f2)>; X defaults to the identity."""
    m = task.model
    X = np.eye(m.dim, dtype=complex) if task.X is None else m.ampliate(task.X)
    g = task.g.truncate(task.t) if task.g is not None else None
    u = m.lift(task.bra)
    v = m.lift(task.ket)
    rhs = _weyl_dual_rhs(m, task.bra.f, task.ket.f, g)
    bps = merged_grid(task.bra.f, task.ket.f, *([] if g is None else [g]))
    sigma0 = np.outer(v, np.conj(u))

    def run(rtol, atol):
        y, diag = _integrate(rhs, sigma0, bps, task.t, rtol, atol, _operator_top_weight(m))
        return np.trace(y.reshape(m.dim, m.dim) @ X), diag

    raw, diag = _with_error_estimate(run, task.rtol, task.atol, estimate_error)
    pref = prefactor(task.bra, task.ket)
    value = raw * prefactor(task.bra.with_alpha(0), task.ket.with_alpha(0)) * m.oscillator_alpha_factor(task.bra, task.ket)
    return _finish(value, pref, diag, task.atol + task.rtol * abs(value) * 10)


def _interaction_dual_rhs(m: PrelimModel, epsilon: float, model: HPModel, f1, f2):
    osc = truncated_oscillator(model.osc_dim)
    I_s = np.eye(m.dim)
    b = kron(I_s, osc.b)
    bd = dagger(b)
    n_op = bd @ b
    H = model.H
    k = m.gamma / epsilon
    rk = math.sqrt(k)
    right = -0.5 * k * n_op  # V-side drift, Sigma @ right
    left = -0.5 * k * n_op - 1j * H  # U-side drift, left @ Sigma
    n = model.dim

    def rhs(s, y, seg):
        Sig = y.reshape(n, n)
        f1c, f2v = np.conj(seg(f1, s)), seg(f2, s)
        out = Sig @ right + left @ Sig + k * (b @ Sig @ bd)
        if f1c != 0:
            # Gamma10(Z) = rk [Z, b]  ->  dual rk (b Sigma - Sigma b)
            out += f1c * rk * (b @ Sig - Sig @ b)
        if f2v != 0:
            # Gamma01(Z) = rk [b^dag, Z]  ->  dual rk (Sigma b^dag - b^dag Sigma)
            out += f2v * rk * (Sig @ bd - bd @ Sig)
        return out.ravel()

    return rhs


def interaction_picture_matrix_element(
    m: PrelimModel,
    epsilon: float,
    osc_dim: int,
    bra: ExponentialVectorSpec,
    ket: ExponentialVectorSpec,
    t: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    estimate_error: bool = True,
) -> FlowResult:
    """<V_t psi1 | U_t psi2>, i.e. the interaction-picture unitary between the boundary vectors."""
    model = prelim_as_hp(m, epsilon, osc_dim)
    FlowTask(model, bra, ket, t)  # validates dimensions and horizon
    u = model.lift(bra)
    v = model.lift(ket)
    rhs = _interaction_dual_rhs(m, epsilon, model, bra.f, ket.f)
    bps = merged_grid(bra.f, ket.f)
    sigma0 = np.outer(v, np.conj(u))

    def run(rt, at):
        y, diag = _integrate(rhs, sigma0, bps, t, rt, at, _operator_top_weight(model))
        return np.trace(y.reshape(model.dim, model.dim)), diag

    raw, diag = _with_error_estimate(run, rtol, atol, estimate_error)
    pref = prefactor(bra, ket)
    value = raw * prefactor(bra.with_alpha(0), ket.with_alpha(0))
    return _finish(value, pref, diag, atol + rtol * abs(value) * 10)
