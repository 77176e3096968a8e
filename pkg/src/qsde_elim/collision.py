"""Repeated-interaction (time-bin) oracle for HP cocycles.

The field on [0, t] is cut into bins of width dt, each a small truncated
oscillator.  One time step couples the initial space to one fresh bin through
a slot unitary whose blocks ``<j|U|k>`` reproduce the Evans coefficients to
first order; the blocks are unitarized by polar decomposition.  Exponential
field vectors become products of bin coherent vectors with amplitude
``f(s_k) sqrt(dt)``, and ``W(g)`` becomes a product of bin displacements.

Nothing here reuses the flow generators: coefficients are rebuilt from
``(S, L, H)`` directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, polar

from .elimination import PrelimModel
from .errors import CapacityError, NumericError, ParameterError
from .operator_core import as_matrix, coherent_vector, dagger, kron, truncated_oscillator
from .regulated import ExponentialVectorSpec, RegulatedFunction, inner

MAX_BINS = 1_000_000


@dataclass(frozen=True, eq=False)
class SlotUnitary:
    dt: float
    bin_dim: int
    U: np.ndarray  # ordering: bin index outer, system inner

    def block(self, j: int, k: int) -> np.ndarray:
        n = self.U.shape[0] // self.bin_dim
        return self.U[j * n : (j + 1) * n, k * n : (k + 1) * n]


def slot_unitary(model, dt: float, bin_dim: int = 2) -> SlotUnitary:
    """First-order slot blocks [[I + dt G00, sqrt(dt) G01], [sqrt(dt) G10, S]], made unitary."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if bin_dim not in (2, 3):
        raise ParameterError("bin_dim must be 2 or 3")
    S = as_matrix(model.S, "S")
    L = as_matrix(model.L, "L")
    H = as_matrix(model.H, "H")
    n = S.shape[0]
    eye = np.eye(n)
    Ld = dagger(L)
    blocks = [[np.zeros((n, n), dtype=complex) for _ in range(bin_dim)] for _ in range(bin_dim)]
    blocks[0][0] = eye + dt * (-1j * H - 0.5 * Ld @ L)
    blocks[0][1] = -math.sqrt(dt) * Ld @ S
    blocks[1][0] = math.sqrt(dt) * L
    blocks[1][1] = S
    if bin_dim == 3:
        blocks[2][2] = S @ S
    M = np.block(blocks)
    if np.linalg.matrix_rank(M) < M.shape[0]:
        raise NumericError("slot matrix is rank deficient; polar factor not unique")
    U, _ = polar(M)
    return SlotUnitary(dt, bin_dim, U)


def _bin_vector(beta: complex, bin_dim: int) -> np.ndarray:
    return coherent_vector(beta, max(bin_dim, 2))[:bin_dim]


def _bin_weyl(g: complex, bin_dim: int) -> np.ndarray:
    osc = truncated_oscillator(bin_dim)
    return expm(g * osc.b_dag - np.conj(g) * osc.b)


def _compress(U: SlotUnitary, Y: np.ndarray, B: np.ndarray, V: SlotUnitary, beta1: complex, beta2: complex) -> np.ndarray:
    """<beta1| V^dag (Y x B) U |beta2>, bin index outer."""
    d = U.bin_dim
    n = Y.shape[0]
    e1 = _bin_vector(beta1, d)
    e2 = _bin_vector(beta2, d)
    # (Y x B) U |beta2>: rows indexed (j, sys)
    Ucol = sum(e2[k] * U.U[:, k * n : (k + 1) * n] for k in range(d))  # (d n) x n
    Vcol = sum(e1[k] * V.U[:, k * n : (k + 1) * n] for k in range(d))
    YB = np.kron(B, Y)
    return dagger(Vcol) @ YB @ Ucol


def _amplitude(f: RegulatedFunction | None, s: float) -> complex:
    return 0.0 if f is None else complex(f(s))


def _lift(model, spec: ExponentialVectorSpec) -> np.ndarray:
    osc_dim = getattr(model, "osc_dim", 0)
    if osc_dim:
        return np.kron(spec.v, coherent_vector(spec.alpha, osc_dim))
    return np.array(spec.v, dtype=complex)


def _observable(model, X, n: int) -> np.ndarray:
    if X is None:
        return np.eye(n, dtype=complex)
    X = as_matrix(X, "X")
    if X.shape == (n, n):
        return X
    osc_dim = getattr(model, "osc_dim", 0)
    if osc_dim and X.shape[0] * osc_dim == n:
        return kron(X, np.eye(osc_dim))
    raise ParameterError(f"observable of shape {X.shape} for dimension {n}")


def _contract(U: SlotUnitary, V: SlotUnitary, Y: np.ndarray, bra, ket, g, t: float, nbins: int, dt: float) -> tuple:
    """Backward sweep over bins; returns (Y_0, product of truncated bin overlaps)."""
    d = U.bin_dim
    sq = math.sqrt(dt)
    overlap = 1.0 + 0j
    for k in range(nbins, 0, -1):
        s = (k - 0.5) * dt
        b1 = _amplitude(bra.f, s) * sq
        b2 = _amplitude(ket.f, s) * sq
        gk = _amplitude(g, s) * sq if g is not None and s < t else 0.0
        B = _bin_weyl(gk, d) if gk != 0 else np.eye(d)
        Y = _compress(U, Y, B, V, b1, b2)
        overlap *= np.vdot(_bin_vector(b1, d), _bin_vector(b2, d))
    return Y, overlap


def _nbins(t: float, dt: float) -> int:
    if not t > 0 or not dt > 0:
        raise ParameterError("t and dt must be positive")
    K = int(round(t / dt))
    if K > MAX_BINS:
        raise CapacityError(f"t/dt = {K} exceeds {MAX_BINS}")
    if K < 1 or abs(K * dt - t) > 1e-9 * t:
        raise ParameterError("t must be an integer multiple of dt")
    return K


def _normalize(raw, overlap, bra, ket, alpha_in_vectors: bool) -> complex:
    out = raw / overlap * np.exp(inner(bra.f, ket.f))
    if not alpha_in_vectors:
        out *= np.exp(np.conj(bra.alpha) * ket.alpha)
    return complex(out)


def simulate(
    model,
    bra: ExponentialVectorSpec,
    ket: ExponentialVectorSpec,
    t: float,
    dt: float,
    X=None,
    g: RegulatedFunction | None = None,
    bin_dim: int = 2,
    heisenberg: bool | None = None,
) -> complex:
    """Raw matrix element, same convention as the flow results.

    Without ``X`` and ``g`` this is <psi1| U_t |psi2>; with either it is
    <psi1| U_t^dag X W(g_{t]}) U_t |psi2>.  ``heisenberg`` forces the second
    form with X = I.
    """
    K = _nbins(t, dt)
    U = slot_unitary(model, dt, bin_dim)
    n = U.U.shape[0] // bin_dim
    u = _lift(model, bra)
    v = _lift(model, ket)
    if heisenberg is None:
        heisenberg = X is not None or g is not None
    if heisenberg:
        Y0, overlap = _contract(U, U, _observable(model, X, n), bra, ket, g, t, K, dt)
        raw = np.vdot(u, Y0 @ v)
    else:
        # <psi1| U_t |psi2>: identity slots on the bra side
        ident = SlotUnitary(dt, bin_dim, np.eye(n * bin_dim, dtype=complex))
        Y0, overlap = _contract(U, ident, np.eye(n, dtype=complex), bra, ket, None, t, K, dt)
        raw = np.vdot(u, Y0 @ v)
    return _normalize(raw, overlap, bra, ket, bool(getattr(model, "osc_dim", 0)))


@dataclass(frozen=True, eq=False)
class _Triple:
    S: np.ndarray
    L: np.ndarray
    H: np.ndarray
    osc_dim: int


def _prelim_triples(m: PrelimModel, epsilon: float, osc_dim: int) -> tuple:
    osc = truncated_oscillator(osc_dim)
    I_s = np.eye(m.dim)
    n = m.dim * osc_dim
    L = math.sqrt(m.gamma / epsilon) * kron(I_s, osc.b)
    H = (
        kron(m.E11, osc.n_op) / epsilon
        + (kron(m.E10, osc.b_dag) + kron(m.E01, osc.b)) / math.sqrt(epsilon)
        + kron(m.E00, np.eye(osc_dim))
    )
    eye = np.eye(n, dtype=complex)
    return _Triple(eye, L, H, osc_dim), _Triple(eye, L, np.zeros((n, n), dtype=complex), osc_dim)


def simulate_interaction_picture(
    m: PrelimModel,
    epsilon: float,
    osc_dim: int,
    bra: ExponentialVectorSpec,
    ket: ExponentialVectorSpec,
    t: float,
    dt: float,
    bin_dim: int = 2,
) -> complex:
    """<V_t psi1 | U_t psi2> with the cavity-only slots V contracted on the bra side."""
    K = _nbins(t, dt)
    full, cavity = _prelim_triples(m, epsilon, osc_dim)
    U = slot_unitary(full, dt, bin_dim)
    V = slot_unitary(cavity, dt, bin_dim)
    n = m.dim * osc_dim
    Y0, overlap = _contract(U, V, np.eye(n, dtype=complex), bra, ket, None, t, K, dt)
    u = _lift(full, bra)
    v = _lift(full, ket)
    return _normalize(np.vdot(u, Y0 @ v), overlap, bra, ket, True)


def refinement_factors(values: list) -> list:
    """|v_k - v_{k+1}| / |v_{k+1} - v_{k+2}| for a halving sequence."""
    diffs = [abs(a - b) for a, b in zip(values, values[1:])]
    return [a / b if b > 0 else math.inf for a, b in zip(diffs, diffs[1:])]
