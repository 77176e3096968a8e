"""Limit coefficients of the eliminated model and their algebraic identities.

Given the cavity-coupled model with Hamiltonian
``E11 b^dag b / eps + (E10 b^dag + E01 b) / sqrt(eps) + E00`` and cavity
decay ``gamma``, the eps -> 0 limit is a Hudson-Parthasarathy cocycle with

    S = (gamma/2 - i E11) (gamma/2 + i E11)^-1
    L = i sqrt(gamma) (gamma/2 + i E11)^-1 E10
    H = E00 + Im{E01 (gamma/2 + i E11)^-1 E10},     Im{X} = (X - X^dag)/2i

The same data arranged as a 2x2 block of Evans coefficients ``L_ab`` is
computed independently by :func:`evans_matrix`; :func:`evans_residuals`
checks the two routes against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguityError, ParameterError, PreconditionError
from .operator_core import as_matrix, dagger, solve, spectral_norm
from .regulated import RegulatedFunction

HERMITICITY_TOL = 1e-12
QUOTIENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PrelimModel:
    E11: np.ndarray
    E10: np.ndarray
    E01: np.ndarray
    E00: np.ndarray
    gamma: float

    def __post_init__(self):
        mats = {}
        for name in ("E11", "E10", "E01", "E00"):
            mats[name] = as_matrix(getattr(self, name), name)
        d = mats["E11"].shape[0]
        for name, M in mats.items():
            if M.shape != (d, d):
                raise ParameterError(f"{name} has shape {M.shape}, expected {(d, d)}")
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        if not (float(self.gamma) > 0 and math.isfinite(self.gamma)):
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def dim(self) -> int:
        return self.E11.shape[0]

    @classmethod
    def from_blocks(cls, E11, E10, E00, gamma) -> "PrelimModel":
        """Build with ``E01 = E10^dag`` enforced."""
        E10 = as_matrix(E10, "E10")
        return cls(E11, E10, dagger(E10), E00, gamma)

    def block(self, alpha: int, beta: int) -> np.ndarray:
        return {(1, 1): self.E11, (1, 0): self.E10, (0, 1): self.E01, (0, 0): self.E00}[alpha, beta]


@dataclass(frozen=True)
class ValidationReport:
    e11_hermitian_residual: float
    e00_hermitian_residual: float
    e01_adjoint_residual: float
    norm_e11: float
    margin: float
    valid: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class LimitModel:
    S: np.ndarray
    L: np.ndarray
    H: np.ndarray

    @property
    def dim(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True, eq=False)
class EvansMatrix:
    L00: np.ndarray
    L01: np.ndarray
    L10: np.ndarray
    L11: np.ndarray

    def block(self, alpha: int, beta: int) -> np.ndarray:
        return {(1, 1): self.L11, (1, 0): self.L10, (0, 1): self.L01, (0, 0): self.L00}[alpha, beta]


def validate_prelim(m: PrelimModel) -> ValidationReport:
    r11 = spectral_norm(m.E11 - dagger(m.E11))
    r00 = spectral_norm(m.E00 - dagger(m.E00))
    r01 = spectral_norm(m.E01 - dagger(m.E10))
    norm = spectral_norm(m.E11)
    margin = m.gamma / 2.0 - norm
    valid = max(r11, r00, r01) < HERMITICITY_TOL and margin > 0
    return ValidationReport(r11, r00, r01, norm, margin, bool(valid))


def _require_valid(m: PrelimModel) -> ValidationReport:
    rep = validate_prelim(m)
    if not rep.valid:
        raise PreconditionError(
            f"model not valid for elimination (margin {rep.margin:.3g}, "
            f"hermiticity residuals {rep.e11_hermitian_residual:.2g}, "
            f"{rep.e00_hermitian_residual:.2g}, {rep.e01_adjoint_residual:.2g})",
            rep,
        )
    return rep


def _resolvent_factor(m: PrelimModel) -> np.ndarray:
    return m.gamma / 2.0 * np.eye(m.dim) + 1j * m.E11


def operator_imag(X: np.ndarray) -> np.ndarray:
    return (X - dagger(X)) / 2j


def eliminate(m: PrelimModel) -> LimitModel:
    _require_valid(m)
    d = m.dim
    A = _resolvent_factor(m)
    B = m.gamma / 2.0 * np.eye(d) - 1j * m.E11
    S_left = solve(A, B)  # A^-1 B
    S_right = solve(A.T, B.T).T  # B A^-1
    scale = max(1.0, spectral_norm(S_left))
    if spectral_norm(S_left - S_right) > QUOTIENT_TOL * scale:
        raise PreconditionError("left and right matrix quotients disagree")
    R_E10 = solve(A, m.E10)
    L = 1j * math.sqrt(m.gamma) * R_E10
    H = m.E00 + operator_imag(m.E01 @ R_E10)
    H = 0.5 * (H + dagger(H))
    return LimitModel(S_left, L, H)


def evans_matrix(m: PrelimModel) -> EvansMatrix:
    """L_ab = [-i E_ab - E_a1 (gamma/2 + i E11)^-1 E_1b] (-2/sqrt(gamma))^(a+b)."""
    _require_valid(m)
    A = _resolvent_factor(m)
    c = -2.0 / math.sqrt(m.gamma)
    blocks = {}
    for a in (0, 1):
        for b in (0, 1):
            inner = -1j * m.block(a, b) - m.block(a, 1) @ solve(A, m.block(1, b))
            blocks[a, b] = inner * c ** (a + b)
    return EvansMatrix(blocks[0, 0], blocks[0, 1], blocks[1, 0], blocks[1, 1])


def evans_from_limit(lm: LimitModel) -> EvansMatrix:
    """Evans coefficients of the cocycle dU = {(S-I)dLambda + L dA^+ - L^+S dA + (-iH - L^+L/2)dt}U."""
    S, L, H = lm.S, lm.L, lm.H
    eye = np.eye(S.shape[0])
    return EvansMatrix(-1j * H - 0.5 * dagger(L) @ L, -dagger(L) @ S, L, S - eye)


def evans_residuals(m: PrelimModel, lm: LimitModel | None = None) -> dict:
    """Spectral-norm distance between :func:`evans_matrix` and the blocks built from ``lm``."""
    lm = eliminate(m) if lm is None else lm
    ev = evans_matrix(m)
    ref = evans_from_limit(lm)
    return {
        name: spectral_norm(getattr(ev, name) - getattr(ref, name))
        for name in ("L11", "L10", "L01", "L00")
    }


def hp_unitarity_residuals(lm: LimitModel) -> tuple:
    """(|S^+S - I|, |SS^+ - I|, |H - H^+|, |L00 + L00^+ + L10^+ L10|)."""
    S, L, H = lm.S, lm.L, lm.H
    eye = np.eye(S.shape[0])
    ev = evans_from_limit(lm)
    return (
        spectral_norm(dagger(S) @ S - eye),
        spectral_norm(S @ dagger(S) - eye),
        spectral_norm(H - dagger(H)),
        spectral_norm(ev.L00 + dagger(ev.L00) + dagger(ev.L10) @ ev.L10),
    )


# ---------------------------------------------------------------------------
# coefficients seen by the vacuum after commuting exponential vectors through


@dataclass(frozen=True, eq=False)
class CheckedCoefficients:
    E11: np.ndarray
    E10: np.ndarray
    E01: np.ndarray
    E00: np.ndarray

    def block(self, alpha: int, beta: int) -> np.ndarray:
        return {(1, 1): self.E11, (1, 0): self.E10, (0, 1): self.E01, (0, 0): self.E00}[alpha, beta]


def checked_from_values(m: PrelimModel, f1_val: complex, f2_val: complex) -> CheckedCoefficients:
    g = m.gamma
    a = 4.0 / g
    c = -2.0 / math.sqrt(g)
    f1c = np.conj(f1_val)
    return CheckedCoefficients(
        E11=a * m.E11,
        E10=c * m.E10 + a * m.E11 * f2_val,
        E01=c * m.E01 + a * f1c * m.E11,
        E00=m.E00 + c * m.E01 * f2_val + c * f1c * m.E10 + a * f1c * m.E11 * f2_val,
    )


def checked_coefficients(
    m: PrelimModel, f1: RegulatedFunction, f2: RegulatedFunction, t: float
) -> CheckedCoefficients:
    _require_valid(m)
    if t < 0:
        raise ParameterError("t must be >= 0")
    for name, f in (("f1", f1), ("f2", f2)):
        if f.left_limit(t) != f.right_limit(t):
            raise AmbiguityError(f"t = {t} is a discontinuity of {name}")
    return checked_from_values(m, f1.right_limit(t), f2.right_limit(t))


def resummed_generator(chk: CheckedCoefficients) -> np.ndarray:
    """-i E00 - (1/2) E01 (1 + i E11/2)^-1 E10 (checked coefficients)."""
    d = chk.E11.shape[0]
    return -1j * chk.E00 - 0.5 * chk.E01 @ solve(np.eye(d) + 0.5j * chk.E11, chk.E10)


def resummation_terms(chk: CheckedCoefficients, R: int) -> np.ndarray:
    """sum_{r=1}^{R} E^(r) / (i^r 2^(r-1)) with E^(1) = E00, E^(r) = E01 E11^(r-2) E10."""
    total = chk.E00 / 1j
    inner = chk.E10
    for r in range(2, R + 1):
        total = total + chk.E01 @ inner / (1j**r * 2.0 ** (r - 1))
        inner = chk.E11 @ inner
    return total


def evans_contraction(ev: EvansMatrix, f1_val: complex, f2_val: complex) -> np.ndarray:
    """sum_ab [f1^*]^a L_ab [f2]^b."""
    f1c = np.conj(f1_val)
    return ev.L00 + f1c * ev.L10 + f2_val * ev.L01 + f1c * f2_val * ev.L11


@dataclass(frozen=True)
class ResummationReport:
    residual: float
    bridge_residual: float


def resummation_residual(
    m: PrelimModel, f1: RegulatedFunction, f2: RegulatedFunction, t: float, R: int
) -> ResummationReport:
    rep = _require_valid(m)
    if rep.norm_e11 > 0.45 * m.gamma:
        raise PreconditionError(
            f"|E11| = {rep.norm_e11:.4g} exceeds 0.45 gamma = {0.45 * m.gamma:.4g}", rep
        )
    if R < 1:
        raise ParameterError("R must be >= 1")
    chk = checked_coefficients(m, f1, f2, t)
    closed = resummed_generator(chk)
    partial = resummation_terms(chk, R)
    bridge = evans_contraction(evans_matrix(m), f1.right_limit(t), f2.right_limit(t))
    return ResummationReport(spectral_norm(partial - closed), spectral_norm(closed - bridge))


# ---------------------------------------------------------------------------


def random_prelim_model(rng: np.random.Generator, d: int, gamma: float = 2.0, e11_ratio: float = 0.45) -> PrelimModel:
    """Random model with Hermitian E11, E00, E01 = E10^dag and |E11| = e11_ratio * gamma."""

    def herm():
        A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        return 0.5 * (A + dagger(A))

    E11 = herm()
    nrm = spectral_norm(E11)
    E11 = E11 * (e11_ratio * gamma / nrm) if nrm > 0 else E11
    E10 = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return PrelimModel.from_blocks(E11, E10, herm(), gamma)
