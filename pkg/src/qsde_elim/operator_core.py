"""Dense complex matrices and truncated oscillator operators.

All Hilbert spaces here are small (system dimension <= 8, oscillator
truncation <= 24), so everything is a dense ``complex128`` numpy array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, ParameterError, SingularityError

KRON_CAP = 4096
MAX_COHERENT_INTENSITY = 50.0


def as_matrix(M, name="matrix") -> np.ndarray:
    """Coerce ``M`` to a finite 2-D complex array."""
    A = np.array(M, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ParameterError(f"{name} contains non-finite entries")
    return A


def _require_square(A: np.ndarray, name: str) -> None:
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")


def dagger(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def spectral_norm(M) -> float:
    """Largest singular value of a square matrix."""
    A = as_matrix(M)
    _require_square(A, "spectral_norm input")
    return float(np.linalg.norm(A, 2))


@dataclass(frozen=True)
class TruncatedOscillator:
    dim: int
    b: np.ndarray
    b_dag: np.ndarray
    n_op: np.ndarray


def truncated_oscillator(N: int) -> TruncatedOscillator:
    if int(N) != N or N < 2:
        raise ParameterError(f"oscillator truncation must be an integer >= 2, got {N}")
    N = int(N)
    b = np.diag(np.sqrt(np.arange(1, N, dtype=float)), k=1).astype(complex)
    b_dag = dagger(b)
    return TruncatedOscillator(N, b, b_dag, np.diag(np.arange(N, dtype=float)).astype(complex))


def coherent_vector(alpha: complex, N: int) -> np.ndarray:
    """Truncated *unnormalized* exponential vector exp(alpha b^dag)|0>.

    Component k is alpha**k / sqrt(k!).
    """
    if int(N) != N or N < 2:
        raise ParameterError(f"truncation must be an integer >= 2, got {N}")
    alpha = complex(alpha)
    if abs(alpha) ** 2 > MAX_COHERENT_INTENSITY:
        raise ParameterError(f"|alpha|^2 = {abs(alpha) ** 2:g} exceeds {MAX_COHERENT_INTENSITY}")
    out = np.empty(int(N), dtype=complex)
    out[0] = 1.0
    for k in range(1, int(N)):
        out[k] = out[k - 1] * alpha / math.sqrt(k)
    return out


def kron(A, B, cap: int = KRON_CAP) -> np.ndarray:
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    rows, cols = A.shape[0] * B.shape[0], A.shape[1] * B.shape[1]
    if rows > cap or cols > cap:
        raise CapacityError(f"Kronecker product of size {rows}x{cols} exceeds cap {cap}")
    return np.kron(A, B)


def solve(A, B, max_condition: float = 1e12) -> np.ndarray:
    """Solve ``A X = B``; rejects singular or ill-conditioned ``A``."""
    A = as_matrix(A, "A")
    B = np.array(B, dtype=complex)
    if B.ndim == 1:
        B = B[:, None]
    _require_square(A, "A")
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"shape mismatch: A is {A.shape}, B is {B.shape}")
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond >= max_condition:
        raise SingularityError(f"matrix is singular or ill-conditioned (cond ~ {cond:.3g})", cond)
    return np.linalg.solve(A, B)


def hermitian_residual(A) -> float:
    A = as_matrix(A)
    return spectral_norm(A - dagger(A))
