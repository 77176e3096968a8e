"""Adiabatic elimination of a damped oscillator from quantum stochastic differential equations.

Modules:

- ``operator_core``: dense matrices, truncated oscillator, coherent vectors
- ``regulated``: Ornstein-Uhlenbeck kernel, piecewise-polynomial field amplitudes, smoothing
- ``elimination``: limit coefficients and their algebraic identities
- ``dyson``: pairings, diagrams, exact simplex integrals, combinatorial bounds
- ``flows``: matrix elements of cocycles by ODE integration
- ``collision``: time-bin oracle for the same matrix elements
- ``convergence``: epsilon sweeps and scenarios
"""

__version__ = "0.1.0"

from .elimination import LimitModel, PrelimModel, eliminate, evans_matrix, validate_prelim
from .regulated import ExponentialVectorSpec, OUKernel, RegulatedFunction

__all__ = [
    "ExponentialVectorSpec",
    "LimitModel",
    "OUKernel",
    "PrelimModel",
    "RegulatedFunction",
    "eliminate",
    "evans_matrix",
    "validate_prelim",
    "__version__",
]
