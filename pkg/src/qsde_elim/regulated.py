"""Ornstein-Uhlenbeck correlation kernel and regulated field amplitudes.

Field amplitudes are compactly supported piecewise polynomials (degree <= 3).
Each piece stores ascending coefficients in the *local* variable ``t - x_i``
where ``x_i`` is the left end of the piece.  Every smoothing integral of such
a function against the exponential kernel has a closed form, built here from
two primitives: polynomial integrals and ``int_0^h P(v) exp(-lam v) dv``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .errors import AmbiguityError, ParameterError

MAX_DEGREE = 3


@dataclass(frozen=True)
class OUKernel:
    """G(tau) = gamma/(4 eps) * exp(-gamma |tau| / (2 eps))."""

    gamma: float
    epsilon: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def rate(self) -> float:
        return self.gamma / (2.0 * self.epsilon)

    @property
    def peak(self) -> float:
        return self.gamma / (4.0 * self.epsilon)

    def __call__(self, tau):
        return kernel_eval(self, tau)


def kernel_eval(K: OUKernel, tau):
    return K.peak * np.exp(-K.rate * np.abs(tau))


def _kernel_cdf(K: OUKernel, x: float) -> float:
    if x == -math.inf:
        return 0.0
    if x == math.inf:
        return 1.0
    if x <= 0:
        return 0.5 * math.exp(K.rate * x)
    return 1.0 - 0.5 * math.exp(-K.rate * x)


def kernel_mass(K: OUKernel, a: float, b: float) -> float:
    """Exact integral of the kernel over [a, b] (infinite ends allowed)."""
    if a > b:
        raise ParameterError(f"empty interval [{a}, {b}]")
    if a == b:
        return 0.0
    # both ends on the same side: subtract tails to avoid 1 - 1 cancellation
    if a >= 0:
        return 0.5 * (math.exp(-K.rate * a) - (0.0 if b == math.inf else math.exp(-K.rate * b)))
    if b <= 0:
        return 0.5 * ((math.exp(K.rate * b)) - (0.0 if a == -math.inf else math.exp(K.rate * a)))
    return _kernel_cdf(K, b) - _kernel_cdf(K, a)


# ---------------------------------------------------------------------------
# polynomial x exponential primitives


def _poly(coefs) -> Polynomial:
    c = np.atleast_1d(np.asarray(coefs, dtype=complex))
    return Polynomial(c if c.size else np.zeros(1, dtype=complex))


def int_poly_exp(P: Polynomial, h: float, lam: float) -> complex:
    """int_0^h P(v) exp(-lam v) dv for lam >= 0, h >= 0."""
    if h <= 0:
        return 0.0j
    c = P.coef
    if lam * h <= 0.5:
        total = 0.0j
        for j, cj in enumerate(c):
            if cj == 0:
                continue
            s, term, m = 0.0, 1.0, 0
            # sum_m (-lam)^m h^(j+m+1) / (m! (j+m+1))
            while True:
                add = term * h ** (j + m + 1) / (j + m + 1)
                s += add
                m += 1
                term *= -lam / m
                if abs(add) < 1e-18 * max(abs(s), 1e-300) or m > 60:
                    break
            total += cj * s
        return total
    head = 0.0j
    tail = 0.0j
    D = P
    lk = lam
    for _ in range(len(c)):
        head += D(0.0) / lk
        tail += D(h) / lk
        D = D.deriv()
        lk *= lam
    return head - math.exp(-lam * h) * tail


def int_poly_exp_rev(P: Polynomial, h: float, lam: float) -> complex:
    """int_0^h P(v) exp(-lam (h - v)) dv."""
    return int_poly_exp(P(Polynomial([h, -1.0])), h, lam)


def _shift(P: Polynomial, delta: float) -> Polynomial:
    """Return Q with Q(v) = P(v + delta)."""
    if delta == 0:
        return P
    return P(Polynomial([delta, 1.0]))


# ---------------------------------------------------------------------------
# regulated functions


@dataclass(frozen=True, eq=False)
class RegulatedFunction:
    """Compactly supported piecewise polynomial on the half line."""

    breakpoints: tuple
    pieces: tuple

    def __post_init__(self):
        bp = tuple(float(x) for x in self.breakpoints)
        if not bp or bp[0] != 0.0:
            raise ParameterError("breakpoints must start at 0")
        if any(not math.isfinite(x) for x in bp):
            raise ParameterError("breakpoints must be finite")
        if any(b <= a for a, b in zip(bp, bp[1:])):
            raise ParameterError("breakpoints must be strictly increasing")
        if len(self.pieces) != len(bp) - 1:
            raise ParameterError(f"{len(bp) - 1} intervals but {len(self.pieces)} pieces")
        pieces = []
        for k, p in enumerate(self.pieces):
            c = np.atleast_1d(np.asarray(p, dtype=complex))
            if c.size == 0:
                c = np.zeros(1, dtype=complex)
            c = np.trim_zeros(c, "b")
            if c.size == 0:
                c = np.zeros(1, dtype=complex)
            if c.size - 1 > MAX_DEGREE:
                raise ParameterError(f"piece {k} has degree {c.size - 1} > {MAX_DEGREE}")
            if not np.all(np.isfinite(c)):
                raise ParameterError(f"piece {k} has non-finite coefficients")
            c.setflags(write=False)
            pieces.append(c)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "pieces", tuple(pieces))

    # construction -----------------------------------------------------

    @classmethod
    def zero(cls) -> "RegulatedFunction":
        return cls((0.0,), ())

    @classmethod
    def from_segments(cls, segments: Iterable) -> "RegulatedFunction":
        """Build from ``(start, end, coefs)`` triples; gaps are zero."""
        segs = sorted(((float(s), float(e), c) for s, e, c in segments), key=lambda x: x[0])
        bps = [0.0]
        pieces = []
        for s, e, c in segs:
            if s < 0 or e <= s:
                raise ParameterError(f"bad segment [{s}, {e}]")
            if s < bps[-1]:
                raise ParameterError(f"segment starting at {s} overlaps the previous one")
            if s > bps[-1]:
                pieces.append([0.0])
                bps.append(s)
            pieces.append(c)
            bps.append(e)
        return cls(tuple(bps), tuple(pieces))

    @classmethod
    def indicator(cls, a: float, b: float, value: complex = 1.0) -> "RegulatedFunction":
        return cls.from_segments([(a, b, [value])])

    def to_segments(self) -> list:
        return [
            (a, b, list(c))
            for a, b, c in zip(self.breakpoints, self.breakpoints[1:], self.pieces)
            if np.any(c != 0)
        ]

    # properties -------------------------------------------------------

    @property
    def support_end(self) -> float:
        return self.breakpoints[-1]

    @property
    def is_zero(self) -> bool:
        return all(not np.any(c) for c in self.pieces)

    def discontinuities(self) -> list:
        """Breakpoints where the left and right limits differ."""
        return [x for x in self.breakpoints if self.left_limit(x) != self.right_limit(x)]

    def is_breakpoint(self, t: float) -> bool:
        return t in self.breakpoints[1:] or (t == 0.0 and len(self.breakpoints) > 1)

    def sup_norm(self) -> float:
        best = 0.0
        for a, b, c in zip(self.breakpoints, self.breakpoints[1:], self.pieces):
            P = _poly(c)
            xs = np.linspace(0.0, b - a, 33)
            best = max(best, float(np.max(np.abs(P(xs)))))
        return best

    # evaluation -------------------------------------------------------

    def _piece_index(self, t: float, right: bool) -> int:
        bp = self.breakpoints
        side = "right" if right else "left"
        return int(np.searchsorted(bp, t, side=side)) - 1

    def right_limit(self, t: float) -> complex:
        if t < 0:
            return 0.0j
        i = self._piece_index(t, right=True)
        if i < 0 or i >= len(self.pieces):
            return 0.0j
        return complex(_poly(self.pieces[i])(t - self.breakpoints[i]))

    def left_limit(self, t: float) -> complex:
        if t <= 0:
            return 0.0j
        i = self._piece_index(t, right=False)
        if i < 0 or i >= len(self.pieces):
            return 0.0j
        return complex(_poly(self.pieces[i])(t - self.breakpoints[i]))

    def __call__(self, t: float) -> complex:
        return self.right_limit(t)

    def value_at_continuity_point(self, t: float) -> complex:
        if self.left_limit(t) != self.right_limit(t):
            raise AmbiguityError(f"t = {t} is a discontinuity of the amplitude")
        return self.right_limit(t)

    def piece_on(self, x: float, y: float) -> Polynomial:
        """Polynomial in the local variable ``t - x`` valid on [x, y]."""
        if x >= self.support_end:
            return Polynomial([0.0j])
        i = self._piece_index(x, right=True)
        if i < 0 or self.breakpoints[i + 1] < y - 1e-15 * max(1.0, abs(y)):
            raise ParameterError(f"[{x}, {y}] straddles a breakpoint")
        return _shift(_poly(self.pieces[i]), x - self.breakpoints[i])

    # algebra ----------------------------------------------------------

    def scale(self, c: complex) -> "RegulatedFunction":
        return RegulatedFunction(self.breakpoints, tuple(np.asarray(p) * c for p in self.pieces))

    def __neg__(self) -> "RegulatedFunction":
        return self.scale(-1.0)

    def conj(self) -> "RegulatedFunction":
        return RegulatedFunction(self.breakpoints, tuple(np.conj(p) for p in self.pieces))

    def truncate(self, s: float) -> "RegulatedFunction":
        """g * indicator[0, s]."""
        if s < 0:
            raise ParameterError("truncation point must be >= 0")
        if s >= self.support_end:
            return self
        if s == 0:
            return RegulatedFunction.zero()
        bps = [x for x in self.breakpoints if x < s] + [s]
        return RegulatedFunction(tuple(bps), self.pieces[: len(bps) - 1])


def merged_grid(*funcs: RegulatedFunction, extra: Sequence[float] = ()) -> list:
    pts = {0.0}
    for f in funcs:
        pts.update(f.breakpoints)
    pts.update(float(x) for x in extra)
    return sorted(pts)


def inner(f: RegulatedFunction, g: RegulatedFunction) -> complex:
    """Exact L2 inner product int f(t)^* g(t) dt."""
    grid = merged_grid(f, g)
    total = 0.0j
    for x, y in zip(grid, grid[1:]):
        P = Polynomial(np.conj(f.piece_on(x, y).coef)) * g.piece_on(x, y)
        Q = P.integ()
        total += Q(y - x) - Q(0.0)
    return complex(total)


@dataclass(frozen=True, eq=False)
class ExponentialVectorSpec:
    """Boundary data v (system) x |alpha> (oscillator) x e(f) (field)."""

    v: np.ndarray
    alpha: complex = 0.0
    f: RegulatedFunction = None

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.v, dtype=complex))
        if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
            raise ParameterError("v must be a finite non-empty vector")
        if not np.any(v):
            raise ParameterError("v must be nonzero")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "alpha", complex(self.alpha))
        if self.f is None:
            object.__setattr__(self, "f", RegulatedFunction.zero())
        elif not isinstance(self.f, RegulatedFunction):
            raise ParameterError("f must be a RegulatedFunction")

    @property
    def dim(self) -> int:
        return self.v.size

    def with_alpha(self, alpha: complex) -> "ExponentialVectorSpec":
        return ExponentialVectorSpec(self.v, alpha, self.f)


def prefactor(bra: ExponentialVectorSpec, ket: ExponentialVectorSpec) -> complex:
    """<alpha1|alpha2> <f1|f2> = exp(alpha1^* alpha2 + int f1^* f2)."""
    return complex(np.exp(np.conj(bra.alpha) * ket.alpha + inner(bra.f, ket.f)))


# ---------------------------------------------------------------------------
# smoothing


@dataclass(frozen=True)
class _Interval:
    x: float
    y: float
    minus_poly: Polynomial  # g^- = minus_poly(t-x) + minus_coef * exp(-lam (t-x))
    minus_coef: complex
    plus_poly: Polynomial  # g^+ = plus_poly(t-x) + plus_coef * exp(-lam (y-t))
    plus_coef: complex


def _derivative_series(q: Polynomial, lam: float, alternate: bool) -> Polynomial:
    out = Polynomial([0.0j])
    D = q
    sign = 1.0
    lk = 1.0
    for _ in range(len(q.coef)):
        out = out + D * (sign / lk)
        D = D.deriv()
        lk *= lam
        if alternate:
            sign = -sign
    return out


def smoothing_profile(g: RegulatedFunction, K: OUKernel, grid: Sequence[float]) -> list:
    """Closed-form representation of g^+(.,eps) and g^-(.,eps) on each grid cell.

    ``grid`` must contain every breakpoint of ``g``.
    """
    lam = K.rate
    cells = []
    for x, y in zip(grid, grid[1:]):
        q = g.piece_on(x, y)
        cells.append([x, y, _derivative_series(q, lam, True), _derivative_series(q, lam, False)])
    # forward sweep for g^-, backward sweep for g^+
    minus_at = 0.0j
    minus_coefs = []
    for x, y, pm, _ in cells:
        c = minus_at - pm(0.0)
        minus_coefs.append(c)
        minus_at = pm(y - x) + c * math.exp(-lam * (y - x))
    plus_at = 0.0j
    plus_coefs = [0.0j] * len(cells)
    for k in range(len(cells) - 1, -1, -1):
        x, y, _, pp = cells[k]
        c = plus_at - pp(y - x)
        plus_coefs[k] = c
        plus_at = pp(0.0) + c * math.exp(-lam * (y - x))
    return [
        _Interval(x, y, pm, cm, pp, cp)
        for (x, y, pm, pp), cm, cp in zip(cells, minus_coefs, plus_coefs)
    ]


def smooth(g: RegulatedFunction, side: str, t: float, K: OUKernel) -> complex:
    """Future (``side='plus'``) or past (``side='minus'``) smoothed amplitude.

    g^+(t) = 2 int_0^inf g(t+tau) G(tau) dtau,
    g^-(t) = 2 int_0^t g(t-tau) G(tau) dtau.
    """
    if side not in ("plus", "minus"):
        raise ParameterError(f"side must be 'plus' or 'minus', got {side!r}")
    if t < 0:
        raise ParameterError("smoothing is defined for t >= 0")
    grid = merged_grid(g)
    prof = smoothing_profile(g, K, grid)
    lam = K.rate
    end = grid[-1]
    if t >= end:
        if side == "plus" or not prof:
            return 0.0j
        last = prof[-1]
        at_end = last.minus_poly(end - last.x) + last.minus_coef * math.exp(-lam * (end - last.x))
        return complex(at_end * math.exp(-lam * (t - end)))
    k = int(np.searchsorted(grid, t, side="right")) - 1
    c = prof[k]
    v = t - c.x
    if side == "minus":
        return complex(c.minus_poly(v) + c.minus_coef * math.exp(-lam * v))
    return complex(c.plus_poly(v) + c.plus_coef * math.exp(-lam * (c.y - t)))


def smoothed_average(g: RegulatedFunction, t: float, K: OUKernel) -> complex:
    """int G(t-s) g(s) ds = (g^+(t) + g^-(t)) / 2."""
    return 0.5 * (smooth(g, "plus", t, K) + smooth(g, "minus", t, K))


def smeared_commutator(f: RegulatedFunction, g: RegulatedFunction, K: OUKernel) -> complex:
    """[A(f,eps), A(g,eps)^dag] = int f(t)^* (g^+ + g^-)(t)/2 dt, in closed form."""
    grid = merged_grid(f, g)
    lam = K.rate
    total = 0.0j
    for cell in smoothing_profile(g, K, grid):
        h = cell.y - cell.x
        fbar = Polynomial(np.conj(f.piece_on(cell.x, cell.y).coef))
        if not np.any(fbar.coef):
            continue
        Q = (fbar * (cell.minus_poly + cell.plus_poly)).integ()
        total += 0.5 * (Q(h) - Q(0.0))
        total += 0.5 * cell.minus_coef * int_poly_exp(fbar, h, lam)
        total += 0.5 * cell.plus_coef * int_poly_exp_rev(fbar, h, lam)
    return complex(total)


# ---------------------------------------------------------------------------
# quadrature cross-checks


def _quad(func, a, b, points=None) -> complex:
    if b <= a:
        return 0.0j
    kw = dict(epsabs=1e-13, epsrel=1e-11, limit=400)
    if points:
        pts = [p for p in points if a < p < b]
        if pts:
            kw["points"] = pts
    re = integrate.quad(lambda s: complex(func(s)).real, a, b, **kw)[0]
    im = integrate.quad(lambda s: complex(func(s)).imag, a, b, **kw)[0]
    return complex(re, im)


def convolution_identity_residual(K: OUKernel, t: float, tau: float) -> float:
    """|4 int_0^{t^tau} G(t-s)G(s-tau) ds - [G(t-tau) - G(tau) e^{-gamma t/2eps}]|."""
    if t < 0 or tau < 0:
        raise ParameterError("t and tau must be >= 0")
    upper = min(t, tau)
    lhs = 4.0 * _quad(lambda s: kernel_eval(K, t - s) * kernel_eval(K, s - tau), 0.0, upper).real
    rhs = kernel_eval(K, t - tau) - kernel_eval(K, tau) * math.exp(-K.rate * t)
    return abs(lhs - rhs)


def double_smoothing_residual(g: RegulatedFunction, t: float, K: OUKernel) -> float:
    """Compare 2 int_0^t G(t-s) g^+(s) ds (quadrature) with its closed form.

    The closed form is int g(tau)[G(t-tau) - G(tau) e^{-lam t}] dtau
    = (g^+(t) + g^-(t))/2 - g^+(0) e^{-lam t} / 2.
    """
    lhs = 2.0 * _quad(
        lambda s: kernel_eval(K, t - s) * smooth(g, "plus", s, K),
        0.0,
        t,
        points=list(g.breakpoints),
    )
    rhs = smoothed_average(g, t, K) - 0.5 * smooth(g, "plus", 0.0, K) * math.exp(-K.rate * t)
    return abs(lhs - rhs)


def smooth_by_quadrature(g: RegulatedFunction, side: str, t: float, K: OUKernel) -> complex:
    """Quadrature oracle for :func:`smooth`; never used on the main path."""
    pts = list(g.breakpoints)
    if side == "minus":
        return 2.0 * _quad(lambda s: g(s) * kernel_eval(K, t - s), 0.0, t, pts)
    hi = max(g.support_end, t)
    return 2.0 * _quad(lambda s: g(s) * kernel_eval(K, t - s), t, hi, pts)
