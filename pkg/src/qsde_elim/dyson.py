"""Wick pairings, Goldstone diagrams and the integrals that weight them.

Vertices are labelled 1..n with 1 the earliest time.  A pairing sends each
creator vertex ``i`` to a strictly later annihilator vertex ``J(i)``; a
partition of {1..n} is read as a diagram by chaining consecutive members of
each block, so partitions and pairings (summed over bit patterns) are in
bijection.

Simplex integrals of products of the Ornstein-Uhlenbeck kernel are done
exactly.  In gap variables ``u_1 = s_1, u_k = s_k - s_{k-1}, u_{n+1} = t - s_n``
the integrand factorizes as ``prod_k exp(-lam c_k u_k)`` where ``c_k`` counts
the contraction arcs spanning gap ``k``, so the integral is an iterated
convolution of exponentials.  Intermediate results are kept as
``sum_m p_m(x) exp(-m lam x)`` with polynomial ``p_m`` and integer ``m >= 0``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .errors import CapacityError, DivergenceError, ParameterError
from .regulated import OUKernel

MAX_ENUMERATE = 10
MAX_INTEGRATE = 6
MAX_ORACLE = 8
MAX_PAIRING = 12
MAX_DOUBLE = 10


# ---------------------------------------------------------------------------
# diagrams


@dataclass(frozen=True)
class GoldstoneDiagram:
    """A set partition of {1..n}; blocks sorted, ordered by their first vertex."""

    partition: tuple

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(int(v) for v in b)) for b in self.partition))
        flat = [v for b in blocks for v in b]
        if any(len(b) == 0 for b in blocks):
            raise ParameterError("empty block")
        if sorted(flat) != list(range(1, len(flat) + 1)):
            raise ParameterError(f"blocks do not partition 1..{len(flat)}: {self.partition}")
        object.__setattr__(self, "partition", blocks)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.partition)

    def arcs(self) -> list:
        """Contraction arcs (i, j), i < j, chaining each block in time order."""
        return sorted((a, b) for blk in self.partition for a, b in zip(blk, blk[1:]))

    def roles(self) -> tuple:
        """Forced (alpha, beta) bit patterns of the diagram."""
        alpha = [0] * self.n
        beta = [0] * self.n
        for i, j in self.arcs():
            alpha[i - 1] = 1
            beta[j - 1] = 1
        return tuple(alpha), tuple(beta)

    def is_time_consecutive(self) -> bool:
        return all(b[-1] - b[0] == len(b) - 1 for b in self.partition)

    def to_pairing(self) -> "WickPairing":
        alpha, beta = self.roles()
        return WickPairing(alpha, beta, dict(self.arcs()))

    @classmethod
    def from_sizes(cls, r: Sequence[int]) -> "GoldstoneDiagram":
        """Time-consecutive diagram with component sizes ``r`` in time order."""
        if any(int(x) < 1 for x in r):
            raise ParameterError("component sizes must be positive")
        blocks, start = [], 1
        for size in r:
            blocks.append(tuple(range(start, start + int(size))))
            start += int(size)
        return cls(tuple(blocks))


@dataclass(frozen=True)
class WickPairing:
    alpha: tuple
    beta: tuple
    J: dict

    def __post_init__(self):
        alpha = tuple(int(a) for a in self.alpha)
        beta = tuple(int(b) for b in self.beta)
        if len(alpha) != len(beta):
            raise ParameterError("alpha and beta must have equal length")
        if any(x not in (0, 1) for x in alpha + beta):
            raise ParameterError("alpha and beta must be bit sequences")
        P = [i + 1 for i, a in enumerate(alpha) if a]
        Q = [i + 1 for i, b in enumerate(beta) if b]
        J = {int(k): int(v) for k, v in dict(self.J).items()}
        if sorted(J) != P or sorted(J.values()) != Q:
            raise ParameterError("J must be a bijection P(alpha) -> Q(beta)")
        if any(v <= k for k, v in J.items()):
            raise ParameterError("J must satisfy J(i) > i")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "J", J)

    def __hash__(self):
        return hash((self.alpha, self.beta, tuple(sorted(self.J.items()))))

    @property
    def n(self) -> int:
        return len(self.alpha)

    def arcs(self) -> list:
        return sorted(self.J.items())

    def to_diagram(self) -> GoldstoneDiagram:
        """Chain arcs into blocks.  Only meaningful when the pairing came from a partition."""
        nxt = dict(self.J)
        heads = [i for i in range(1, self.n + 1) if i not in set(nxt.values())]
        blocks = []
        for h in heads:
            blk = [h]
            while blk[-1] in nxt:
                blk.append(nxt[blk[-1]])
            blocks.append(tuple(blk))
        return GoldstoneDiagram(tuple(blocks))


@dataclass(frozen=True)
class OccupationSequence:
    """n_j = number of j-vertex components; stored without trailing zeros."""

    counts: tuple

    def __post_init__(self):
        c = [int(x) for x in self.counts]
        if any(x < 0 for x in c):
            raise ParameterError("occupation counts must be nonnegative")
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "counts", tuple(c))

    def n(self, j: int) -> int:
        return self.counts[j - 1] if 1 <= j <= len(self.counts) else 0

    @property
    def E(self) -> int:
        return sum(j * c for j, c in enumerate(self.counts, start=1))

    @property
    def N(self) -> int:
        return sum(self.counts)

    def factorial_product(self) -> int:
        return math.prod(math.factorial(c) for c in self.counts)


def _restricted_growth(n: int):
    """All set partitions of {1..n} via restricted growth strings."""
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i, m):
        if i == n:
            blocks = [[] for _ in range(m + 1)]
            for v, lbl in enumerate(a, start=1):
                blocks[lbl].append(v)
            yield tuple(tuple(b) for b in blocks)
            return
        for lbl in range(m + 2):
            a[i] = lbl
            yield from rec(i + 1, max(m, lbl))

    a[0] = 0
    yield from rec(1, 0)


def enumerate_partitions(n: int) -> list:
    if n < 1:
        raise ParameterError("n must be >= 1")
    if n > MAX_ENUMERATE:
        raise CapacityError(f"partition enumeration limited to n <= {MAX_ENUMERATE}")
    return [GoldstoneDiagram(p) for p in _restricted_growth(n)]


def occupation(d: GoldstoneDiagram) -> OccupationSequence:
    sizes = Counter(len(b) for b in d.partition)
    top = max(sizes) if sizes else 0
    return OccupationSequence(tuple(sizes.get(j, 0) for j in range(1, top + 1)))


def occupation_sequences(E: int) -> list:
    """All occupation sequences with E(n) = E (integer partitions of E)."""
    out = []

    def rec(remaining, largest, parts):
        if remaining == 0:
            c = Counter(parts)
            out.append(OccupationSequence(tuple(c.get(j, 0) for j in range(1, max(c, default=0) + 1))))
            return
        for j in range(min(remaining, largest), 0, -1):
            rec(remaining - j, j, parts + [j])

    rec(E, E, [])
    return out


def enumerate_pairings(alpha: Sequence[int], beta: Sequence[int]) -> list:
    alpha, beta = tuple(alpha), tuple(beta)
    if len(alpha) != len(beta):
        raise ParameterError("alpha and beta must have equal length")
    if len(alpha) > MAX_PAIRING:
        raise CapacityError(f"pairing enumeration limited to n <= {MAX_PAIRING}")
    P = [i + 1 for i, a in enumerate(alpha) if a]
    Q = [i + 1 for i, b in enumerate(beta) if b]
    if len(P) != len(Q):
        return []
    out = []

    def rec(k, used, J):
        if k == len(P):
            out.append(WickPairing(alpha, beta, dict(J)))
            return
        i = P[k]
        for q in Q:
            if q > i and q not in used:
                used.add(q)
                J[i] = q
                rec(k + 1, used, J)
                del J[i]
                used.discard(q)

    rec(0, set(), {})
    return out


def _check_times(times, n):
    s = np.asarray(times, dtype=float)
    if s.shape != (n,):
        raise ParameterError(f"expected {n} times, got {s.shape}")
    if np.any(np.diff(s) <= 0):
        raise ParameterError("times must be strictly increasing")
    return s


def wick_vacuum_moment(alpha, beta, times, K: OUKernel) -> float:
    """sum over increasing pairings J of prod_i G(s_J(i) - s_i)."""
    s = _check_times(times, len(alpha))
    total = 0.0
    for p in enumerate_pairings(alpha, beta):
        total += math.prod(K(s[j - 1] - s[i - 1]) for i, j in p.arcs())
    return total


def normal_order_oracle(alpha, beta, times, K: OUKernel) -> float:
    """Vacuum moment by commuting annihilators to the right.

    The operator word is ``X_n ... X_1`` with ``X_i = (a^dag_{s_i})^alpha_i (a_{s_i})^beta_i``;
    each step moves the rightmost annihilator past the creators to its right,
    picking up the scalar commutator ``G(s - s')`` for each.
    """
    n = len(alpha)
    if len(beta) != n:
        raise ParameterError("alpha and beta must have equal length")
    if n > MAX_ORACLE:
        raise CapacityError(f"normal-order oracle limited to n <= {MAX_ORACLE}")
    s = _check_times(times, n)
    word = []  # left to right: (is_creator, time)
    for i in range(n - 1, -1, -1):
        if alpha[i]:
            word.append((True, s[i]))
        if beta[i]:
            word.append((False, s[i]))

    def expect(w: tuple) -> float:
        if not w:
            return 1.0
        ann = [k for k, (cr, _) in enumerate(w) if not cr]
        if not ann:
            return 0.0
        k = ann[-1]
        total = 0.0
        for j in range(k + 1, len(w)):
            rest = w[:k] + w[k + 1 : j] + w[j + 1 :]
            total += K(w[k][1] - w[j][1]) * expect(rest)
        return total

    return expect(tuple(word))


# ---------------------------------------------------------------------------
# exact simplex integrals


def _gap_counts(arcs, n: int) -> list:
    c = [0] * (n + 1)  # gaps 1..n+1 -> indices 0..n
    for i, j in arcs:
        for k in range(i, j):
            c[k] += 1
    return c


def _convolve_exponentials(rates: Sequence[int], lam: float, x: float) -> float:
    """(e^{-r_1 lam .} * ... * e^{-r_k lam .})(x) for integer rates r_i >= 0."""
    F = {rates[0]: Polynomial([1.0])}
    for a in rates[1:]:
        G: dict = {}
        for m, p in F.items():
            if m == a:
                G[a] = G.get(a, Polynomial([0.0])) + p.integ()
                continue
            mu = (m - a) * lam
            S = sum((p.deriv(k) / mu ** (k + 1) for k in range(1, p.degree() + 1)), p / mu)
            # int_0^x p(y) e^{-mu y} dy = S(0) - S(x) e^{-mu x}
            G[a] = G.get(a, Polynomial([0.0])) + Polynomial([S(0.0)])
            G[m] = G.get(m, Polynomial([0.0])) - S
        F = G
    return float(sum(p(x) * math.exp(-m * lam * x) for m, p in sorted(F.items())))


def _arcs_of(d) -> tuple:
    if isinstance(d, (GoldstoneDiagram, WickPairing)):
        return d.n, d.arcs()
    raise ParameterError("expected a GoldstoneDiagram or WickPairing")


def simplex_integral(d, t: float, K: OUKernel) -> float:
    """int over 0 <= s_1 <= ... <= s_n <= t of prod_{(i,j)} G(s_j - s_i)."""
    n, arcs = _arcs_of(d)
    if n > MAX_INTEGRATE:
        raise CapacityError(f"simplex integrals limited to n <= {MAX_INTEGRATE}")
    if t < 0:
        raise ParameterError("t must be >= 0")
    if t == 0:
        return 0.0
    rates = _gap_counts(arcs, n)
    return K.peak ** len(arcs) * _convolve_exponentials(rates, K.rate, t)


def simplex_integral_by_quadrature(d, t: float, K: OUKernel) -> float:
    """Nested adaptive quadrature; an oracle for small n only."""
    n, arcs = _arcs_of(d)
    if n > 3:
        raise CapacityError("quadrature oracle limited to n <= 3")

    def integrand(*s):
        return math.prod(K(s[j - 1] - s[i - 1]) for i, j in arcs)

    # nquad passes s_1 (innermost) first; s_k ranges over [0, s_{k+1}]
    def bounds(k):
        def b(*outer):
            return (0.0, outer[0] if outer else t)

        return b

    val, _ = integrate.nquad(
        integrand, [bounds(k) for k in range(n)], opts={"epsabs": 1e-13, "epsrel": 1e-12, "limit": 200}
    )
    return float(val)


def time_consecutive_target(r: Sequence[int], t: float) -> float:
    n, m = sum(r), len(r)
    return t**m / (2 ** (n - m) * math.factorial(m))


@dataclass(frozen=True)
class LimitLawReport:
    diagram: GoldstoneDiagram
    epsilons: tuple
    values: tuple
    target: float
    rel_errors: tuple
    monotone: bool
    final_rel_error: float
    passed: bool


def time_consecutive_limit_check(
    r: Sequence[int], t: float, epsilons: Sequence[float], gamma: float = 2.0, tol: float = 0.01
) -> LimitLawReport:
    d = GoldstoneDiagram.from_sizes(r)
    if d.n > MAX_INTEGRATE:
        raise CapacityError(f"sum(r) limited to {MAX_INTEGRATE}")
    target = time_consecutive_target(r, t)
    values = tuple(simplex_integral(d, t, OUKernel(gamma, e)) for e in epsilons)
    errs = tuple(abs(v - target) / abs(target) for v in values)
    mono = all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))
    return LimitLawReport(d, tuple(epsilons), values, target, errs, mono, errs[-1], mono and errs[-1] < tol)


@dataclass(frozen=True)
class VanishingReport:
    diagram: GoldstoneDiagram
    epsilons: tuple
    values: tuple
    ratio: float
    passed: bool


def vanishing_check(
    d: GoldstoneDiagram, t: float, epsilons: Sequence[float], gamma: float = 2.0, threshold: float = 0.05
) -> VanishingReport:
    """Value at the last epsilon relative to the first; non-time-consecutive diagrams must fall below ``threshold``."""
    values = tuple(simplex_integral(d, t, OUKernel(gamma, e)) for e in epsilons)
    ratio = values[-1] / values[0]
    return VanishingReport(d, tuple(epsilons), values, ratio, ratio < threshold)


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class PuleResult:
    lhs: float
    rhs: float
    holds: bool


def partitions_with_occupation(n_seq: OccupationSequence) -> list:
    return [d for d in enumerate_partitions(n_seq.E) if occupation(d) == n_seq]


def pule_check(n_seq: OccupationSequence, t: float, K: OUKernel) -> PuleResult:
    if n_seq.E > 5:
        raise CapacityError("Pule check limited to E(n) <= 5")
    if n_seq.E == 0:
        return PuleResult(1.0, 1.0, True)
    lhs = 0.0
    for d in partitions_with_occupation(n_seq):
        lhs += simplex_integral(d, t, K)
    rhs = t**n_seq.N / (n_seq.factorial_product() * 2.0 ** (n_seq.E - n_seq.N))
    return PuleResult(lhs, rhs, lhs <= rhs + 1e-12)


@dataclass(frozen=True)
class BoundParameters:
    C: float
    C11: float
    t: float

    def __post_init__(self):
        if self.C < 0 or self.C11 < 0 or self.t < 0:
            raise ParameterError("C, C11 and t must be nonnegative")

    @property
    def A(self) -> float:
        return math.log(self.C11 / 2.0) if self.C11 > 0 else -math.inf

    @property
    def B(self) -> float:
        b = math.log(max(self.t, 1.0)) + math.log(max(self.C**2, 1.0)) + math.log(2.0)
        if self.C11 > 0:
            b += math.log(max(self.C11**-2, 1.0))
        return b


@dataclass(frozen=True)
class OmegaSeries:
    per_n: tuple  # Omega(0), ..., Omega(cutoff)
    total: float
    closed_form: float


def omega_series(p: BoundParameters, cutoff: int = 12) -> OmegaSeries:
    """Uniform bound Omega(n) = sum_{E(n)=n} e^{A E + B N} / prod n_j!, and its summed closed form.

    With C11 = 0 only singleton components are kept, giving a single
    exponential factor ``exp(e^B)``.
    """
    if p.C11 >= 2:
        raise DivergenceError(f"C11/2 = {p.C11 / 2:g} >= 1: series does not converge")
    if cutoff < 0:
        raise ParameterError("cutoff must be >= 0")
    A, B = p.A, p.B
    per_n = []
    if p.C11 == 0:
        for n in range(cutoff + 1):
            per_n.append(math.exp(B * n) / math.factorial(n))
        closed = math.exp(math.exp(B))
    else:
        for n in range(cutoff + 1):
            if n == 0:
                per_n.append(1.0)
                continue
            per_n.append(
                sum(math.exp(A * s.E + B * s.N) / s.factorial_product() for s in occupation_sequences(n))
            )
        closed = math.exp(math.exp(A + B) / (1.0 - math.exp(A)))
    return OmegaSeries(tuple(per_n), math.fsum(per_n), closed)


# ---------------------------------------------------------------------------
# double diagrams (s-block / t-block)


@dataclass(frozen=True)
class DoubleDiagram:
    r: tuple
    l: tuple
    kappa: tuple
    lam: tuple

    def __post_init__(self):
        if len(self.kappa) != len(self.r) or len(self.lam) != len(self.l):
            raise ParameterError("kappa/lambda lengths must match r/l")
        if sum(self.kappa) != sum(self.lam):
            raise ParameterError("sum(kappa) must equal sum(lambda)")

    @property
    def kappa_index(self) -> tuple:
        return tuple(i for i, k in enumerate(self.kappa, start=1) if k)

    @property
    def lambda_index(self) -> tuple:
        return tuple(i for i, k in enumerate(self.lam, start=1) if k)

    def cross_contractions(self) -> tuple:
        """(s-component, t-component) pairs, matched inside out."""
        return tuple(zip(self.kappa_index, self.lambda_index))


def compositions(n: int):
    if n == 0:
        yield ()
        return
    for cuts in itertools.product((0, 1), repeat=n - 1):
        parts, size = [], 1
        for c in cuts:
            if c:
                parts.append(size)
                size = 1
            else:
                size += 1
        parts.append(size)
        yield tuple(parts)


def _marks(r, l):
    for kappa in itertools.product((0, 1), repeat=len(r)):
        for lam in itertools.product((0, 1), repeat=len(l)):
            if sum(kappa) == sum(lam):
                yield DoubleDiagram(tuple(r), tuple(l), kappa, lam)


def enumerate_double_diagrams(n: int, m: int, r: Sequence[int] | None = None, l: Sequence[int] | None = None) -> list:
    """All (r, l, kappa, lambda) with sum r = n, sum l = m.

    Passing explicit ``r`` and ``l`` restricts to those component sizes and
    lifts the size cap, since only the marks are enumerated.
    """
    if n < 0 or m < 0:
        raise ParameterError("n and m must be >= 0")
    if r is not None and l is not None:
        if sum(r) != n or sum(l) != m or any(x < 1 for x in (*r, *l)):
            raise ParameterError("r and l must be positive compositions of n and m")
        return list(_marks(tuple(r), tuple(l)))
    if n + m > MAX_DOUBLE:
        raise CapacityError(f"double-diagram enumeration limited to n + m <= {MAX_DOUBLE}")
    out = []
    for rr in compositions(n):
        for ll in compositions(m):
            out.extend(_marks(rr, ll))
    return out


def bell(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]
