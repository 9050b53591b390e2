"""Effectivity invariants of an ideal at the origin.

* local colength ``s``: dimension of the local quotient ring, read off the
  sequence ``d_K = dim Q[z]/(I + m^K)`` which climbs to ``s`` and stalls
  exactly when it gets there;
* ``q``: the least power of the maximal ideal inside ``I``;
* ``p``: the Łojasiewicz exponent, exact for monomial ideals via the Newton
  polyhedron, otherwise bracketed by ``ceil(q/(n+2)) <= p <= q``.

Germ membership is also here: once ``m^q`` is known to lie in ``I``
locally, ``I + m^q`` is a globally m-primary ideal with the same germ, and
ordinary membership in it decides membership of germs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from gmpy2 import mpq

from .groebner import DEFAULT_BUDGET, Budget, GroebnerBasis, Ideal, minimal_power_in, normal_form
from .poly import GREVLEX, Polynomial

__all__ = [
    "NotCertifiedFinite",
    "DimensionTooLarge",
    "ColengthResult",
    "InvariantReport",
    "monomials_of_degree",
    "colength_sequence",
    "colength_at_origin",
    "germ_basis",
    "germ_member",
    "germ_minimal_power",
    "min_q_with_power_contained",
    "in_newton_polyhedron",
    "lojasiewicz_p_monomial",
    "invariant_report",
]

MAX_DIMENSION = 4
DEFAULT_CEILING = 400


class NotCertifiedFinite(ValueError):
    """The colength sequence passed its ceiling without stabilizing."""


class DimensionTooLarge(ValueError):
    pass


def _guard(n: int, max_dimension: int = MAX_DIMENSION):
    if n > max_dimension:
        raise DimensionTooLarge(f"n={n} exceeds the configured maximum {max_dimension}")


def monomials_of_degree(n: int, d: int):
    """All exponent tuples of total degree ``d`` in ``n`` variables."""
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in monomials_of_degree(n - 1, d - first):
            yield (first,) + rest


def _power_of_max_ideal(n: int, k: int) -> List[Polynomial]:
    return [Polynomial.monomial(m) for m in monomials_of_degree(n, k)]


def _count_standard(gb: GroebnerBasis, n: int, below: int) -> int:
    lms = gb.leading_monomials()
    count = 0
    for d in range(below):
        for m in monomials_of_degree(n, d):
            if not any(all(a <= b for a, b in zip(lm, m)) for lm in lms):
                count += 1
    return count


@dataclass
class ColengthResult:
    colength: int
    q_local: int  # least K with m^K inside the germ of I
    sequence: List[int]  # d_1, d_2, ..., ending with the repeated value
    basis: GroebnerBasis  # reduced basis of I + m^q_local


def colength_sequence(
    I: Ideal,
    ceiling: int = DEFAULT_CEILING,
    budget: Budget = DEFAULT_BUDGET,
    max_dimension: int = MAX_DIMENSION,
) -> ColengthResult:
    n = I.n
    _guard(n, max_dimension)
    gens = [g for g in I.generators if not g.is_zero()]
    seq: List[int] = []
    bases: List[GroebnerBasis] = []
    k = 1
    while True:
        J = Ideal(gens + _power_of_max_ideal(n, k), n)
        gb = J.groebner(GREVLEX, budget)
        d = 0 if gb.is_unit() else _count_standard(gb, n, k)
        if seq and d < seq[-1]:
            raise AssertionError("colength sequence decreased; engine bug")
        seq.append(d)
        bases.append(gb)
        if len(seq) >= 2 and seq[-1] == seq[-2]:
            return ColengthResult(seq[-1], k - 1, seq, bases[-2])
        if d == 0:
            # unit ideal at the origin: m^0 = (1) already inside
            return ColengthResult(0, 0, seq, gb)
        if d > ceiling:
            raise NotCertifiedFinite(
                f"colength sequence reached {d} > ceiling {ceiling} without stabilizing"
            )
        k += 1


def colength_at_origin(I: Ideal, ceiling: int = DEFAULT_CEILING, budget: Budget = DEFAULT_BUDGET) -> int:
    """Local colength ``dim O_0 / I O_0``; raises ``NotCertifiedFinite``."""
    return colength_sequence(I, ceiling, budget).colength


def germ_basis(I: Ideal, ceiling: int = DEFAULT_CEILING, budget: Budget = DEFAULT_BUDGET) -> GroebnerBasis:
    """Reduced basis of a globally m-primary ideal with the same germ as ``I``."""
    return colength_sequence(I, ceiling, budget).basis


def germ_member(f: Polynomial, I: Ideal, ceiling: int = DEFAULT_CEILING, budget: Budget = DEFAULT_BUDGET) -> bool:
    return normal_form(f, germ_basis(I, ceiling, budget)).is_zero()


def germ_minimal_power(
    f: Polynomial, I: Ideal, bound: Optional[int] = None,
    ceiling: int = DEFAULT_CEILING, budget: Budget = DEFAULT_BUDGET,
) -> Optional[int]:
    """Least ``sigma`` with ``f**sigma`` in the germ of ``I``.

    The default bound is ``m**2`` for the local colength ``m``, which always
    suffices when ``f`` vanishes at the origin.
    """
    res = colength_sequence(I, ceiling, budget)
    if bound is None:
        bound = max(1, res.colength**2)
    return minimal_power_in(f, Ideal(res.basis.basis), bound, budget)


def min_q_with_power_contained(I: Ideal, bound: int, budget: Budget = DEFAULT_BUDGET) -> Optional[int]:
    """Least ``q <= bound`` with every degree-``q`` monomial in ``I`` (global membership)."""
    if bound < 1:
        raise ValueError("bound must be at least 1")
    gb = I.groebner(GREVLEX, budget)
    if gb.is_unit():
        return 1
    for q in range(1, bound + 1):
        if all(normal_form(Polynomial.monomial(m), gb).is_zero() for m in monomials_of_degree(I.n, q)):
            return q
    return None


# ---------------------------------------------------------------------------
# Newton polyhedron membership by exact phase-one simplex


def _phase_one_feasible(A: List[List[mpq]], b: List[mpq]) -> bool:
    """Is ``{x >= 0 : A x = b}`` nonempty?  Requires ``b >= 0``; Bland's rule."""
    rows, cols = len(A), len(A[0])
    # tableau columns: original | artificial | rhs
    T = [
        [mpq(v) for v in A[r]] + [mpq(1) if r == k else mpq(0) for k in range(rows)] + [mpq(b[r])]
        for r in range(rows)
    ]
    basis = [cols + r for r in range(rows)]
    width = cols + rows
    # objective: minimize sum of artificials -> reduced costs
    cost = [mpq(0)] * (width + 1)
    for r in range(rows):
        for j in range(width + 1):
            cost[j] -= T[r][j]
    for r in range(rows):
        cost[cols + r] += 1
    while True:
        enter = next((j for j in range(width) if cost[j] < 0), None)
        if enter is None:
            break
        best = None
        for r in range(rows):
            if T[r][enter] > 0:
                ratio = T[r][-1] / T[r][enter]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                    best = (ratio, r)
        if best is None:
            break  # unbounded cannot happen in phase one
        r = best[1]
        piv = T[r][enter]
        T[r] = [v / piv for v in T[r]]
        for k in range(rows):
            if k != r and T[k][enter]:
                f = T[k][enter]
                T[k] = [a - f * c for a, c in zip(T[k], T[r])]
        if cost[enter]:
            f = cost[enter]
            cost = [a - f * c for a, c in zip(cost, T[r])]
        basis[r] = enter
    return -cost[-1] == 0


def in_newton_polyhedron(alpha: Sequence[int], exponents: Sequence[Sequence[int]]) -> bool:
    """``alpha`` in conv(exponents) + R_{>=0}^n, decided exactly."""
    n = len(alpha)
    m = len(exponents)
    if any(all(g[i] <= alpha[i] for i in range(n)) for g in exponents):
        return True
    # unknowns: weights w_1..w_m, slacks s_1..s_n
    A = []
    for i in range(n):
        A.append([mpq(g[i]) for g in exponents] + [mpq(1) if k == i else mpq(0) for k in range(n)])
    A.append([mpq(1)] * m + [mpq(0)] * n)
    b = [mpq(a) for a in alpha] + [mpq(1)]
    return _phase_one_feasible(A, b)


def lojasiewicz_p_monomial(I: Ideal, max_p: int = 200) -> int:
    """Least ``p`` with every degree-``p`` exponent in the Newton polyhedron."""
    exps = []
    for g in I.generators:
        if g.is_zero():
            continue
        if not g.is_monomial():
            raise ValueError(f"not a monomial generator: {g}")
        exps.append(next(iter(g.terms)))
    n = I.n
    for i in range(n):
        if not any(all(e[k] == 0 for k in range(n) if k != i) for e in exps):
            raise NotCertifiedFinite(f"no pure power of z{i + 1} among generators; colength infinite")
    for p in range(1, max_p + 1):
        if all(in_newton_polyhedron(a, exps) for a in monomials_of_degree(n, p)):
            return p
    raise NotCertifiedFinite(f"p exceeds {max_p}")


# ---------------------------------------------------------------------------
# report


@dataclass
class InvariantReport:
    n: int
    colength_s: int
    q_power: int
    p_exponent: Union[int, Tuple[int, int]]
    p_exact: bool
    colength_sequence: List[int]
    checks: dict = field(default_factory=dict)

    @property
    def dangelo_type(self) -> Union[int, Tuple[int, int]]:
        if self.p_exact:
            return 2 * self.p_exponent
        lo, hi = self.p_exponent
        return (2 * lo, 2 * hi)

    def to_json(self) -> dict:
        p = self.p_exponent if self.p_exact else list(self.p_exponent)
        t = self.dangelo_type if self.p_exact else list(self.dangelo_type)
        return {
            "n": self.n,
            "s": self.colength_s,
            "q": self.q_power,
            "p": p,
            "p_exact": self.p_exact,
            "type": t,
            "colength_sequence": self.colength_sequence,
            "checks": self.checks,
        }


def invariant_report(
    generators: Sequence[Polynomial],
    ceiling: int = DEFAULT_CEILING,
    budget: Budget = DEFAULT_BUDGET,
    max_dimension: int = MAX_DIMENSION,
) -> InvariantReport:
    """Assemble ``s``, ``q``, ``p`` and the type, asserting the comparison inequalities."""
    I = Ideal(generators)
    n = I.n
    res = colength_sequence(I, ceiling, budget, max_dimension)
    s = res.colength
    # germ q from the stall index; the global test agrees whenever the zero set is just the origin
    q = max(1, res.q_local)
    if all(g.is_monomial() or g.is_zero() for g in I.generators):
        p: Union[int, Tuple[int, int]] = lojasiewicz_p_monomial(I)
        exact = True
        p_vs_q = p <= q <= (n + 2) * p
    else:
        p = (-(-q // (n + 2)), q)
        exact = False
        p_vs_q = p[0] <= q <= (n + 2) * p[0] and p[0] <= p[1]
    bound = math.comb(n + q - 1, q - 1)
    checks = {
        "p_le_q_le_(n+2)p": p_vs_q,
        "q_le_s": q <= s,
        "s_le_binomial": s <= bound,
    }
    if not all(checks.values()):
        raise AssertionError(f"comparison inequality violated: {checks}; engine bug")
    checks["binomial"] = bound
    return InvariantReport(n, s, q, p, exact, res.sequence, checks)
