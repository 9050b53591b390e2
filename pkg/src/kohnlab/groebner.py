"""Buchberger's algorithm and the ideal-theoretic decision procedures.

Pairs are processed by the sugar strategy, with Buchberger's coprime
criterion and the chain criterion pruning useless S-pairs.  Every basis the
engine hands out is the reduced (monic, interreduced) Gröbner basis, so for
a fixed generator list and order the result is deterministic.

Membership here is global (in the polynomial ring).  Membership in the ring
of germs at the origin is in ``kohnlab.invariants``.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from gmpy2 import mpq

from .poly import GREVLEX, Exponent, MonomialOrder, Polynomial, block_order

__all__ = [
    "Budget",
    "ResourceLimitExceeded",
    "GroebnerBasis",
    "Ideal",
    "groebner",
    "normal_form",
    "ideal_member",
    "elimination_ideal",
    "radical_member",
    "minimal_power_in",
    "s_polynomial",
    "is_groebner",
]


class ResourceLimitExceeded(RuntimeError):
    """A configured S-pair or degree budget ran out before completion."""


@dataclass(frozen=True)
class Budget:
    max_pairs: int = 200_000
    max_degree: int = 400


DEFAULT_BUDGET = Budget()


# ---------------------------------------------------------------------------
# low-level reduction on term dicts


def _divides(a: Exponent, b: Exponent) -> bool:
    return all(x <= y for x, y in zip(a, b))


class _Reducer:
    """A list of monic reducers ``(lm, tail)`` with ``tail`` as a term list."""

    def __init__(self, order: MonomialOrder):
        self.order = order
        self.items: List[Tuple[Exponent, List[Tuple[Exponent, mpq]]]] = []

    def add(self, terms: Dict[Exponent, mpq], lm: Exponent):
        self.items.append((lm, [(m, c) for m, c in terms.items() if m != lm]))

    def find(self, m: Exponent):
        for lm, tail in self.items:
            if _divides(lm, m):
                return lm, tail
        return None

    def reduce(self, terms: Dict[Exponent, mpq], full: bool = True) -> Dict[Exponent, mpq]:
        """Normal form of ``terms`` (consumed).  ``full=False`` stops at the head."""
        hk = self.order.heap_key
        p = terms
        heap = [(hk(m), m) for m in p]
        heapq.heapify(heap)
        rem: Dict[Exponent, mpq] = {}
        while heap:
            _, m = heapq.heappop(heap)
            c = p.get(m)
            if c is None:
                continue
            hit = self.find(m)
            if hit is None:
                rem[m] = c
                del p[m]
                if not full:
                    rem.update(p)
                    return rem
                continue
            lm, tail = hit
            del p[m]
            shift = tuple(a - b for a, b in zip(m, lm))
            for tm, tc in tail:
                t = tuple(a + b for a, b in zip(tm, shift))
                v = p.get(t)
                if v is None:
                    p[t] = -c * tc
                    heapq.heappush(heap, (hk(t), t))
                else:
                    v = v - c * tc
                    if v:
                        p[t] = v
                    else:
                        del p[t]
        return rem


def _monic(terms: Dict[Exponent, mpq], order: MonomialOrder):
    lm = max(terms, key=order.key)
    inv = 1 / terms[lm]
    if inv == 1:
        return terms, lm
    return {m: c * inv for m, c in terms.items()}, lm


def _lcm(a: Exponent, b: Exponent) -> Exponent:
    return tuple(max(x, y) for x, y in zip(a, b))


def _spoly_terms(f, lf, g, lg, lcm):
    sf = tuple(x - y for x, y in zip(lcm, lf))
    sg = tuple(x - y for x, y in zip(lcm, lg))
    out: Dict[Exponent, mpq] = {}
    for m, c in f.items():
        out[tuple(a + b for a, b in zip(m, sf))] = c
    for m, c in g.items():
        t = tuple(a + b for a, b in zip(m, sg))
        v = out.get(t, 0) - c
        if v:
            out[t] = v
        else:
            out.pop(t, None)
    return out


def _buchberger(
    gens: Sequence[Polynomial], order: MonomialOrder, budget: Budget
) -> List[Polynomial]:
    n = gens[0].n
    key = order.key
    basis: List[Dict[Exponent, mpq]] = []
    lms: List[Exponent] = []
    sugar: List[int] = []
    reducer = _Reducer(order)
    pairs: list = []
    pending = set()
    counter = itertools.count()

    def push_pair(i, j):
        lcm = _lcm(lms[i], lms[j])
        s = max(
            sugar[i] + sum(lcm) - sum(lms[i]),
            sugar[j] + sum(lcm) - sum(lms[j]),
        )
        heapq.heappush(pairs, (s, key(lcm), next(counter), i, j))
        pending.add((i, j))

    def add(terms: Dict[Exponent, mpq], s: int):
        terms, lm = _monic(terms, order)
        deg = max(sum(m) for m in terms)
        if deg > budget.max_degree:
            raise ResourceLimitExceeded(
                f"intermediate degree {deg} exceeds budget {budget.max_degree}"
            )
        k = len(basis)
        basis.append(terms)
        lms.append(lm)
        sugar.append(s)
        reducer.add(terms, lm)
        if all(e == 0 for e in lm):
            return True
        for i in range(k):
            push_pair(i, k)
        return False

    # interreduce the input a little: reduce each generator by earlier ones
    seeds = sorted(
        (dict(g.terms) for g in gens if g.terms),
        key=lambda t: key(max(t, key=key)),
    )
    for t in seeds:
        s = max(sum(m) for m in t)
        r = reducer.reduce(dict(t))
        if r and add(r, s):
            return [Polynomial.constant(n, 1)]

    processed = 0
    while pairs:
        s, _, _, i, j = heapq.heappop(pairs)
        pending.discard((i, j))
        li, lj = lms[i], lms[j]
        lcm = _lcm(li, lj)
        # coprime leading monomials
        if all(a == 0 or b == 0 for a, b in zip(li, lj)):
            continue
        # chain criterion
        chain = False
        for k in range(len(basis)):
            if k in (i, j) or not _divides(lms[k], lcm):
                continue
            if (min(i, k), max(i, k)) not in pending and (min(j, k), max(j, k)) not in pending:
                chain = True
                break
        if chain:
            continue
        processed += 1
        if processed > budget.max_pairs:
            raise ResourceLimitExceeded(f"S-pair budget {budget.max_pairs} exhausted")
        sp = _spoly_terms(basis[i], li, basis[j], lj, lcm)
        if not sp:
            continue
        r = reducer.reduce(sp)
        if r and add(r, s):
            return [Polynomial.constant(n, 1)]

    return _reduce_basis(basis, lms, order, n)


def _reduce_basis(basis, lms, order, n) -> List[Polynomial]:
    key = order.key
    idx = sorted(range(len(basis)), key=lambda i: key(lms[i]))
    minimal = []
    for i in idx:
        if any(_divides(lms[j], lms[i]) for j in minimal):
            continue
        # drop earlier (smaller) elements whose lm is divisible by this one
        minimal = [j for j in minimal if not _divides(lms[i], lms[j])]
        minimal.append(i)
    out = []
    for i in minimal:
        red = _Reducer(order)
        for j in minimal:
            if j != i:
                red.add(basis[j], lms[j])
        lm = lms[i]
        tail = {m: c for m, c in basis[i].items() if m != lm}
        tail = red.reduce(tail)
        tail[lm] = basis[i][lm]
        out.append(Polynomial._raw(n, tail))
    out.sort(key=lambda p: key(p.leading_monomial(order)), reverse=True)
    return out


# ---------------------------------------------------------------------------
# public types


@dataclass(frozen=True)
class GroebnerBasis:
    order: MonomialOrder
    basis: Tuple[Polynomial, ...]
    reduced: bool = True

    @property
    def n(self) -> int:
        return self.basis[0].n

    def is_unit(self) -> bool:
        return len(self.basis) == 1 and self.basis[0].is_constant() and not self.basis[0].is_zero()

    def leading_monomials(self) -> List[Exponent]:
        return [g.leading_monomial(self.order) for g in self.basis if g.terms]

    def normal_form(self, f: Polynomial) -> Polynomial:
        return normal_form(f, self)

    def contains(self, f: Polynomial) -> bool:
        return normal_form(f, self).is_zero()


class Ideal:
    """Generators plus a per-order cache of reduced Gröbner bases."""

    def __init__(self, generators: Sequence[Polynomial], n: Optional[int] = None):
        gens = list(generators)
        if not gens:
            if n is None:
                raise ValueError("empty generator list needs an explicit dimension")
            gens = [Polynomial.zero(n)]
        dims = {g.n for g in gens}
        if len(dims) != 1 or (n is not None and dims != {n}):
            raise ValueError("generators live in different dimensions")
        self.n = gens[0].n
        self.generators: Tuple[Polynomial, ...] = tuple(gens)
        self._cache: Dict[MonomialOrder, GroebnerBasis] = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"Ideal({[str(g) for g in self.generators]}, n={self.n})"

    def is_zero_ideal(self) -> bool:
        return all(g.is_zero() for g in self.generators)

    def groebner(self, order: MonomialOrder = GREVLEX, budget: Budget = DEFAULT_BUDGET) -> GroebnerBasis:
        hit = self._cache.get(order)
        if hit is not None:
            return hit
        if self.is_zero_ideal():
            gb = GroebnerBasis(order, (Polynomial.zero(self.n),))
        else:
            gb = GroebnerBasis(order, tuple(_buchberger(self.generators, order, budget)))
        with self._lock:
            return self._cache.setdefault(order, gb)

    def __add__(self, other: "Ideal") -> "Ideal":
        gens = [g for g in self.generators + other.generators if not g.is_zero()]
        return Ideal(gens, self.n)

    def with_generators(self, extra: Sequence[Polynomial]) -> "Ideal":
        return Ideal([g for g in self.generators if not g.is_zero()] + list(extra), self.n)


def groebner(I: Ideal, order: MonomialOrder = GREVLEX, budget: Budget = DEFAULT_BUDGET) -> GroebnerBasis:
    return I.groebner(order, budget)


def normal_form(f: Polynomial, G: GroebnerBasis) -> Polynomial:
    if f.n != G.n:
        raise ValueError(f"dimension mismatch: {f.n} vs {G.n}")
    red = _Reducer(G.order)
    for g in G.basis:
        if g.terms:
            red.add(g.terms, g.leading_monomial(G.order))
    return Polynomial._raw(f.n, red.reduce(dict(f.terms)))


def ideal_member(f: Polynomial, I: Ideal, budget: Budget = DEFAULT_BUDGET) -> bool:
    return normal_form(f, I.groebner(GREVLEX, budget)).is_zero()


def elimination_ideal(I: Ideal, keep: Sequence[int], budget: Budget = DEFAULT_BUDGET) -> Ideal:
    """``I`` intersected with the subring in the ``keep`` variables.

    The generators stay in the ambient ring (they simply do not involve the
    eliminated variables).
    """
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must be nonempty")
    elim = [i for i in range(I.n) if i not in keep]
    if not elim:
        return Ideal(I.generators, I.n)
    gb = I.groebner(block_order(elim), budget)
    out = [g for g in gb.basis if g.terms and not (g.variables() & set(elim))]
    return Ideal(out, I.n)


def radical_member(f: Polynomial, I: Ideal, budget: Budget = DEFAULT_BUDGET) -> bool:
    """Rabinowitsch: ``f`` is in the radical iff ``1 in I + (1 - t f)``."""
    n = I.n
    lift = list(range(n))
    t = Polynomial.variable(n + 1, n)
    gens = [g.extend(n + 1, lift) for g in I.generators if not g.is_zero()]
    gens.append(Polynomial.constant(n + 1, 1) - t * f.extend(n + 1, lift))
    return Ideal(gens).groebner(GREVLEX, budget).is_unit()


def minimal_power_in(f: Polynomial, I: Ideal, bound: int, budget: Budget = DEFAULT_BUDGET) -> Optional[int]:
    """Least ``1 <= sigma <= bound`` with ``f**sigma`` in ``I``, else ``None``."""
    if bound < 1:
        raise ValueError("bound must be at least 1")
    gb = I.groebner(GREVLEX, budget)
    r = normal_form(f, gb)
    for sigma in range(1, bound + 1):
        if r.is_zero():
            return sigma
        if sigma < bound:
            r = normal_form(r * f, gb)
    return None


def s_polynomial(f: Polynomial, g: Polynomial, order: MonomialOrder = GREVLEX) -> Polynomial:
    lf, lg = f.leading_monomial(order), g.leading_monomial(order)
    fm = f * (1 / f.terms[lf])
    gm = g * (1 / g.terms[lg])
    return Polynomial._raw(f.n, _spoly_terms(fm.terms, lf, gm.terms, lg, _lcm(lf, lg)))


def is_groebner(G: GroebnerBasis) -> bool:
    """Buchberger's criterion checked pair by pair, with no pruning."""
    polys = [g for g in G.basis if g.terms]
    for a, b in itertools.combinations(polys, 2):
        if not normal_form(s_polynomial(a, b, G.order), G).is_zero():
            return False
    return True
