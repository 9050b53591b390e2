"""Exact sparse multivariate polynomials over the rationals.

A polynomial in ``n`` variables is a map from exponent tuples to nonzero
``gmpy2.mpq`` coefficients.  Variables are positional (index ``0 .. n-1``);
names only matter for parsing and printing, where the default names are
``z1 .. zn``.

Example::

    >>> f = parse("z1^2 + z2^3", 2)
    >>> f.terms == {(2, 0): 1, (0, 3): 1}
    True
    >>> str(partial_derivative(f, 1))
    '3*z2^2'
"""

from __future__ import annotations

import heapq

import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

from gmpy2 import mpq

Exponent = Tuple[int, ...]
Coefficient = Union[int, mpq]

__all__ = [
    "Exponent",
    "MonomialOrder",
    "GREVLEX",
    "LEX",
    "ParseError",
    "Polynomial",
    "block_order",
    "default_names",
    "parse",
    "to_string",
    "partial_derivative",
    "jacobian_determinant",
    "minor_jacobian",
    "determinant",
    "ord_at_origin",
    "gcd",
    "squarefree_part",
    "exact_divide",
    "substitute",
    "normalize",
    "as_rational",
]


def as_rational(value) -> mpq:
    """Coerce ints, strings like ``"3/4"``, Fractions or mpq into an mpq."""
    if isinstance(value, str):
        return mpq(value.strip())
    return mpq(value)


# ---------------------------------------------------------------------------
# monomial orders


@dataclass(frozen=True)
class MonomialOrder:
    """A monomial order.

    ``kind`` is ``"grevlex"``, ``"lex"`` or ``"block"``.  A block order
    compares the ``elim`` variables first (graded reverse lex among them)
    and breaks ties with graded reverse lex on the remaining variables, so
    it eliminates exactly the ``elim`` variables.
    """

    kind: str = "grevlex"
    elim: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("grevlex", "lex", "block"):
            raise ValueError(f"unknown monomial order {self.kind!r}")
        if self.kind != "block" and self.elim:
            raise ValueError("only block orders take eliminated variables")

    def key(self, m: Exponent) -> tuple:
        """Sort key: ``key(a) > key(b)`` iff ``a`` is larger in this order."""
        if self.kind == "grevlex":
            return (sum(m),) + tuple(-e for e in reversed(m))
        if self.kind == "lex":
            return m
        elim = set(self.elim)
        first = [m[i] for i in self.elim]
        rest = [m[i] for i in range(len(m)) if i not in elim]
        return (
            (sum(first),)
            + tuple(-e for e in reversed(first))
            + (sum(rest),)
            + tuple(-e for e in reversed(rest))
        )

    def heap_key(self, m: Exponent) -> tuple:
        """Key whose *ascending* order is this order descending (for heapq)."""
        return tuple(-x for x in self.key(m))

    def to_json(self) -> dict:
        return {"kind": self.kind, "elim": list(self.elim)}


GREVLEX = MonomialOrder("grevlex")
LEX = MonomialOrder("lex")


def block_order(elim: Iterable[int]) -> MonomialOrder:
    return MonomialOrder("block", tuple(sorted(set(elim))))


# ---------------------------------------------------------------------------
# the polynomial type


class Polynomial:
    """Immutable sparse polynomial with exact rational coefficients."""

    __slots__ = ("n", "terms", "_hash")

    def __init__(self, n: int, terms: Optional[Mapping[Exponent, Coefficient]] = None):
        self.n = n
        clean: Dict[Exponent, mpq] = {}
        if terms:
            for m, c in terms.items():
                if len(m) != n:
                    raise ValueError(f"exponent {m} does not have length {n}")
                c = mpq(c)
                if c:
                    clean[tuple(m)] = c
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, n: int, terms: Dict[Exponent, mpq]) -> "Polynomial":
        # trusted constructor: terms already canonical
        p = cls.__new__(cls)
        p.n = n
        p.terms = terms
        p._hash = None
        return p

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls._raw(n, {})

    @classmethod
    def constant(cls, n: int, c: Coefficient) -> "Polynomial":
        c = mpq(c)
        return cls._raw(n, {(0,) * n: c} if c else {})

    @classmethod
    def variable(cls, n: int, i: int) -> "Polynomial":
        if not 0 <= i < n:
            raise IndexError(f"variable index {i} out of range for n={n}")
        e = [0] * n
        e[i] = 1
        return cls._raw(n, {tuple(e): mpq(1)})

    @classmethod
    def monomial(cls, m: Sequence[int], c: Coefficient = 1) -> "Polynomial":
        c = mpq(c)
        return cls._raw(len(m), {tuple(m): c} if c else {})

    # -- basic queries ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and (0,) * self.n in self.terms)

    def constant_term(self) -> mpq:
        return self.terms.get((0,) * self.n, mpq(0))

    def total_degree(self) -> int:
        """Largest total degree of a term; -1 for the zero polynomial."""
        return max((sum(m) for m in self.terms), default=-1)

    def degree_in(self, i: int) -> int:
        return max((m[i] for m in self.terms), default=-1)

    def variables(self) -> set:
        return {i for m in self.terms for i, e in enumerate(m) if e}

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def sorted_terms(self, order: MonomialOrder = GREVLEX):
        return sorted(self.terms.items(), key=lambda t: order.key(t[0]), reverse=True)

    def leading_monomial(self, order: MonomialOrder = GREVLEX) -> Exponent:
        if not self.terms:
            raise ValueError("zero polynomial has no leading monomial")
        return max(self.terms, key=order.key)

    def leading_coefficient(self, order: MonomialOrder = GREVLEX) -> mpq:
        return self.terms[self.leading_monomial(order)]

    def evaluate(self, point: Sequence[Coefficient]) -> mpq:
        point = [mpq(x) for x in point]
        total = mpq(0)
        for m, c in self.terms.items():
            t = c
            for x, e in zip(point, m):
                if e:
                    t *= x**e
            total += t
        return total

    # -- arithmetic -----------------------------------------------------------

    def _check(self, other: "Polynomial"):
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def _lift(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        return Polynomial.constant(self.n, other)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m)
            if v is None:
                out[m] = c
            else:
                v = v + c
                if v:
                    out[m] = v
                else:
                    del out[m]
        return Polynomial._raw(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = mpq(other)
            if not c:
                return Polynomial.zero(self.n)
            return Polynomial._raw(self.n, {m: v * c for m, v in self.terms.items()})
        self._check(other)
        a, b = self.terms, other.terms
        if len(a) < len(b):
            a, b = b, a
        if len(b) == 1:
            ((mb, cb),) = b.items()
            return Polynomial._raw(self.n, {tuple(x + y for x, y in zip(ma, mb)): ca * cb for ma, ca in a.items()})
        out: Dict[Exponent, mpq] = {}
        get = out.get
        for mb, cb in b.items():
            for ma, ca in a.items():
                m = tuple(x + y for x, y in zip(ma, mb))
                v = get(m)
                out[m] = ca * cb if v is None else v + ca * cb
        return Polynomial._raw(self.n, {m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        if len(self.terms) == 1:
            ((m, c),) = self.terms.items()
            return Polynomial._raw(self.n, {tuple(e * k for e in m): c**k})
        result = Polynomial.constant(self.n, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def scale(self, c: Coefficient) -> "Polynomial":
        return self * c

    def mul_term(self, m: Exponent, c: mpq) -> "Polynomial":
        return Polynomial._raw(
            self.n,
            {tuple(x + y for x, y in zip(k, m)): v * c for k, v in self.terms.items()},
        )

    # -- identity -------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.n == other.n and self.terms == other.terms
        if isinstance(other, (int, mpq)):
            return self == Polynomial.constant(self.n, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, frozenset(self.terms.items())))
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"Polynomial({to_string(self)!r}, n={self.n})"

    def __str__(self):
        return to_string(self)

    # -- embeddings -----------------------------------------------------------

    def extend(self, new_n: int, positions: Sequence[int]) -> "Polynomial":
        """Re-embed into ``new_n`` variables; variable ``i`` goes to ``positions[i]``."""
        out = {}
        for m, c in self.terms.items():
            e = [0] * new_n
            for i, k in enumerate(m):
                if k:
                    e[positions[i]] += k
            out[tuple(e)] = c
        return Polynomial._raw(new_n, out)

    def restrict(self, keep: Sequence[int]) -> "Polynomial":
        """Drop to the variables ``keep`` (which must contain every variable used)."""
        keep = list(keep)
        used = self.variables()
        if not used <= set(keep):
            raise ValueError("polynomial involves a variable outside keep")
        return Polynomial._raw(
            len(keep), {tuple(m[i] for i in keep): c for m, c in self.terms.items()}
        )


# ---------------------------------------------------------------------------
# parsing and printing


class ParseError(ValueError):
    """Malformed polynomial text; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


def default_names(n: int) -> Tuple[str, ...]:
    return tuple(f"z{i + 1}" for i in range(n))


_TOKEN = re.compile(r"\s*(?:([0-9]+)|([A-Za-z_][A-Za-z0-9_]*)|([-+*^/()]))")


def _tokenize(text: str):
    tokens = []
    i = 0
    end = len(text.rstrip())
    while i < end:
        m = _TOKEN.match(text, i)
        if m is None:
            j = i
            while text[j].isspace():
                j += 1
            raise ParseError(f"unexpected character {text[j]!r}", j)
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            tokens.append(("int", m.group(1), start))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), start))
        else:
            tokens.append((m.group(3), m.group(3), start))
        i = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, names: Sequence[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.n = n
        self.index = {name: i for i, name in enumerate(names)}

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.pos += 1
        return tok

    def parse(self) -> Polynomial:
        p = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", tok[2])
        return p

    def expr(self) -> Polynomial:
        acc: Dict[Exponent, mpq] = {}

        def add(q: Polynomial, sign: int):
            for m, c in q.terms.items():
                acc[m] = acc.get(m, 0) + sign * c

        add(self.term(), 1)
        while self.peek()[0] in "+-":
            op = self.take()[0]
            add(self.term(), 1 if op == "+" else -1)
        return Polynomial._raw(self.n, {m: mpq(c) for m, c in acc.items() if c})

    def term(self) -> Polynomial:
        p = self.unary()
        while self.peek()[0] == "*":
            self.take()
            p = p * self.unary()
        return p

    def unary(self) -> Polynomial:
        kind = self.peek()[0]
        if kind == "-":
            self.take()
            return -self.unary()
        if kind == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            tok = self.take("int")
            base = base ** int(tok[1])
        return base

    def atom(self) -> Polynomial:
        kind, value, where = self.take()
        if kind == "int":
            num = int(value)
            if self.peek()[0] == "/":
                self.take()
                den_tok = self.take("int")
                den = int(den_tok[1])
                if den == 0:
                    raise ParseError("division by zero in coefficient", den_tok[2])
                return Polynomial.constant(self.n, mpq(num, den))
            return Polynomial.constant(self.n, num)
        if kind == "name":
            if value not in self.index:
                raise ParseError(f"unknown variable {value!r}", where)
            return Polynomial.variable(self.n, self.index[value])
        if kind == "(":
            p = self.expr()
            self.take(")")
            return p
        raise ParseError(f"unexpected {value or 'end of input'!r}", where)


def parse(text: str, n: int, names: Optional[Sequence[str]] = None) -> Polynomial:
    """Parse ``text`` in the polynomial grammar over ``n`` variables."""
    names = tuple(names) if names is not None else default_names(n)
    if len(names) != n:
        raise ValueError(f"{len(names)} variable names given for n={n}")
    return _Parser(text, n, names).parse()


def _format_monomial(m: Exponent, names: Sequence[str]) -> str:
    parts = []
    for e, name in zip(m, names):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def to_string(p: Polynomial, names: Optional[Sequence[str]] = None) -> str:
    """Canonical text: terms in descending grevlex order, explicit ``*``/``^``."""
    names = tuple(names) if names is not None else default_names(p.n)
    if not p.terms:
        return "0"
    out = []
    for k, (m, c) in enumerate(p.sorted_terms(GREVLEX)):
        neg = c < 0
        a = -c if neg else c
        mono = _format_monomial(m, names)
        if not mono:
            body = str(a)
        elif a == 1:
            body = mono
        else:
            body = f"{a}*{mono}"
        if k == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


# ---------------------------------------------------------------------------
# calculus


def partial_derivative(f: Polynomial, i: int) -> Polynomial:
    """Formal partial derivative in variable ``i`` (0-based)."""
    if not 0 <= i < f.n:
        raise IndexError(f"variable index {i} out of range for n={f.n}")
    out = {}
    for m, c in f.terms.items():
        e = m[i]
        if e:
            out[m[:i] + (e - 1,) + m[i + 1 :]] = c * e
    return Polynomial._raw(f.n, out)


def determinant(rows: Sequence[Sequence[Polynomial]]) -> Polynomial:
    """Determinant of a square matrix of polynomials, by cofactor expansion."""
    k = len(rows)
    if any(len(r) != k for r in rows):
        raise ValueError("matrix is not square")
    if k == 1:
        return rows[0][0]
    if k == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = None
    for j, entry in enumerate(rows[0]):
        if entry.is_zero():
            continue
        sub = [r[:j] + r[j + 1 :] for r in rows[1:]]
        term = entry * determinant(sub)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total if total is not None else Polynomial.zero(rows[0][0].n)


def minor_jacobian(fs: Sequence[Polynomial], variables: Sequence[int]) -> Polynomial:
    """``d(f_1..f_k)/d(z_{v_1}..z_{v_k})`` for ``k = len(fs) = len(variables)``."""
    fs = list(fs)
    variables = list(variables)
    if not fs:
        raise ValueError("need at least one polynomial")
    n = fs[0].n
    if len(variables) != len(fs):
        raise ValueError(f"{len(fs)} polynomials but {len(variables)} variables")
    if not 1 <= len(fs) <= n:
        raise ValueError(f"minor size {len(fs)} out of range for n={n}")
    if len(set(variables)) != len(variables):
        raise ValueError("repeated variable index")
    return determinant([[partial_derivative(f, v) for v in variables] for f in fs])


def jacobian_determinant(fs: Sequence[Polynomial]) -> Polynomial:
    fs = list(fs)
    if not fs or len(fs) != fs[0].n:
        raise ValueError("jacobian_determinant needs exactly n polynomials in dimension n")
    return minor_jacobian(fs, range(fs[0].n))


def ord_at_origin(f: Polynomial) -> Union[int, float]:
    """Vanishing order at the origin; ``math.inf`` for the zero polynomial."""
    if not f.terms:
        return math.inf
    return min(sum(m) for m in f.terms)


# ---------------------------------------------------------------------------
# division, gcd, squarefree part


def normalize(f: Polynomial) -> Polynomial:
    """Scale so the grevlex leading coefficient is 1 (zero stays zero)."""
    if not f.terms:
        return f
    return f * (1 / f.leading_coefficient(GREVLEX))


def exact_divide(f: Polynomial, d: Polynomial) -> Optional[Polynomial]:
    """Quotient ``q`` with ``f == d*q``, or ``None`` if ``d`` does not divide ``f``."""
    f._check(d)
    if d.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    if f.is_zero():
        return f
    n = f.n
    key = GREVLEX.key
    lm_d = max(d.terms, key=key)
    lc_d = d.terms[lm_d]
    rest_d = [(m, c) for m, c in d.terms.items() if m != lm_d]
    r = dict(f.terms)
    # max-heap of remainder monomials; stale entries are skipped when popped
    heap = [(_negated(key(m)), m) for m in r]
    heapq.heapify(heap)
    quotient: Dict[Exponent, mpq] = {}
    while r:
        lm = heapq.heappop(heap)[1]
        if lm not in r:
            continue
        shift = tuple(a - b for a, b in zip(lm, lm_d))
        if min(shift) < 0:
            return None
        c = r.pop(lm) / lc_d
        quotient[shift] = c
        for m, v in rest_d:
            t = tuple(a + b for a, b in zip(m, shift))
            old = r.get(t)
            nv = (old or 0) - c * v
            if nv:
                r[t] = nv
                if old is None:
                    heapq.heappush(heap, (_negated(key(t)), t))
            else:
                r.pop(t, None)
    return Polynomial._raw(n, quotient)


def _negated(k: tuple) -> tuple:
    return tuple(-x for x in k)


def _coefficients_in(f: Polynomial, v: int) -> Dict[int, Polynomial]:
    """Write ``f`` as ``sum_k c_k * z_v^k`` with ``c_k`` free of ``z_v``."""
    parts: Dict[int, Dict[Exponent, mpq]] = {}
    for m, c in f.terms.items():
        k = m[v]
        parts.setdefault(k, {})[m[:v] + (0,) + m[v + 1 :]] = c
    return {k: Polynomial._raw(f.n, t) for k, t in parts.items()}


def _content(f: Polynomial, v: int) -> Polynomial:
    g = Polynomial.zero(f.n)
    for c in _coefficients_in(f, v).values():
        g = gcd(g, c)
        if g.is_constant():
            return Polynomial.constant(f.n, 1)
    return g


def _primitive_part(f: Polynomial, v: int) -> Polynomial:
    c = _content(f, v)
    if c.is_constant():
        return normalize(f)
    q = exact_divide(f, c)
    assert q is not None
    return normalize(q)


def _pseudo_remainder(f: Polynomial, g: Polynomial, v: int) -> Polynomial:
    dg = g.degree_in(v)
    lc_g = _coefficients_in(g, v)[dg]
    r = f
    while not r.is_zero() and r.degree_in(v) >= dg:
        dr = r.degree_in(v)
        lc_r = _coefficients_in(r, v)[dr]
        e = [0] * f.n
        e[v] = dr - dg
        r = r * lc_g - (lc_r * g).mul_term(tuple(e), mpq(1))
    return r


def gcd(f: Polynomial, g: Polynomial) -> Polynomial:
    """Greatest common divisor, normalized to grevlex leading coefficient 1.

    Recursive primitive PRS: split off the content with respect to a main
    variable, run pseudo-remainders on the primitive parts.
    """
    f._check(g)
    if f.is_zero():
        return normalize(g)
    if g.is_zero():
        return normalize(f)
    if f.is_constant() or g.is_constant():
        return Polynomial.constant(f.n, 1)
    used = f.variables() | g.variables()
    v = max(used)
    if f.degree_in(v) == 0 or g.degree_in(v) == 0:
        # one side is free of z_v: gcd divides every z_v-coefficient of the other
        if f.degree_in(v) == 0:
            f, g = g, f
        acc = g
        for c in _coefficients_in(f, v).values():
            acc = gcd(acc, c)
            if acc.is_constant():
                break
        return normalize(acc)
    cf, cg = _content(f, v), _content(g, v)
    content = gcd(cf, cg)
    a, b = _primitive_part(f, v), _primitive_part(g, v)
    if a.degree_in(v) < b.degree_in(v):
        a, b = b, a
    while not b.is_zero():
        r = _pseudo_remainder(a, b, v)
        a = b
        if r.is_zero():
            break
        if r.degree_in(v) == 0:
            a = Polynomial.constant(f.n, 1)
            break
        b = _primitive_part(r, v)
    return normalize(content * _primitive_part(a, v) if a.degree_in(v) > 0 else content)


def squarefree_part(f: Polynomial) -> Polynomial:
    """``f / gcd(f, df/dz_1, ..., df/dz_n)``, normalized."""
    if f.is_zero():
        raise ValueError("squarefree part of the zero polynomial")
    g = f
    for i in range(f.n):
        if g.is_constant():
            break
        g = gcd(g, partial_derivative(f, i))
    q = exact_divide(f, g)
    assert q is not None
    return normalize(q)


# ---------------------------------------------------------------------------
# composition


def substitute(f: Polynomial, images: Sequence[Polynomial]) -> Polynomial:
    """Compose: replace variable ``i`` of ``f`` by ``images[i]``.

    Nested Horner evaluation, last variable outermost, so every product has
    one small image polynomial as a factor.
    """
    if len(images) != f.n:
        raise ValueError(f"need {f.n} images, got {len(images)}")
    if not images:
        return f
    m_out = images[0].n
    zero = Polynomial.zero(m_out)

    def horner(terms: Dict[Exponent, mpq], v: int) -> Polynomial:
        if v < 0:
            c = sum(terms.values(), mpq(0))
            return Polynomial.constant(m_out, c) if c else zero
        groups: Dict[int, Dict[Exponent, mpq]] = {}
        for m, c in terms.items():
            groups.setdefault(m[v], {})[m] = c
        acc = zero
        top = max(groups)
        for k in range(top, -1, -1):
            if k != top:
                acc = acc * images[v]
            if k in groups:
                acc = acc + horner(groups[k], v - 1)
        return acc

    if f.is_zero():
        return zero
    return horner(dict(f.terms), f.n - 1)
