"""The multiplier engine: Kohn's rules applied on a special domain until 1 is a multiplier.

A run starts from the defining functions ``F_1..F_N`` and builds a chain of
multipliers, each with an exact assigned order ``epsilon``, until the
constant 1 is reached:

1. the Jacobian of ``n`` generic combinations of the ``F_j`` (epsilon 1/4),
   then its squarefree part;
2. for each slot ``j``, the other ``n-1`` generic combinations ``h`` give a
   Weierstrass polynomial ``g(u, t)`` of the squarefree part over the image
   of ``(h, t)`` with ``t`` a generic linear form; differentiating ``g(h, t)``
   in the fiber direction ``lambda`` times, swapping the minor Jacobian for a
   cofactor ``p(h)`` at every step, ends at ``lambda! p(h)^lambda``;
3. the roots ``p_j(h)`` and the squarefree part define a germ supported at
   the origin, so every coordinate has a power inside it, and the Jacobian
   of the coordinates is 1.

In three or more variables step 3 can fail: two functions never cut out a
point there, and the roots may share whole curves through the origin.  A
completion stage then takes roots of squarefree monomials lying in the
radical of the multipliers and the Jacobian of generic pre-multiplier and
root combinations, until the germ is isolated again.  It uses only the
Jacobian and root rules, so the verifier replays it like any other step.

The output is a :class:`~kohnlab.certificate.Certificate`: a list of nodes
whose witnesses let :func:`kohnlab.certificate.verify_certificate` replay
every step with the polynomial and Gröbner primitives alone.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from gmpy2 import mpq

from . import rng
from .certificate import (
    CHAIN_TERMINAL,
    COMPLETION_JACOBIAN,
    COORDINATE_MULTIPLIER,
    FIBER_CHAIN_STEP,
    FINAL_JACOBIAN,
    INITIAL_JACOBIAN,
    PRE_MULTIPLIER,
    RADICAL_ROOT,
    SQUAREFREE_RADICAL,
    WEIERSTRASS_PULLBACK,
    Certificate,
    Composed,
    MultiplierNode,
    cofactor_form,
    SpecialDomain,
    fmt_rational,
    image_names,
    verify_certificate,
)
from .groebner import Budget, Ideal, ResourceLimitExceeded, elimination_ideal, minimal_power_in
from .invariants import DEFAULT_CEILING, NotCertifiedFinite, colength_sequence, germ_minimal_power
from .poly import (
    Polynomial,
    exact_divide,
    gcd,
    jacobian_determinant,
    minor_jacobian,
    normalize,
    ord_at_origin,
    partial_derivative,
    squarefree_part,
    substitute,
    to_string,
)

__all__ = [
    "EngineConfig",
    "EngineError",
    "GenericityExhausted",
    "DegenerateDomain",
    "DomainRejected",
    "EngineBug",
    "WeierstrassData",
    "CofactorData",
    "EngineState",
    "default_pool",
    "image_names",
    "initial_state",
    "draw_generic_combinations",
    "initial_jacobian_multiplier",
    "complete",
    "coordinate_split",
    "fiber_frame",
    "frame_minor",
    "weierstrass_image",
    "find_chain_cofactor",
    "fiber_chain",
    "finalize",
    "run",
]

QUARTER = mpq(1, 4)


class EngineError(RuntimeError):
    pass


class GenericityExhausted(EngineError):
    """Every generic draw failed its verification within the retry limit."""


class DegenerateDomain(EngineError):
    pass


class DomainRejected(EngineError):
    pass


class EngineBug(AssertionError):
    """An identity that holds by construction failed."""


class _DrawFailed(Exception):
    """One generic draw failed its check; the caller retries."""


def default_pool() -> Tuple[Fraction, ...]:
    vals = {Fraction(a, b) for a in range(-5, 6) if a for b in (1, 2, 3)}
    return tuple(sorted(vals))


@dataclass(frozen=True)
class EngineConfig:
    seed: int = 0
    pool: Tuple[Fraction, ...] = field(default_factory=default_pool)
    retries: int = 12
    power_bound_cap: int = 10_000
    budget: Budget = Budget()
    max_chain: int = 200
    colength_ceiling: int = DEFAULT_CEILING
    completion_power_bound: int = 64
    self_verify: bool = True

    def __post_init__(self):
        if len(set(self.pool)) < 8:
            raise ValueError("coefficient pool needs at least 8 distinct values")
        if 0 in self.pool:
            raise ValueError("coefficient pool must not contain 0")
        if self.retries < 1:
            raise ValueError("retries must be at least 1")

    def snapshot(self) -> dict:
        return {
            "pool": [str(c) for c in self.pool],
            "retries": self.retries,
            "power_bound_cap": self.power_bound_cap,
            "max_spairs": self.budget.max_pairs,
            "max_degree": self.budget.max_degree,
            "max_chain": self.max_chain,
            "colength_ceiling": self.colength_ceiling,
            "completion_power_bound": self.completion_power_bound,
        }



# ---------------------------------------------------------------------------
# state


@dataclass
class EngineState:
    domain: SpecialDomain
    config: EngineConfig
    nodes: List[MultiplierNode] = field(default_factory=list)
    premultipliers: List[str] = field(default_factory=list)
    terminal: Optional[str] = None

    def add(self, kind, poly, epsilon, inputs, witness) -> MultiplierNode:
        """Append a node; ``poly`` is a Polynomial or a :class:`Composed` form."""
        if isinstance(poly, Composed):
            node = MultiplierNode(f"n{len(self.nodes)}", kind, None, epsilon, tuple(inputs), witness, poly)
        else:
            node = MultiplierNode(f"n{len(self.nodes)}", kind, poly, epsilon, tuple(inputs), witness)
        self.nodes.append(node)
        if self.terminal is None and node.is_constant() and node.constant_term() != 0 and epsilon is not None:
            self.terminal = node.id
        return node

    def node(self, node_id: str) -> MultiplierNode:
        return self.nodes[int(node_id[1:])]

    @property
    def done(self) -> bool:
        return self.terminal is not None

    def names(self):
        return self.domain.names


def initial_state(domain: SpecialDomain, config: Optional[EngineConfig] = None) -> EngineState:
    """Register every ``F_j`` as a pre-multiplier whose differential has epsilon 1/4."""
    config = config or EngineConfig()
    problems = domain.problems(config.colength_ceiling, config.budget)
    if problems:
        raise DomainRejected("; ".join(problems))
    state = EngineState(domain, config)
    for j, f in enumerate(domain.generators):
        node = state.add(
            PRE_MULTIPLIER, f, None, (),
            {"generator": j + 1, "differential_epsilon": fmt_rational(QUARTER)},
        )
        state.premultipliers.append(node.id)
    return state


def draw_generic_combinations(generators: Sequence[Polynomial], k: int, rand, pool) -> Tuple[List[Polynomial], List[List[mpq]]]:
    """``k`` random combinations of ``generators`` with coefficients from ``pool``."""
    coeffs = [[mpq(rand.choice(pool)) for _ in generators] for _ in range(k)]
    return combine(generators, coeffs), coeffs


def combine(generators: Sequence[Polynomial], coeffs) -> List[Polynomial]:
    n = generators[0].n
    out = []
    for row in coeffs:
        acc = Polynomial.zero(n)
        for c, f in zip(row, generators):
            if c:
                acc = acc + f * c
        out.append(acc)
    return out


def _identity_rows(k: int, N: int) -> List[List[mpq]]:
    return [[mpq(1 if i == j else 0) for j in range(N)] for i in range(k)]


def _finite_colength(polys: Sequence[Polynomial], config: EngineConfig) -> Optional[int]:
    try:
        return colength_sequence(Ideal(list(polys)), config.colength_ceiling, config.budget).colength
    except NotCertifiedFinite:
        return None


# ---------------------------------------------------------------------------
# step 1: Jacobian of generic combinations, then its squarefree part


def initial_jacobian_multiplier(state: EngineState) -> Optional[MultiplierNode]:
    """Emit the initial Jacobian and, unless it already finishes the run, its squarefree part.

    Subsets of ``n`` generators are tried first, in order, since they keep
    the Jacobian sparse; after that, combinations come from the pool.
    """
    dom, cfg = state.domain, state.config
    n, F = dom.n, list(dom.generators)
    rand = rng.stream(cfg.seed, "initial-jacobian")
    saw_zero = False
    subsets = list(itertools.combinations(range(len(F)), n))
    for attempt in range(len(subsets) + cfg.retries):
        if attempt < len(subsets):
            coeffs = [[mpq(1 if j == k else 0) for j in range(len(F))] for k in subsets[attempt]]
            G = combine(F, coeffs)
        else:
            G, coeffs = draw_generic_combinations(F, n, rand, cfg.pool)
        m = _finite_colength(G, cfg)
        if m is None:
            continue
        J = jacobian_determinant(G)
        if J.is_zero():
            saw_zero = True
            continue
        order = ord_at_origin(J)
        if order > m:
            raise EngineBug(f"Jacobian vanishes to order {order} > colength {m}")
        jac = state.add(
            INITIAL_JACOBIAN, J, QUARTER, state.premultipliers,
            {
                "attempt": attempt,
                "coefficients": [[fmt_rational(c) for c in row] for row in coeffs],
                "combinations": [to_string(g, dom.names) for g in G],
                "colength": m,
                "order_at_origin": order,
            },
        )
        break
    else:
        if saw_zero:
            raise DegenerateDomain("every Jacobian of generic combinations vanishes identically")
        raise GenericityExhausted(f"no combination with finite colength in {len(subsets) + cfg.retries} draws")
    if state.done:
        return jac
    if J.constant_term():
        # J is a unit germ: 1 is in (J) at the origin
        state.add(RADICAL_ROOT, Polynomial.constant(n, 1), jac.epsilon, [jac.id],
                  {"sigma": 1, "membership": "germ"})
        return jac
    sq = squarefree_part(J)
    bound = min(max(1, m * m), cfg.power_bound_cap)
    sigma = minimal_power_in(sq, Ideal([J]), bound, cfg.budget)
    if sigma is None:
        raise EngineBug("squarefree part has no power in the Jacobian's ideal")
    return state.add(SQUAREFREE_RADICAL, sq, jac.epsilon / sigma, [jac.id],
                     {"sigma": sigma, "membership": "global"})


# ---------------------------------------------------------------------------
# step 2: Weierstrass data and the cofactor for one slot


def coordinate_split(f: Polynomial) -> List[Polynomial]:
    """Pairwise coprime factors of a squarefree ``f``: its coordinate factors and the rest."""
    n = f.n
    factors = []
    rest = f
    for i in range(n):
        zi = Polynomial.variable(n, i)
        q = exact_divide(rest, zi)
        if q is not None:
            factors.append(zi)
            rest = q
    if not rest.is_constant():
        factors.append(normalize(rest))
    return factors


def fiber_frame(fiber_form: Sequence[mpq]) -> List[List[mpq]]:
    """Frame matrix ``B`` with ``w = B z``: the first ``n-1`` coordinates kept, the last one the fiber form."""
    n = len(fiber_form)
    rows = _identity_rows(n - 1, n)
    rows.append([mpq(c) for c in fiber_form])
    return rows


def _invert(B: List[List[mpq]]) -> List[List[mpq]]:
    n = len(B)
    A = [list(map(mpq, row)) + [mpq(1 if i == j else 0) for j in range(n)] for i, row in enumerate(B)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col]), None)
        if piv is None:
            raise ValueError("singular frame")
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        A[col] = [v / p for v in A[col]]
        for r in range(n):
            if r != col and A[r][col]:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return [row[n:] for row in A]


def _linear_forms(M: List[List[mpq]]) -> List[Polynomial]:
    n = len(M)
    return [
        Polynomial._raw(n, {tuple(1 if k == j else 0 for k in range(n)): c for j, c in enumerate(row) if c})
        for row in M
    ]


def frame_minor(h_list: Sequence[Polynomial], frame: List[List[mpq]]) -> Polynomial:
    """Minor Jacobian ``d(h_1..h_{n-1})/d(w_1..w_{n-1})`` in the frame ``w = B z``, written in ``z``."""
    n = len(frame)
    if n == 1:
        return Polynomial.constant(1, 1)
    to_z = _linear_forms(_invert(frame))  # z as forms in w
    to_w = _linear_forms(frame)  # w as forms in z
    hw = [substitute(h, to_z) for h in h_list]
    mw = minor_jacobian(hw, range(n - 1))
    return substitute(mw, to_w)


@dataclass
class WeierstrassData:
    g: Polynomial  # in (u_1..u_{n-1}, t), monic in t
    lam: int
    coefficients: List[Polynomial]  # a_0..a_{lam-1}, functions of u only
    pullback: Polynomial
    quotient: Polynomial  # pullback / squarefree part


def _lift(f: Polynomial, n: int) -> Polynomial:
    return f.extend(2 * n, list(range(n)))


def _image_var(n: int, i: int) -> Polynomial:
    return Polynomial.variable(2 * n, n + i)


def _drop_z(f: Polynomial, n: int) -> Polynomial:
    return f.restrict(list(range(n, 2 * n)))


def _t_coefficients(g: Polynomial) -> Dict[int, Polynomial]:
    n = g.n
    parts: Dict[int, dict] = {}
    for m, c in g.terms.items():
        parts.setdefault(m[-1], {})[m[:-1] + (0,)] = c
    return {k: Polynomial._raw(n, v) for k, v in parts.items()}


def _image_hypersurface(f: Polynomial, h_list, fiber: Polynomial, budget: Budget) -> Polynomial:
    n = f.n
    gens = [_lift(f, n)]
    gens += [_image_var(n, i) - _lift(h, n) for i, h in enumerate(h_list)]
    gens.append(_image_var(n, n - 1) - _lift(fiber, n))
    E = elimination_ideal(Ideal(gens), list(range(n, 2 * n)), budget)
    elems = [g for g in E.generators if not g.is_zero()]
    if len(elems) != 1:
        raise _DrawFailed("image of a component is not a hypersurface")
    g = _drop_z(elems[0], n)
    lam = g.degree_in(n - 1)
    lead = _t_coefficients(g).get(lam)
    if lam < 1 or lead is None or not lead.is_constant():
        raise _DrawFailed("image equation is not monic in the fiber variable")
    return g * (1 / lead.constant_term())


def _coprime_monic(a: Polynomial, b: Polynomial) -> bool:
    """Sufficient test that two polynomials monic in ``t`` are coprime.

    Any common factor is monic in ``t`` too, so it survives substituting
    values for the ``u`` variables; coprime specializations settle it.
    """
    n = a.n
    for k in range(1, 4):
        point = [Polynomial.constant(n, mpq(7 * k + i * i + 3, k + 2 * i + 1)) for i in range(n - 1)]
        point.append(Polynomial.variable(n, n - 1))
        if gcd(substitute(a, point), substitute(b, point)).is_constant():
            return True
    return False


def weierstrass_image(h_list: Sequence[Polynomial], squarefree: Polynomial, fiber: Polynomial,
                      budget: Budget = Budget()) -> WeierstrassData:
    """Monic equation ``g(u, t)`` of the image of ``{squarefree = 0}`` under ``(h, fiber)``.

    The zero set is split into coordinate hyperplanes and the remainder;
    each piece is eliminated on its own and the equations are combined by
    lcm, which is the equation of the union of the images.
    """
    n = squarefree.n
    g = None
    for f in coordinate_split(squarefree):
        gi = _image_hypersurface(f, h_list, fiber, budget)
        if g is None:
            g = gi
        else:
            common = None if _coprime_monic(g, gi) else gcd(g, gi)
            g = g * gi if common is None else exact_divide(g * gi, common)
            g = g * (1 / _t_coefficients(g)[g.degree_in(n - 1)].constant_term())
    if g is None:
        raise EngineBug("squarefree part is constant")
    lam = g.degree_in(n - 1)
    parts = _t_coefficients(g)
    coeffs = [parts.get(j, Polynomial.zero(n)) for j in range(lam)]
    pullback = substitute(g, list(h_list) + [fiber])
    if pullback.is_zero():
        raise _DrawFailed("pullback vanishes identically")
    quotient = exact_divide(pullback, squarefree)
    if quotient is None:
        raise EngineBug("pullback of the Weierstrass polynomial is not divisible by the squarefree part")
    return WeierstrassData(g, lam, coeffs, pullback, quotient)


@dataclass
class CofactorData:
    minor: Polynomial  # frame minor, in z
    p: Polynomial  # in the image ring, free of t
    p_pulled: Polynomial  # p(h), in z
    s: Optional[int]  # exponent when p is a pure power of u_1
    membership: str  # "germ" or "global": where p(h) lies in (minor, squarefree)


def _image_of_curve(minor: Polynomial, f: Polynomial, h_list, budget: Budget) -> Polynomial:
    n = f.n
    gens = [_lift(minor, n), _lift(f, n)]
    gens += [_image_var(n, i) - _lift(h, n) for i, h in enumerate(h_list)]
    E = elimination_ideal(Ideal(gens), list(range(n, 2 * n - 1)), budget)
    elems = [g for g in E.generators if not g.is_zero()]
    if not elems:
        raise _DrawFailed("the critical locus maps onto the image")
    if any(g.is_constant() for g in elems):
        return Polynomial.constant(n, 1)
    best = min(elems, key=lambda g: (g.total_degree(), len(g.terms), to_string(g)))
    return normalize(_drop_z(best, n))


def find_chain_cofactor(h_list: Sequence[Polynomial], squarefree: Polynomial, frame,
                        config: EngineConfig = EngineConfig()) -> CofactorData:
    """A polynomial ``p(u)`` with ``p(h)`` in ``(minor, squarefree)``.

    In two variables the ideal must have finite colength at the origin and
    ``p = u_1^s`` with ``s`` least such that ``h_1^s`` lies in its germ.  In
    more variables ``p`` is an element of least degree of the elimination
    ideal, and membership is global.
    """
    n = squarefree.n
    minor = frame_minor(h_list, frame)
    if n == 1 or minor.is_zero():
        if minor.is_zero():
            raise _DrawFailed("minor Jacobian vanishes identically")
        return CofactorData(minor, Polynomial.constant(n, 1), Polynomial.constant(n, 1), 0, "global")
    if n == 2:
        # local cofactor: the least power of h_1 in the germ of (minor, squarefree)
        m = _finite_colength([minor, squarefree], config)
        if m is None:
            raise _DrawFailed("minor and squarefree part have a common curve")
        if m == 0:
            one = Polynomial.constant(n, 1)
            return CofactorData(minor, one, one, 0, "germ")
        bound = min(max(1, m * m), config.power_bound_cap)
        s = germ_minimal_power(h_list[0], Ideal([minor, squarefree]), bound,
                               config.colength_ceiling, config.budget)
        if s is None:
            raise EngineBug("no power of h_1 in the germ of (minor, squarefree)")
        p = Polynomial.monomial((s, 0))
        return CofactorData(minor, p, h_list[0] ** s, s, "germ")
    p = Polynomial.constant(n, 1)
    for f in coordinate_split(squarefree):
        p = p * _image_of_curve(minor, f, h_list, config.budget)
    p = normalize(p)
    p_pulled = substitute(p, list(h_list) + [Polynomial.zero(n)])
    if not Ideal([minor, squarefree]).groebner(budget=config.budget).contains(p_pulled):
        raise EngineBug("cofactor is not in the ideal of the minor and the squarefree part")
    s = None
    if p.is_monomial() and p.variables() <= {0}:
        s = next(iter(p.terms))[0]
    return CofactorData(minor, p, p_pulled, s, "global")


# ---------------------------------------------------------------------------
# the fiber-differentiation chain


def fiber_chain(state: EngineState, slot: int, h_list, frame, fiber: Polynomial,
                wdata: WeierstrassData, cof: CofactorData, squarefree_node: MultiplierNode,
                witness_extra: dict) -> Optional[MultiplierNode]:
    """Emit the pullback, the ``lambda`` chain steps, and the root ``p(h)``.

    Returns the root node, or ``None`` if a constant turned up on the way
    (the state then has its terminal).
    """
    dom = state.domain
    n = dom.n
    names = dom.names
    inames = image_names(n)
    pb = state.add(
        WEIERSTRASS_PULLBACK, wdata.pullback, squarefree_node.epsilon, [squarefree_node.id],
        dict(witness_extra, **{
            "slot": slot,
            "h": [to_string(h, names) for h in h_list],
            "frame": [[fmt_rational(c) for c in row] for row in frame],
            "fiber_form": to_string(fiber, names),
            "image_variables": list(inames),
            "g": to_string(wdata.g, inames),
            "lambda": wdata.lam,
            "a": [to_string(a, inames) for a in wdata.coefficients],
            "quotient": to_string(wdata.quotient, names),
            "minor": to_string(cof.minor, names),
            "cofactor": to_string(cof.p, inames),
            "s": cof.s,
            "cofactor_membership": cof.membership,
        }),
    )
    if state.done:
        return None
    if wdata.lam > state.config.max_chain:
        raise ResourceLimitExceeded(f"chain length {wdata.lam} exceeds max_chain")
    one = Polynomial.constant(n, 1)
    prev = pb
    d = wdata.g
    for nu in range(1, wdata.lam + 1):
        d = partial_derivative(d, n - 1)
        jeps = min(QUARTER, prev.epsilon / 2)
        jnode = state.add(
            FIBER_CHAIN_STEP, Composed(cof.minor, *cofactor_form(cof.p, nu - 1, d), pb.id), jeps,
            [prev.id] + state.premultipliers,
            {"slot": slot, "nu": nu, "part": "jacobian", "weierstrass": pb.id},
        )
        if state.done:
            return None
        kind = CHAIN_TERMINAL if nu == wdata.lam else FIBER_CHAIN_STEP
        cnode = state.add(
            kind, Composed(one, *cofactor_form(cof.p, nu, d), pb.id), min(jeps, squarefree_node.epsilon),
            [jnode.id, squarefree_node.id],
            {"slot": slot, "nu": nu, "part": "comparison", "sigma": 1, "weierstrass": pb.id},
        )
        if state.done:
            return None
        prev = cnode
    lam = wdata.lam
    if (prev.composed.power, prev.composed.image) != cofactor_form(cof.p, lam, one * math.factorial(lam)):
        raise EngineBug("chain terminal differs from lambda! p^lambda")
    p_h = cof.p_pulled
    return state.add(
        RADICAL_ROOT, p_h, prev.epsilon / lam, [prev.id],
        {"sigma": lam, "membership": "global"},
    )


# ---------------------------------------------------------------------------
# completion when the roots leave a positive-dimensional germ


def _squarefree_monomials(n: int, degree: int) -> List[Polynomial]:
    out = []
    for S in itertools.combinations(range(n), degree):
        out.append(Polynomial.monomial(tuple(1 if k in S else 0 for k in range(n))))
    return out


def complete(state: EngineState, multipliers: Sequence[MultiplierNode]) -> List[MultiplierNode]:
    """Extra multipliers making the joint germ isolated; ``[]`` if it already is."""
    cfg = state.config
    n = state.domain.n
    polys = [m.poly for m in multipliers]
    if _finite_colength(polys, cfg) is not None:
        return []
    ids = [m.id for m in multipliers]
    low = min(m.epsilon for m in multipliers)
    ideal = Ideal(polys)
    bound = min(cfg.completion_power_bound, cfg.power_bound_cap)
    roots: List[MultiplierNode] = []
    for degree in range(1, n):
        for c in _squarefree_monomials(n, degree):
            # skip multiples of an earlier root: they add nothing to the radical
            if any(exact_divide(c, r.poly) is not None for r in roots):
                continue
            sigma = minimal_power_in(c, ideal, bound, cfg.budget)
            if sigma is None:
                continue
            roots.append(state.add(RADICAL_ROOT, c, low / sigma, ids,
                                   {"sigma": sigma, "membership": "global", "stage": "completion"}))
    if not roots:
        raise GenericityExhausted("completion found no squarefree monomial in the radical")
    base = polys + [r.poly for r in roots]
    F = list(state.domain.generators)
    rand = rng.stream(cfg.seed, "completion")
    for r in range(min(n - 1, len(roots)), 0, -1):
        for _ in range(cfg.retries):
            Fc, a = draw_generic_combinations(F, n - r, rand, cfg.pool)
            Rc, b = draw_generic_combinations([x.poly for x in roots], r, rand, cfg.pool)
            J = jacobian_determinant(Fc + Rc)
            if J.is_zero() or _finite_colength(base + [J], cfg) is None:
                continue
            eps = min([QUARTER] + [x.epsilon / 2 for x in roots])
            node = state.add(
                COMPLETION_JACOBIAN, J, eps, state.premultipliers + [x.id for x in roots],
                {"premultiplier_coefficients": [[fmt_rational(v) for v in row] for row in a],
                 "multiplier_coefficients": [[fmt_rational(v) for v in row] for row in b]},
            )
            return roots + [node]
    raise GenericityExhausted("completion Jacobian never isolated the origin")


# ---------------------------------------------------------------------------
# step 3: coordinates and the final Jacobian


def finalize(state: EngineState, multipliers: Sequence[MultiplierNode]) -> Certificate:
    """Coordinates from the joint germ, then the Jacobian of the coordinates."""
    dom, cfg = state.domain, state.config
    n = dom.n
    if not state.done:
        polys = [m.poly for m in multipliers]
        res = colength_sequence(Ideal(polys), cfg.colength_ceiling, cfg.budget)
        low = min(m.epsilon for m in multipliers)
        bound = min(max(1, res.colength**2), cfg.power_bound_cap)
        coords = []
        for i in range(n):
            zi = Polynomial.variable(n, i)
            sigma = germ_minimal_power(zi, Ideal(polys), bound, cfg.colength_ceiling, cfg.budget)
            if sigma is None:
                raise EngineBug(f"z{i + 1} has no power in the germ of the multipliers")
            coords.append(state.add(
                COORDINATE_MULTIPLIER, zi, low / sigma, [m.id for m in multipliers],
                {"variable": i + 1, "sigma": sigma, "membership": "germ", "colength": res.colength},
            ))
        one = jacobian_determinant([c.poly for c in coords])
        state.add(FINAL_JACOBIAN, one, min(c.epsilon for c in coords) / 2, [c.id for c in coords], {})
    return _assemble(state)


def _assemble(state: EngineState) -> Certificate:
    if state.terminal is None:
        raise EngineBug("no constant multiplier reached")
    cert = Certificate(state.domain, state.config.seed, list(state.nodes), state.terminal,
                       state.config.snapshot())
    if state.config.self_verify:
        report = verify_certificate(cert)
        if not report.ok:
            raise EngineBug(f"self-verification failed at {report.node}: {report.reason}")
    return cert


def _slot_chain(state: EngineState, H, coeffs, sq_node: MultiplierNode, attempt: int, rand):
    """Weierstrass data and cofactor for every slot, or ``_DrawFailed``."""
    dom, cfg = state.domain, state.config
    n = dom.n
    plans = []
    for slot in range(n):
        h_list = [H[k] for k in range(n) if k != slot]
        fiber_coeffs = [mpq(rand.choice(cfg.pool)) for _ in range(n)]
        frame = fiber_frame(fiber_coeffs)
        fiber = Polynomial._raw(n, {tuple(1 if k == j else 0 for k in range(n)): c
                                    for j, c in enumerate(fiber_coeffs)})
        wdata = weierstrass_image(h_list, sq_node.poly, fiber, cfg.budget)
        cof = find_chain_cofactor(h_list, sq_node.poly, frame, cfg)
        extra = {
            "attempt": attempt,
            "combination_coefficients": [[fmt_rational(c) for c in coeffs[k]] for k in range(n) if k != slot],
        }
        plans.append((slot, h_list, frame, fiber, wdata, cof, extra))
    # in the plane the roots together with the squarefree part must cut out
    # only the origin; from three variables on the completion stage handles it
    polys = [sq_node.poly] + [plan[5].p_pulled for plan in plans]
    if n == 2 and _finite_colength(polys, cfg) is None:
        raise _DrawFailed("multipliers do not cut out an isolated point")
    return plans


def run(domain: SpecialDomain, config: Optional[EngineConfig] = None) -> Certificate:
    """Execute the whole procedure and return a self-verified certificate."""
    config = config or EngineConfig()
    state = initial_state(domain, config)
    sq = initial_jacobian_multiplier(state)
    if state.done:
        return _assemble(state)
    n = domain.n
    F = list(domain.generators)
    rand = rng.stream(config.seed, "fiber-chains")
    for attempt in range(config.retries):
        H, coeffs = draw_generic_combinations(F, n, rand, config.pool)
        try:
            plans = _slot_chain(state, H, coeffs, sq, attempt, rand)
        except _DrawFailed:
            continue
        roots = []
        for slot, h_list, frame, fiber, wdata, cof, extra in plans:
            root = fiber_chain(state, slot + 1, h_list, frame, fiber, wdata, cof, sq, extra)
            if state.done:
                return _assemble(state)
            roots.append(root)
        multipliers = [sq] + roots
        multipliers += complete(state, multipliers)
        if state.done:
            return _assemble(state)
        return finalize(state, multipliers)
    raise GenericityExhausted(f"no generic fiber-chain draw in {config.retries} attempts")
