"""Certificates: domain, multiplier nodes, JSON form, and independent replay.

The verifier trusts nothing stored in a certificate.  Every node is rebuilt
from its parents and its witness using the polynomial and Gröbner
primitives, and every epsilon is recomputed from the rules:

* Jacobian nodes: the minimum over the inputs of the differential's order,
  which is 1/4 for a pre-multiplier and half the epsilon of a multiplier;
* root nodes (``f**sigma`` lies in the ideal of the inputs): minimum input
  epsilon divided by ``sigma``, where ``sigma`` must be the least such power;
* the Weierstrass pullback, a multiple of its input: the input's epsilon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from gmpy2 import mpq

from . import rng
from .groebner import Budget, Ideal, minimal_power_in
from .invariants import NotCertifiedFinite, colength_sequence
from .poly import (
    ParseError,
    Polynomial,
    default_names,
    exact_divide,
    jacobian_determinant,
    ord_at_origin,
    parse,
    partial_derivative,
    squarefree_part,
    substitute,
    to_string,
)

PRE_MULTIPLIER = "PreMultiplier"
INITIAL_JACOBIAN = "InitialJacobian"
SQUAREFREE_RADICAL = "SquarefreeRadical"
WEIERSTRASS_PULLBACK = "WeierstrassPullback"
FIBER_CHAIN_STEP = "FiberChainStep"
CHAIN_TERMINAL = "ChainTerminal"
RADICAL_ROOT = "RadicalRoot"
COORDINATE_MULTIPLIER = "CoordinateMultiplier"
FINAL_JACOBIAN = "FinalJacobian"
COMPLETION_JACOBIAN = "CompletionJacobian"

KINDS = (
    PRE_MULTIPLIER, INITIAL_JACOBIAN, SQUAREFREE_RADICAL, WEIERSTRASS_PULLBACK,
    FIBER_CHAIN_STEP, CHAIN_TERMINAL, RADICAL_ROOT, COORDINATE_MULTIPLIER, FINAL_JACOBIAN,
    COMPLETION_JACOBIAN,
)

CERT_SCHEMA = "kohnlab-certificate/1"

# direct Jacobian checks expand in z while the expansion has at most this many
# monomials, and otherwise compare exact values at seeded rational points
EXPAND_LIMIT = 6000
SAMPLE_POINTS = 4
SAMPLE_RANGE = 10**6
DOMAIN_SCHEMA = "kohnlab/1"

INTERPRETATIONS = [
    "comparison steps swap the minor for the cofactor through the ideal (minor, squarefree part); "
    "they are charged min(parent epsilon) / sigma_step with sigma_step = 1",
    "fiber genericity is checked as: every component image is a hypersurface with an equation monic "
    "in the fiber variable, and the pullback is divisible by the squarefree part",
    "coordinate multipliers use the least power of each coordinate in the germ of the joint multiplier ideal",
    "when the chain roots leave a curve through the origin (three or more variables), squarefree "
    "monomials in their radical are taken as roots and a Jacobian of generic pre-multiplier and root "
    "combinations isolates the origin",
]


def fmt_rational(x) -> str:
    x = mpq(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(s) -> mpq:
    if not isinstance(s, str):
        raise ValueError(f"rational must be a string, got {s!r}")
    num, _, den = s.partition("/")
    value = mpq(int(num), int(den)) if den else mpq(int(num))
    return value


# ---------------------------------------------------------------------------
# domain


@dataclass(frozen=True)
class SpecialDomain:
    n: int
    generators: Tuple[Polynomial, ...]
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, "names", default_names(self.n))
        if len(self.names) != self.n:
            raise ValueError("one variable name per dimension")
        if not self.generators:
            raise ValueError("a domain needs at least one generator")
        if any(g.n != self.n for g in self.generators):
            raise ValueError("generator dimension differs from n")

    @classmethod
    def from_strings(cls, gens: Sequence[str], n: int, names: Optional[Sequence[str]] = None) -> "SpecialDomain":
        names = tuple(names) if names else default_names(n)
        return cls(n, tuple(parse(g, n, names) for g in gens), names)

    def problems(self, ceiling: int = 400, budget: Budget = Budget()) -> List[str]:
        """Reasons this is not a special domain (empty list when it is)."""
        out = []
        for j, g in enumerate(self.generators):
            if g.constant_term():
                out.append(f"generator {j + 1} does not vanish at the origin")
        if out:
            return out
        try:
            colength_sequence(Ideal(list(self.generators)), ceiling, budget)
        except NotCertifiedFinite as exc:
            out.append(f"colength not certified finite: {exc}")
        return out

    def to_json(self) -> dict:
        return {
            "schema": DOMAIN_SCHEMA,
            "n": self.n,
            "vars": list(self.names),
            "generators": [to_string(g, self.names) for g in self.generators],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SpecialDomain":
        if not isinstance(data, dict):
            raise ValueError("domain must be a JSON object")
        schema = data.get("schema", DOMAIN_SCHEMA)
        if schema != DOMAIN_SCHEMA:
            raise ValueError(f"unsupported domain schema {schema!r}")
        n = data["n"]
        if not isinstance(n, int) or n < 1:
            raise ValueError("n must be a positive integer")
        names = data.get("vars") or default_names(n)
        gens = data["generators"]
        if not isinstance(gens, list) or not all(isinstance(g, str) for g in gens):
            raise ValueError("generators must be a list of strings")
        return cls.from_strings(gens, n, names)


# ---------------------------------------------------------------------------
# nodes and certificates


@dataclass(frozen=True)
class Composed:
    """``factor(z) * (p**power * image)(h(z), l(z))`` over a Weierstrass node.

    ``(h, l)`` and the cofactor ``p`` belong to the node named by
    ``pullback``.  Chain multipliers are stored this way: expanded in ``z``
    they reach hundreds of degrees in three variables.  ``power`` is 0
    whenever ``p`` is constant (its powers are folded into ``image``).
    """

    factor: Polynomial
    power: int
    image: Polynomial
    pullback: str

    def is_constant(self) -> bool:
        return self.factor.is_constant() and self.image.is_constant() and self.power == 0

    def constant_term(self):
        return self.factor.constant_term() * self.image.constant_term()

    def to_json(self, names, image_names) -> dict:
        return {
            "factor": to_string(self.factor, names),
            "cofactor_power": self.power,
            "image": to_string(self.image, image_names),
            "map": self.pullback,
        }


@dataclass(frozen=True)
class MultiplierNode:
    id: str
    kind: str
    poly: Optional[Polynomial]  # None exactly when ``composed`` is set
    epsilon: Optional[mpq]
    inputs: Tuple[str, ...]
    witness: dict
    composed: Optional[Composed] = None

    def is_constant(self) -> bool:
        return self.composed.is_constant() if self.composed else self.poly.is_constant()

    def constant_term(self):
        return self.composed.constant_term() if self.composed else self.poly.constant_term()

    def to_json(self, names) -> dict:
        out = {
            "id": self.id,
            "kind": self.kind,
            "poly": None if self.poly is None else to_string(self.poly, names),
            "epsilon": None if self.epsilon is None else fmt_rational(self.epsilon),
            "inputs": list(self.inputs),
            "witness": self.witness,
        }
        if self.composed is not None:
            out["composed"] = self.composed.to_json(names, image_names(len(names)))
        return out


def image_names(n: int) -> Tuple[str, ...]:
    """Variable names of the image ring: ``u1..u_{n-1}`` and the fiber ``t``."""
    return tuple(f"u{i + 1}" for i in range(n - 1)) + ("t",)


@dataclass
class Certificate:
    domain: SpecialDomain
    seed: int
    nodes: List[MultiplierNode]
    terminal: str
    config: dict = field(default_factory=dict)

    def node(self, node_id: str) -> MultiplierNode:
        for nd in self.nodes:
            if nd.id == node_id:
                return nd
        raise KeyError(node_id)

    @property
    def terminal_epsilon(self) -> mpq:
        return self.node(self.terminal).epsilon

    def to_json(self) -> dict:
        names = self.domain.names
        return {
            "schema": CERT_SCHEMA,
            "domain": self.domain.to_json(),
            "seed": self.seed,
            "config": self.config,
            "interpretations": INTERPRETATIONS,
            "nodes": [nd.to_json(names) for nd in self.nodes],
            "terminal": self.terminal,
            "terminal_epsilon": fmt_rational(self.terminal_epsilon),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    @classmethod
    def from_json(cls, data: dict) -> "Certificate":
        if not isinstance(data, dict):
            raise ValueError("certificate must be a JSON object")
        if data.get("schema") != CERT_SCHEMA:
            raise ValueError(f"unsupported certificate schema {data.get('schema')!r}")
        domain = SpecialDomain.from_json(data["domain"])
        nodes = []
        for raw in data["nodes"]:
            eps = raw.get("epsilon")
            witness = raw.get("witness") or {}
            if not isinstance(witness, dict):
                raise ValueError(f"witness of {raw.get('id')} is not an object")
            comp = raw.get("composed")
            composed = None
            if comp is not None:
                if not isinstance(comp, dict):
                    raise ValueError(f"composed form of {raw.get('id')} is not an object")
                power = comp.get("cofactor_power")
                if not isinstance(power, int) or isinstance(power, bool) or power < 0:
                    raise ValueError(f"cofactor power of {raw.get('id')} is not a natural number")
                composed = Composed(
                    parse(comp["factor"], domain.n, domain.names), power,
                    parse(comp["image"], domain.n, image_names(domain.n)),
                    str(comp["map"]),
                )
                poly = None
            else:
                poly = parse(raw["poly"], domain.n, domain.names)
            nodes.append(MultiplierNode(
                str(raw["id"]), str(raw["kind"]), poly,
                None if eps is None else parse_rational(eps),
                tuple(str(i) for i in raw.get("inputs", [])),
                witness, composed,
            ))
        seed = data.get("seed", 0)
        if not isinstance(seed, int):
            raise ValueError("seed must be an integer")
        return cls(domain, seed, nodes, str(data["terminal"]), data.get("config") or {})

    @classmethod
    def loads(cls, text: str) -> "Certificate":
        return cls.from_json(json.loads(text))


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    ok: bool
    node: Optional[str] = None
    reason: str = ""
    checked: int = 0

    def to_json(self) -> dict:
        return {"accepted": self.ok, "failed_node": self.node, "reason": self.reason, "nodes_checked": self.checked}


class _Reject(Exception):
    pass


def _need(cond, msg):
    if not cond:
        raise _Reject(msg)


@dataclass
class _Slot:
    h: List[Polynomial]
    frame: List[List[mpq]]
    fiber: Polynomial
    g: Polynomial
    lam: int
    p: Polynomial
    p_h: Polynomial
    minor: Polynomial
    squarefree_id: str


class _Replayer:
    def __init__(self, cert: Certificate, reference: SpecialDomain, budget: Budget):
        self.cert = cert
        self.ref = reference
        self.budget = budget
        self.n = cert.domain.n
        self.names = cert.domain.names
        self.seen: Dict[str, MultiplierNode] = {}
        self.slots: Dict[str, _Slot] = {}
        ceiling = cert.config.get("colength_ceiling", 400) if isinstance(cert.config, dict) else 400
        if not isinstance(ceiling, int) or isinstance(ceiling, bool) or ceiling < 1:
            raise ValueError(f"colength_ceiling must be a positive integer, got {ceiling!r}")
        self.ceiling = ceiling

    # helpers ---------------------------------------------------------------

    def poly(self, text, names=None) -> Polynomial:
        _need(isinstance(text, str), f"expected a polynomial string, got {text!r}")
        try:
            return parse(text, self.n, names or self.names)
        except ParseError as exc:
            raise _Reject(f"unparsable polynomial {text!r}: {exc}")

    def inputs(self, node) -> List[MultiplierNode]:
        out = []
        for i in node.inputs:
            _need(i in self.seen, f"input {i} is not an earlier node")
            out.append(self.seen[i])
        return out

    def sigma(self, node) -> int:
        s = node.witness.get("sigma")
        _need(isinstance(s, int) and not isinstance(s, bool) and s >= 1, f"sigma must be a positive integer, got {s!r}")
        return s

    def scalar_eps(self, parents) -> List[mpq]:
        vals = [p.epsilon for p in parents if p.kind != PRE_MULTIPLIER]
        _need(all(v is not None for v in vals), "multiplier input without epsilon")
        return vals

    def jacobian_eps(self, parents) -> mpq:
        vals = []
        for p in parents:
            if p.kind == PRE_MULTIPLIER:
                vals.append(parse_rational(p.witness["differential_epsilon"]))
            else:
                vals.append(p.epsilon / 2)
        _need(vals, "Jacobian without inputs")
        return min(vals)

    def root_eps(self, parents, sigma) -> mpq:
        vals = self.scalar_eps(parents)
        _need(vals, "root node without multiplier inputs")
        return min(vals) / sigma

    def rational_matrix(self, rows, nrows, ncols) -> List[List[mpq]]:
        _need(isinstance(rows, list) and len(rows) == nrows, "coefficient matrix has the wrong shape")
        out = []
        for r in rows:
            _need(isinstance(r, list) and len(r) == ncols, "coefficient matrix has the wrong shape")
            out.append([parse_rational(c) for c in r])
        return out

    def combos(self, rows) -> List[Polynomial]:
        out = []
        for row in rows:
            acc = Polynomial.zero(self.n)
            for c, f in zip(row, self.ref.generators):
                acc = acc + f * c
            out.append(acc)
        return out

    def power_check(self, node, ideal_polys, membership):
        sigma = self.sigma(node)
        if membership == "global":
            found = minimal_power_in(node.poly, Ideal(ideal_polys, self.n), sigma, self.budget)
        elif membership == "germ":
            res = colength_sequence(Ideal(ideal_polys, self.n), self.ceiling, self.budget)
            found = minimal_power_in(node.poly, Ideal(list(res.basis.basis), self.n), sigma, self.budget)
        else:
            raise _Reject(f"unknown membership kind {membership!r}")
        _need(found is not None, f"power {sigma} is not in the ideal of the inputs")
        _need(found == sigma, f"sigma {sigma} is not minimal: power {found} already lies in the ideal")

    # node checks -------------------------------------------------------------

    def check(self, node: MultiplierNode):
        _need(node.kind in KINDS, f"unknown kind {node.kind!r}")
        _need(node.id not in self.seen, "duplicate node id")
        if node.kind == PRE_MULTIPLIER:
            _need(node.epsilon is None, "pre-multipliers carry no scalar epsilon")
        else:
            _need(node.epsilon is not None and 0 < node.epsilon <= 1, "epsilon outside (0, 1]")
        parents = self.inputs(node)
        for p in parents:
            if p.epsilon is not None and node.epsilon is not None:
                _need(node.epsilon <= p.epsilon, f"epsilon increases along the edge from {p.id}")
        getattr(self, "_" + node.kind)(node, parents)
        self.seen[node.id] = node

    def _PreMultiplier(self, node, parents):
        _need(not parents, "pre-multiplier with inputs")
        j = node.witness.get("generator")
        _need(isinstance(j, int) and 1 <= j <= len(self.ref.generators), "generator index out of range")
        _need(node.poly == self.ref.generators[j - 1], f"polynomial differs from generator {j} of the domain")
        _need(parse_rational(node.witness.get("differential_epsilon", "")) == mpq(1, 4),
              "pre-multiplier differential epsilon must be 1/4")

    def _InitialJacobian(self, node, parents):
        _need(parents and all(p.kind == PRE_MULTIPLIER for p in parents), "inputs must be pre-multipliers")
        rows = self.rational_matrix(node.witness.get("coefficients"), self.n, len(self.ref.generators))
        G = self.combos(rows)
        J = jacobian_determinant(G)
        _need(J == node.poly, "Jacobian of the recorded combinations differs")
        try:
            m = colength_sequence(Ideal(G), self.ceiling, self.budget).colength
        except NotCertifiedFinite:
            raise _Reject("combinations do not have finite colength")
        _need(node.witness.get("colength") == m, f"recorded colength differs from {m}")
        _need(ord_at_origin(J) <= m, "Jacobian vanishes to order above the colength")
        _need(node.epsilon == self.jacobian_eps(parents), "epsilon does not match the Jacobian rule")

    def _SquarefreeRadical(self, node, parents):
        _need(len(parents) == 1, "needs exactly one input")
        (parent,) = parents
        _need(not parent.poly.is_zero(), "input is zero")
        _need(node.poly == squarefree_part(parent.poly), "not the squarefree part of the input")
        _need(exact_divide(parent.poly, node.poly) is not None, "squarefree part does not divide the input")
        self.power_check(node, [parent.poly], "global")
        _need(node.epsilon == self.root_eps(parents, self.sigma(node)), "epsilon does not match the root rule")

    def _RadicalRoot(self, node, parents):
        _need(parents, "root without inputs")
        _need(node.composed is None, "roots are stored expanded")
        if any(p.composed is not None for p in parents):
            self._chain_root(node, parents)
            return
        self.power_check(node, [p.poly for p in parents], node.witness.get("membership"))
        _need(node.epsilon == self.root_eps(parents, self.sigma(node)), "epsilon does not match the root rule")

    def _chain_root(self, node, parents):
        # the chain terminal is c * p(h)**lam; p(h)**sigma lies in that principal
        # ideal for sigma = lam, and for no smaller sigma since p(h) is not constant
        _need(len(parents) == 1 and parents[0].kind == CHAIN_TERMINAL, "root of a chain needs its terminal alone")
        _need(node.witness.get("membership") == "global", "chain roots use global membership")
        term = parents[0]
        slot = self.slots.get(term.composed.pullback)
        _need(slot is not None, "terminal does not point at a verified Weierstrass node")
        sigma = self.sigma(node)
        _need(sigma == slot.lam, "chain root exponent must be the chain length")
        c = term.composed
        _need(c.factor == Polynomial.constant(self.n, 1), "terminal carries a factor")
        _need((c.power, c.image) == cofactor_form(slot.p, sigma, Polynomial.constant(self.n, math.factorial(sigma))),
              "terminal is not lambda! p^lambda")
        _need(node.poly == slot.p_h, "root is not the cofactor in h")
        _need(not slot.p_h.is_constant(), "constant cofactor has no chain root")
        _need(node.epsilon == self.root_eps(parents, sigma), "epsilon does not match the root rule")

    def _CoordinateMultiplier(self, node, parents):
        i = node.witness.get("variable")
        _need(isinstance(i, int) and 1 <= i <= self.n, "variable index out of range")
        _need(node.poly == Polynomial.variable(self.n, i - 1), f"polynomial is not z{i}")
        self._RadicalRoot(node, parents)

    def _CompletionJacobian(self, node, parents):
        pre = [p for p in parents if p.kind == PRE_MULTIPLIER]
        mult = [p for p in parents if p.kind != PRE_MULTIPLIER]
        _need(pre and mult, "needs pre-multiplier and multiplier inputs")
        _need(parents == pre + mult, "pre-multiplier inputs must come first")
        a = node.witness.get("premultiplier_coefficients")
        b = node.witness.get("multiplier_coefficients")
        _need(isinstance(a, list) and isinstance(b, list) and len(a) + len(b) == self.n,
              f"needs {self.n} coefficient rows in total")
        _need(len(a) >= 1 and len(b) >= 1, "both coefficient blocks must be nonempty")
        G = self.combos(self.rational_matrix(a, len(a), len(self.ref.generators)))
        for row in self.rational_matrix(b, len(b), len(mult)):
            acc = Polynomial.zero(self.n)
            for c, m in zip(row, mult):
                acc = acc + m.poly * c
            G.append(acc)
        _need(node.poly == jacobian_determinant(G), "Jacobian of the recorded combinations differs")
        _need(node.epsilon == self.jacobian_eps(parents), "epsilon does not match the Jacobian rule")

    def _FinalJacobian(self, node, parents):
        _need(len(parents) == self.n, f"needs {self.n} inputs")
        _need(node.poly == jacobian_determinant([p.poly for p in parents]), "Jacobian of the inputs differs")
        _need(node.epsilon == self.jacobian_eps(parents), "epsilon does not match the Jacobian rule")

    def _WeierstrassPullback(self, node, parents):
        from .engine import find_chain_cofactor, frame_minor, weierstrass_image, EngineConfig

        _need(len(parents) == 1 and parents[0].kind == SQUAREFREE_RADICAL, "input must be the squarefree part")
        sq = parents[0].poly
        w = node.witness
        n = self.n
        inames = image_names(n)
        rows = self.rational_matrix(w.get("combination_coefficients"), n - 1, len(self.ref.generators))
        h = self.combos(rows)
        _need(isinstance(w.get("h"), list) and [self.poly(x) for x in w["h"]] == h,
              "recorded h differs from the recorded combinations")
        frame = self.rational_matrix(w.get("frame"), n, n)
        fiber = Polynomial._raw(n, {tuple(1 if k == j else 0 for k in range(n)): c
                                    for j, c in enumerate(frame[-1]) if c})
        _need(self.poly(w.get("fiber_form")) == fiber, "fiber form differs from the frame's last row")
        det = _det(frame)
        _need(det != 0, "frame is singular")
        g = self.poly(w.get("g"), inames)
        lam = g.degree_in(n - 1)
        _need(w.get("lambda") == lam and lam >= 1, "lambda differs from the fiber degree of g")
        lead = [c for m, c in g.terms.items() if m[-1] == lam]
        _need(len(lead) == 1 and lead[0] == 1 and
              next(m for m in g.terms if m[-1] == lam)[:-1] == (0,) * (n - 1),
              "g is not monic in the fiber variable")
        a = w.get("a")
        _need(isinstance(a, list) and len(a) == lam, "wrong number of Weierstrass coefficients")
        for j, txt in enumerate(a):
            coeff = Polynomial._raw(n, {m[:-1] + (0,): c for m, c in g.terms.items() if m[-1] == j})
            _need(self.poly(txt, inames) == coeff, f"Weierstrass coefficient a_{j} differs")
        cfg = EngineConfig(budget=self.budget, colength_ceiling=self.ceiling, self_verify=False)
        redo = weierstrass_image(h, sq, fiber, self.budget)
        _need(redo.g == g, "re-elimination gives a different Weierstrass polynomial")
        # redo.pullback is g(h, l) expanded
        _need(redo.pullback == node.poly, "polynomial is not the pullback of g")
        q = self.poly(w.get("quotient"))
        _need(sq * q == node.poly, "pullback is not the squarefree part times the recorded quotient")
        minor = self.poly(w.get("minor"))
        _need(minor == frame_minor(h, frame), "minor differs from the frame minor")
        _need(minor * det == jacobian_determinant(h + [fiber]), "minor disagrees with the Jacobian against the fiber form")
        p = self.poly(w.get("cofactor"), inames)
        _need(p.degree_in(n - 1) <= 0, "cofactor depends on the fiber variable")
        p_h = substitute(p, h + [Polynomial.zero(n)])
        kind = w.get("cofactor_membership")
        if kind == "global":
            basis = Ideal([minor, sq]).groebner(budget=self.budget)
        elif kind == "germ":
            basis = colength_sequence(Ideal([minor, sq]), self.ceiling, self.budget).basis
        else:
            raise _Reject(f"unknown cofactor membership {kind!r}")
        _need(basis.contains(p_h), "cofactor is not in the ideal of the minor and the squarefree part")
        redo_c = find_chain_cofactor(h, sq, frame, cfg)
        _need(redo_c.p == p, "re-elimination gives a different cofactor")
        s = w.get("s")
        if s is not None:
            _need(p == Polynomial.monomial((s,) + (0,) * (n - 1)), "s does not match the cofactor")
        _need(node.epsilon == min(self.scalar_eps(parents)), "epsilon does not match the ideal rule")
        self.slots[node.id] = _Slot(h, frame, fiber, g, lam, p, p_h, minor, parents[0].id)

    def _chain_slot(self, node) -> Tuple[_Slot, int]:
        wid = node.witness.get("weierstrass")
        _need(wid in self.slots, "chain step does not point at a verified Weierstrass node")
        nu = node.witness.get("nu")
        slot = self.slots[wid]
        _need(isinstance(nu, int) and 1 <= nu <= slot.lam, "chain index out of range")
        _need(node.witness.get("slot") == self.seen[wid].witness.get("slot"), "slot differs from its Weierstrass node")
        return slot, nu

    def _fiber_factor(self, slot: _Slot, nu: int, extra: int = 0) -> Tuple[int, Polynomial]:
        """``p**(nu-1+extra) * d^nu g / dt^nu`` as (power of p, rest)."""
        d = slot.g
        for _ in range(nu):
            d = partial_derivative(d, self.n - 1)
        return cofactor_form(slot.p, nu - 1 + extra, d)

    def _composed(self, node, slot_id) -> Composed:
        c = node.composed
        _need(c is not None and node.poly is None, "chain multipliers must be stored in composed form")
        _need(c.pullback == slot_id, "composed form uses the map of another Weierstrass node")
        return c

    def _expanded_size(self, c: Composed, slot: _Slot) -> int:
        degs = [h.total_degree() for h in slot.h] + [1]

        def zdeg(f):
            return max((sum(e * d for e, d in zip(m, degs)) for m in f.terms), default=0)

        D = zdeg(c.image) + c.power * zdeg(slot.p) + max(c.factor.total_degree(), 0) + 1
        return math.comb(D + self.n, self.n)

    def _expand(self, c: Composed, slot: _Slot) -> Polynomial:
        return c.factor * substitute((slot.p ** c.power) * c.image, slot.h + [slot.fiber])

    def _direct_jacobian(self, node, prev, slot: _Slot):
        """Jacobian of ``(h, prev)`` over ``det B`` against the node, expanded or at sample points."""
        det = _det(slot.frame)
        big = node.composed is not None and self._expanded_size(node.composed, slot) > EXPAND_LIMIT
        if prev.composed is not None:
            big = big or self._expanded_size(prev.composed, slot) > EXPAND_LIMIT
        if not big:
            prev_poly = prev.poly if prev.composed is None else self._expand(prev.composed, slot)
            direct = jacobian_determinant(slot.h + [prev_poly]) * (1 / det)
            here = node.poly if node.composed is None else self._expand(node.composed, slot)
            _need(direct == here, "direct Jacobian differs from the node")
            return
        rand = rng.stream(self.cert.seed, f"replay:{node.id}")
        for _ in range(SAMPLE_POINTS):
            P = [mpq(rand.randint(-SAMPLE_RANGE, SAMPLE_RANGE)) for _ in range(self.n)]
            inputs = [_dual_of_poly(h, P) for h in slot.h] + [_dual_of_poly(slot.fiber, P)]
            rows = [x[1] for x in inputs[:-1]]
            rows.append(self._dual_of_node(prev, slot, P, inputs)[1])
            lhs = _det(rows) / det
            rhs = self._dual_of_node(node, slot, P, inputs)[0]
            _need(lhs == rhs, "direct Jacobian differs from the node at a sample point")

    def _dual_of_node(self, node, slot: _Slot, P, inputs):
        if node.composed is None:
            return _dual_of_poly(node.poly, P)
        c = node.composed
        acc = _dual_mul(_dual_of_poly(c.factor, P), _dual_eval(c.image, inputs))
        if c.power:
            acc = _dual_mul(acc, _dual_pow(_dual_eval(slot.p, inputs), c.power))
        return acc

    def _FiberChainStep(self, node, parents):
        slot, nu = self._chain_slot(node)
        wid = node.witness["weierstrass"]
        part = node.witness.get("part")
        c = self._composed(node, wid)
        if part == "jacobian":
            _need(node.kind == FIBER_CHAIN_STEP, "Jacobian part must be a chain step")
            _need(parents, "chain step without inputs")
            prev, rest = parents[0], parents[1:]
            if nu == 1:
                _need(prev.id == wid, "first step must differentiate the pullback")
                prev_power, prev_image = 0, slot.g
            else:
                _need(prev.kind == FIBER_CHAIN_STEP and prev.witness.get("part") == "comparison"
                      and prev.witness.get("nu") == nu - 1
                      and prev.witness.get("weierstrass") == wid,
                      "previous link of the chain is wrong")
                pc = self._composed(prev, wid)
                _need(pc.factor == Polynomial.constant(self.n, 1), "previous link carries a factor")
                prev_power, prev_image = pc.power, pc.image
            _need(rest and all(p.kind == PRE_MULTIPLIER for p in rest), "h must come from pre-multipliers")
            _need(c.factor == slot.minor, "factor of a Jacobian step must be the minor")
            # p is free of t, so differentiating in t only touches the image part
            _need(c.power == prev_power and c.image == partial_derivative(prev_image, self.n - 1),
                  "image is not the fiber derivative of the previous link")
            _need((c.power, c.image) == self._fiber_factor(slot, nu),
                  "image is not the closed-form fiber derivative")
            self._direct_jacobian(node, prev, slot)
            _need(node.epsilon == self.jacobian_eps(parents), "epsilon does not match the Jacobian rule")
        elif part == "comparison":
            _need(len(parents) == 2, "comparison needs the Jacobian step and the squarefree part")
            jac, sq = parents
            _need(jac.kind == FIBER_CHAIN_STEP and jac.witness.get("part") == "jacobian"
                  and jac.witness.get("nu") == nu and jac.witness.get("weierstrass") == wid,
                  "comparison must follow the Jacobian step of the same index")
            _need(sq.id == slot.squarefree_id, "second input must be the squarefree part")
            _need(node.kind == (CHAIN_TERMINAL if nu == slot.lam else FIBER_CHAIN_STEP),
                  "only the last comparison is the chain terminal")
            sigma = self.sigma(node)
            _need(sigma == 1, "comparison steps use exponent 1")
            jc = self._composed(jac, wid)
            _need(jc.factor == slot.minor and (jc.power, jc.image) == self._fiber_factor(slot, nu),
                  "Jacobian step is not minor times fiber derivative")
            _need(c.factor == Polynomial.constant(self.n, 1)
                  and (c.power, c.image) == self._fiber_factor(slot, nu, 1),
                  "comparison polynomial is not cofactor times fiber derivative")
            _need(node.epsilon == self.root_eps(parents, sigma), "epsilon does not match the root rule")
        else:
            raise _Reject(f"unknown chain part {part!r}")

    _ChainTerminal = _FiberChainStep


def _dual_of_poly(f: Polynomial, P):
    """Value and gradient of ``f`` at ``P``."""
    return f.evaluate(P), [partial_derivative(f, i).evaluate(P) for i in range(f.n)]


def _dual_mul(a, b):
    return a[0] * b[0], [a[0] * y + b[0] * x for x, y in zip(a[1], b[1])]


def _dual_eval(f: Polynomial, inputs):
    """First-order jet of ``f(inputs)`` where each input is a (value, gradient) jet."""
    width = len(inputs[0][1])
    powers: Dict[Tuple[int, int], tuple] = {}

    def power(k, e):
        if (k, e) not in powers:
            v, g = inputs[k]
            powers[(k, e)] = (v**e, [e * v ** (e - 1) * x for x in g])
        return powers[(k, e)]

    val = mpq(0)
    grad = [mpq(0)] * width
    for mono, coeff in f.terms.items():
        acc = (mpq(coeff), [mpq(0)] * width)
        for k, e in enumerate(mono):
            if e:
                acc = _dual_mul(acc, power(k, e))
        val += acc[0]
        grad = [a + b for a, b in zip(grad, acc[1])]
    return val, grad


def _dual_pow(a, e: int):
    v, g = a
    return v**e, [e * v ** (e - 1) * x for x in g]


def cofactor_form(p: Polynomial, power: int, rest: Polynomial) -> Tuple[int, Polynomial]:
    """Normal form of ``p**power * rest`` as stored in :class:`Composed`."""
    if p.is_constant():
        return 0, rest * (p.constant_term() ** power)
    return power, rest


def _det(M: List[List[mpq]]) -> mpq:
    A = [list(r) for r in M]
    n = len(A)
    det = mpq(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c]), None)
        if piv is None:
            return mpq(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            if A[r][c]:
                f = A[r][c] / A[c][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return det


def verify_certificate(cert, domain: Optional[SpecialDomain] = None, budget: Budget = Budget()) -> VerificationReport:
    """Replay ``cert`` (a :class:`Certificate`, a JSON dict, or JSON text).

    With ``domain`` given, pre-multipliers are checked against it rather
    than against the domain stored in the certificate.  Never raises on
    malformed input: problems come back as a rejecting report.
    """
    try:
        if isinstance(cert, str):
            cert = Certificate.loads(cert)
        elif isinstance(cert, dict):
            cert = Certificate.from_json(cert)
    except Exception as exc:  # malformed JSON or fields
        return VerificationReport(False, None, f"malformed certificate: {type(exc).__name__}: {exc}")
    reference = domain or cert.domain
    if reference.n != cert.domain.n:
        return VerificationReport(False, None, "certificate dimension differs from the domain")
    try:
        rep = _Replayer(cert, reference, budget)
    except Exception as exc:
        return VerificationReport(False, None, f"malformed certificate: {type(exc).__name__}: {exc}")
    for k, node in enumerate(cert.nodes):
        try:
            rep.check(node)
        except _Reject as exc:
            return VerificationReport(False, node.id, str(exc), k)
        except Exception as exc:
            return VerificationReport(False, node.id, f"{type(exc).__name__}: {exc}", k)
    term = rep.seen.get(cert.terminal)
    if term is None:
        return VerificationReport(False, cert.terminal, "terminal is not a node", len(cert.nodes))
    if not (term.is_constant() and term.constant_term() != 0):
        return VerificationReport(False, term.id, "terminal polynomial is not a nonzero constant", len(cert.nodes))
    if term.epsilon is None or term.epsilon <= 0:
        return VerificationReport(False, term.id, "terminal epsilon is not positive", len(cert.nodes))
    return VerificationReport(True, None, "", len(cert.nodes))
