"""Property suites over seeded corpora.

Each suite draws a corpus, runs one check per case and sorts the outcome
into pass, failure (the claimed statement is violated: a bug, or a
statement that is false as posed) or skip (precondition not met, or a
resource budget ran out).  Failures echo their full input so they can be
replayed alone with :func:`run_case`.

=========  ==============================================================
``a1``     ``rho * J(g)`` lies in ``(g)`` when ``rho`` vanishes on ``V(g)``
``a2``     ``f**(n+1)`` lies in the gradient ideal of ``f``
``a3``     the ideal of ``nu x nu`` Jacobian minors (``nu < n``) contains
           a power of the maximal ideal
``a4``     the Jacobian of an isolated map germ is not in its ideal
``i4``     ``p <= q <= (n+2) p`` for monomial ideals
``i5``     ``q <= s <= C(n+q-1, q-1)``
``i6``     ``f**sigma`` lies in an m-primary ideal of colength ``m`` for
           some ``sigma <= m**2``
``iii4``   ``n`` generic combinations have colength at most ``p**n``
``iii5``   their Jacobian vanishes to order at most that colength
=========  ==============================================================
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from . import rng
from .engine import default_pool, draw_generic_combinations
from .groebner import Budget, Ideal, ResourceLimitExceeded, ideal_member, radical_member
from .invariants import (
    NotCertifiedFinite,
    colength_sequence,
    germ_member,
    germ_minimal_power,
    lojasiewicz_p_monomial,
    min_q_with_power_contained,
)
from .poly import Polynomial, jacobian_determinant, minor_jacobian, ord_at_origin, parse, partial_derivative, to_string

__all__ = [
    "Skip",
    "SuiteResult",
    "SUITES",
    "DEFAULT_CASES",
    "check_A1",
    "check_A2",
    "check_A3",
    "check_A4",
    "gradient_contains",
    "run_case",
    "run_suite",
    "run_inequality_suites",
    "run_all",
]

SUITE_BUDGET = Budget(max_pairs=50_000, max_degree=200)
# colengths in the suites are small; a non-isolated germ climbs past this quickly
SUITE_CEILING = 120


class Skip(Exception):
    """Precondition of a check not met; the case does not count."""


# ---------------------------------------------------------------------------
# checks


def _local_colength(polys: Sequence[Polynomial], budget: Budget) -> int:
    try:
        return colength_sequence(Ideal(list(polys)), SUITE_CEILING, budget).colength
    except NotCertifiedFinite:
        raise Skip("colength not finite")


def check_A1(g_list: Sequence[Polynomial], rho: Polynomial, budget: Budget = SUITE_BUDGET) -> bool:
    """``rho * J(g) in (g)`` for ``rho`` vanishing on the common zeros of ``g``."""
    n = g_list[0].n
    if len(g_list) != n:
        raise Skip(f"need {n} functions")
    _local_colength(g_list, budget)
    I = Ideal(list(g_list))
    if not radical_member(rho, I, budget):
        raise Skip("rho does not vanish on the zero set")
    # germ membership: the statement is about the local ring at the origin
    return germ_member(rho * jacobian_determinant(list(g_list)), I, budget=budget)


def gradient_contains(f: Polynomial, power: int, budget: Budget = SUITE_BUDGET) -> bool:
    """Is ``f**power`` in the germ of the gradient ideal of ``f``?"""
    grad = Ideal([partial_derivative(f, i) for i in range(f.n)])
    return germ_member(f**power, grad, budget=budget)


def check_A2(f: Polynomial, budget: Budget = SUITE_BUDGET) -> bool:
    """``f**(n+1)`` lies in the gradient ideal (germ at the origin)."""
    if f.constant_term() != 0:
        raise Skip("f(0) != 0")
    _local_colength([partial_derivative(f, i) for i in range(f.n)], budget)
    return gradient_contains(f, f.n + 1, budget)


def jacobian_minor_ideal(F_list: Sequence[Polynomial], nu: int) -> List[Polynomial]:
    """All ``nu x nu`` Jacobian minors of ``F_list``, over every row and column choice."""
    n = F_list[0].n
    out = []
    for rows in itertools.combinations(range(len(F_list)), nu):
        fs = [F_list[j] for j in rows]
        for cols in itertools.combinations(range(n), nu):
            m = minor_jacobian(fs, list(cols))
            if not m.is_zero():
                out.append(m)
    return out


def check_A3(F_list: Sequence[Polynomial], nu: int, budget: Budget = SUITE_BUDGET,
             ceiling: int = SUITE_CEILING) -> Optional[int]:
    """Least ``k`` with ``m^k`` in the germ of the ``nu``-minor ideal, or ``None``.

    ``k = 0`` (the minors generate the unit ideal) is reported as 1.
    """
    n = F_list[0].n
    if not 1 <= nu < n:
        raise Skip(f"nu={nu} outside 1..{n - 1}")
    if any(f.constant_term() != 0 for f in F_list):
        raise Skip("generators must vanish at the origin")
    I = Ideal(list(F_list))
    bound = 4 * max(f.total_degree() for f in F_list) * n
    if min_q_with_power_contained(I, bound, budget) is None:
        raise Skip("generators contain no power of the maximal ideal")
    minors = jacobian_minor_ideal(F_list, nu)
    if not minors:
        return None
    try:
        res = colength_sequence(Ideal(minors), ceiling, budget)
    except NotCertifiedFinite:
        return None
    return max(1, res.q_local)


def check_A4(h_list: Sequence[Polynomial], budget: Budget = SUITE_BUDGET) -> bool:
    """The Jacobian of an isolated map germ is not in the ideal of its components."""
    n = h_list[0].n
    if len(h_list) != n:
        raise Skip(f"need {n} functions")
    _local_colength(h_list, budget)
    return not germ_member(jacobian_determinant(list(h_list)), Ideal(list(h_list)), budget=budget)


# ---------------------------------------------------------------------------
# corpora


def _monomial(n: int, exps) -> Polynomial:
    return Polynomial.monomial(tuple(exps))


def _random_exponent(rand, n: int, lo: int, hi: int, allowed=None):
    allowed = list(range(n)) if allowed is None else list(allowed)
    d = rand.randint(lo, hi)
    e = [0] * n
    for _ in range(d):
        e[rand.choice(allowed)] += 1
    return e


def monomial_ideal(rand, n: int, max_exp: int = 6) -> List[Polynomial]:
    """Pure powers of every variable plus up to ``4 - n`` mixed monomials."""
    a = [rand.randint(1, max_exp) for _ in range(n)]
    gens = [_monomial(n, [a[i] if k == i else 0 for k in range(n)]) for i in range(n)]
    for _ in range(rand.randint(0, 4 - n)):
        e = _random_exponent(rand, n, 2, max_exp)
        if sum(1 for x in e if x) >= 2:
            gens.append(_monomial(n, e))
    return gens


def triangular_map(rand, n: int, max_exp: int) -> List[Polynomial]:
    """``z_i^{a_i}`` plus terms in the later variables only; zero set is the origin."""
    gens = []
    for i in range(n):
        f = _monomial(n, [rand.randint(1, max_exp) if k == i else 0 for k in range(n)])
        later = list(range(i + 1, n))
        if later:
            for _ in range(rand.randint(0, 2)):
                e = _random_exponent(rand, n, 1, 4, later)
                f = f + _monomial(n, e) * rand.choice([-3, -2, -1, 1, 2, 3])
        gens.append(f)
    return gens


def vanishing_poly(rand, n: int, max_degree: int = 3, max_terms: int = 3) -> Polynomial:
    f = Polynomial.zero(n)
    while f.is_zero():
        for _ in range(rand.randint(1, max_terms)):
            f = f + _monomial(n, _random_exponent(rand, n, 1, max_degree)) * rand.choice([-2, -1, 1, 2, 3])
    return f


def non_quasihomogeneous(rand) -> Polynomial:
    """``z1^a + z2^b + z1^c z2^d`` with ``c <= a-2``, ``d <= b-2``, ``c/a + d/b > 1``."""
    while True:
        a, b = rand.randint(4, 7), rand.randint(4, 7)
        c, d = rand.randint(1, a - 2), rand.randint(1, b - 2)
        if c * b + d * a > a * b:
            return _monomial(2, (a, 0)) + _monomial(2, (0, b)) + _monomial(2, (c, d))


# ---------------------------------------------------------------------------
# cases


def _names(n):
    return tuple(f"z{i + 1}" for i in range(n))


def _echo(polys: Sequence[Polynomial]) -> List[str]:
    return [to_string(p, _names(p.n)) for p in polys]


def _n(rand) -> int:
    return rand.choice((2, 3))


def _case_i4(rand):
    n = _n(rand)
    gens = monomial_ideal(rand, n)
    I = Ideal(gens)
    p = lojasiewicz_p_monomial(I)
    q = min_q_with_power_contained(I, (n + 2) * p + 1, SUITE_BUDGET)
    ok = q is not None and p <= q <= (n + 2) * p
    return ok, {"n": n, "generators": _echo(gens)}, {"p": p, "q": q}


def _case_i5(rand):
    n = _n(rand)
    gens = monomial_ideal(rand, n)
    res = colength_sequence(Ideal(gens), budget=SUITE_BUDGET)
    s, q = res.colength, max(1, res.q_local)
    bound = math.comb(n + q - 1, q - 1)
    return q <= s <= bound, {"n": n, "generators": _echo(gens)}, {"q": q, "s": s, "binomial": bound}


def _case_i6(rand):
    n = _n(rand)
    gens = triangular_map(rand, n, 4 if n == 2 else 2)
    f = vanishing_poly(rand, n)
    echo = {"n": n, "generators": _echo(gens), "f": _echo([f])[0]}
    m = _local_colength(gens, SUITE_BUDGET)
    if m > 12:
        raise Skip(f"colength {m} above 12")
    sigma = germ_minimal_power(f, Ideal(gens), m * m, budget=SUITE_BUDGET)
    return sigma is not None and sigma <= m * m, echo, {"m": m, "sigma": sigma}


def _generic_combos(rand, gens, n):
    pool = default_pool()
    for _ in range(8):
        H, coeffs = draw_generic_combinations(gens, n, rand, pool)
        try:
            return H, coeffs, colength_sequence(Ideal(H), budget=SUITE_BUDGET).colength
        except NotCertifiedFinite:
            continue
    raise Skip("no generic draw with finite colength")


def _case_iii4(rand):
    n = _n(rand)
    gens = monomial_ideal(rand, n, 4 if n == 3 else 6)
    p = lojasiewicz_p_monomial(Ideal(gens))
    H, coeffs, colength = _generic_combos(rand, gens, n)
    echo = {"n": n, "generators": _echo(gens), "combinations": _echo(H)}
    return colength <= p**n, echo, {"p": p, "colength": colength, "bound": p**n}


def _case_iii5(rand):
    n = _n(rand)
    gens = monomial_ideal(rand, n, 4 if n == 3 else 6)
    H, coeffs, colength = _generic_combos(rand, gens, n)
    J = jacobian_determinant(H)
    order = ord_at_origin(J)
    echo = {"n": n, "generators": _echo(gens), "combinations": _echo(H)}
    return order <= colength, echo, {"ord": order, "colength": colength}


def _case_a1(rand):
    n = _n(rand)
    g = triangular_map(rand, n, 4 if n == 2 else 2)
    rho = vanishing_poly(rand, n, 2, 2)
    echo = {"n": n, "g": _echo(g), "rho": _echo([rho])[0]}
    return check_A1(g, rho), echo, {}


def _case_a2(rand, index):
    kind = index % 3
    if kind == 0:
        f = non_quasihomogeneous(rand)
        echo = {"n": 2, "f": _echo([f])[0], "family": "non-quasi-homogeneous"}
        outside = not gradient_contains(f, 1)
        ok = check_A2(f) and outside
        return ok, echo, {"f_outside_gradient_ideal": outside}
    n = _n(rand)
    if kind == 1:
        f = sum((_monomial(n, [rand.randint(2, 5) if k == i else 0 for k in range(n)]) for i in range(n)),
                Polynomial.zero(n))
        family = "sum of powers"
    else:
        f = Polynomial.zero(n)
        for i in range(n):
            f = f + _monomial(n, [rand.randint(2, 4) if k == i else 0 for k in range(n)])
        f = f + vanishing_poly(rand, n, 4, 2) * vanishing_poly(rand, n, 1, 1)
        family = "perturbed sum of powers"
    echo = {"n": n, "f": _echo([f])[0], "family": family}
    return check_A2(f), echo, {}


def _case_a3(rand):
    n = _n(rand)
    F = triangular_map(rand, n, 3)
    nu = rand.randint(1, n - 1)
    k = check_A3(F, nu)
    return k is not None, {"n": n, "F": _echo(F), "nu": nu}, {"k": k}


def _case_a4(rand):
    n = _n(rand)
    h = triangular_map(rand, n, 4 if n == 2 else 3)
    return check_A4(h), {"n": n, "h": _echo(h)}, {}


_CASES: Dict[str, Callable] = {
    "a1": _case_a1,
    "a2": _case_a2,
    "a3": _case_a3,
    "a4": _case_a4,
    "i4": _case_i4,
    "i5": _case_i5,
    "i6": _case_i6,
    "iii4": _case_iii4,
    "iii5": _case_iii5,
}

SUITES = tuple(_CASES)
DEFAULT_CASES = {"a1": 30, "a2": 30, "a3": 10, "a4": 30, "i4": 100, "i5": 100, "i6": 50, "iii4": 50, "iii5": 50}


def run_case(suite: str, seed: int, index: int) -> dict:
    """One case, reproducible from ``(suite, seed, index)`` alone."""
    rand = rng.stream(seed, f"suite:{suite}:{index}")
    fn = _CASES[suite]
    try:
        ok, echo, detail = fn(rand, index) if suite == "a2" else fn(rand)
    except Skip as exc:
        return {"index": index, "status": "skip", "reason": str(exc)}
    except ResourceLimitExceeded as exc:
        return {"index": index, "status": "resource", "reason": str(exc)}
    return {"index": index, "status": "pass" if ok else "fail", "input": echo, "detail": detail}


def _run_case_args(args):
    return run_case(*args)


@dataclass
class SuiteResult:
    name: str
    seed: int
    cases: int
    passed: int = 0
    failures: List[dict] = field(default_factory=list)
    skips: List[dict] = field(default_factory=list)
    resource_skips: List[dict] = field(default_factory=list)
    wall_time: Optional[float] = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self, timings: bool = False) -> dict:
        out = {
            "suite": self.name,
            "seed": self.seed,
            "cases": self.cases,
            "passed": self.passed,
            "failed": len(self.failures),
            "skipped": len(self.skips),
            "resource_skipped": len(self.resource_skips),
            "ok": self.ok,
            "failures": self.failures,
            "skips": self.skips,
            "resource_skips": self.resource_skips,
        }
        if timings and self.wall_time is not None:
            out["wall_time_s"] = round(self.wall_time, 3)
        return out


def run_suite(name: str, seed: int = 0, cases: Optional[int] = None, jobs: int = 1) -> SuiteResult:
    if name not in _CASES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    count = DEFAULT_CASES[name] if cases is None else cases
    start = time.perf_counter()
    args = [(name, seed, i) for i in range(count)]
    if jobs > 1 and count > 1:
        import multiprocessing

        with multiprocessing.Pool(jobs) as pool:
            outcomes = pool.map(_run_case_args, args)  # map keeps case order
    else:
        outcomes = [run_case(*a) for a in args]
    result = SuiteResult(name, seed, count)
    for o in outcomes:
        if o["status"] == "pass":
            result.passed += 1
        elif o["status"] == "fail":
            result.failures.append(dict(o, seed=seed, suite=name))
        elif o["status"] == "skip":
            result.skips.append(o)
        else:
            result.resource_skips.append(o)
    result.wall_time = time.perf_counter() - start
    return result


def run_inequality_suites(seed: int = 0, sizes: Optional[Dict[str, int]] = None, jobs: int = 1) -> List[SuiteResult]:
    """The inequality batteries ``i4, i5, i6, iii4, iii5``."""
    sizes = sizes or {}
    return [run_suite(s, seed, sizes.get(s), jobs) for s in ("i4", "i5", "i6", "iii4", "iii5")]


def run_all(seed: int = 0, cases: Optional[int] = None, jobs: int = 1) -> List[SuiteResult]:
    return [run_suite(s, seed, cases, jobs) for s in SUITES]


def parse_case_input(echo: dict) -> dict:
    """Turn an echoed case input back into polynomials (for replaying a failure)."""
    n = echo["n"]
    out = dict(echo)
    for key, value in echo.items():
        if isinstance(value, list) and value and isinstance(value[0], str):
            out[key] = [parse(v, n) for v in value]
        elif key in ("f", "rho"):
            out[key] = parse(value, n)
    return out
