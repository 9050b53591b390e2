import contextlib
import copy
import io
import json
import time
from fractions import Fraction
from pathlib import Path

import pytest
from gmpy2 import mpq
from hypothesis import HealthCheck, settings, strategies as st

from kohnlab import cli
from kohnlab.poly import Polynomial, to_string

settings.register_profile(
    "kohnlab", max_examples=60, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("kohnlab")

DOMAINS_DIR = Path(__file__).resolve().parent.parent / "domains"

# the termination corpus, with the domain files that hold it
CORPUS = {
    "lines": (2, ["z1", "z2"]),
    "squares2": (2, ["z1^2", "z2^2"]),
    "cusp": (2, ["z1^2", "z2^3"]),
    "mixed2": (2, ["z1^3", "z2^4", "z1*z2^2"]),
    "squares3": (3, ["z1^2", "z2^2", "z3^2"]),
    "weighted3": (3, ["z1^2", "z2^3", "z3^4"]),
}


def write_domain(path, n, gens, names=None):
    names = names or [f"z{i + 1}" for i in range(n)]
    Path(path).write_text(json.dumps({"schema": "kohnlab/1", "n": n, "vars": names, "generators": gens}, indent=1))
    return str(path)


def invoke(argv, capsys=None):
    """Run the CLI in-process; return (exit code, parsed JSON report)."""
    if capsys is not None:
        capsys.readouterr()
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out if capsys is not None else ""
    return code, (json.loads(out) if out else None)


def to_sympy(f: Polynomial):
    import sympy

    zs = sympy.symbols(f"z1:{f.n + 1}")
    return sympy.sympify(to_string(f).replace("^", "**"), locals={str(z): z for z in zs}), zs


def from_sympy(expr, n: int) -> Polynomial:
    import sympy

    zs = sympy.symbols(f"z1:{n + 1}")
    P = sympy.Poly(sympy.expand(expr), *zs)
    return Polynomial(n, {m: mpq(int(c.p), int(c.q)) for m, c in P.terms()})


# ---------------------------------------------------------------------------
# hypothesis strategies


def polynomials(n, max_terms=4, max_degree=3, coeff=5, allow_zero=True):
    exps = st.tuples(*[st.integers(0, max_degree)] * n).filter(lambda e: sum(e) <= max_degree)
    coeffs = st.integers(-coeff, coeff).filter(bool)
    terms = st.dictionaries(exps, coeffs, min_size=0 if allow_zero else 1, max_size=max_terms)
    return terms.map(lambda t: Polynomial(n, t))


def nonzero_polynomials(n, **kw):
    return polynomials(n, allow_zero=False, **kw).filter(lambda p: not p.is_zero())


def monomial_ideals(n, max_exp=5, extra=2):
    """m-primary monomial ideals: a pure power of every variable plus some mixed terms."""
    pure = st.tuples(*[st.integers(1, max_exp)] * n)
    mixed = st.lists(st.tuples(*[st.integers(0, max_exp)] * n).filter(lambda e: sum(e) > 0), max_size=extra)

    def build(args):
        p, mx = args
        gens = [tuple(p[i] if k == i else 0 for k in range(n)) for i in range(n)] + list(mx)
        return gens

    return st.tuples(pure, mixed).map(build)


# ---------------------------------------------------------------------------
# corpus certificates, produced once per session through the CLI


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Run every corpus domain once; map name -> dict(domain, cert, code, report, seconds)."""
    base = tmp_path_factory.mktemp("corpus")
    out = {}
    for name, (n, gens) in CORPUS.items():
        dom = write_domain(base / f"{name}.json", n, gens)
        cert = base / f"{name}.cert.json"
        start = time.perf_counter()
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = cli.main(["run", dom, "--out", str(cert)])
        out[name] = {
            "domain": dom,
            "cert": str(cert),
            "code": code,
            "report": json.loads(buf.getvalue()),
            "seconds": time.perf_counter() - start,
        }
    return out


# ---------------------------------------------------------------------------
# one pass/fail line per acceptance criterion


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": False})
    if rep.when == "call":
        entry["ran"] = True
    if rep.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}: {e['title']}")


# ---------------------------------------------------------------------------
# chain identity, expanded in z


# expansions whose monomial count could exceed this are compared at points instead
EXPANSION_BOUND = 20000
IDENTITY_POINTS = 4


def _chain_parts(cert, node):
    from kohnlab.certificate import image_names
    from kohnlab.poly import parse

    pb = cert.node(node.composed.pullback)
    n = cert.domain.n
    h = [parse(s, n, cert.domain.names) for s in pb.witness["h"]]
    fiber = parse(pb.witness["fiber_form"], n, cert.domain.names)
    p = parse(pb.witness["cofactor"], n, image_names(n))
    return h, fiber, p


def expand_chain_node(cert, node):
    """``factor * (p**power * image)(h, l)`` of a composed chain node, as a polynomial in z."""
    from kohnlab.poly import substitute

    c = node.composed
    h, fiber, p = _chain_parts(cert, node)
    return c.factor * substitute(p**c.power * c.image, h + [fiber])


def expansion_bound(cert, node):
    """Upper bound on the monomial count of the expanded node (by total degree in z)."""
    import math

    if node.composed is None:
        return len(node.poly.terms)
    c = node.composed
    h, fiber, p = _chain_parts(cert, node)
    degs = [g.total_degree() for g in h] + [fiber.total_degree()]

    def zdeg(f):
        return max((sum(e * d for e, d in zip(m, degs)) for m in f.terms), default=0)

    D = zdeg(c.image) + c.power * zdeg(p) + max(c.factor.total_degree(), 0)
    return math.comb(D + cert.domain.n, cert.domain.n)


def _on_line(f, point, i):
    """``f(point + s e_i)`` as a polynomial in the single variable ``s``."""
    from kohnlab.poly import Polynomial, substitute

    s = Polynomial.variable(1, 0)
    return substitute(f, [s + x if k == i else Polynomial.constant(1, x) for k, x in enumerate(point)])


def _gradient_by_lines(cert, node, point):
    """Gradient of a chain node at ``point``: expand along each coordinate line, read off the s-coefficient."""
    from kohnlab.poly import substitute

    out = []
    for i in range(cert.domain.n):
        if node.composed is None:
            line = _on_line(node.poly, point, i)
        else:
            c = node.composed
            h, fiber, p = _chain_parts(cert, node)
            w = [_on_line(g, point, i) for g in h + [fiber]]
            line = _on_line(c.factor, point, i) * substitute(p, w) ** c.power * substitute(c.image, w)
        out.append(line.terms.get((1,), mpq(0)))
    return out


def _value(cert, node, point):
    """Value of a chain node at ``point`` from its factored form."""
    if node.composed is None:
        return node.poly.evaluate(point)
    c = node.composed
    h, fiber, p = _chain_parts(cert, node)
    w = [g.evaluate(point) for g in h + [fiber]]
    return c.factor.evaluate(point) * p.evaluate(w) ** c.power * c.image.evaluate(w)


def _det(rows):
    """Leibniz expansion; fine for n <= 4."""
    import itertools

    total = mpq(0)
    for perm in itertools.permutations(range(len(rows))):
        sign = (-1) ** sum(a > b for a, b in itertools.combinations(perm, 2))
        term = mpq(sign)
        for r, c in enumerate(perm):
            term *= rows[r][c]
        total += term
    return total


def chain_identity_cases(cert, bound=EXPANSION_BOUND, points=IDENTITY_POINTS):
    """Compare, per Jacobian chain step, the direct Jacobian of ``(h, previous link)`` with
    ``det(frame) * minor * fiber derivative``.

    Yields ``(node id, mode, direct, factored)``.  Mode ``"expanded"`` compares
    polynomials in z.  When an expansion would be too large, mode ``"point"``
    compares exact rational values at seeded integer points, with the direct
    side's last row computed from one-variable restrictions of the previous link.
    """
    from kohnlab import rng
    from kohnlab.certificate import parse_rational
    from kohnlab.poly import jacobian_determinant, partial_derivative

    n = cert.domain.n
    expanded = {}

    def expand(nd):
        if nd.composed is None:
            return nd.poly
        if nd.id not in expanded:
            expanded[nd.id] = expand_chain_node(cert, nd)
        return expanded[nd.id]

    for node in cert.nodes:
        if node.composed is None or node.witness.get("part") != "jacobian":
            continue
        prev = cert.node(node.inputs[0])
        h, _, _ = _chain_parts(cert, node)
        pb = cert.node(node.composed.pullback)
        det = parse_rational(pb.witness["frame"][-1][-1])  # frame is identity above its last row
        if max(expansion_bound(cert, node), expansion_bound(cert, prev)) <= bound:
            yield node.id, "expanded", jacobian_determinant(h + [expand(prev)]), expand(node) * det
            continue
        rand = rng.stream(cert.seed, f"identity:{node.id}")
        for _ in range(points):
            P = [mpq(rand.randint(-1000, 1000)) for _ in range(n)]
            rows = [[partial_derivative(g, i).evaluate(P) for i in range(n)] for g in h]
            rows.append(_gradient_by_lines(cert, prev, P))
            lhs = _det(rows)
            rhs = _value(cert, node, P) * det
            yield node.id, "point", lhs, rhs


# ---------------------------------------------------------------------------
# seeded single-node certificate mutations

MUTATION_KINDS = ("sigma", "epsilon", "poly")


def _eligible(data, kind):
    out = []
    for k, nd in enumerate(data["nodes"]):
        w = nd.get("witness") or {}
        if kind == "sigma" and isinstance(w.get("sigma"), int):
            out.append(k)
        elif kind == "epsilon" and nd.get("epsilon") is not None:
            out.append(k)
        elif kind == "poly" and (nd.get("poly") is not None or nd.get("composed") is not None):
            out.append(k)
    return out


def mutate(data, kind, rand):
    """Copy of certificate JSON ``data`` with one node changed; returns (copy, node id, description)."""
    data = copy.deepcopy(data)
    k = rand.choice(_eligible(data, kind))
    nd = data["nodes"][k]
    if kind == "sigma":
        nd["witness"]["sigma"] -= 1
        what = f"sigma {nd['witness']['sigma'] + 1} -> {nd['witness']['sigma']}"
    elif kind == "epsilon":
        eps = Fraction(nd["epsilon"]) * 2
        nd["epsilon"] = f"{eps.numerator}/{eps.denominator}"
        what = f"epsilon doubled to {nd['epsilon']}"
    else:
        n = data["domain"]["n"]
        var = data["domain"]["vars"][rand.randrange(n)]
        bump = f"{rand.choice([1, 2, 3, -1])}*{var}^{rand.randint(1, 3)}"
        if nd.get("composed") is not None:
            part = rand.choice(["factor", "image"])
            if part == "image":
                bump = f"{rand.choice([1, 2, -1])}*t^{rand.randint(0, 2)}"
            nd["composed"][part] = f"{nd['composed'][part]} + {bump}"
            what = f"composed {part} + {bump}"
        else:
            nd["poly"] = f"{nd['poly']} + {bump}"
            what = f"poly + {bump}"
    return data, nd["id"], what


def mutations(data, label, count=10, seed=0):
    from kohnlab import rng

    # a certificate without radical nodes has nothing to decrement
    kinds = [k for k in MUTATION_KINDS if _eligible(data, k)]
    for i in range(count):
        rand = rng.stream(seed, f"mutation:{label}:{i}")
        yield mutate(data, kinds[i % len(kinds)], rand)
