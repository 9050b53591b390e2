import pytest
import sympy
from hypothesis import assume, given, strategies as st

from conftest import from_sympy, monomial_ideals, nonzero_polynomials, polynomials, to_sympy
from kohnlab.groebner import (
    Budget,
    Ideal,
    ResourceLimitExceeded,
    elimination_ideal,
    groebner,
    ideal_member,
    is_groebner,
    minimal_power_in,
    normal_form,
    radical_member,
)
from kohnlab.invariants import colength_at_origin
from kohnlab.poly import GREVLEX, LEX, Polynomial, block_order, normalize, parse


def P(text, n=2):
    return parse(text, n)


def ideal(*texts, n=2):
    return Ideal([parse(t, n) for t in texts])


def generates_same(I: Ideal, J: Ideal) -> bool:
    return all(ideal_member(g, J) for g in I.generators) and all(ideal_member(g, I) for g in J.generators)


# ---------------------------------------------------------------------------
# bases


def test_groebner_examples():
    assert set(groebner(ideal("z1", "z2")).basis) == {P("z1"), P("z2")}
    assert groebner(ideal("1")).basis == (Polynomial.constant(2, 1),)
    assert groebner(ideal("z1^2 + z2", "3*z1 - z2"), LEX).is_unit() is False


def test_lex_elimination_example():
    I = ideal("z1^2", "z1*z2 + z2^3")
    gb = groebner(I, LEX)
    assert is_groebner(gb)
    univariate = [g for g in gb.basis if g.degree_in(0) == 0]
    assert univariate == [P("z2^5")]
    assert elimination_ideal(I, [1]).generators == (P("z2^5"),)


def test_basis_is_reduced_and_monic():
    gb = groebner(ideal("z1^3 - 2*z1*z2", "z1^2*z2 - 2*z2^2 + z1"))
    lms = gb.leading_monomials()
    for g, lm in zip(gb.basis, lms):
        assert g.terms[lm] == 1
        others = [m for m in lms if m != lm]
        for m in g.terms:
            assert not any(all(a <= b for a, b in zip(o, m)) for o in others)


def _sympy_reduced(polys, order):
    exprs = [to_sympy(f)[0] for f in polys]
    zs = sympy.symbols(f"z1:{polys[0].n + 1}")
    G = sympy.groebner(exprs, *zs, order=order)
    return {normalize(from_sympy(g, polys[0].n)) for g in G.exprs}


@given(st.lists(nonzero_polynomials(2, max_terms=3, max_degree=3), min_size=1, max_size=3))
def test_reduced_basis_matches_sympy_grevlex(gens):
    ours = {normalize(g) for g in groebner(Ideal(gens), GREVLEX).basis}
    assert ours == _sympy_reduced(gens, "grevlex")


@given(st.lists(nonzero_polynomials(3, max_terms=3, max_degree=2), min_size=2, max_size=3))
def test_reduced_basis_matches_sympy_lex(gens):
    ours = {normalize(g) for g in groebner(Ideal(gens), LEX).basis}
    assert ours == _sympy_reduced(gens, "lex")


@given(st.lists(nonzero_polynomials(3, max_terms=3, max_degree=3), min_size=1, max_size=3))
def test_buchberger_criterion_holds(gens):
    for order in (GREVLEX, LEX, block_order([0])):
        assert is_groebner(groebner(Ideal(gens), order))


def test_budget_exhaustion_is_a_distinct_error():
    I = ideal("z1^3 - z2*z3 + 1", "z2^3 - z1*z3", "z3^3 - z1*z2 - 2", n=3)
    with pytest.raises(ResourceLimitExceeded):
        groebner(I, LEX, Budget(max_pairs=3, max_degree=400))
    with pytest.raises(ResourceLimitExceeded):
        groebner(Ideal(list(I.generators)), LEX, Budget(max_pairs=10**6, max_degree=4))


def test_basis_is_cached_per_order():
    I = ideal("z1^2 - z2", "z2^2")
    assert I.groebner(GREVLEX) is I.groebner(GREVLEX)
    assert I.groebner(LEX) is not I.groebner(GREVLEX)


# ---------------------------------------------------------------------------
# normal form and membership


def test_normal_form_examples():
    G = groebner(ideal("z1^2", "z2^3"))
    assert normal_form(P("z1^2 + z1*z2"), G) == P("z1*z2")
    assert normal_form(P("0"), G).is_zero()
    assert normal_form(P("z2^3"), G).is_zero()


@given(st.lists(nonzero_polynomials(2, max_terms=3, max_degree=3), min_size=1, max_size=3),
       polynomials(2, max_degree=5, max_terms=5))
def test_normal_form_idempotent_and_congruent(gens, f):
    I = Ideal(gens)
    G = groebner(I)
    r = normal_form(f, G)
    assert normal_form(r, G) == r
    assert ideal_member(f - r, I)


def test_ideal_member_examples():
    I = ideal("z1^2", "z2^3")
    assert ideal_member(P("z1^3"), I)
    assert not ideal_member(P("z1*z2^2"), I)
    assert not ideal_member(P("1"), ideal("z1", "z2"))


@given(monomial_ideals(2, max_exp=4), st.tuples(st.integers(0, 6), st.integers(0, 6)))
def test_monomial_membership_is_divisibility(gens, m):
    I = Ideal([Polynomial.monomial(g) for g in gens])
    divisible = any(all(a <= b for a, b in zip(g, m)) for g in gens)
    assert ideal_member(Polynomial.monomial(m), I) == divisible


@given(monomial_ideals(3, max_exp=3, extra=1), st.tuples(*[st.integers(0, 4)] * 3))
def test_monomial_membership_is_divisibility_3d(gens, m):
    I = Ideal([Polynomial.monomial(g) for g in gens])
    divisible = any(all(a <= b for a, b in zip(g, m)) for g in gens)
    assert ideal_member(Polynomial.monomial(m), I) == divisible


# ---------------------------------------------------------------------------
# elimination


def test_elimination_examples():
    # variables (z1, z2, u)
    E = elimination_ideal(ideal("z1 - z2^2", "z3 - z1", n=3), [1, 2])
    assert generates_same(E, ideal("z3 - z2^2", n=3))
    E = elimination_ideal(ideal("z1*z2", "z3 - z1 - z2", n=3), [1, 2])
    assert generates_same(E, ideal("z2^2 - z3*z2", n=3))
    for g in E.generators:
        assert g.degree_in(0) == 0


@given(st.lists(nonzero_polynomials(2, max_terms=3, max_degree=3), min_size=1, max_size=3))
def test_eliminating_nothing_keeps_the_ideal(gens):
    I = Ideal(gens)
    assert generates_same(elimination_ideal(I, [0, 1]), I)


def test_elimination_agrees_with_sympy_lex():
    gens = [P("z1^2 - z2*z3", 3), P("z1*z2 - z3^2 + z1", 3)]
    E = elimination_ideal(Ideal(gens), [1, 2])
    G = sympy.groebner([to_sympy(g)[0] for g in gens], *sympy.symbols("z1:4"), order="lex")
    z1 = sympy.Symbol("z1")
    oracle = Ideal([from_sympy(g, 3) for g in G.exprs if z1 not in g.free_symbols])
    assert generates_same(E, oracle)


# ---------------------------------------------------------------------------
# radicals and powers


def test_radical_member_examples():
    assert radical_member(P("z1"), ideal("z1^2"))
    assert radical_member(P("z1+z2"), ideal("z1^2", "z2^2"))
    assert not radical_member(P("z1"), ideal("z2"))


def test_minimal_power_examples():
    assert minimal_power_in(P("z1+z2"), ideal("z1^2", "z2^2"), 16) == 3
    assert minimal_power_in(P("z1"), ideal("z1"), 4) == 1
    assert minimal_power_in(P("z1"), ideal("z2"), 10) is None
    with pytest.raises(ValueError):
        minimal_power_in(P("z1"), ideal("z1"), 0)


@given(st.lists(nonzero_polynomials(2, max_terms=3, max_degree=3), min_size=1, max_size=3),
       polynomials(2, max_terms=3, max_degree=2))
def test_power_membership_implies_radical(gens, f):
    I = Ideal(gens)
    sigma = minimal_power_in(f, I, 6)
    if sigma is not None:
        assert radical_member(f, I)
        assert ideal_member(f**sigma, I)
        if sigma > 1:
            assert not ideal_member(f ** (sigma - 1), I)


@given(monomial_ideals(2, max_exp=3, extra=1), polynomials(2, max_terms=3, max_degree=2))
def test_radical_power_bounded_by_colength_squared(gens, f):
    f = f - Polynomial.constant(2, f.constant_term())
    assume(not f.is_zero())
    I = Ideal([Polynomial.monomial(g) for g in gens])
    m = colength_at_origin(I)
    assert radical_member(f, I)
    assert minimal_power_in(f, I, m * m) is not None
