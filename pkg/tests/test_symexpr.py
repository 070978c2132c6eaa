from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from jetbc.symexpr import (
    Add,
    Const,
    ExprError,
    Kind,
    Mul,
    Pow,
    Poly,
    Symbol,
    UnboundSymbolError,
    Var,
    canonicalize,
    diff_partial,
    equivalent,
    eval_numeric,
    substitute,
    to_infix,
)

a, b, c = (Symbol(n) for n in "abc")
w = Symbol("w", Kind.JET, (0, 0))
w02 = Symbol("w", Kind.JET, (0, 2))
X = Symbol("X", Kind.INDEPENDENT)
SYMS = [a, b, c, w, w02]


def trees():
    leaves = st.one_of(
        st.integers(-5, 5).map(lambda n: Const(Fraction(n))),
        st.fractions(min_value=-3, max_value=3, max_denominator=4).map(Const),
        st.sampled_from(SYMS).map(Var),
    )
    return st.recursive(
        leaves,
        lambda kids: st.one_of(
            st.lists(kids, min_size=1, max_size=3).map(lambda xs: Add(tuple(xs))),
            st.lists(kids, min_size=1, max_size=3).map(lambda xs: Mul(tuple(xs))),
            st.tuples(kids, st.integers(1, 3)).map(lambda t: Pow(*t)),
        ),
        max_leaves=10,
    )


_SP = {s: sympy.Symbol(str(s).replace("[", "_").replace(",", "_").replace("]", "")) for s in SYMS}


def to_sympy(t):
    if isinstance(t, Const):
        return sympy.Rational(t.value.numerator, t.value.denominator)
    if isinstance(t, Var):
        return _SP[t.symbol]
    if isinstance(t, Add):
        return sympy.Add(*[to_sympy(x) for x in t.args])
    if isinstance(t, Mul):
        return sympy.Mul(*[to_sympy(x) for x in t.args])
    return to_sympy(t.base) ** t.exp


def poly_to_sympy(p: Poly):
    return sympy.expand(sum(
        sympy.Rational(coef.numerator, coef.denominator) * sympy.Mul(*[_SP[s] ** e for s, e in m])
        for m, coef in p.terms
    ))


@settings(max_examples=150, deadline=None)
@given(trees())
def test_canonical_form_matches_sympy_expansion(t):
    assert sympy.expand(poly_to_sympy(canonicalize(t)) - to_sympy(t)) == 0


@settings(max_examples=100, deadline=None)
@given(trees(), trees())
def test_equivalence_agrees_with_sympy(t1, t2):
    same = sympy.expand(to_sympy(t1) - to_sympy(t2)) == 0
    assert equivalent(t1, t2) == same


@settings(max_examples=100, deadline=None)
@given(trees())
def test_canonicalize_idempotent_and_deterministic(t):
    p = canonicalize(t)
    assert canonicalize(p) == p
    assert str(canonicalize(t)) == str(p)
    assert hash(canonicalize(t)) == hash(p)


@settings(max_examples=80, deadline=None)
@given(trees(), st.sampled_from(SYMS))
def test_diff_matches_central_difference(t, s):
    p = canonicalize(t)
    rng = np.random.default_rng(7)
    env = {x: float(rng.uniform(-1.5, 1.5)) for x in SYMS}
    h = 1e-4
    up, dn = dict(env), dict(env)
    up[s] += h
    dn[s] -= h
    fd = (eval_numeric(p, up) - eval_numeric(p, dn)) / (2 * h)
    exact = eval_numeric(diff_partial(p, s), env)
    assert exact == pytest.approx(fd, rel=1e-8, abs=1e-8)


@settings(max_examples=80, deadline=None)
@given(trees(), trees())
def test_substitution_commutes_with_evaluation(t, r):
    p, q = canonicalize(t), canonicalize(r)
    env = {x: 0.3 + 0.2 * i for i, x in enumerate(SYMS)}
    lhs = eval_numeric(substitute(p, {a: q}), env)
    env2 = dict(env)
    env2[a] = eval_numeric(q, env)
    assert lhs == pytest.approx(eval_numeric(p, env2), rel=1e-9, abs=1e-9)


def test_like_terms_collect():
    e = Add((Mul((Const(Fraction(2)), Var(a))), Var(a), Mul((Const(Fraction(-3)), Var(a)))))
    assert canonicalize(e).is_zero()
    assert canonicalize(Mul((Var(a), Var(b)))) == canonicalize(Mul((Var(b), Var(a))))


def test_rational_printing():
    p = Poly.const(Fraction(1, 2)) * Poly.sym(w02) ** 2
    assert str(p) == "1/2*w[0,2]^2"
    assert str(Poly.sym(w)) == "w"


def test_grouped_infix_keeps_parameter_cofactors():
    nu = Symbol("nu")
    p = Poly.sym(Symbol("w", Kind.JET, (0, 0, 3))) + (2 - Poly.sym(nu)) * Poly.sym(Symbol("w", Kind.JET, (0, 2, 1)))
    assert to_infix(p) == "w[0,0,3] + (2-nu)*w[0,2,1]"


def test_partial_wrt_independent_rejected():
    with pytest.raises(ExprError):
        diff_partial(Poly.sym(a), X)


def test_unbound_symbol_named():
    with pytest.raises(UnboundSymbolError) as err:
        eval_numeric(Poly.sym(a) * Poly.sym(b), {a: 1.0})
    assert err.value.symbol == b


def test_division_only_by_constants():
    assert (Poly.sym(a) * 3) / 3 == Poly.sym(a)
    with pytest.raises(ExprError):
        Poly.sym(a) / Poly.sym(b)
    with pytest.raises(ExprError):
        Poly.sym(a) / 0


def test_jet_symbols_need_an_index():
    with pytest.raises(ExprError):
        Symbol("w", Kind.JET)
    with pytest.raises(ExprError):
        Symbol("nu", Kind.PARAMETER, (1,))


def test_vectorised_evaluation():
    p = Poly.sym(a) ** 2 - Poly.sym(b)
    xs = np.linspace(0, 1, 5)
    np.testing.assert_allclose(p.eval({a: xs, b: 1.0}), xs**2 - 1)


def eval_tree(t, env):
    """Direct recursive evaluation of an unsimplified tree."""
    if isinstance(t, Const):
        return float(t.value)
    if isinstance(t, Var):
        return env[t.symbol]
    if isinstance(t, Add):
        return sum(eval_tree(x, env) for x in t.args)
    if isinstance(t, Mul):
        out = 1.0
        for x in t.args:
            out *= eval_tree(x, env)
        return out
    return eval_tree(t.base, env) ** t.exp


@settings(max_examples=100, deadline=None)
@given(trees(), st.integers(0, 2**32 - 1))
def test_canonical_evaluation_matches_tree_evaluation(t, seed):
    rng = np.random.default_rng(seed)
    env = {x: float(rng.uniform(-2, 2)) for x in SYMS}
    direct = eval_tree(t, env)
    assert eval_numeric(t, env) == pytest.approx(direct, rel=1e-12, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(trees(), trees(), trees())
def test_ring_axioms(t1, t2, t3):
    assert equivalent(Add((t1, t2)), Add((t2, t1)))
    assert equivalent(Mul((t1, Add((t2, t3)))), Add((Mul((t1, t2)), Mul((t1, t3)))))


@settings(max_examples=60, deadline=None)
@given(trees(), trees(), st.sampled_from(SYMS))
def test_leibniz_and_linearity(t1, t2, s):
    p, q = canonicalize(t1), canonicalize(t2)
    assert diff_partial(p * q, s) == diff_partial(p, s) * q + p * diff_partial(q, s)
    assert diff_partial(p + 3 * q, s) == diff_partial(p, s) + 3 * diff_partial(q, s)


@settings(max_examples=60, deadline=None)
@given(trees())
def test_diff_of_absent_symbol_is_zero(t):
    fresh = Symbol("zeta")
    assert diff_partial(t, fresh).is_zero()


def test_substitute_examples():
    x = Symbol("x")
    assert substitute(Poly.sym(x) ** 2, {x: Poly.sym(a) + Poly.sym(b)}) == canonicalize(
        Add((Pow(Var(a), 2), Mul((Const(Fraction(2)), Var(a), Var(b))), Pow(Var(b), 2)))
    )
    e = Add((Var(a), Var(a)))
    assert substitute(e, {}) == canonicalize(e)


def test_eval_examples():
    x = Symbol("x")
    assert eval_numeric(Poly.sym(x) ** 2 + 1, {x: 2.0}) == 5.0
    assert eval_numeric(Poly(), {}) == 0.0
