import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jetbc.jetcalc import (
    BundleError,
    BundleSpec,
    Density,
    MultiIndex,
    MultiIndexError,
    UnsupportedOrderError,
    jet_order,
    mi_add,
    mi_order,
    mi_sub,
    multi_indices,
    prolong_vertical_field,
    total_derivative,
    total_derivative_multi,
)
from jetbc.symexpr import ExprError, Kind, Poly, Symbol, eval_numeric

B2 = BundleSpec(("X", "Y"), ("w",), parameters=("E", "I", "nu"))
B3 = BundleSpec(("t", "X", "Y"), ("w", "p"), (True, False, False), ("nu",))


def random_poly(bundle, seed, degree=2, max_order=2, terms=4):
    rng = np.random.default_rng(seed)
    jets = [bundle.jet_symbol(a, J.counts) for a in bundle.dependent for J in multi_indices(bundle.r, max_order)]
    p = Poly()
    for _ in range(terms):
        mono = Poly.const(Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4))))
        for _ in range(int(rng.integers(1, degree + 1))):
            mono = mono * Poly.sym(jets[int(rng.integers(len(jets)))])
        p = p + mono
    return p


def test_multi_index_arithmetic():
    assert mi_add(MultiIndex((0, 1)), MultiIndex((1, 0))) == MultiIndex((1, 1))
    with pytest.raises(MultiIndexError):
        mi_sub(MultiIndex((0, 1)), MultiIndex((1, 0)))
    assert mi_order(MultiIndex((0, 2, 2))) == 4
    with pytest.raises(MultiIndexError):
        MultiIndex((1, 0)) + MultiIndex((1, 0, 0))
    unit = MultiIndex.unit(1, 3)
    assert unit.counts == (0, 1, 0)


def test_bundle_validation():
    with pytest.raises(BundleError):
        BundleSpec(("X", "X"), ("w",))
    with pytest.raises(BundleError):
        BundleSpec(("X",), ())
    with pytest.raises(BundleError):
        BundleSpec(("t", "X", "s"), ("w",), (True, False, True))
    assert B3.direction("Y") == 2
    assert B3.spatial_directions() == [1, 2]


def test_total_derivative_examples():
    b = BundleSpec(("t", "X"), ("w",), parameters=("E", "I"))
    assert total_derivative(b.jet("w"), 0) == b.jet("w", 1, 0)
    EI = b.param("E") * b.param("I")
    assert total_derivative(EI * b.jet("w", 0, 2), 1) == EI * b.jet("w", 0, 3)


def test_total_derivative_rejects_independent_symbols():
    with pytest.raises(ExprError):
        total_derivative(Poly.sym(Symbol("X", Kind.INDEPENDENT)), 0)


def _section_jets(bundle, X, Y, upto=3):
    """Jets of sigma(X, Y) = X^2 Y^3, from exact derivatives."""
    def deriv(k, x, e):
        if k > e:
            return 0.0
        coef = np.prod([e - i for i in range(k)]) if k else 1.0
        return coef * x ** (e - k)

    env = {}
    for J in multi_indices(2, upto):
        env[bundle.jet_symbol("w", J.counts)] = deriv(J[0], X, 2) * deriv(J[1], Y, 3)
    return env


def test_total_derivative_along_section():
    f = B2.jet("w", 0, 1) ** 2
    X, Y, h = 0.7, 1.3, 1e-5
    fy = lambda y: eval_numeric(f, _section_jets(B2, X, y))
    fd = (fy(Y + h) - fy(Y - h)) / (2 * h)
    exact = eval_numeric(total_derivative(f, 1), _section_jets(B2, X, Y))
    assert abs(exact - fd) / abs(exact) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.2, 1.5), st.floats(0.2, 1.5))
def test_chain_consistency_random_polynomials(seed, X, Y):
    f = random_poly(B2, seed)
    h = 1e-5
    for i, (dx, dy) in enumerate(((h, 0), (0, h))):
        fd = (eval_numeric(f, _section_jets(B2, X + dx, Y + dy)) - eval_numeric(f, _section_jets(B2, X - dx, Y - dy))) / (2 * h)
        exact = eval_numeric(total_derivative(f, i), _section_jets(B2, X, Y))
        assert exact == pytest.approx(fd, rel=1e-6, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(itertools.combinations(range(3), 2))))
def test_total_derivatives_commute(seed, ij):
    e = random_poly(B3, seed)
    i, j = ij
    assert total_derivative(total_derivative(e, i), j) == total_derivative(total_derivative(e, j), i)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_leibniz_and_order_bound(seed):
    e1, e2 = random_poly(B3, seed), random_poly(B3, seed + 1)
    for i in range(3):
        assert total_derivative(e1 * e2, i) == total_derivative(e1, i) * e2 + e1 * total_derivative(e2, i)
        assert jet_order(total_derivative(e1, i)) <= jet_order(e1) + 1


def test_total_derivative_multi():
    e = random_poly(B2, 3)
    assert total_derivative_multi(e, MultiIndex.zero(2)) == e
    assert total_derivative_multi(B2.jet("w"), MultiIndex((2, 0))) == B2.jet("w", 2, 0)


def _enumerate(r, n):
    return sorted(c for c in itertools.product(range(n + 1), repeat=r) if sum(c) <= n)


@pytest.mark.parametrize("r,n", [(1, 2), (2, 0), (2, 1), (2, 2), (3, 2)])
def test_prolongation_components(r, n):
    b = BundleSpec(tuple(f"X{i}" for i in range(r)), ("w", "p"))
    comps = prolong_vertical_field(b, n)
    for name in b.dependent:
        assert sorted(J.counts for J in comps[name]) == _enumerate(r, n)
    if (r, n) == (2, 1):
        assert {str(v) for v in comps["w"].values()} == {"eta[w]", "eta[w][1,0]", "eta[w][0,1]"}
    if (r, n) == (2, 2):
        # mixed index [1,1] appears once
        assert len(comps["w"]) == 6


def test_prolongation_order_limit():
    with pytest.raises(UnsupportedOrderError):
        prolong_vertical_field(B2, 3)


def test_jet_order_examples():
    b = BundleSpec(("t", "X"), ("w",), parameters=("rho", "A"))
    assert jet_order(b.param("rho") * b.param("A") * b.jet("w", 1, 0) ** 2) == 1
    assert jet_order(Poly.const(3)) == 0
    nu = B3.param("nu")
    kirchhoff_V = B3.jet("w", 0, 2, 0) ** 2 + 2 * nu * B3.jet("w", 0, 2, 0) * B3.jet("w", 0, 0, 2)
    assert jet_order(kirchhoff_V) == 2


def test_density_order_limit():
    b = BundleSpec(("t", "X"), ("w",))
    with pytest.raises(UnsupportedOrderError, match="unsupported-order"):
        Density(b, b.jet("w", 3, 0))
    with pytest.raises(BundleError):
        Density(b, Poly.sym(Symbol("u", Kind.INPUT)))
