import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jetbc.cartan import boundary_terms
from jetbc.jetcalc import BundleError, BundleSpec, Density
from jetbc.modelio import parse_expression
from jetbc.porthamil import (
    PHSystem,
    StructureError,
    collocated_outputs,
    evolution_field,
    power_balance,
    validate_structure,
    variational_derivative,
)
from jetbc.symexpr import Kind, Poly, Symbol

from conftest import load
from test_jetcalc import random_poly

SKEW = [[0, 1], [-1, 0]]


@pytest.fixture(scope="module")
def plate():
    return load("kirchhoff_ph")


def ex(bundle, text):
    return parse_expression(text, bundle)


def test_kirchhoff_variational_derivative(plate):
    dw, dp = variational_derivative(plate.density)
    assert dp == ex(plate.bundle, "p")
    assert dw == ex(plate.bundle, "w[4,0] + w[0,4] + 2*w[2,2]")


def test_kirchhoff_evolution_field(plate):
    v = evolution_field(plate.ph)
    assert v == [ex(plate.bundle, "p"), ex(plate.bundle, "-(w[4,0] + w[0,4] + 2*w[2,2])")]


def test_kirchhoff_boundary_ports(plate):
    pb = power_balance(plate.ph, "X2", side="max")
    b = plate.bundle
    F_S = ex(b, "w[0,3] + (2 - nu)*w[2,1]")
    M_B = ex(b, "-(w[0,2] + nu*w[2,0])")
    assert [str(s) for s in pb.boundary.slots] == ["v[w]", "v[w][0,1]"]
    assert pb.boundary.coefficient(pb.boundary.slots[0]) == -F_S
    assert pb.boundary.coefficient(pb.boundary.slots[1]) == -M_B
    # expanding Omega_boundary = -dX1 gives the flux density v F_S + v_01 M_B
    v, v01 = (Poly.sym(s) for s in pb.boundary.slots)
    assert pb.boundary.density() * pb.boundary.omega_sign == v * F_S + v01 * M_B
    assert pb.domain_dissipation.is_zero() and pb.domain_port.is_zero()
    assert pb.domain_power.is_zero()


def test_boundary_ports_mirror_cartan(plate):
    for face in ("X1", "X2"):
        pb = power_balance(plate.ph, face)
        assert pb.boundary == boundary_terms(plate.density, face).renamed("v")
        assert pb.boundary == boundary_terms(plate.density, face, slot="v")


def _one_field(H, J, R=None, G=None, inputs=()):
    b = BundleSpec(("X",), ("p",), inputs=inputs)
    return b, PHSystem(Density(b, ex(b, H) if isinstance(H, str) else H), J, R, G)


def test_gradient_flow():
    b, sys = _one_field("1/2*p^2", [[0]], [[1]])
    assert evolution_field(sys) == [-b.jet("p")]


def test_pure_input():
    b, sys = _one_field(Poly(), [[0]], None, [[1]], inputs=("u",))
    assert evolution_field(sys) == [Poly.sym(Symbol("u", Kind.INPUT))]


def test_collocated_output_and_port():
    b = BundleSpec(("X",), ("w", "p"), inputs=("u",))
    sys = PHSystem(Density(b, ex(b, "1/2*p^2")), [[0, 0], [0, 0]], None, [[1], [0]])
    (y,) = collocated_outputs(sys)
    assert y == variational_derivative(sys.H)[0]
    pb = power_balance(sys, "X")
    assert pb.domain_port == y * Poly.sym(Symbol("u", Kind.INPUT))


def test_linear_in_inputs():
    b = BundleSpec(("X",), ("w", "p"), parameters=("c",), inputs=("u", "z"))
    H = Density(b, ex(b, "1/2*p^2 + 1/2*c*w[1]^2"))
    G = [[ex(b, "c"), 0], [1, ex(b, "w")]]
    sys = PHSystem(H, SKEW, None, G)
    v = evolution_field(sys)
    u, z = Symbol("u", Kind.INPUT), Symbol("z", Kind.INPUT)
    shift = {u: Poly.sym(u) + 3, z: Poly.sym(z) - b.jet("w")}
    for a in range(2):
        delta = v[a].subs(shift) - v[a]
        assert delta == G_times(G, a, [Poly.const(3), -b.jet("w")], b)


def G_times(G, a, w, b):
    row = [Poly.lift(x) if not isinstance(x, Poly) else x for x in G[a]]
    return row[0] * w[0] + row[1] * w[1]


def test_structure_violations():
    b = BundleSpec(("X",), ("w", "p"))
    H = Density(b, ex(b, "1/2*p^2"))
    assert validate_structure(PHSystem(H, SKEW)) == []
    bad = validate_structure(PHSystem(H, [[0, 1], [1, 0]]))
    assert [v.kind for v in bad] == ["skew"]
    assert bad[0].entries == ((1, 2), (2, 1))
    with pytest.raises(StructureError):
        evolution_field(PHSystem(H, [[0, 1], [1, 0]]))
    b1 = BundleSpec(("X",), ("p",))
    psd = validate_structure(PHSystem(Density(b1, ex(b1, "1/2*p^2")), [[0]], [[-1]]))
    assert psd[0].kind == "psd" and psd[0].witness is not None
    op = validate_structure(PHSystem(H, [[0, ex(b, "w[1]")], [ex(b, "-w[1]"), 0]]))
    assert {v.kind for v in op} == {"operator"}
    shape = validate_structure(PHSystem(H, [[0, 1, 0], [-1, 0, 0]]))
    assert shape[0].kind == "shape"


def test_time_flagged_bundle_rejected():
    b = BundleSpec(("t", "X"), ("w",), (True, False))
    with pytest.raises(BundleError):
        PHSystem(Density(b, ex(b, "w[0,1]^2")), [[0]])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_skew_structure_kills_domain_density(seed):
    b = BundleSpec(("X", "Y"), ("w", "p"))
    sys = PHSystem(Density(b, random_poly(b, seed)), SKEW)
    v = evolution_field(sys)
    dH = variational_derivative(sys.H)
    assert (v[0] * dH[0] + v[1] * dH[1]).is_zero()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_dissipation_nonpositive(seed):
    rng = np.random.default_rng(seed)
    b = BundleSpec(("X",), ("w", "p"), parameters=("a", "c"))
    R = [[ex(b, "a"), 0], [0, ex(b, "c")]]
    sys = PHSystem(Density(b, random_poly(b, seed)), SKEW, R)
    assert validate_structure(sys) == []
    diss = power_balance(sys, "X").domain_dissipation
    syms = sorted(diss.symbols(), key=lambda s: s.key)
    for _ in range(100):
        env = {s: rng.uniform(0.1, 2) if s.kind is Kind.PARAMETER else rng.uniform(-2, 2) for s in syms}
        assert diss.eval(env) <= 1e-10


def _trig_field(rng, modes=3):
    """Random trigonometric polynomial on [0, 2pi) with analytic derivatives."""
    ks = rng.integers(1, 5, size=modes)
    a, c = rng.normal(size=modes), rng.normal(size=modes)

    def value(x, n=0):
        out = np.zeros_like(x)
        for k, ak, ck in zip(ks, a, c):
            # n-th derivative of a cos(kx) + c sin(kx)
            out += k**n * (ak * np.cos(k * x + n * np.pi / 2) + ck * np.sin(k * x + n * np.pi / 2))
        return out

    return value


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_variational_derivative_matches_gateaux(seed):
    """<delta H, phi> equals d/de H[u + e phi] for a periodic functional."""
    rng = np.random.default_rng(seed)
    b = BundleSpec(("X",), ("w", "p"))
    H = Density(b, random_poly(b, seed))
    x = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    dx = x[1] - x[0]
    u = {n: _trig_field(rng) for n in b.dependent}
    phi = {n: _trig_field(rng) for n in b.dependent}

    def env_of(fields, eps):
        env = {}
        for n in b.dependent:
            for k in range(5):
                env[b.jet_symbol(n, (k,))] = fields[n](x, k) + eps * phi[n](x, k)
        return env

    def functional(eps):
        return float(np.sum(np.broadcast_to(H.expr.eval(env_of(u, eps)), x.shape)) * dx)

    eps = 1e-3
    gateaux = (functional(eps) - functional(-eps)) / (2 * eps)
    env = env_of(u, 0.0)
    pairing = sum(
        float(np.sum(np.broadcast_to(d.eval(env), x.shape) * phi[n](x)) * dx)
        for n, d in zip(b.dependent, variational_derivative(H))
    )
    assert pairing == pytest.approx(gateaux, rel=1e-6, abs=1e-8)
