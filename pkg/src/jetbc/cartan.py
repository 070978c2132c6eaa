"""Euler-Lagrange operator, Cartan-form coefficients and boundary extraction.

For a density ``L`` of jet order <= 2 the second-order coefficients
``rho2[a, k, j]`` must satisfy

    rho2[a,k,j] + rho2[a,j,k] = dL/dx^a_{1_k+1_j}     (k != j)
    rho2[a,k,k]               = dL/dx^a_{2*1_k}

and the first-order ones follow as

    rho1[a,l] = dL/dx^a_{1_l} - sum_j d_j rho2[a,l,j].

Only the split of the mixed entries is free.  The boundary-adapted split for
a face ``X^f = const`` puts the whole mixed partial on ``rho2[a,f,k]`` and
zero on ``rho2[a,k,f]``, which leaves just the slots ``eta^a`` and
``eta^a_{1_f}`` on that face.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

from .jetcalc import (
    BundleError,
    Density,
    MultiIndex,
    UnsupportedOrderError,
    multi_indices,
    partials_by_index,
    prolong_vertical_field,
    sum_polys,
    total_derivative,
    total_derivative_multi,
)
from .symexpr import Poly, Symbol

ADAPTED = "adapted"
SYMMETRIC = "symmetric"

Split = Union[str, Mapping[tuple[int, int], Fraction]]


class TimeFaceError(BundleError):
    pass


def _check_order(L: Density):
    if L.max_order > 2:
        raise UnsupportedOrderError(f"unsupported-order: density of order {L.max_order}")


def euler_lagrange(L: Density) -> list[Poly]:
    """``delta_a L = sum_{#I<=2} (-1)^{#I} d_I dL/dx^a_I`` for every field."""
    _check_order(L)
    out = []
    for name in L.bundle.dependent:
        terms = []
        for I, partial in partials_by_index(L.expr, L.bundle, name).items():
            if partial.is_zero():
                continue
            d = total_derivative_multi(partial, I)
            terms.append(-d if I.order % 2 else d)
        out.append(sum_polys(terms))
    return out


@dataclass(frozen=True)
class CartanCoefficients:
    """Nonzero coefficients only; absent keys are zero.

    ``rho1[(a, l)]`` multiplies ``omega^a ^ Omega_l``; ``rho2[(a, k, j)]``
    multiplies ``omega^a_{1_k} ^ Omega_j``.  Directions are 0-based.
    """

    face: int | None
    rho1: dict = field(default_factory=dict)
    rho2: dict = field(default_factory=dict)

    def rho1_of(self, name: str, l: int) -> Poly:
        return self.rho1.get((name, l), Poly())

    def rho2_of(self, name: str, k: int, j: int) -> Poly:
        return self.rho2.get((name, k, j), Poly())


def _resolve_face(L: Density, face) -> int:
    f = L.bundle.direction(face)
    if L.bundle.time[f]:
        raise TimeFaceError(
            f"face {L.bundle.independent[f]!r} is time-flagged: "
            "no variation on the time boundary"
        )
    return f


def _split_weight(split: Split, face: int | None, k: int, j: int) -> Fraction:
    """Share of the mixed partial assigned to ``rho2[a,k,j]`` (``k < j``)."""
    if isinstance(split, str):
        if split == ADAPTED:
            if face == k:
                return Fraction(1)
            if face == j:
                return Fraction(0)
            return Fraction(1, 2)
        if split == SYMMETRIC:
            return Fraction(1, 2)
        raise ValueError(f"unknown split {split!r}")
    return Fraction(split.get((k, j), Fraction(1, 2)))


def cartan_coefficients(L: Density, face=None, split: Split = ADAPTED) -> CartanCoefficients:
    """Solve the coefficient conditions with the requested split of mixed entries.

    ``split`` is ``"adapted"`` (needs ``face``), ``"symmetric"``, or a mapping
    ``{(k, j): weight}`` for ``k < j`` giving the share put on
    ``rho2[a,k,j]``; unlisted pairs split evenly.
    """
    _check_order(L)
    f = _resolve_face(L, face) if face is not None else None
    if split == ADAPTED and f is None:
        raise ValueError("the adapted split needs a face")
    bundle = L.bundle
    r = bundle.r
    rho1, rho2 = {}, {}
    for name in bundle.dependent:
        partials = partials_by_index(L.expr, bundle, name)
        for k in range(r):
            for j in range(k, r):
                D = partials[MultiIndex.unit(k, r) + MultiIndex.unit(j, r)]
                if D.is_zero():
                    continue
                if k == j:
                    rho2[(name, k, k)] = D
                    continue
                w = _split_weight(split, f, k, j)
                if w:
                    rho2[(name, k, j)] = D * w
                if w != 1:
                    rho2[(name, j, k)] = D * (1 - w)
        for l in range(r):
            value = partials[MultiIndex.unit(l, r)] - sum_polys(
                total_derivative(rho2[(name, l, j)], j) for j in range(r) if (name, l, j) in rho2
            )
            if not value.is_zero():
                rho1[(name, l)] = value
    return CartanCoefficients(f, rho1, rho2)


SIDES = ("min", "max", "unspecified")


@dataclass(frozen=True)
class BoundaryReport:
    """Boundary density on the face ``X^face = const``.

    ``entries`` pairs each slot symbol with its coefficient; the density is
    meant to be wedged with ``Omega_boundary = d_face -| Omega``, which equals
    ``omega_sign`` times the remaining coordinate differentials in increasing
    order.  ``orientation_sign`` (+1 max side, -1 min side) converts it to the
    outward flux through that side.
    """

    face: int
    side: str = "unspecified"
    entries: tuple = ()
    omega_sign: int = 1

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def orientation_sign(self) -> int:
        return -1 if self.side == "min" else 1

    @property
    def slots(self) -> list[Symbol]:
        return [s for s, _ in self.entries]

    def coefficient(self, slot: Symbol) -> Poly:
        for s, c in self.entries:
            if s == slot:
                return c
        return Poly()

    def density(self) -> Poly:
        return sum_polys(Poly.sym(s) * c for s, c in self.entries)

    def renamed(self, prefix: str) -> "BoundaryReport":
        def rename(s: Symbol) -> Symbol:
            inner = s.name[s.name.index("["):]
            return Symbol(prefix + inner, s.kind, s.index)

        return BoundaryReport(
            self.face, self.side, tuple((rename(s), c) for s, c in self.entries), self.omega_sign
        )


def omega_sign(face: int) -> int:
    """Sign of ``d_face -| (dX^0 ^ ... ^ dX^{r-1})`` against the ordered rest."""
    return -1 if face % 2 else 1


def _report(L: Density, coeffs: CartanCoefficients, face: int, side: str, slot: str, tangential: bool):
    bundle = L.bundle
    r = bundle.r
    zeroth, normal, others = [], [], []
    for name in bundle.dependent:
        c0 = coeffs.rho1_of(name, face)
        if not c0.is_zero():
            zeroth.append((bundle.slot_symbol(slot, name), c0))
        for k in range(r):
            ck = coeffs.rho2_of(name, k, face)
            if ck.is_zero():
                continue
            entry = (bundle.slot_symbol(slot, name, MultiIndex.unit(k, r).counts), ck)
            if k == face:
                normal.append(entry)
            elif tangential:
                others.append(entry)
            else:
                raise AssertionError(f"tangential slot {entry[0]} under the adapted split")
    return BoundaryReport(face, side, tuple(zeroth + normal + others), omega_sign(face))


def boundary_terms(L: Density, face, side: str = "unspecified", slot: str = "eta") -> BoundaryReport:
    """Minimal boundary conditions on ``X^face = const`` (adapted split)."""
    f = _resolve_face(L, face)
    coeffs = cartan_coefficients(L, f, ADAPTED)
    return _report(L, coeffs, f, side, slot, tangential=False)


def boundary_terms_naive(
    L: Density, face, split: Split = SYMMETRIC, side: str = "unspecified", slot: str = "eta"
) -> BoundaryReport:
    """Boundary density under a non-adapted split; may contain tangential slots."""
    f = _resolve_face(L, face)
    coeffs = cartan_coefficients(L, f, split)
    return _report(L, coeffs, f, side, slot, tangential=True)


def verify_decomposition(L: Density, face=None, split: Split = ADAPTED, coeffs=None) -> Poly:
    """Residual of ``sum_J eta_J dL/dx_J = eta delta L + d_i(rho^i eta + rho^{k,i} eta_k)``.

    Zero for every coefficient set satisfying the coefficient conditions.
    """
    _check_order(L)
    bundle = L.bundle
    r = bundle.r
    if coeffs is None:
        coeffs = cartan_coefficients(L, face, split)
    eta = prolong_vertical_field(bundle, 2)
    lhs = []
    for name in bundle.dependent:
        for J, partial in partials_by_index(L.expr, bundle, name).items():
            if not partial.is_zero():
                lhs.append(eta[name][J] * partial)
    el = euler_lagrange(L)
    domain = sum_polys(eta[name][MultiIndex.zero(r)] * el[a] for a, name in enumerate(bundle.dependent))
    divergence = []
    for i in range(r):
        flux = []
        for name in bundle.dependent:
            flux.append(coeffs.rho1_of(name, i) * eta[name][MultiIndex.zero(r)])
            for k in range(r):
                flux.append(coeffs.rho2_of(name, k, i) * eta[name][MultiIndex.unit(k, r)])
        divergence.append(total_derivative(sum_polys(flux), i))
    return sum_polys(lhs) - domain - sum_polys(divergence)


def el_from_coefficients(L: Density, coeffs: CartanCoefficients) -> list[Poly]:
    """``dL/dx^a - sum_l d_l rho1[a,l]``: the domain operator read off a coefficient set."""
    bundle = L.bundle
    out = []
    for name in bundle.dependent:
        base = L.expr.diff(bundle.jet_symbol(name))
        out.append(base - sum_polys(total_derivative(coeffs.rho1_of(name, l), l) for l in range(bundle.r)))
    return out


__all__ = [
    "ADAPTED",
    "SYMMETRIC",
    "BoundaryReport",
    "CartanCoefficients",
    "TimeFaceError",
    "boundary_terms",
    "boundary_terms_naive",
    "cartan_coefficients",
    "el_from_coefficients",
    "euler_lagrange",
    "multi_indices",
    "omega_sign",
    "verify_decomposition",
]
