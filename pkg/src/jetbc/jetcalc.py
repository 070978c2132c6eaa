"""Jet-bundle bookkeeping: multi-indices, bundles, densities, total derivatives."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

from .symexpr import ExprError, Kind, Poly, Symbol, canonicalize


class MultiIndexError(ValueError):
    pass


class BundleError(ValueError):
    pass


class UnsupportedOrderError(BundleError):
    """Jet order beyond what the second-order machinery handles."""


MAX_ORDER = 2


@dataclass(frozen=True, order=True)
class MultiIndex:
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 0 for c in self.counts):
            raise MultiIndexError(f"negative component in {self.counts}")

    @classmethod
    def zero(cls, r: int) -> "MultiIndex":
        return cls((0,) * r)

    @classmethod
    def unit(cls, k: int, r: int) -> "MultiIndex":
        """``1_k`` (0-based ``k``)."""
        if not 0 <= k < r:
            raise MultiIndexError(f"direction {k} out of range for r={r}")
        return cls(tuple(int(i == k) for i in range(r)))

    @property
    def order(self) -> int:
        return sum(self.counts)

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, i):
        return self.counts[i]

    def __iter__(self):
        return iter(self.counts)

    def _check(self, other):
        if len(other.counts) != len(self.counts):
            raise MultiIndexError(f"length mismatch: {self.counts} vs {other.counts}")

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        self._check(other)
        return MultiIndex(tuple(a + b for a, b in zip(self.counts, other.counts)))

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        self._check(other)
        diff = tuple(a - b for a, b in zip(self.counts, other.counts))
        if any(c < 0 for c in diff):
            raise MultiIndexError(f"{self.counts} - {other.counts} is not a multi-index")
        return MultiIndex(diff)

    def __str__(self):
        return "[" + ",".join(map(str, self.counts)) + "]"


def mi_add(J: MultiIndex, I: MultiIndex) -> MultiIndex:
    return J + I


def mi_sub(J: MultiIndex, I: MultiIndex) -> MultiIndex:
    return J - I


def mi_order(J: MultiIndex) -> int:
    return J.order


def multi_indices(r: int, max_order: int, min_order: int = 0) -> list[MultiIndex]:
    """All multi-indices of length ``r`` with ``min_order <= #J <= max_order``."""
    out = []
    for n in range(min_order, max_order + 1):
        for combo in itertools.combinations_with_replacement(range(r), n):
            out.append(MultiIndex(tuple(combo.count(i) for i in range(r))))
    return sorted(out, key=lambda J: (J.order, tuple(-c for c in J.counts)))


@dataclass(frozen=True)
class BundleSpec:
    """The bundle X -> D: independent variables (time-flagged or not), fields,
    parameters and inputs.  Directions are addressed 0-based or by name."""

    independent: tuple[str, ...]
    dependent: tuple[str, ...]
    time: tuple[bool, ...] = ()
    parameters: tuple[str, ...] = ()
    inputs: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("independent", "dependent", "time", "parameters", "inputs"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.time:
            object.__setattr__(self, "time", (False,) * len(self.independent))
        if len(self.time) != len(self.independent):
            raise BundleError("one time flag per independent variable is required")
        if not self.independent:
            raise BundleError("at least one independent variable is required")
        if not self.dependent:
            raise BundleError("at least one dependent variable is required")
        names = self.independent + self.dependent + self.parameters + self.inputs
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise BundleError(f"duplicate names: {', '.join(dupes)}")
        flagged = [i for i, t in enumerate(self.time) if t]
        if flagged and flagged != list(range(flagged[0], flagged[-1] + 1)):
            raise BundleError("time-flagged independent variables must be contiguous")

    @property
    def r(self) -> int:
        return len(self.independent)

    @property
    def m(self) -> int:
        return len(self.dependent)

    def direction(self, d) -> int:
        if isinstance(d, str):
            try:
                return self.independent.index(d)
            except ValueError:
                raise BundleError(f"unknown independent variable {d!r}") from None
        if not 0 <= d < self.r:
            raise BundleError(f"direction {d} out of range for r={self.r}")
        return int(d)

    def is_time(self, d) -> bool:
        return self.time[self.direction(d)]

    def spatial_directions(self) -> list[int]:
        return [i for i in range(self.r) if not self.time[i]]

    def jet_symbol(self, name: str, counts=None) -> Symbol:
        if name not in self.dependent:
            raise BundleError(f"unknown dependent variable {name!r}")
        counts = tuple(counts) if counts is not None else (0,) * self.r
        if len(counts) != self.r:
            raise BundleError(f"{name}{list(counts)} needs {self.r} derivative counts")
        return Symbol(name, Kind.JET, counts)

    def jet(self, name: str, *counts) -> Poly:
        """``bundle.jet("w", 0, 2)`` is the polynomial ``w[0,2]``."""
        return Poly.sym(self.jet_symbol(name, counts or None))

    def param_symbol(self, name: str) -> Symbol:
        if name not in self.parameters:
            raise BundleError(f"unknown parameter {name!r}")
        return Symbol(name, Kind.PARAMETER)

    def param(self, name: str) -> Poly:
        return Poly.sym(self.param_symbol(name))

    def input_symbol(self, name: str) -> Symbol:
        if name not in self.inputs:
            raise BundleError(f"unknown input {name!r}")
        return Symbol(name, Kind.INPUT)

    def slot_symbol(self, prefix: str, name: str, counts=None) -> Symbol:
        if name not in self.dependent:
            raise BundleError(f"unknown dependent variable {name!r}")
        counts = tuple(counts) if counts is not None else (0,) * self.r
        return Symbol(f"{prefix}[{name}]", Kind.SLOT, counts)

    def check_symbol(self, s: Symbol, allow_inputs=False, allow_slots=False):
        if s.kind is Kind.PARAMETER:
            self.param_symbol(s.name)
        elif s.kind is Kind.JET:
            self.jet_symbol(s.name, s.index)
        elif s.kind is Kind.INPUT:
            if not allow_inputs:
                raise BundleError(f"input {s.name!r} may only appear in structure matrices")
            self.input_symbol(s.name)
        elif s.kind is Kind.SLOT:
            if not allow_slots:
                raise BundleError(f"variation slot {s} not allowed here")
            if len(s.index) != self.r:
                raise BundleError(f"slot {s} has the wrong multi-index length")
        else:
            raise BundleError(
                f"independent variable {s.name!r} may not occur explicitly "
                "(only constant-coefficient densities are supported)"
            )


@dataclass(frozen=True)
class Density:
    """A Lagrangian or Hamiltonian density on ``bundle`` of jet order <= 2."""

    bundle: BundleSpec
    expr: Poly
    max_order: int = field(default=-1)

    def __post_init__(self):
        expr = canonicalize(self.expr)
        object.__setattr__(self, "expr", expr)
        for s in sorted(expr.symbols(), key=lambda s: s.key):
            self.bundle.check_symbol(s)
        order = jet_order(expr)
        if self.max_order < 0:
            object.__setattr__(self, "max_order", order)
        if order > self.max_order:
            raise BundleError(f"density has jet order {order} > declared {self.max_order}")
        if self.max_order > MAX_ORDER:
            raise UnsupportedOrderError(
                f"unsupported-order: jet order {self.max_order} exceeds {MAX_ORDER}"
            )


# ---------------------------------------------------------------------------
# total derivatives


def _shift(s: Symbol, i: int) -> Symbol:
    if not 0 <= i < len(s.index):
        raise MultiIndexError(f"direction {i} out of range for {s}")
    counts = list(s.index)
    counts[i] += 1
    return s.with_index(counts)


def total_derivative(e, i: int) -> Poly:
    """``d_{1_i}`` acting on a polynomial in jet variables (0-based ``i``).

    Densities never contain the independent variables explicitly, so only the
    ``x_{J+1_i} d/dx_J`` part contributes.
    """
    e = canonicalize(e)
    total = Poly()
    for s in sorted(e.symbols(), key=lambda s: s.key):
        if s.kind is Kind.INDEPENDENT:
            raise ExprError(f"explicit independent variable {s} is not supported")
        if s.is_jet:
            total = total + e.diff(s) * Poly.sym(_shift(s, i))
    return total


def total_derivative_multi(e, J: MultiIndex) -> Poly:
    e = canonicalize(e)
    for i, n in enumerate(J.counts):
        for _ in range(n):
            e = total_derivative(e, i)
    return e


def jet_order(e) -> int:
    return max((s.order for s in canonicalize(e).symbols() if s.is_jet), default=0)


def prolong_vertical_field(bundle: BundleSpec, n: int, prefix: str = "eta") -> dict:
    """Components ``d_J(eta^a)`` for ``#J <= n``, keyed ``[field][MultiIndex]``.

    The auxiliary field is adjoined as slot symbols ``eta[w]``, ``eta[w][1,0]``,
    ...; total derivatives act on them like on any other jet variable.
    """
    if n > MAX_ORDER:
        raise UnsupportedOrderError(f"unsupported-order: prolongation order {n}")
    out = {}
    for name in bundle.dependent:
        base = Poly.sym(bundle.slot_symbol(prefix, name))
        out[name] = {J: total_derivative_multi(base, J) for J in multi_indices(bundle.r, n)}
    return out


def partials_by_index(expr: Poly, bundle: BundleSpec, name: str, max_order: int = MAX_ORDER):
    """``{J: d expr / d x^name_J}`` for every multi-index up to ``max_order``."""
    return {
        J: expr.diff(bundle.jet_symbol(name, J.counts))
        for J in multi_indices(bundle.r, max_order)
    }


def sum_polys(polys) -> Poly:
    return reduce(lambda a, b: a + b, polys, Poly())
