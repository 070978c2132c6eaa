"""Exact polynomial expressions over the rationals.

Two representations live here.  The raw syntax tree (:class:`Const`,
:class:`Var`, :class:`Add`, :class:`Mul`, :class:`Pow`) is what a parser
produces; :class:`Poly` is the canonical form every other module works with.
A ``Poly`` is always stored fully expanded, with monomials sorted by graded
degree and then lexicographically on ``(symbol name, multi-index)``, so two
polynomials are equal exactly when their term tuples are equal.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Union


class ExprError(ValueError):
    """Raised for operations outside the polynomial domain."""


class UnboundSymbolError(ExprError, KeyError):
    def __init__(self, symbol):
        self.symbol = symbol
        super().__init__(f"no value bound for symbol {symbol}")

    def __str__(self):
        return self.args[0]


class Kind(enum.Enum):
    PARAMETER = "parameter"
    INDEPENDENT = "independent"
    JET = "jet"
    INPUT = "input"
    SLOT = "slot"


@dataclass(frozen=True)
class Symbol:
    """A named leaf.

    Jet variables and variation slots carry ``index``, the per-direction
    derivative counts.  ``w`` with index ``(0, 2)`` prints as ``w[0,2]``; the
    all-zero index prints as the bare name.
    """

    name: str
    kind: Kind = Kind.PARAMETER
    index: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind in (Kind.JET, Kind.SLOT):
            if self.index is None:
                raise ExprError(f"{self.kind.value} symbol {self.name!r} needs a multi-index")
            object.__setattr__(self, "index", tuple(int(c) for c in self.index))
            if any(c < 0 for c in self.index):
                raise ExprError(f"negative derivative count in {self.index}")
        elif self.index is not None:
            raise ExprError(f"{self.kind.value} symbol {self.name!r} cannot carry a multi-index")

    @property
    def key(self):
        return (self.name, self.index or ())

    @property
    def order(self) -> int:
        return sum(self.index) if self.index else 0

    @property
    def is_jet(self) -> bool:
        return self.index is not None

    def with_index(self, index) -> "Symbol":
        return Symbol(self.name, self.kind, tuple(index))

    def __str__(self):
        if self.index and any(self.index):
            return f"{self.name}[{','.join(map(str, self.index))}]"
        return self.name

    def __repr__(self):
        return f"Symbol({str(self)!r}, {self.kind.name})"


# ---------------------------------------------------------------------------
# raw syntax trees


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Var:
    symbol: Symbol


@dataclass(frozen=True)
class Add:
    args: tuple


@dataclass(frozen=True)
class Mul:
    args: tuple


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


Tree = Union[Const, Var, Add, Mul, Pow]


# ---------------------------------------------------------------------------
# canonical polynomials

Monomial = tuple  # tuple[tuple[Symbol, int], ...], sorted by Symbol.key


def _mono_key(mono: Monomial):
    degree = sum(e for _, e in mono)
    return (degree, tuple((s.key, -e) for s, e in mono))


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for s, e in b:
        exps[s] = exps.get(s, 0) + e
    return tuple(sorted(exps.items(), key=lambda item: item[0].key))


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    raise ExprError(f"expected an exact rational, got {x!r}")


class Poly:
    """Immutable polynomial with exact rational coefficients, kept canonical."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None):
        items = [(m, _as_fraction(c)) for m, c in (terms or {}).items() if c != 0]
        items.sort(key=lambda mc: _mono_key(mc[0]))
        self.terms: tuple = tuple(items)
        self._hash = None

    # construction -------------------------------------------------------
    @classmethod
    def const(cls, value) -> "Poly":
        return cls({(): _as_fraction(value)})

    @classmethod
    def sym(cls, symbol: Symbol) -> "Poly":
        return cls({((symbol, 1),): Fraction(1)})

    @classmethod
    def lift(cls, x) -> "Poly":
        if isinstance(x, Poly):
            return x
        if isinstance(x, Symbol):
            return cls.sym(x)
        return cls.const(x)

    # queries ------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not m for m, _ in self.terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ExprError(f"{self} is not a constant")
        return self.terms[0][1] if self.terms else Fraction(0)

    @property
    def degree(self) -> int:
        return max((sum(e for _, e in m) for m, _ in self.terms), default=0)

    def symbols(self) -> frozenset:
        return frozenset(s for m, _ in self.terms for s, _ in m)

    def as_dict(self) -> dict:
        return dict(self.terms)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = Poly.lift(other)
        acc = dict(self.terms)
        for m, c in other.terms:
            acc[m] = acc.get(m, 0) + c
        return Poly(acc)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms})

    def __sub__(self, other):
        return self + (-Poly.lift(other))

    def __rsub__(self, other):
        return Poly.lift(other) - self

    def __mul__(self, other):
        other = Poly.lift(other)
        acc: dict = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, 0) + c1 * c2
        return Poly(acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        divisor = Poly.lift(other)
        if not divisor.is_constant():
            raise ExprError("division is only defined by nonzero rational constants")
        value = divisor.constant_value()
        if value == 0:
            raise ExprError("division by zero")
        return Poly({m: c / value for m, c in self.terms})

    def __pow__(self, n):
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise ExprError(f"exponent must be a nonnegative integer, got {n!r}")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # comparison ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction, Symbol)):
            return self.terms == Poly.lift(other).terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.terms)
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    # calculus and evaluation -------------------------------------------
    def diff(self, s: Symbol) -> "Poly":
        acc: dict = {}
        for m, c in self.terms:
            for pos, (t, e) in enumerate(m):
                if t == s:
                    rest = m[:pos] + ((t, e - 1),) + m[pos + 1:] if e > 1 else m[:pos] + m[pos + 1:]
                    acc[rest] = acc.get(rest, 0) + c * e
                    break
        return Poly(acc)

    def subs(self, bindings: Mapping[Symbol, object]) -> "Poly":
        if not bindings:
            return self
        images = {s: Poly.lift(v) for s, v in bindings.items()}
        total = Poly()
        for m, c in self.terms:
            term = Poly.const(c)
            for s, e in m:
                term = term * (images[s] ** e if s in images else Poly({((s, e),): 1}))
            total = total + term
        return total

    def eval(self, env: Mapping[Symbol, object]):
        """Evaluate with floats (or numpy arrays) bound to every symbol."""
        total = 0.0
        for m, c in self.terms:
            term = float(c)
            for s, e in m:
                try:
                    value = env[s]
                except KeyError:
                    raise UnboundSymbolError(s) from None
                term = term * (value if e == 1 else value**e)
            total = total + term
        return total

    def split(self, is_field) -> dict:
        """Group terms by their ``is_field`` part; values are the cofactor polys."""
        groups: dict = {}
        for m, c in self.terms:
            field = tuple((s, e) for s, e in m if is_field(s))
            rest = tuple((s, e) for s, e in m if not is_field(s))
            groups.setdefault(field, {})
            groups[field][rest] = groups[field].get(rest, 0) + c
        return {f: Poly(g) for f, g in sorted(groups.items(), key=lambda kv: _mono_key(kv[0]))}

    # printing -----------------------------------------------------------
    def __str__(self):
        return to_infix(self, grouped=False)

    def __repr__(self):
        return f"Poly({str(self)!r})"


# ---------------------------------------------------------------------------
# free functions mirroring the module contract


def canonicalize(e) -> Poly:
    """Return the canonical polynomial for a tree, symbol, number or Poly."""
    if isinstance(e, Poly):
        return e
    if isinstance(e, Const):
        return Poly.const(e.value)
    if isinstance(e, Var):
        return Poly.sym(e.symbol)
    if isinstance(e, Add):
        total = Poly()
        for arg in e.args:
            total = total + canonicalize(arg)
        return total
    if isinstance(e, Mul):
        prod = Poly.const(1)
        for arg in e.args:
            prod = prod * canonicalize(arg)
        return prod
    if isinstance(e, Pow):
        if not isinstance(e.exp, int) or e.exp < 1:
            raise ExprError(f"exponent must be a positive integer, got {e.exp!r}")
        return canonicalize(e.base) ** e.exp
    return Poly.lift(e)


def equivalent(e1, e2) -> bool:
    return (canonicalize(e1) - canonicalize(e2)).is_zero()


def diff_partial(e, s: Symbol) -> Poly:
    """Formal partial derivative; jet variables count as independent coordinates."""
    if s.kind is Kind.INDEPENDENT:
        raise ExprError(
            f"cannot take a partial derivative with respect to independent variable {s}; "
            "use total_derivative"
        )
    return canonicalize(e).diff(s)


def substitute(e, bindings: Mapping[Symbol, object]) -> Poly:
    return canonicalize(e).subs(bindings)


def eval_numeric(e, env: Mapping[Symbol, float]) -> float:
    return canonicalize(e).eval(env)


def symbols(names: str, kind: Kind = Kind.PARAMETER) -> list[Poly]:
    """``symbols("a b c")`` -> list of single-symbol polys (test and REPL helper)."""
    return [Poly.sym(Symbol(n, kind)) for n in names.replace(",", " ").split()]


# ---------------------------------------------------------------------------
# infix rendering


def _format_fraction(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _format_mono(mono: Monomial, sym_fmt) -> list[str]:
    return [sym_fmt(s) if e == 1 else f"{sym_fmt(s)}^{e}" for s, e in mono]


def _flat(p: Poly, sep_plus: str, sep_minus: str, sym_fmt) -> str:
    if p.is_zero():
        return "0"
    out = []
    for i, (m, c) in enumerate(p.terms):
        factors = _format_mono(m, sym_fmt)
        mag = abs(c)
        if mag != 1 or not factors:
            factors.insert(0, _format_fraction(mag))
        body = "*".join(factors)
        if i == 0:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append((sep_minus if c < 0 else sep_plus) + body)
    return "".join(out)


def is_field_symbol(s: Symbol) -> bool:
    return s.kind is not Kind.PARAMETER


def to_infix(p: Poly, grouped: bool = True, sym_fmt=str) -> str:
    """Render ``p`` as parseable infix.

    With ``grouped`` the terms are collected by their field part (jet
    variables, slots, inputs) and a multi-term parameter cofactor is printed
    in parentheses, e.g. ``w[0,0,3] + (2-nu)*w[0,2,1]``.
    """
    if not grouped:
        return _flat(p, " + ", " - ", sym_fmt)
    if p.is_zero():
        return "0"
    pieces: list[tuple[bool, str]] = []
    for field, cof in p.split(is_field_symbol).items():
        field_str = "*".join(_format_mono(field, sym_fmt))
        if len(cof.terms) == 1:
            (m, c), = cof.terms
            factors = _format_mono(m, sym_fmt) + _format_mono(field, sym_fmt)
            if abs(c) != 1 or not factors:
                factors.insert(0, _format_fraction(abs(c)))
            pieces.append((c < 0, "*".join(factors)))
        else:
            inner = _flat(cof, "+", "-", sym_fmt)
            pieces.append((False, f"({inner})*{field_str}" if field_str else f"({inner})"))
    out = []
    for i, (negative, text) in enumerate(pieces):
        if i == 0:
            out.append(("-" if negative else "") + text)
        else:
            out.append((" - " if negative else " + ") + text)
    return "".join(out)


def tree_symbols(tree) -> Iterable[Symbol]:
    if isinstance(tree, Var):
        yield tree.symbol
    elif isinstance(tree, (Add, Mul)):
        for a in tree.args:
            yield from tree_symbols(a)
    elif isinstance(tree, Pow):
        yield from tree_symbols(tree.base)
