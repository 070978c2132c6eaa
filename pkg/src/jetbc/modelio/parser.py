"""Parser for ``.vb`` model sources.

A model is a sequence of ``;``-terminated statements::

    independent t time, X;
    dependent w;
    parameter rho, A, E, I;
    lagrangian L = 1/2*rho*A*w[1,0]^2 - 1/2*E*I*w[0,2]^2;
    boundary X;

Port-Hamiltonian models use ``hamiltonian H = ...;`` plus
``structure J = [[0,1],[-1,0]]; R = [[0,0],[0,0]]; G = [];``.  ``#`` starts
a comment.  Jet variables are written with one derivative count per
independent variable; a bare field name is its zeroth jet.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from ..cartan import SIDES
from ..jetcalc import MAX_ORDER, BundleError, BundleSpec, Density
from ..porthamil import PHSystem
from ..symexpr import Add, Const, ExprError, Kind, Mul, Pow, Symbol, Var, canonicalize


class ModelError(Exception):
    """A model that cannot be used.  ``kind`` names the failure class."""

    def __init__(self, message, kind="syntax", line=None, col=None):
        self.kind = kind
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(f"{where}{kind}: {message}")


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()\[\],;=])
  """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens, line, line_start, pos = [], 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ModelError(f"unexpected character {text[pos]!r}", "syntax", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Cursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, message, kind="syntax", tok=None):
        tok = tok or self.tok
        return ModelError(message, kind, tok.line, tok.col)

    def expect(self, text) -> Token:
        if self.tok.text != text or self.tok.kind == "eof":
            got = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, got {got!r}")
        return self.advance()

    def accept(self, text) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.advance()
            return True
        return False

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected a name, got {self.tok.text or 'end of input'!r}")
        return self.advance()


class _Scope:
    """Symbol resolution for expressions."""

    def __init__(self, independent=(), dependent=(), parameters=(), inputs=(), slot_prefixes=(), max_order=MAX_ORDER):
        self.max_order = max_order
        self.independent = list(independent)
        self.dependent = list(dependent)
        self.parameters = list(parameters)
        self.inputs = list(inputs)
        self.slot_prefixes = set(slot_prefixes)

    @classmethod
    def of(cls, bundle: BundleSpec, slot_prefixes=(), max_order=MAX_ORDER):
        return cls(bundle.independent, bundle.dependent, bundle.parameters, bundle.inputs, slot_prefixes, max_order)

    @property
    def r(self):
        return len(self.independent)


def _read_counts(cur: _Cursor) -> list[int]:
    cur.expect("[")
    counts = []
    while True:
        t = cur.tok
        if t.kind != "num" or not t.text.isdigit():
            raise cur.error("derivative counts must be nonnegative integers")
        counts.append(int(cur.advance().text))
        if not cur.accept(","):
            break
    cur.expect("]")
    return counts


def _parse_counts(cur: _Cursor, scope: _Scope, name_tok: Token) -> tuple[int, ...]:
    counts = _read_counts(cur)
    if len(counts) != scope.r:
        raise cur.error(
            f"{name_tok.text} needs {scope.r} derivative counts, got {len(counts)}", "syntax", name_tok
        )
    if scope.max_order is not None and sum(counts) > scope.max_order:
        raise cur.error(
            f"{name_tok.text}{counts} has jet order {sum(counts)} > {scope.max_order}", "unsupported-order", name_tok
        )
    return tuple(counts)


def _atom(cur: _Cursor, scope: _Scope):
    t = cur.tok
    if t.kind == "num":
        cur.advance()
        return Const(Fraction(t.text))
    if cur.accept("("):
        inner = _expr(cur, scope)
        cur.expect(")")
        return inner
    if t.kind == "ident":
        cur.advance()
        name = t.text
        if name in scope.slot_prefixes and cur.tok.text == "[" and cur.peek().kind == "ident":
            cur.expect("[")
            field_tok = cur.ident()
            if field_tok.text not in scope.dependent:
                raise cur.error(f"undeclared field {field_tok.text!r}", "undeclared", field_tok)
            cur.expect("]")
            counts = tuple(_read_counts(cur)) if cur.tok.text == "[" else (0,) * scope.r
            if len(counts) != scope.r:
                raise cur.error(f"slot needs {scope.r} derivative counts", "syntax", field_tok)
            return Var(Symbol(f"{name}[{field_tok.text}]", Kind.SLOT, tuple(counts)))
        if name in scope.dependent:
            counts = _parse_counts(cur, scope, t) if cur.tok.text == "[" else (0,) * scope.r
            return Var(Symbol(name, Kind.JET, counts))
        if name in scope.parameters:
            return Var(Symbol(name, Kind.PARAMETER))
        if name in scope.inputs:
            return Var(Symbol(name, Kind.INPUT))
        if name in scope.independent:
            raise cur.error(
                f"independent variable {name!r} may not appear explicitly in an expression", "model", t
            )
        raise cur.error(f"undeclared symbol {name!r}", "undeclared", t)
    raise cur.error(f"unexpected {t.text or 'end of input'!r}")


def _power(cur, scope):
    base = _atom(cur, scope)
    if cur.accept("^"):
        t = cur.tok
        if t.kind != "num" or not t.text.isdigit() or int(t.text) < 1:
            raise cur.error("exponents must be positive integer literals")
        cur.advance()
        return Pow(base, int(t.text))
    return base


def _unary(cur, scope):
    if cur.accept("-"):
        return Mul((Const(Fraction(-1)), _unary(cur, scope)))
    if cur.accept("+"):
        return _unary(cur, scope)
    return _power(cur, scope)


def _term(cur, scope):
    factors = [_unary(cur, scope)]
    while cur.tok.kind == "op" and cur.tok.text in "*/":
        op = cur.advance()
        rhs = _unary(cur, scope)
        if op.text == "/":
            divisor = canonicalize(rhs)
            if not divisor.is_constant() or divisor.constant_value() == 0:
                raise cur.error("'/' is only allowed with a nonzero rational constant divisor", "syntax", op)
            rhs = Const(1 / divisor.constant_value())
        factors.append(rhs)
    return factors[0] if len(factors) == 1 else Mul(tuple(factors))


def _expr(cur, scope):
    terms = [_term(cur, scope)]
    while cur.tok.kind == "op" and cur.tok.text in "+-":
        op = cur.advance()
        t = _term(cur, scope)
        terms.append(t if op.text == "+" else Mul((Const(Fraction(-1)), t)))
    return terms[0] if len(terms) == 1 else Add(tuple(terms))


def parse_expression(
    text: str, bundle: BundleSpec | None = None, slot_prefixes=("eta", "v"), scope=None, max_order=None
):
    """Parse a single infix expression to its canonical :class:`Poly`.

    Jet order is unrestricted unless ``max_order`` is given, since derived
    expressions (equations, residuals) exceed the order of the density.
    """
    scope = scope or _Scope.of(bundle, slot_prefixes, max_order)
    cur = _Cursor(tokenize(text))
    tree = _expr(cur, scope)
    if cur.tok.kind != "eof":
        raise cur.error(f"unexpected {cur.tok.text!r} after expression")
    return canonicalize(tree)


# ---------------------------------------------------------------------------
# model files


@dataclass
class ModelSpec:
    bundle: BundleSpec
    kind: str  # "lagrangian" | "hamiltonian"
    density: Density
    density_name: str = "L"
    ph: PHSystem | None = None
    faces: tuple = ()  # ((direction, side), ...)
    parameter_values: dict = field(default_factory=dict)

    def face_names(self) -> list[str]:
        return [self.bundle.independent[d] for d, _ in self.faces]


def _name_list(cur: _Cursor, with_flag=None, with_default=False):
    items = []
    while True:
        name = cur.ident().text
        flag, default = False, None
        if with_flag and cur.tok.kind == "ident" and cur.tok.text == with_flag:
            cur.advance()
            flag = True
        if with_default and cur.accept("="):
            default = canonicalize(_expr(cur, _Scope()))
            if not default.is_constant():
                raise cur.error("parameter defaults must be numeric constants")
            default = default.constant_value()
        items.append((name, flag, default))
        if not cur.accept(","):
            return items


def _matrix(cur: _Cursor, scope: _Scope):
    start = cur.expect("[")
    rows = []
    if cur.accept("]"):
        return rows, start
    while True:
        cur.expect("[")
        row = []
        if not cur.accept("]"):
            while True:
                row.append(canonicalize(_expr(cur, scope)))
                if not cur.accept(","):
                    break
            cur.expect("]")
        rows.append(row)
        if not cur.accept(","):
            break
    cur.expect("]")
    return rows, start


_KEYWORDS = {"independent", "dependent", "parameter", "input", "lagrangian", "hamiltonian", "boundary", "structure"}


def parse_model(text: str) -> ModelSpec:
    cur = _Cursor(tokenize(text))
    decl = {"independent": [], "time": [], "dependent": [], "parameters": [], "inputs": []}
    defaults = {}
    density = None  # (kind, name, tree, token)
    matrices = {}
    faces = []
    seen_names: dict[str, Token] = {}

    def declare(tok_name, tok):
        if tok_name in seen_names:
            raise cur.error(f"{tok_name!r} declared twice", "model", tok)
        seen_names[tok_name] = tok

    def scope():
        return _Scope(decl["independent"], decl["dependent"], decl["parameters"], decl["inputs"])

    while cur.tok.kind != "eof":
        if cur.accept(";"):
            continue
        head = cur.tok
        if head.kind != "ident":
            raise cur.error(f"expected a statement, got {head.text!r}")
        word = head.text
        if word == "structure":
            cur.advance()
            head = cur.tok
            word = head.text
            if word not in ("J", "R", "G") or cur.peek().text != "=":
                raise cur.error("expected 'J =', 'R =' or 'G =' after 'structure'")
        if word in ("J", "R", "G") and cur.peek().text == "=" and cur.peek(2).text == "[":
            cur.advance()
            cur.expect("=")
            if word in matrices:
                raise cur.error(f"structure matrix {word} given twice", "model", head)
            matrices[word] = _matrix(cur, scope())
        elif word == "independent":
            cur.advance()
            for name, flag, _ in _name_list(cur, with_flag="time"):
                declare(name, head)
                decl["independent"].append(name)
                decl["time"].append(flag)
        elif word == "dependent":
            cur.advance()
            for name, _, _ in _name_list(cur):
                declare(name, head)
                decl["dependent"].append(name)
        elif word == "parameter":
            cur.advance()
            for name, _, default in _name_list(cur, with_default=True):
                declare(name, head)
                decl["parameters"].append(name)
                if default is not None:
                    defaults[name] = default
        elif word == "input":
            cur.advance()
            for name, _, _ in _name_list(cur):
                declare(name, head)
                decl["inputs"].append(name)
        elif word in ("lagrangian", "hamiltonian"):
            cur.advance()
            if density is not None:
                raise cur.error("exactly one density is allowed", "model", head)
            if not decl["independent"] or not decl["dependent"]:
                raise cur.error("declare independent and dependent variables before the density", "model", head)
            name_tok = cur.ident()
            cur.expect("=")
            tree = _expr(cur, scope())
            density = (word, name_tok.text, tree, head)
        elif word == "boundary":
            cur.advance()
            name_tok = cur.ident()
            if name_tok.text not in decl["independent"]:
                raise cur.error(f"boundary {name_tok.text!r} is not an independent variable", "undeclared", name_tok)
            d = decl["independent"].index(name_tok.text)
            if decl["time"][d]:
                raise cur.error(
                    f"boundary {name_tok.text!r} is time-flagged: no variation on the time boundary",
                    "time-face",
                    name_tok,
                )
            side = "unspecified"
            if cur.tok.kind == "ident" and cur.tok.text in SIDES:
                side = cur.advance().text
            faces.append((d, side))
        else:
            raise cur.error(f"unknown statement {word!r}")
        cur.expect(";")

    if density is None:
        raise ModelError("model declares no lagrangian or hamiltonian density", "model")
    kind, dname, tree, dtok = density
    try:
        bundle = BundleSpec(
            tuple(decl["independent"]),
            tuple(decl["dependent"]),
            tuple(decl["time"]),
            tuple(decl["parameters"]),
            tuple(decl["inputs"]),
        )
    except BundleError as exc:
        raise ModelError(str(exc), "model") from None
    try:
        expr = canonicalize(tree)
        dens = Density(bundle, expr)
    except (BundleError, ExprError) as exc:
        kind_name = "unsupported-order" if "unsupported-order" in str(exc) else "model"
        raise ModelError(str(exc), kind_name, dtok.line, dtok.col) from None

    ph = None
    if matrices:
        if kind != "hamiltonian":
            raise ModelError("structure matrices require a hamiltonian density", "model")
        if any(bundle.time):
            raise ModelError("a port-Hamiltonian model must not declare time-flagged variables", "model")
        if "J" not in matrices:
            raise ModelError("structure block needs a J matrix", "matrix-shape")
        m, p = bundle.m, len(bundle.inputs)
        for name, cols in (("J", m), ("R", m), ("G", p)):
            if name not in matrices:
                continue
            rows, tok = matrices[name]
            if p == 0 and name == "G" and rows == []:
                continue
            if len(rows) != m or any(len(row) != cols for row in rows):
                got = f"{len(rows)}x{len(rows[0]) if rows else 0}"
                raise ModelError(f"{name} must be {m}x{cols}, got {got}", "matrix-shape", tok.line, tok.col)
        get = lambda k: matrices[k][0] if k in matrices and matrices[k][0] else None
        ph = PHSystem(dens, get("J"), get("R"), get("G"))
    elif kind == "hamiltonian" and any(bundle.time):
        raise ModelError("a hamiltonian model must not declare time-flagged variables", "model")

    return ModelSpec(bundle, kind, dens, dname, ph, tuple(faces), defaults)


def load_model(path) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
