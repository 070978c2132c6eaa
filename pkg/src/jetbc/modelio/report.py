"""Report documents and their text, LaTeX and JSON renderings."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..cartan import (
    ADAPTED,
    SYMMETRIC,
    BoundaryReport,
    CartanCoefficients,
    boundary_terms,
    boundary_terms_naive,
    cartan_coefficients,
    euler_lagrange,
    verify_decomposition,
)
from ..jetcalc import BundleSpec, sum_polys
from ..porthamil import PowerBalance, evolution_field, power_balance
from ..symexpr import Kind, Poly, Symbol, to_infix
from .parser import ModelError, ModelSpec, parse_expression

FORMATS = ("text", "latex", "json")


@dataclass(frozen=True)
class ModelInfo:
    kind: str
    name: str
    bundle: BundleSpec
    density: Poly


@dataclass(frozen=True)
class Equation:
    lhs: str
    rhs: Poly


@dataclass(frozen=True)
class VerifierStatus:
    residual_zero: bool
    residuals: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ReportDocument:
    model: ModelInfo
    equations: tuple = ()
    cartan: CartanCoefficients | None = None
    boundary: tuple = ()
    power_balance: tuple = ()  # one PowerBalance per face
    verifier: VerifierStatus | None = None

    @property
    def bundle(self) -> BundleSpec:
        return self.model.bundle


# ---------------------------------------------------------------------------
# building documents from models


def _select_faces(model: ModelSpec, face=None) -> list[tuple[int, str]]:
    bundle = model.bundle
    if face is not None:
        name = face if isinstance(face, str) else bundle.independent[face]
        for d, side in model.faces:
            if bundle.independent[d] == name:
                return [(d, side)]
        declared = ", ".join(model.face_names()) or "none"
        raise ModelError(f"face {name!r} is not a declared boundary (declared: {declared})", "unknown-face")
    if model.faces:
        return list(model.faces)
    return [(d, "unspecified") for d in bundle.spatial_directions()]


def _info(model: ModelSpec) -> ModelInfo:
    return ModelInfo(model.kind, model.density_name, model.bundle, model.density.expr)


def _el_equations(model: ModelSpec) -> tuple:
    return tuple(
        Equation(f"delta[{name}]", e) for name, e in zip(model.bundle.dependent, euler_lagrange(model.density))
    )


def _require_ph(model: ModelSpec):
    if model.ph is None:
        raise ModelError("this command needs a hamiltonian model with a structure block", "model")
    return model.ph


def _verifier(model: ModelSpec, faces) -> VerifierStatus:
    L = model.density
    residuals = {}
    for d, _ in faces:
        residuals[f"{model.bundle.independent[d]}/{ADAPTED}"] = verify_decomposition(L, d, ADAPTED)
    residuals[SYMMETRIC] = verify_decomposition(L, None, SYMMETRIC)
    if model.ph is not None:
        pb = power_balance(model.ph, faces[0][0]) if faces else None
        if pb is not None:
            residuals["domain"] = pb.domain_power - pb.domain_dissipation - pb.domain_port
    return VerifierStatus(all(r.is_zero() for r in residuals.values()), residuals)


def build_report(model: ModelSpec, command: str, face=None, naive_split: bool = False) -> ReportDocument:
    info = _info(model)
    if command == "el":
        return ReportDocument(info, _el_equations(model))
    if command == "bc":
        faces = _select_faces(model, face)
        make = boundary_terms_naive if naive_split else boundary_terms
        reports = tuple(make(model.density, d, side=side) for d, side in faces)
        split = SYMMETRIC if naive_split else ADAPTED
        coeffs = cartan_coefficients(model.density, faces[0][0], split) if faces else None
        return ReportDocument(info, _el_equations(model), coeffs, reports)
    if command in ("ports", "power"):
        ph = _require_ph(model)
        faces = _select_faces(model, face)
        v = evolution_field(ph)
        eqs = tuple(Equation(f"dot[{name}]", e) for name, e in zip(model.bundle.dependent, v))
        balances = tuple(power_balance(ph, d, side) for d, side in faces)
        coeffs = cartan_coefficients(model.density, faces[0][0]) if faces else None
        verifier = _verifier(model, faces) if command == "power" else None
        return ReportDocument(info, eqs, coeffs, tuple(b.boundary for b in balances), balances, verifier)
    if command == "verify":
        faces = _select_faces(model, face)
        return ReportDocument(info, _el_equations(model), None, (), (), _verifier(model, faces))
    raise ValueError(f"unknown command {command!r}")


# ---------------------------------------------------------------------------
# helpers shared by renderers


def expr_str(p: Poly) -> str:
    return to_infix(p, grouped=True)


def omega_boundary(bundle: BundleSpec, face: int, sign: int) -> str:
    rest = [f"d{bundle.independent[i]}" for i in range(bundle.r) if i != face]
    body = "^".join(rest) if rest else "1"
    return ("-" if sign < 0 else "") + body


def _dir(bundle, i):
    return bundle.independent[i]


def _slot_key(s: Symbol) -> str:
    return str(s)


# ---------------------------------------------------------------------------
# JSON


def _boundary_json(bundle, rep: BoundaryReport) -> dict:
    return {
        "face": _dir(bundle, rep.face),
        "side": rep.side,
        "side_sign": rep.orientation_sign,
        "omega_sign": rep.omega_sign,
        "slots": [{"slot": _slot_key(s), "coeff": expr_str(c)} for s, c in rep.entries],
    }


def to_json_dict(doc: ReportDocument) -> dict:
    b = doc.bundle
    out = {
        "model": {
            "kind": doc.model.kind,
            "name": doc.model.name,
            "independent": [{"name": n, "time": t} for n, t in zip(b.independent, b.time)],
            "dependent": list(b.dependent),
            "parameters": list(b.parameters),
            "inputs": list(b.inputs),
            "density": expr_str(doc.model.density),
        },
        "equations": [{"lhs": e.lhs, "rhs": expr_str(e.rhs)} for e in doc.equations],
        "cartan": None,
        "boundary": [_boundary_json(b, rep) for rep in doc.boundary],
        "power_balance": None,
        "verifier": None,
    }
    if doc.cartan is not None:
        c = doc.cartan
        rho1: dict = {}
        for (name, l), e in sorted(c.rho1.items()):
            rho1.setdefault(name, {})[_dir(b, l)] = expr_str(e)
        rho2: dict = {}
        for (name, k, j), e in sorted(c.rho2.items()):
            rho2.setdefault(name, {})[f"{_dir(b, k)},{_dir(b, j)}"] = expr_str(e)
        out["cartan"] = {
            "face": _dir(b, c.face) if c.face is not None else None,
            "rho1": rho1,
            "rho2": rho2,
        }
    if doc.power_balance:
        first = doc.power_balance[0]
        out["power_balance"] = {
            "dissipation": expr_str(first.domain_dissipation),
            "domain_port": expr_str(first.domain_port),
            "domain_power": expr_str(first.domain_power),
            "ports": [{"input": u, "output": expr_str(y)} for u, y in zip(b.inputs, first.collocated_outputs)],
            "boundary": [_boundary_json(b, pb.boundary) for pb in doc.power_balance],
        }
    if doc.verifier is not None:
        out["verifier"] = {
            "residual_zero": doc.verifier.residual_zero,
            "residuals": {k: expr_str(v) for k, v in doc.verifier.residuals.items()},
        }
    return out


def render_json(doc: ReportDocument) -> str:
    return json.dumps(to_json_dict(doc), indent=2) + "\n"


def _boundary_from_json(bundle, data) -> BoundaryReport:
    face = bundle.direction(data["face"])
    entries = []
    for slot in data["slots"]:
        sym_poly = parse_expression(slot["slot"], bundle)
        (sym,) = sym_poly.symbols()
        entries.append((sym, parse_expression(slot["coeff"], bundle)))
    return BoundaryReport(face, data["side"], tuple(entries), data["omega_sign"])


def from_json(text: str) -> ReportDocument:
    """Inverse of :func:`render_json`."""
    data = json.loads(text)
    m = data["model"]
    bundle = BundleSpec(
        tuple(x["name"] for x in m["independent"]),
        tuple(m["dependent"]),
        tuple(x["time"] for x in m["independent"]),
        tuple(m["parameters"]),
        tuple(m["inputs"]),
    )
    parse = lambda s: parse_expression(s, bundle)
    info = ModelInfo(m["kind"], m["name"], bundle, parse(m["density"]))
    eqs = tuple(Equation(e["lhs"], parse(e["rhs"])) for e in data["equations"])
    cartan = None
    if data.get("cartan") is not None:
        c = data["cartan"]
        rho1 = {
            (name, bundle.direction(d)): parse(e) for name, row in c["rho1"].items() for d, e in row.items()
        }
        rho2 = {}
        for name, row in c["rho2"].items():
            for pair, e in row.items():
                k, j = pair.split(",")
                rho2[(name, bundle.direction(k), bundle.direction(j))] = parse(e)
        face = bundle.direction(c["face"]) if c["face"] is not None else None
        cartan = CartanCoefficients(face, rho1, rho2)
    boundary = tuple(_boundary_from_json(bundle, rep) for rep in data["boundary"])
    balances = ()
    if data.get("power_balance") is not None:
        p = data["power_balance"]
        outputs = tuple(parse(port["output"]) for port in p["ports"])
        balances = tuple(
            PowerBalance(
                parse(p["dissipation"]),
                parse(p["domain_port"]),
                outputs,
                _boundary_from_json(bundle, rep),
                parse(p["domain_power"]),
            )
            for rep in p["boundary"]
        )
    verifier = None
    if data.get("verifier") is not None:
        v = data["verifier"]
        verifier = VerifierStatus(v["residual_zero"], {k: parse(e) for k, e in v["residuals"].items()})
    return ReportDocument(info, eqs, cartan, boundary, balances, verifier)


# ---------------------------------------------------------------------------
# plain text


def _model_header(doc: ReportDocument) -> list[str]:
    b = doc.bundle
    indep = ", ".join(f"{n} (time)" if t else n for n, t in zip(b.independent, b.time))
    lines = [f"model: {doc.model.kind} {doc.model.name} on ({indep})"]
    lines.append(f"fields: {', '.join(b.dependent)}")
    if b.parameters:
        lines.append(f"parameters: {', '.join(b.parameters)}")
    if b.inputs:
        lines.append(f"inputs: {', '.join(b.inputs)}")
    lines.append(f"{doc.model.name} = {expr_str(doc.model.density)}")
    return lines


def _boundary_text(b: BundleSpec, rep: BoundaryReport, title="boundary") -> list[str]:
    lines = [
        f"{title} {_dir(b, rep.face)} (side {rep.side}, orientation {rep.orientation_sign:+d}), "
        f"Omega_boundary = {omega_boundary(b, rep.face, rep.omega_sign)}:"
    ]
    if not rep.entries:
        lines.append("  (no slots)")
    width = max((len(_slot_key(s)) for s, _ in rep.entries), default=0)
    for s, c in rep.entries:
        lines.append(f"  {_slot_key(s).ljust(width)} : {expr_str(c)}")
    return lines


def render_text(doc: ReportDocument) -> str:
    b = doc.bundle
    lines = _model_header(doc)
    if doc.equations:
        lines += ["", "equations:"]
        lines += [f"  {e.lhs} = {expr_str(e.rhs)}" for e in doc.equations]
    if doc.cartan is not None:
        c = doc.cartan
        face = _dir(b, c.face) if c.face is not None else "-"
        lines += ["", f"cartan coefficients (face {face}):"]
        for (name, l), e in sorted(c.rho1.items()):
            lines.append(f"  rho1[{name}; {_dir(b, l)}] = {expr_str(e)}")
        for (name, k, j), e in sorted(c.rho2.items()):
            lines.append(f"  rho2[{name}; {_dir(b, k)},{_dir(b, j)}] = {expr_str(e)}")
    if doc.boundary and not doc.power_balance:
        for rep in doc.boundary:
            lines += [""] + _boundary_text(b, rep)
    if doc.power_balance:
        first = doc.power_balance[0]
        lines += ["", "power balance:"]
        lines.append(f"  dissipation = {expr_str(first.domain_dissipation)}")
        lines.append(f"  domain port = {expr_str(first.domain_port)}")
        for u, y in zip(b.inputs, first.collocated_outputs):
            lines.append(f"  output y[{u}] = {expr_str(y)}")
        for pb in doc.power_balance:
            rep = pb.boundary
            lines += [""] + _boundary_text(b, rep, "boundary ports")
            flux = sum_polys(Poly.sym(s) * c for s, c in rep.entries) * rep.omega_sign
            rest = " ".join(f"d{_dir(b, i)}" for i in range(b.r) if i != rep.face)
            lines.append(f"  flux density (per {rest or 'point'}): {expr_str(flux)}")
    if doc.verifier is not None:
        status = "zero" if doc.verifier.residual_zero else "NONZERO"
        lines += ["", f"verifier: residual {status}"]
        for k, v in doc.verifier.residuals.items():
            lines.append(f"  {k}: {expr_str(v)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# LaTeX

_GREEK = {
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "kappa", "lambda",
    "mu", "nu", "xi", "pi", "rho", "sigma", "tau", "phi", "chi", "psi", "omega",
}


def _latex_name(name: str) -> str:
    if name in _GREEK:
        return "\\" + name
    if len(name) > 1:
        return f"\\mathrm{{{name}}}"
    return name


def _latex_index(counts) -> str:
    if any(c >= 10 for c in counts):
        return ",".join(map(str, counts))
    return "".join(map(str, counts))


def latex_symbol(s: Symbol) -> str:
    if s.kind is Kind.SLOT:
        prefix, field_name = s.name[:-1].split("[")
        base = f"{_latex_name(prefix)}^{{{_latex_name(field_name)}}}"
        return base + (f"_{{{_latex_index(s.index)}}}" if any(s.index) else "")
    if s.kind is Kind.JET:
        return _latex_name(s.name) + (f"_{{{_latex_index(s.index)}}}" if any(s.index) else "")
    return _latex_name(s.name)


def latex_expr(p: Poly) -> str:
    text = to_infix(p, grouped=True, sym_fmt=latex_symbol)
    text = re.sub(r"\^(\d+)", r"^{\1}", text)
    text = re.sub(r"(?<![\w}])(\d+)/(\d+)", r"\\tfrac{\1}{\2}", text)
    text = text.replace("(", "\\left(").replace(")", "\\right)")
    return text.replace("*", "\\,")


def render_latex(doc: ReportDocument) -> str:
    b = doc.bundle
    lines = ["% generated report", "\\begin{align*}"]
    rows = [f"{_latex_name(doc.model.name)} &= {latex_expr(doc.model.density)}"]
    for e in doc.equations:
        kind, name = e.lhs.split("[")
        name = name.rstrip("]")
        lhs = f"\\delta_{{{_latex_name(name)}}}" if kind == "delta" else f"\\dot{{{_latex_name(name)}}}"
        rows.append(f"{lhs} &= {latex_expr(e.rhs)}")
    if doc.cartan is not None:
        for (name, l), e in sorted(doc.cartan.rho1.items()):
            rows.append(f"\\rho_{{{_latex_name(name)}}}^{{{_latex_name(_dir(b, l))}}} &= {latex_expr(e)}")
        for (name, k, j), e in sorted(doc.cartan.rho2.items()):
            sup = f"{_latex_name(_dir(b, k))},{_latex_name(_dir(b, j))}"
            rows.append(f"\\rho_{{{_latex_name(name)}}}^{{{sup}}} &= {latex_expr(e)}")
    reports = [pb.boundary for pb in doc.power_balance] or list(doc.boundary)
    for rep in reports:
        density = sum_polys(Poly.sym(s) * c for s, c in rep.entries)
        rows.append(f"\\text{{face }}{_latex_name(_dir(b, rep.face))} &: \\left({latex_expr(density)}\\right)\\Omega_\\partial")
    if doc.power_balance:
        first = doc.power_balance[0]
        rows.append(f"\\text{{dissipation}} &= {latex_expr(first.domain_dissipation)}")
        rows.append(f"\\text{{domain port}} &= {latex_expr(first.domain_port)}")
    lines.append(" \\\\\n".join(rows))
    lines.append("\\end{align*}")
    return "\n".join(lines) + "\n"


def render_report(doc: ReportDocument, fmt: str = "text") -> str:
    if fmt == "text":
        return render_text(doc)
    if fmt == "latex":
        return render_latex(doc)
    if fmt == "json":
        return render_json(doc)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
