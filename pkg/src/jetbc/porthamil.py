"""Port-Hamiltonian layer: evolution field, structure checks and power balance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cartan import BoundaryReport, boundary_terms, euler_lagrange
from .jetcalc import BundleError, Density, sum_polys
from .symexpr import Kind, Poly, Symbol


class StructureError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


@dataclass(frozen=True)
class Violation:
    kind: str  # "shape" | "skew" | "symmetry" | "psd" | "operator"
    message: str
    entries: tuple = ()
    witness: dict | None = None


def _as_matrix(rows):
    return tuple(tuple(Poly.lift(x) for x in row) for row in rows)


@dataclass(frozen=True)
class PHSystem:
    """``v = (J - R) delta H + G u`` over a bundle with spatial directions only."""

    H: Density
    J: tuple
    R: tuple | None = None
    G: tuple | None = None

    def __post_init__(self):
        m = self.H.bundle.m
        p = len(self.H.bundle.inputs)
        object.__setattr__(self, "J", _as_matrix(self.J))
        zero_mm = [[0] * m for _ in range(m)]
        object.__setattr__(self, "R", _as_matrix(self.R if self.R is not None else zero_mm))
        object.__setattr__(self, "G", _as_matrix(self.G if self.G is not None else [[0] * p for _ in range(m)]))
        if any(self.H.bundle.time):
            raise BundleError("port-Hamiltonian bundles must not contain time-flagged directions")

    @property
    def bundle(self):
        return self.H.bundle

    @property
    def inputs(self) -> list[Symbol]:
        return [Symbol(u, Kind.INPUT) for u in self.bundle.inputs]


@dataclass(frozen=True)
class PowerBalance:
    """``dH/dt = int(dissipation + domain_port) + boundary flux``."""

    domain_dissipation: Poly
    domain_port: Poly
    collocated_outputs: tuple
    boundary: BoundaryReport
    domain_power: Poly = field(default_factory=Poly)


def _shape_violations(sys: PHSystem) -> list[Violation]:
    m, p = sys.bundle.m, len(sys.bundle.inputs)
    out = []
    for name, mat, cols in (("J", sys.J, m), ("R", sys.R, m), ("G", sys.G, p)):
        if len(mat) != m or any(len(row) != cols for row in mat):
            shape = f"{len(mat)}x{len(mat[0]) if mat else 0}"
            out.append(Violation("shape", f"{name} must be {m}x{cols}, got {shape}"))
    return out


def _sample_value(s: Symbol, rng) -> float:
    # physical parameters are positive; state values take either sign
    if s.kind is Kind.PARAMETER:
        return float(rng.uniform(0.1, 2.0))
    return float(rng.uniform(-2.0, 2.0))


def validate_structure(sys: PHSystem, samples: int = 100, seed: int = 0) -> list[Violation]:
    """Empty list means ``J`` is skew, ``R`` symmetric PSD, entries operator-free."""
    out = _shape_violations(sys)
    if out:
        return out
    m = sys.bundle.m
    for name, mat in (("J", sys.J), ("R", sys.R), ("G", sys.G)):
        for a, row in enumerate(mat):
            for b, entry in enumerate(row):
                for s in sorted(entry.symbols(), key=lambda s: s.key):
                    if s.kind is Kind.JET and s.order == 0 and s.name in sys.bundle.dependent:
                        continue
                    if s.kind is Kind.PARAMETER and s.name in sys.bundle.parameters:
                        continue
                    out.append(
                        Violation(
                            "operator",
                            f"{name}[{a + 1}][{b + 1}] contains {s}; only parameters and "
                            "zeroth-order fields are allowed",
                            ((a + 1, b + 1),),
                        )
                    )
    for a in range(m):
        for b in range(a, m):
            if not (sys.J[a][b] + sys.J[b][a]).is_zero():
                out.append(
                    Violation("skew", f"J is not skew: J[{a + 1}][{b + 1}] + J[{b + 1}][{a + 1}] != 0",
                              ((a + 1, b + 1), (b + 1, a + 1)))
                )
            if a != b and not (sys.R[a][b] - sys.R[b][a]).is_zero():
                out.append(
                    Violation("symmetry", f"R is not symmetric at ({a + 1},{b + 1})",
                              ((a + 1, b + 1), (b + 1, a + 1)))
                )
    if any(v.kind == "operator" for v in out):
        return out
    syms = sorted({s for row in sys.R for e in row for s in e.symbols()}, key=lambda s: s.key)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        env = {s: _sample_value(s, rng) for s in syms}
        Rn = np.array([[float(e.eval(env)) for e in row] for row in sys.R])
        lam = float(np.linalg.eigvalsh(0.5 * (Rn + Rn.T)).min())
        if lam < -1e-10:
            witness = {str(s): v for s, v in env.items()}
            out.append(Violation("psd", f"R has eigenvalue {lam:.3g} < 0 at {witness}", (), witness))
            break
    return out


def variational_derivative(H: Density) -> list[Poly]:
    return euler_lagrange(H)


def _require_valid(sys: PHSystem):
    violations = validate_structure(sys)
    if violations:
        raise StructureError(violations)


def evolution_field(sys: PHSystem, check: bool = True) -> list[Poly]:
    if check:
        _require_valid(sys)
    dH = variational_derivative(sys.H)
    u = [Poly.sym(s) for s in sys.inputs]
    out = []
    for a in range(sys.bundle.m):
        v = sum_polys((sys.J[a][b] - sys.R[a][b]) * dH[b] for b in range(sys.bundle.m))
        v = v + sum_polys(sys.G[a][x] * u[x] for x in range(len(u)))
        out.append(v)
    return out


def collocated_outputs(sys: PHSystem, dH=None) -> list[Poly]:
    dH = dH if dH is not None else variational_derivative(sys.H)
    m = sys.bundle.m
    return [sum_polys(sys.G[a][x] * dH[a] for a in range(m)) for x in range(len(sys.inputs))]


def power_balance(sys: PHSystem, face, side: str = "unspecified") -> PowerBalance:
    _require_valid(sys)
    m = sys.bundle.m
    dH = variational_derivative(sys.H)
    diss = -sum_polys(dH[a] * sys.R[a][b] * dH[b] for a in range(m) for b in range(m))
    y = collocated_outputs(sys, dH)
    port = sum_polys(yx * Poly.sym(u) for yx, u in zip(y, sys.inputs))
    v = evolution_field(sys, check=False)
    power = sum_polys(v[a] * dH[a] for a in range(m))
    report = boundary_terms(sys.H, face, side=side, slot="v")
    return PowerBalance(diss, port, tuple(y), report, power)
