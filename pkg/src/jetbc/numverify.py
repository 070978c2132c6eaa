"""Finite-difference audit of the port-Hamiltonian power balance.

The evolution field of a quadratic Hamiltonian is linear in the jet
variables, so the semi-discrete system is ``du/dt = A u`` with ``A`` built
from central stencils applied to an extended grid.  Ghost layers (two per
non-periodic face) are eliminated through one joint sparse linear system:

* clamped: even reflection about the boundary node, and every field held at
  zero on the boundary;
* free: the boundary-report coefficients vanish at every boundary node, fields
  without a report slot are filled by linear extrapolation;
* periodic: indices wrap, no ghosts.

Corner ghosts (ghost in two directions) reuse the closure of the first
direction along the ghost rows of the second.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cartan import boundary_terms
from .porthamil import PHSystem, evolution_field, validate_structure, variational_derivative
from .symexpr import Kind, Poly, Symbol

BC_KINDS = ("clamped", "free", "periodic")
MIN_NODES = 8
GHOSTS = 2

# central second-order stencils, offsets -2..2
_STENCILS = {
    0: np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
    1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}

# RK4 stability interval on the imaginary axis is 2*sqrt(2); keep a margin
RK4_LIMIT = 2.8


class NumVerifyError(ValueError):
    pass


class InstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[0, L_d]`` per spatial direction.

    Non-periodic directions include both end nodes (``h = L/(N-1)``),
    periodic ones omit the right end (``h = L/N``).  ``bc[d] = (min, max)``.
    """

    nodes: tuple
    lengths: tuple = ()
    bc: tuple = ()

    def __post_init__(self):
        nodes = tuple(int(n) for n in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        lengths = tuple(float(x) for x in self.lengths) or (1.0,) * len(nodes)
        object.__setattr__(self, "lengths", lengths)
        bc = tuple(tuple(pair) for pair in self.bc) or (("clamped", "clamped"),) * len(nodes)
        object.__setattr__(self, "bc", bc)
        if len(nodes) not in (1, 2):
            raise NumVerifyError(f"only 1 or 2 spatial dimensions are supported, got {len(nodes)}")
        if len(lengths) != len(nodes) or len(bc) != len(nodes):
            raise NumVerifyError("nodes, lengths and bc must have one entry per direction")
        for d, (n, pair) in enumerate(zip(nodes, bc)):
            if n < MIN_NODES:
                raise NumVerifyError(f"direction {d}: need at least {MIN_NODES} nodes, got {n}")
            if any(k not in BC_KINDS for k in pair):
                raise NumVerifyError(f"direction {d}: unknown boundary condition in {pair}")
            if ("periodic" in pair) and pair != ("periodic", "periodic"):
                raise NumVerifyError(f"direction {d}: periodic must apply to both sides")

    @property
    def dim(self) -> int:
        return len(self.nodes)

    def periodic(self, d) -> bool:
        return self.bc[d][0] == "periodic"

    def spacing(self, d) -> float:
        n = self.nodes[d]
        return self.lengths[d] / (n if self.periodic(d) else n - 1)

    def coordinates(self, d) -> np.ndarray:
        return np.arange(self.nodes[d]) * self.spacing(d)

    def quadrature_weights(self, d) -> np.ndarray:
        w = np.full(self.nodes[d], self.spacing(d))
        if not self.periodic(d):
            w[0] = w[-1] = 0.5 * self.spacing(d)
        return w

    def refined(self) -> "GridSpec":
        """Halve every spacing."""
        nodes = tuple(2 * n if self.periodic(d) else 2 * n - 1 for d, n in enumerate(self.nodes))
        return GridSpec(nodes, self.lengths, self.bc)


@dataclass
class GridSection:
    """Nodal values of every field, shape ``(m, *grid.nodes)``."""

    grid: GridSpec
    fields: tuple
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.fields),) + self.grid.nodes:
            raise NumVerifyError(f"values must have shape {(len(self.fields),) + self.grid.nodes}")
        if not np.all(np.isfinite(self.values)):
            raise NumVerifyError("grid values must be finite")

    def state(self) -> np.ndarray:
        return self.values.reshape(-1).copy()

    @classmethod
    def from_state(cls, grid, fields, u):
        return cls(grid, tuple(fields), np.asarray(u).reshape((len(fields),) + grid.nodes))


# ---------------------------------------------------------------------------
# symbolic -> numeric


def _numeric(p: Poly, params: dict) -> float:
    env = {Symbol(k, Kind.PARAMETER): v for k, v in params.items()}
    return float(p.eval(env))


def _linear_terms(p: Poly, params: dict, what: str) -> list[tuple[str, tuple, float]]:
    """``[(field, counts, coefficient)]`` for a polynomial linear in jets; inputs are dropped."""
    out = []
    for mono, cof in p.split(lambda s: s.kind is not Kind.PARAMETER).items():
        if any(s.kind is Kind.INPUT for s, _ in mono):
            continue
        if len(mono) != 1 or mono[0][1] != 1 or mono[0][0].kind is not Kind.JET:
            raise NumVerifyError(f"{what} must be linear in the jet variables (quadratic Hamiltonian)")
        s = mono[0][0]
        out.append((s.name, s.index, _numeric(cof, params)))
    return out


def _quadratic_terms(p: Poly, params: dict):
    out = []
    for mono, cof in p.split(lambda s: s.kind is not Kind.PARAMETER).items():
        if sum(e for _, e in mono) != 2 or any(s.kind is not Kind.JET for s, _ in mono):
            raise NumVerifyError("the Hamiltonian density must be a quadratic form in the jet variables")
        syms = [s for s, e in mono for _ in range(e)]
        out.append((syms[0], syms[1], _numeric(cof, params)))
    return out


# ---------------------------------------------------------------------------
# the semi-discrete system


def _diff_1d(n: int, periodic: bool, order: int, h: float) -> sp.csr_matrix:
    """Rows: real nodes; columns: extended nodes along one direction."""
    st = _STENCILS[order] / h**order
    rows, cols, vals = [], [], []
    for i in range(n):
        for s, c in zip(range(-2, 3), st):
            if c == 0.0:
                continue
            rows.append(i)
            cols.append((i + s) % n if periodic else i + s + GHOSTS)
            vals.append(c)
    ext = n if periodic else n + 2 * GHOSTS
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, ext))


@dataclass
class SemiDiscrete:
    """``du/dt = A u`` plus the operators needed for energy bookkeeping."""

    sys: PHSystem
    grid: GridSpec
    params: dict
    A: sp.csr_matrix
    K: sp.csr_matrix  # discrete energy is 0.5 * u.K.u
    fields: tuple
    jet_ops: dict  # (field, counts) -> sparse map state -> real-node values
    delta_ops: list  # discrete variational derivative per field
    R: np.ndarray
    faces: list  # (direction, side, kind, BoundaryReport)
    weights: np.ndarray  # flattened quadrature weights on real nodes
    mask: np.ndarray  # False on nodes held at zero by clamping
    _dt_max: float | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.grid.nodes))

    def rhs(self, u):
        return self.A @ u

    def energy(self, u) -> float:
        return float(0.5 * u @ (self.K @ u))

    def energy_gradient(self, u) -> np.ndarray:
        return self.K @ u

    def jet(self, u, name, counts) -> np.ndarray:
        key = (name, tuple(counts))
        if key not in self.jet_ops:
            self.jet_ops[key] = _jet_op(self, name, key[1])
        return (self.jet_ops[key] @ u).reshape(self.grid.nodes)

    def variational(self, u) -> np.ndarray:
        return np.array([(D @ u) for D in self.delta_ops])

    def domain_power(self, u) -> float:
        """Integrated dissipation ``-dH.R.dH`` (inputs are held at zero)."""
        dH = self.variational(u)
        dens = -np.einsum("an,ab,bn->n", dH, self.R, dH)
        return float(dens @ self.weights)

    def boundary_flux(self, u) -> float:
        """Sum over non-periodic faces of ``side_sign * int(flow * effort)``."""
        if not self.faces:
            return 0.0
        v = self.A @ u
        total = 0.0
        for d, side, _, report in self.faces:
            sign = -1.0 if side == "min" else 1.0
            idx = 0 if side == "min" else -1
            tw = _tangential_weights(self.grid, d)
            dens = 0.0
            for slot, coeff in report.entries:
                name = slot.name[slot.name.index("[") + 1 : -1]
                # flows obey the same closure as states, so reuse the ghost map
                flow = np.take(self.jet(v, name, slot.index), idx, axis=d)
                effort = sum(
                    np.take(self.jet(u, s.name, s.index), idx, axis=d) * c
                    for s, c in _effort_terms(coeff, self.params)
                )
                dens = dens + flow * effort
            total += sign * float(np.sum(np.asarray(dens) * tw))
        return total

    def stable_dt(self) -> float:
        """``RK4_LIMIT / spectral_radius(A)``."""
        if self._dt_max is None:
            rho = _spectral_radius(self.A)
            self._dt_max = np.inf if rho == 0 else RK4_LIMIT / rho
        return self._dt_max

    def dt_constant(self) -> float:
        """``c`` in ``dt <= c * h_min^2``."""
        h = min(self.grid.spacing(d) for d in range(self.grid.dim))
        return self.stable_dt() / h**2

    def project(self, u) -> np.ndarray:
        u = np.array(u, dtype=float).reshape(len(self.fields), -1)
        u[:, ~self.mask] = 0.0
        return u.reshape(-1)


def _effort_terms(coeff: Poly, params):
    return [(Symbol(n, Kind.JET, c), w) for n, c, w in _linear_terms(coeff, params, "boundary coefficient")]


def _tangential_weights(grid: GridSpec, d: int):
    others = [grid.quadrature_weights(e) for e in range(grid.dim) if e != d]
    if not others:
        return 1.0
    return others[0]


def _spectral_radius(A) -> float:
    n = A.shape[0]
    if n <= 600:
        return float(np.max(np.abs(np.linalg.eigvals(A.toarray()))))
    try:
        vals = spla.eigs(A.tocsc(), k=4, which="LM", return_eigenvectors=False, tol=1e-6, maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        vals = exc.eigenvalues
    return float(np.max(np.abs(vals)))


class _Layout:
    """Index bookkeeping for the extended grid."""

    def __init__(self, grid: GridSpec, m: int):
        self.grid, self.m = grid, m
        self.off = [0 if grid.periodic(d) else GHOSTS for d in range(grid.dim)]
        self.ext = tuple(n + 2 * o for n, o in zip(grid.nodes, self.off))
        self.n_ext = int(np.prod(self.ext))
        self.n_real = int(np.prod(grid.nodes))

    def ext_index(self, f, idx) -> int:
        idx = tuple(i % n if o == 0 else i for i, o, n in zip(idx, self.off, self.ext))
        return f * self.n_ext + int(np.ravel_multi_index(idx, self.ext))

    def real_to_ext(self, idx):
        return tuple(i + o for i, o in zip(idx, self.off))

    def is_real(self, idx) -> bool:
        return all(o <= i < o + n for i, o, n in zip(idx, self.off, self.grid.nodes))


def _diff_op(grid: GridSpec, counts) -> sp.csr_matrix:
    op = None
    for d, k in enumerate(counts):
        D = _diff_1d(grid.nodes[d], grid.periodic(d), k, grid.spacing(d))
        op = D if op is None else sp.kron(op, D, format="csr")
    return op


def _jet_op(sd: SemiDiscrete, name, counts):
    layout = _Layout(sd.grid, len(sd.fields))
    f = sd.fields.index(name)
    P = sd._P[f * layout.n_ext : (f + 1) * layout.n_ext]
    return (_diff_op(sd.grid, counts) @ P).tocsr()


def _face_rows(layout: _Layout, d: int, side: str):
    """Tangential index tuples (ext coordinates) of real boundary nodes of a face."""
    grid = layout.grid
    ranges = []
    for e in range(grid.dim):
        if e == d:
            b = layout.off[d] if side == "min" else layout.off[d] + grid.nodes[d] - 1
            ranges.append([b])
        else:
            ranges.append(range(layout.off[e], layout.off[e] + grid.nodes[e]))
    return list(itertools.product(*ranges))


def _shift(idx, d, delta):
    idx = list(idx)
    idx[d] += delta
    return tuple(idx)


def _closure(sys: PHSystem, grid: GridSpec, params: dict, fields):
    """Extended-grid map ``P`` (ext <- state) and the mask of free nodes."""
    layout = _Layout(grid, len(fields))
    m = len(fields)
    mask = np.ones(grid.nodes, dtype=bool)
    faces = []
    for d in range(grid.dim):
        if grid.periodic(d):
            continue
        for side, kind in zip(("min", "max"), grid.bc[d]):
            report = boundary_terms(sys.H, d, side=side, slot="v")
            faces.append((d, side, kind, report))
            if kind == "clamped":
                sl = [slice(None)] * grid.dim
                sl[d] = 0 if side == "min" else -1
                mask[tuple(sl)] = False

    rows: list[dict] = []  # each row: {ext column: coefficient}
    for d, side, kind, report in faces:
        out = -1 if side == "min" else 1
        eta = boundary_terms(sys.H, d, side=side, slot="eta")
        per_field = {name: 0 for name in fields}
        for slot, _ in eta.entries:
            per_field[slot.name[slot.name.index("[") + 1 : -1]] += 1
        for b in _face_rows(layout, d, side):
            if kind == "clamped":
                for f in range(m):
                    for k in (1, 2):
                        rows.append({layout.ext_index(f, _shift(b, d, out * k)): 1.0,
                                     layout.ext_index(f, _shift(b, d, -out * k)): -1.0})
                continue
            for _, coeff in eta.entries:
                row: dict = {}
                for name, counts, c in _linear_terms(coeff, params, "boundary coefficient"):
                    stencil = _point_stencil(grid, counts)
                    f = fields.index(name)
                    for offs, w in stencil:
                        col = layout.ext_index(f, tuple(i + o for i, o in zip(b, offs)))
                        row[col] = row.get(col, 0.0) + c * w
                rows.append(row)
            for f, name in enumerate(fields):
                for k in range(per_field[name] + 1, 3):
                    g = _shift(b, d, out * k)
                    rows.append({layout.ext_index(f, g): 1.0,
                                 layout.ext_index(f, _shift(g, d, -out)): -2.0,
                                 layout.ext_index(f, _shift(g, d, -2 * out)): 1.0})
    rows += _corner_rows(layout, grid, m)

    ghost_cols = []
    for f in range(m):
        for idx in np.ndindex(*layout.ext):
            if not layout.is_real(idx):
                ghost_cols.append(layout.ext_index(f, idx))
    if len(ghost_cols) != len(rows):
        raise NumVerifyError(f"ghost closure has {len(rows)} equations for {len(ghost_cols)} ghost values")

    n_state = m * layout.n_real
    # S_n: ext <- state for free (unmasked) real nodes
    sn_rows, sn_cols = [], []
    flat_mask = mask.reshape(-1)
    for f in range(m):
        for q, idx in enumerate(np.ndindex(*grid.nodes)):
            if flat_mask[q]:
                sn_rows.append(layout.ext_index(f, layout.real_to_ext(idx)))
                sn_cols.append(f * layout.n_real + q)
    n_ext_total = m * layout.n_ext
    S_n = sp.csr_matrix((np.ones(len(sn_rows)), (sn_rows, sn_cols)), shape=(n_ext_total, n_state))
    if not ghost_cols:
        return S_n, mask, faces
    S_g = sp.csr_matrix(
        (np.ones(len(ghost_cols)), (ghost_cols, range(len(ghost_cols)))), shape=(n_ext_total, len(ghost_cols))
    )
    r_i, r_j, r_v = [], [], []
    for i, row in enumerate(rows):
        for j, v in row.items():
            r_i.append(i)
            r_j.append(j)
            r_v.append(v)
    C = sp.csr_matrix((r_v, (r_i, r_j)), shape=(len(rows), n_ext_total))
    M = (C @ S_g).tocsc()
    B = (C @ S_n).tocsc()
    try:
        lu = spla.splu(M)
    except RuntimeError as exc:
        raise NumVerifyError(f"ghost closure is singular: {exc}") from None
    # only state columns touched by a constraint enter the ghost values
    cols = np.unique(B.nonzero()[1])
    Gd = -lu.solve(B[:, cols].toarray())
    if not np.all(np.isfinite(Gd)):
        raise NumVerifyError("ghost closure is singular")
    Gd[np.abs(Gd) < 1e-14 * max(1.0, np.abs(Gd).max())] = 0.0
    Gs = sp.coo_matrix(Gd)
    G = sp.csr_matrix((Gs.data, (Gs.row, cols[Gs.col])), shape=(len(ghost_cols), n_state))
    P = (S_n + S_g @ G).tocsr()
    return P, mask, faces


def _point_stencil(grid: GridSpec, counts):
    """``[(offsets, weight)]`` of the tensor stencil for ``D_counts`` at one node."""
    per_dir = []
    for d, k in enumerate(counts):
        st = _STENCILS[k] / grid.spacing(d) ** k
        per_dir.append([(s, c) for s, c in zip(range(-2, 3), st) if c != 0.0])
    out = []
    for combo in itertools.product(*per_dir):
        out.append((tuple(s for s, _ in combo), float(np.prod([c for _, c in combo]))))
    return out


def _corner_rows(layout: _Layout, grid: GridSpec, m: int):
    if grid.dim < 2 or grid.periodic(0) or grid.periodic(1):
        return []
    rows = []
    n0 = grid.nodes[0]
    for f in range(m):
        for idx in np.ndindex(*layout.ext):
            g0 = not (GHOSTS <= idx[0] < GHOSTS + n0)
            g1 = not (GHOSTS <= idx[1] < GHOSTS + grid.nodes[1])
            if not (g0 and g1):
                continue
            side = "min" if idx[0] < GHOSTS else "max"
            b = GHOSTS if side == "min" else GHOSTS + n0 - 1
            out = -1 if side == "min" else 1
            k = out * (idx[0] - b)
            kind = grid.bc[0][0 if side == "min" else 1]
            if kind == "clamped":
                rows.append({layout.ext_index(f, idx): 1.0, layout.ext_index(f, (b - out * k, idx[1])): -1.0})
            else:
                rows.append({layout.ext_index(f, idx): 1.0,
                             layout.ext_index(f, (idx[0] - out, idx[1])): -2.0,
                             layout.ext_index(f, (idx[0] - 2 * out, idx[1])): 1.0})
    return rows


def discretize(sys: PHSystem, grid: GridSpec, params: dict | None = None, report=None) -> SemiDiscrete:
    """Method-of-lines system for a quadratic Hamiltonian with constant structure.

    ``params`` binds every model parameter to a float.  ``report`` is accepted
    for symmetry with the symbolic layer; faces are recomputed per direction.
    """
    bundle = sys.bundle
    params = dict(params or {})
    missing = [p for p in bundle.parameters if p not in params]
    if missing:
        raise NumVerifyError(f"unbound parameters: {', '.join(missing)}")
    if bundle.r != grid.dim:
        raise NumVerifyError(f"model has {bundle.r} spatial directions, grid has {grid.dim}")
    if validate_structure(sys):
        raise NumVerifyError("structure matrices are not admissible")
    for mat in (sys.J, sys.R):
        for row in mat:
            for e in row:
                if any(s.kind is not Kind.PARAMETER for s in e.symbols()):
                    raise NumVerifyError("state-dependent structure matrices are not supported numerically")
    fields = bundle.dependent
    m = len(fields)
    v = evolution_field(sys, check=False)
    v_terms = [_linear_terms(e, params, "evolution field") for e in v]
    if any(sum(c) > 4 for terms in v_terms for _, c, _ in terms):
        raise NumVerifyError("evolution field has jet order above 4")
    min_nodes = min(grid.nodes)
    if min_nodes < 5:
        raise NumVerifyError("stencil wider than grid")

    P, mask, faces = _closure(sys, grid, params, fields)
    layout = _Layout(grid, m)
    sd = SemiDiscrete(sys, grid, params, None, None, fields, {}, [], None, faces, None, mask.reshape(-1))
    sd._P = P

    def block(terms):
        acc = sp.csr_matrix((layout.n_real, m * layout.n_real))
        for name, counts, c in terms:
            acc = acc + c * _jet_op_cached(sd, name, counts)
        return acc

    keep = sp.diags(np.tile(mask.reshape(-1), 1).astype(float))
    sd.A = sp.vstack([keep @ block(t) for t in v_terms]).tocsr()
    sd.delta_ops = [block(_linear_terms(e, params, "variational derivative"))
                    for e in variational_derivative(sys.H)]
    sd.R = np.array([[_numeric(e, params) for e in row] for row in sys.R])

    w = grid.quadrature_weights(0)
    for d in range(1, grid.dim):
        w = np.multiply.outer(w, grid.quadrature_weights(d))
    sd.weights = np.asarray(w).reshape(-1)
    W = sp.diags(sd.weights)
    K = sp.csr_matrix((m * layout.n_real, m * layout.n_real))
    for a, b, c in _quadratic_terms(sys.H.expr, params):
        Da = _jet_op_cached(sd, a.name, a.index)
        Db = _jet_op_cached(sd, b.name, b.index)
        K = K + c * (Da.T @ W @ Db + Db.T @ W @ Da)
    sd.K = K.tocsr()
    return sd


def _jet_op_cached(sd: SemiDiscrete, name, counts):
    key = (name, tuple(counts))
    if key not in sd.jet_ops:
        sd.jet_ops[key] = _jet_op(sd, name, key[1])
    return sd.jet_ops[key]


# ---------------------------------------------------------------------------
# initial data


def _bump(x, a, b):
    """``cos^4`` bump supported on the middle half of ``[a, b]``."""
    mid, half = 0.5 * (a + b), 0.25 * (b - a)
    s = (x - mid) / half
    return np.where(np.abs(s) < 1, np.cos(0.5 * np.pi * s) ** 4, 0.0)


def initial_state(sd: SemiDiscrete, kind: str = "bump", field_name: str | None = None) -> np.ndarray:
    """``zero`` or a smooth ``bump`` in one field (default: the last declared)."""
    grid = sd.grid
    u = np.zeros((len(sd.fields),) + grid.nodes)
    if kind == "zero":
        return u.reshape(-1)
    if kind != "bump":
        raise NumVerifyError(f"unknown initial condition {kind!r}")
    shape = np.ones(grid.nodes)
    for d in range(grid.dim):
        x = grid.coordinates(d)
        prof = np.cos(2 * np.pi * x / grid.lengths[d]) if grid.periodic(d) else _bump(x, 0.0, grid.lengths[d])
        expand = [np.newaxis] * grid.dim
        expand[d] = slice(None)
        shape = shape * prof[tuple(expand)]
    f = sd.fields.index(field_name) if field_name else len(sd.fields) - 1
    u[f] = shape
    return sd.project(u.reshape(-1))


# ---------------------------------------------------------------------------
# time integration and audit


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (samples, n_state)
    dt: float


def simulate(ode: SemiDiscrete, u0, dt: float, T: float, stride: int = 1) -> Trajectory:
    """Classical RK4 from ``u0`` over ``[0, T]``; ``dt`` is rounded down to divide ``T``."""
    if dt <= 0 or T <= 0:
        raise NumVerifyError("dt and T must be positive")
    steps = max(1, int(np.ceil(T / dt - 1e-9)))
    dt = T / steps
    u = ode.project(u0)
    ts, us = [0.0], [u.copy()]
    f = ode.rhs
    for n in range(1, steps + 1):
        k1 = f(u)
        k2 = f(u + 0.5 * dt * k1)
        k3 = f(u + 0.5 * dt * k2)
        k4 = f(u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)) or np.abs(u).max() > 1e150:
            raise InstabilityError(
                f"solution blew up at t={n * dt:.4g} with dt={dt:.3g}; "
                f"stability bound dt <= {ode.stable_dt():.3g} (c = {ode.dt_constant():.3g} in dt <= c*h^2)"
            )
        if n % stride == 0 or n == steps:
            ts.append(n * dt)
            us.append(u.copy())
    return Trajectory(np.array(ts), np.array(us), dt)


@dataclass
class AuditResult:
    t: np.ndarray
    H: np.ndarray
    Phi: np.ndarray
    domain: np.ndarray
    dHdt: np.ndarray
    residual: np.ndarray
    max_relative_residual: float
    energy_drift: float
    convergence: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0

    def rows(self):
        return zip(self.t, self.H, self.Phi, self.residual)


def energy_audit(ode: SemiDiscrete, traj: Trajectory, report=None) -> AuditResult:
    """Compare ``dH/dt`` (centered differences of ``H(t)``) with flux plus domain terms.

    ``max_relative_residual`` is ``max|residual| * T / max H``: the energy
    mismatch accumulated at the worst rate over the horizon, relative to H.
    """
    H = np.array([ode.energy(u) for u in traj.states])
    Phi = np.array([ode.boundary_flux(u) for u in traj.states])
    dom = np.array([ode.domain_power(u) for u in traj.states])
    if len(H) >= 3:
        dHdt = np.gradient(H, traj.t, edge_order=2)
    else:
        dHdt = np.zeros_like(H)
    residual = np.abs(dHdt - Phi - dom)
    scale = float(np.max(np.abs(H))) if H.size else 0.0
    horizon = float(traj.t[-1] - traj.t[0])
    rel = float(residual.max() * horizon / scale) if scale > 0 else 0.0
    drift = float(np.max(np.abs(H - H[0])) / abs(H[0])) if H[0] != 0 else 0.0
    return AuditResult(traj.t, H, Phi, dom, dHdt, residual, rel, drift)


@dataclass(frozen=True)
class RefinementRow:
    nodes: tuple
    h: float
    dt: float
    max_residual: float
    factor: float | None


def convergence_study(
    sys: PHSystem, grid: GridSpec, params: dict, T: float, levels: int = 3, cfl: float = 0.5, init: str = "bump"
) -> list[RefinementRow]:
    """Refine ``h -> h/2`` with ``dt = cfl * c_coarse * h^2`` and tabulate the audit residual."""
    rows, c0 = [], None
    prev = None
    for _ in range(levels):
        ode = discretize(sys, grid, params)
        h = min(grid.spacing(d) for d in range(grid.dim))
        if c0 is None:
            c0 = ode.dt_constant()
        dt = cfl * c0 * h**2
        traj = simulate(ode, initial_state(ode, init), dt, T)
        res = energy_audit(ode, traj).max_residual
        rows.append(RefinementRow(grid.nodes, h, traj.dt, res, None if prev is None else prev / res))
        prev = res
        grid = grid.refined()
    return rows
