"""Command-line entry point: ``jetbc <command> model.vb [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from ..jetcalc import BundleError
from ..porthamil import StructureError
from ..symexpr import ExprError
from .parser import ModelError, load_model
from .report import FORMATS, build_report, render_report

EXIT_OK, EXIT_MODEL, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("model", help="path to a .vb model source")
    p.add_argument("--face", help="restrict to one declared boundary face")
    p.add_argument("--format", choices=FORMATS, default="text")
    p.add_argument("--out", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jetbc", description="Variational boundary conditions and boundary ports on jet bundles.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("el", help="Euler-Lagrange equations / variational derivatives"))
    bc = sub.add_parser("bc", help="boundary coefficients per face")
    _common(bc)
    bc.add_argument("--naive-split", action="store_true", help="use the symmetric split of mixed coefficients")
    _common(sub.add_parser("ports", help="evolution field, outputs and boundary ports"))
    _common(sub.add_parser("power", help="power balance with symbolic verification"))
    _common(sub.add_parser("verify", help="check the decomposition identity"))
    sim = sub.add_parser("simulate", help="finite-difference energy audit")
    _common(sim)
    sim.add_argument("--grid", required=True, help="node counts, e.g. 64 or 32,17")
    sim.add_argument("--length", help="domain lengths per direction, default 1")
    sim.add_argument("--dt", type=float, help="time step (default: half the stability bound)")
    sim.add_argument("--tend", type=float, required=True)
    sim.add_argument("--bc", action="append", default=[], metavar="FACE=MIN:MAX",
                     help="clamped, free or periodic per side, e.g. X2=clamped:free or X1=periodic")
    sim.add_argument("--init", choices=("bump", "zero"), default="bump")
    sim.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    sim.add_argument("--audit-out", help="CSV with columns t,H,Phi,residual")
    sim.add_argument("--tol", type=float, default=1e-2, help="bound on the max relative residual")
    return parser


def _emit(text: str, out: str | None, stdout):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def _ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _grid_for(model, args):
    from ..numverify import GridSpec

    bundle = model.bundle
    nodes = _ints(args.grid)
    if len(nodes) != bundle.r:
        raise ModelError(f"--grid needs {bundle.r} node counts", "model")
    lengths = tuple(float(x) for x in args.length.split(",")) if args.length else ()
    bc = [("clamped", "clamped")] * bundle.r
    for item in args.bc:
        name, _, kinds = item.partition("=")
        if name not in bundle.independent:
            raise ModelError(f"--bc names unknown direction {name!r}", "model")
        pair = tuple(kinds.split(":")) if ":" in kinds else (kinds, kinds)
        bc[bundle.independent.index(name)] = pair
    return GridSpec(nodes, lengths, tuple(bc))


def _params_for(model, args) -> dict:
    params = {k: float(v) for k, v in model.parameter_values.items()}
    for item in args.param:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        if name not in model.bundle.parameters:
            raise ModelError(f"unknown parameter {name!r}", "undeclared")
        params[name] = float(value)
    return params


def _simulate(model, args, stdout, stderr) -> int:
    from ..numverify import energy_audit, discretize, initial_state, simulate

    if model.ph is None:
        raise ModelError("simulate needs a hamiltonian model with a structure block", "model")
    grid = _grid_for(model, args)
    ode = discretize(model.ph, grid, _params_for(model, args))
    bound = ode.stable_dt()
    dt = args.dt if args.dt is not None else 0.5 * bound
    if dt > bound:
        stderr.write(f"warning: dt={dt:.3g} exceeds the stability bound {bound:.3g}\n")
    traj = simulate(ode, initial_state(ode, args.init), dt, args.tend)
    audit = energy_audit(ode, traj)
    ok = audit.max_relative_residual <= args.tol
    summary = {
        "grid": list(grid.nodes),
        "spacing": [grid.spacing(d) for d in range(grid.dim)],
        "bc": {model.bundle.independent[d]: list(grid.bc[d]) for d in range(grid.dim)},
        "dt": traj.dt,
        "dt_bound": bound,
        "c": ode.dt_constant(),
        "steps": len(traj.t) - 1,
        "H0": float(audit.H[0]),
        "energy_drift": audit.energy_drift,
        "max_residual": audit.max_residual,
        "max_relative_residual": audit.max_relative_residual,
        "passed": ok,
    }
    if args.audit_out:
        with open(args.audit_out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "H", "Phi", "residual"])
            for row in audit.rows():
                w.writerow([repr(float(x)) for x in row])
    if args.format == "json":
        text = json.dumps(summary, indent=2) + "\n"
    else:
        buf = io.StringIO()
        for k, v in summary.items():
            buf.write(f"{k}: {v}\n")
        text = buf.getvalue()
    _emit(text, args.out, stdout)
    return EXIT_OK if ok else EXIT_VERIFY


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        model = load_model(args.model)
        if args.command == "simulate":
            from ..numverify import InstabilityError, NumVerifyError

            try:
                return _simulate(model, args, stdout, stderr)
            except InstabilityError as exc:
                stderr.write(f"error: {exc}\n")
                return EXIT_VERIFY
            except NumVerifyError as exc:
                raise ModelError(str(exc), "model") from None
        doc = build_report(model, args.command, args.face, getattr(args, "naive_split", False))
        _emit(render_report(doc, args.format), args.out, stdout)
        if doc.verifier is not None and not doc.verifier.residual_zero:
            return EXIT_VERIFY
        return EXIT_OK
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (ModelError, StructureError, BundleError, ExprError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_MODEL
    except OSError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_MODEL


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
