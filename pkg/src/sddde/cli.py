"""Command-line front end.

Subcommands: eq, roots, hopf-nf, fold-nf, branch, hopf-curve, simulate.
Records stream to stdout as NDJSON (default) or CSV; numbers are printed
with 17 significant digits and no timestamps, so identical invocations
produce byte-identical output. Exit codes: 0 success, 1 numerical
failure, 2 usage or parse error.
"""

import argparse
import json
import sys
import warnings

import numpy as np

from .continuation import (
    RootSettings,
    StepSettings,
    continue_branch,
    continue_hopf_curve,
    solve_equilibrium,
)
from .derivs import DerivSettings
from .errors import ModelError, SdddeError
from .ivp import simulate
from .model import load_model
from .normalform import fold_coefficient, hopf_l1
from .spectral import characteristic_roots, linearize


def _fmt(x):
    return format(float(x), ".17g")


def _jsonify(obj):
    if isinstance(obj, complex):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


class Writer:
    """Streams records; CSV needs a fixed column list, NDJSON does not."""

    def __init__(self, fmt, stream):
        self.fmt = fmt
        self.stream = stream
        self.columns = None

    def record(self, kind, data):
        if self.fmt == "ndjson":
            payload = {"kind": kind}
            payload.update({k: _jsonify(v) for k, v in data.items()})
            self.stream.write(json.dumps(payload, separators=(",", ":")) + "\n")
        else:
            flat = _flatten(data)
            if self.columns is None:
                self.columns = ["kind"] + list(flat)
                self.stream.write(",".join(self.columns) + "\n")
            row = [kind] + [_csv_cell(flat.get(c, "")) for c in self.columns[1:]]
            self.stream.write(",".join(row) + "\n")


def _flatten(data):
    flat = {}
    for key, value in data.items():
        if isinstance(value, complex):
            flat[f"{key}_re"] = value.real
            flat[f"{key}_im"] = value.imag
        elif isinstance(value, np.ndarray):
            arr = np.atleast_1d(value)
            if np.iscomplexobj(arr):
                for i, v in enumerate(arr, start=1):
                    flat[f"{key}{i}_re"] = v.real
                    flat[f"{key}{i}_im"] = v.imag
            else:
                for i, v in enumerate(arr, start=1):
                    flat[f"{key}{i}"] = float(v)
        elif isinstance(value, (list, tuple)):
            for i, v in enumerate(value, start=1):
                flat[f"{key}{i}"] = v
        else:
            flat[key] = value
    return flat


def _csv_cell(value):
    if isinstance(value, str):
        return value
    if value is None or value == "":
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _fmt(value)


def _parse_assignments(pairs):
    out = {}
    for chunk in pairs or []:
        for item in chunk.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise ModelError(f"bad parameter assignment {item!r} (expected name=value)")
            name, _, value = item.partition("=")
            try:
                out[name.strip()] = float(value)
            except ValueError:
                raise ModelError(f"bad numeric value in {item!r}") from None
    return out


def _parse_vector(text, n, what):
    if text is None:
        return np.zeros(n)
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ModelError(f"bad {what}: expected comma-separated numbers") from None
    if len(values) != n:
        raise ModelError(f"{what} must have {n} components, got {len(values)}")
    return np.array(values)


def build_parser():
    top = argparse.ArgumentParser(
        prog="sddde",
        description="Bifurcation analysis of delay equations with state-dependent delays.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="model file path")
        p.add_argument(
            "--par",
            action="append",
            default=[],
            help="parameter assignments, e.g. --par tau0=1,s0=4",
        )
        p.add_argument("--format", choices=("ndjson", "csv"), default="ndjson")
        p.add_argument("--fd-step", type=float, default=5e-3, help="FD base step")
        p.add_argument("--fd-richardson", type=int, default=2, help="FD Richardson levels")
        p.add_argument("--cheb-nodes", type=int, default=32, help="pseudospectral seed nodes")
        p.add_argument("--root-count", type=int, default=6, help="characteristic roots to report")
        p.add_argument("--re-cutoff", type=float, default=2.0, help="root window Re >= -cutoff")

    p_eq = sub.add_parser("eq", help="solve an equilibrium and report rightmost roots")
    common(p_eq)
    p_eq.add_argument("--guess", help="initial guess, comma separated (default zeros)")

    p_roots = sub.add_parser("roots", help="characteristic roots at an equilibrium")
    common(p_roots)
    p_roots.add_argument("--guess", help="equilibrium guess (default zeros)")

    p_hopf = sub.add_parser("hopf-nf", help="Hopf normal form (L1) at an equilibrium")
    common(p_hopf)
    p_hopf.add_argument("--guess", help="equilibrium guess (default zeros)")
    p_hopf.add_argument("--omega-guess", type=float, required=True)

    p_fold = sub.add_parser("fold-nf", help="fold normal-form coefficient at a zero root")
    common(p_fold)
    p_fold.add_argument("--guess", help="equilibrium guess (default zeros)")

    p_br = sub.add_parser(
        "branch",
        help="continue an equilibrium branch in one parameter",
        epilog=(
            "CSV columns: kind, param (free parameter), x1..xn (equilibrium), "
            "rightmost_re/_im (rightmost characteristic root), test_hopf (real part "
            "of the rightmost complex pair), test_fold (det of the frozen-delay "
            "Jacobian), stable (0/1), plus event/omega on event rows."
        ),
    )
    common(p_br)
    p_br.add_argument("--guess", help="equilibrium guess (default zeros)")
    p_br.add_argument("--free", required=True, help="free parameter name")
    p_br.add_argument("--range", required=True, help="lo:hi for the free parameter")
    p_br.add_argument("--step-init", type=float, default=0.05)
    p_br.add_argument("--max-points", type=int, default=200)

    p_hc = sub.add_parser(
        "hopf-curve",
        help="continue a Hopf curve in two parameters",
        epilog=(
            "CSV columns: kind, <p1>, <p2> (the two free parameters), x1..xn "
            "(equilibrium), omega, residual (max norm of the extended system), "
            "optionally L1, plus event on L1_ZERO rows."
        ),
    )
    common(p_hc)
    p_hc.add_argument("--guess", help="equilibrium guess (default zeros)")
    p_hc.add_argument("--free", required=True, help="two parameter names, comma separated")
    p_hc.add_argument("--omega-guess", type=float, required=True)
    p_hc.add_argument("--monitor-l1", action="store_true")
    p_hc.add_argument("--step-init", type=float, default=0.1)
    p_hc.add_argument("--max-points", type=int, default=30)

    p_sim = sub.add_parser("simulate", help="method-of-steps initial value run")
    common(p_sim)
    p_sim.add_argument("--history", help="constant history, comma separated (default: --guess equilibrium)")
    p_sim.add_argument("--guess", help="equilibrium guess when --history is omitted")
    p_sim.add_argument("--t-end", type=float, required=True)
    p_sim.add_argument("--step", type=float, required=True)
    return top


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    writer = Writer(args.format, sys.stdout)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = _dispatch(args, writer)
        for w in caught:
            if args.format == "csv":
                print(f"sddde: warning: {w.message}", file=sys.stderr)
            else:
                writer.record("warning", {"message": str(w.message)})
        return code
    except ModelError as err:
        print(f"sddde: {err}", file=sys.stderr)
        return 2
    except SdddeError as err:
        print(f"sddde: {err}", file=sys.stderr)
        return 1
    except (ZeroDivisionError, ValueError, OverflowError, np.linalg.LinAlgError) as err:
        print(f"sddde: numerical failure: {err}", file=sys.stderr)
        return 1


def _dispatch(args, writer):
    model = load_model(args.model)
    assignments = _parse_assignments(args.par)
    params = model.params_from(assignments)
    try:
        deriv = DerivSettings(base_step=args.fd_step, richardson_levels=args.fd_richardson)
    except SdddeError as err:
        raise ModelError(str(err)) from None  # bad flag values are usage errors
    roots_cfg = RootSettings(
        count=args.root_count, re_cutoff=args.re_cutoff, cheb_nodes=args.cheb_nodes
    )

    if args.command == "eq":
        x = solve_equilibrium(model, params, _parse_vector(args.guess, model.n, "--guess"))
        lin = linearize(model, params, x)
        rts = characteristic_roots(
            lin, count=roots_cfg.count, re_cutoff=roots_cfg.re_cutoff, cheb_nodes=roots_cfg.cheb_nodes
        )
        writer.record(
            "result",
            {
                "x": x,
                "delays": np.asarray(lin.taus),
                "roots": [lam for lam, _ in rts],
                "stable": bool(max((z.real for z, _ in rts), default=-1.0) < 0),
            },
        )
        return 0

    if args.command == "roots":
        x = solve_equilibrium(model, params, _parse_vector(args.guess, model.n, "--guess"))
        lin = linearize(model, params, x)
        rts = characteristic_roots(
            lin, count=roots_cfg.count, re_cutoff=roots_cfg.re_cutoff, cheb_nodes=roots_cfg.cheb_nodes
        )
        for lam, mult in rts:
            writer.record("point", {"root": lam, "multiplicity": mult})
        return 0

    if args.command == "hopf-nf":
        x = solve_equilibrium(model, params, _parse_vector(args.guess, model.n, "--guess"))
        nf = hopf_l1(model, params, x, args.omega_guess, settings=deriv)
        writer.record(
            "result",
            {
                "omega": nf.eig.omega,
                "L1": nf.L1,
                "criticality": nf.criticality,
                "g21": nf.g21,
                "p0": nf.eig.p0,
                "q0": nf.eig.q0,
                "h2_20": nf.h2_20.terms[0][0],
                "h2_11": nf.h2_11.terms[0][0] if nf.h2_11.terms else np.zeros(model.n, complex),
            },
        )
        return 0

    if args.command == "fold-nf":
        x = solve_equilibrium(model, params, _parse_vector(args.guess, model.n, "--guess"))
        a = fold_coefficient(model, params, x, settings=deriv)
        writer.record("result", {"a": a, "x": x})
        return 0

    if args.command == "branch":
        lo, _, hi = args.range.partition(":")
        try:
            prange = (float(lo), float(hi))
        except ValueError:
            raise ModelError("--range must be lo:hi") from None
        pts = continue_branch(
            model,
            assignments,
            args.free,
            prange,
            _parse_vector(args.guess, model.n, "--guess"),
            step=StepSettings(initial=args.step_init, max_points=args.max_points),
            roots=roots_cfg,
        )
        for pt in pts:
            kind = "event" if pt.event else "point"
            data = {
                "param": pt.param,
                "x": pt.x,
                "rightmost": max(pt.roots, key=lambda z: z.real) if pt.roots else None,
                "test_hopf": pt.test_hopf,
                "test_fold": pt.test_fold,
                "stable": pt.stable,
            }
            if pt.event:
                data["event"] = pt.event
                if pt.omega is not None:
                    data["omega"] = pt.omega
            writer.record(kind, data)
        return 0

    if args.command == "hopf-curve":
        names = [s.strip() for s in args.free.split(",") if s.strip()]
        if len(names) != 2:
            raise ModelError("--free must name exactly two parameters")
        pts = continue_hopf_curve(
            model,
            assignments,
            names,
            _parse_vector(args.guess, model.n, "--guess"),
            args.omega_guess,
            step=StepSettings(initial=args.step_init, max_points=args.max_points),
            monitor_l1=args.monitor_l1,
            deriv_settings=deriv,
        )
        for pt in pts:
            kind = "event" if pt.event else "point"
            data = {
                names[0]: pt.params[0],
                names[1]: pt.params[1],
                "x": pt.x,
                "omega": pt.omega,
                "residual": pt.residual,
            }
            if args.monitor_l1:
                data["L1"] = pt.L1
            if pt.event:
                data["event"] = pt.event
                if pt.event == "L1_ZERO":
                    data["note"] = "degenerate Hopf (Bautin candidate)"
            writer.record(kind, data)
        return 0

    if args.command == "simulate":
        if args.history is not None:
            history = _parse_vector(args.history, model.n, "--history")
        else:
            history = solve_equilibrium(
                model, params, _parse_vector(args.guess, model.n, "--guess")
            )
        traj = simulate(model, params, history, args.t_end, args.step)
        for k in range(traj.t.size):
            writer.record("point", {"t": traj.t[k], "x": traj.y[k]})
        return 0

    raise ModelError(f"unknown command {args.command!r}")  # pragma: no cover


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
