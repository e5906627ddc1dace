"""Command-line interface.

One program, installed under both the ``sysid-rls`` and ``modelcheck``
names, with subcommands ``fit``, ``excite``, ``equiv``, ``reduce``,
``converge``, and ``experiment``.  Exit codes: 0 success, 2 validation
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .convergence import run_tracked_identification
from .equivalence import is_equivalent, reduce_once, reducibility_check
from .errors import NumericalError, ValidationError
from .excitation import reduced_regressor_matrix
from .experiment import load_config, run_experiment
from .fileio import load_model, load_trajectory, save_model, write_csv, write_json
from .inputs import generate_input, parse_input_spec
from .rls import (
    RegressorSample,
    initial_state,
    regressor_matrix,
    rls_step,
    valid_regressor_indices,
)


def _load_theta0_arg(value: str, p: int, d: int):
    if value == "zeros":
        return None
    theta = np.asarray(json.loads(Path(value).read_text()), dtype=float)
    if theta.shape != (p, d):
        raise ValidationError(f"theta0 file has shape {theta.shape}, expected {(p, d)}")
    return theta


def cmd_fit(args) -> int:
    traj = load_trajectory(args.data)
    order = args.order
    ks = valid_regressor_indices(traj, order)
    skipped = len(traj) - len(ks)
    if skipped:
        print(f"starting at k={ks[0]}: {skipped} samples lack a complete window")
    Phi, Y, ks = regressor_matrix(traj, order, ks)
    p, m = traj.p, traj.m
    d = Phi.shape[1]
    state = initial_state(order, p, m,
                          theta0=_load_theta0_arg(args.theta0, p, d),
                          p0_scale=args.p0_scale)
    ref = None
    if args.ref_model:
        ref_model = load_model(args.ref_model)
        if ref_model.n != order or (ref_model.p, ref_model.m) != (p, m):
            raise ValidationError("reference model does not match the fit order/dimensions")
        ref = ref_model.theta

    rows = []
    states = []
    for i in range(Phi.shape[0]):
        resid = float(np.linalg.norm(Y[i] - state.theta @ Phi[i]))
        state = rls_step(state, RegressorSample(phi=Phi[i], y=Y[i]))
        states.append((int(ks[i]), state.theta.copy(), resid,
                       float(np.linalg.eigvalsh(state.P)[0])))
    target = ref if ref is not None else state.theta
    for k, theta_k, resid, pmin in states:
        err = float(np.linalg.norm(theta_k - target))
        rows.append([k] + [float(v) for v in theta_k.ravel()] + [err, resid, pmin])

    if args.emit_trace:
        header = ["k"] + [f"theta_{i}" for i in range(p * d)]
        header += ["frob_err_to_ref", "residual_norm", "pmin_eig"]
        write_csv(args.emit_trace, header, rows)
        print(f"trace written to {args.emit_trace}")
    np.set_printoptions(precision=6, suppress=True)
    print(f"final estimate after {Phi.shape[0]} samples (order {order}):")
    print(state.theta)
    return 0


def cmd_excite(args) -> int:
    traj = load_trajectory(args.data)
    order = args.order
    ks = valid_regressor_indices(traj, order)
    if args.true_order is not None:
        if args.true_order >= order:
            raise ValidationError("--true-order must be below --order")
        Phi, ks = reduced_regressor_matrix(traj, args.true_order, order, ks)
        label = f"reduced regressor (true order {args.true_order}, fit order {order})"
    else:
        Phi, _, ks = regressor_matrix(traj, order, ks)
        label = f"full regressor (order {order})"
    d = Phi.shape[1]
    gram = np.zeros((d, d))
    rows = []
    for i in range(Phi.shape[0]):
        gram += np.outer(Phi[i], Phi[i])
        lmin = float(np.linalg.eigvalsh(gram)[0])
        rows.append([int(ks[i]), lmin, lmin / (i + 1)])
    if args.emit:
        write_csv(args.emit, ["k", "lambda_min_partial", "lambda_min_avg"], rows)
        print(f"excitation curve written to {args.emit}")
    final_avg = gram / Phi.shape[0]
    print(f"{label}: {Phi.shape[0]} samples")
    print(f"  lambda_min of Gram partial sum: {rows[-1][1]:.6e}")
    print(f"  lambda_min of average Gram:     {float(np.linalg.eigvalsh(final_avg)[0]):.6e}")
    return 0


def cmd_equiv(args) -> int:
    a = load_model(args.model_a)
    b = load_model(args.model_b)
    cert = is_equivalent(a, b, tol=args.tol)
    verdict = "EQUIVALENT" if cert.equivalent else "NOT EQUIVALENT"
    print(f"{verdict} (orders {a.n} vs {b.n}, condition: {cert.condition})")
    print(f"relative residual {cert.residual:.3e} against tol {cert.tol:.1e}")
    return 0


def cmd_reduce(args) -> int:
    model = load_model(args.model)
    rng = np.random.default_rng(args.seed)
    if args.once:
        step = reduce_once(model, strategy=args.strategy, tol=args.tol, rng=rng)
        if not step:
            print(f"no witness found (best residual {step.residual:.3e}); model kept at order {model.n}")
            return 0
        reduced, witnesses = step.reduced, [step.witness]
    else:
        report = reducibility_check(model, tol=args.tol, strategy=args.strategy, rng=rng)
        if not report.reducible:
            note = "irreducible" if report.proven else "no witness found"
            print(f"{note}; model kept at order {model.n}")
            return 0
        reduced, witnesses = report.irreducible_model, list(report.witnesses)
    out = Path(args.out) if args.out else Path(args.model).with_suffix("").with_name(
        Path(args.model).stem + "_reduced.json")
    save_model(reduced, out)
    witness_path = Path(args.witness_out) if args.witness_out else out.with_name(
        out.stem + "_witness.json")
    write_json(witness_path, {"witnesses_F1": [w.tolist() for w in witnesses]})
    print(f"reduced from order {model.n} to order {reduced.n}")
    print(f"reduced model written to {out}; witnesses to {witness_path}")
    return 0


def cmd_converge(args) -> int:
    model = load_model(args.model)
    spec = parse_input_spec(args.input)
    total = args.horizon + args.fit_order
    u = generate_input(spec, total, model.m)
    d = model.p * args.fit_order + model.m * (args.fit_order + 1)
    theta0 = _load_theta0_arg(args.theta0, model.p, d)
    trace = run_tracked_identification(model, args.fit_order, u, args.horizon,
                                       theta0=theta0, p0_scale=args.p0_scale)
    if args.emit:
        write_csv(args.emit,
                  ["k", "frob_err_to_ref", "scaled_err_norm", "residual_norm"],
                  zip(trace.ks.tolist(), trace.dist_to_ref, trace.scaled_err,
                      trace.residual_norm))
        print(f"trace written to {args.emit}")
    summary = trace.summary_dict()
    summary["seed"] = spec.seed
    if args.emit_summary:
        write_json(args.emit_summary, summary)
        print(f"summary written to {args.emit_summary}")
    print(f"fit order {trace.fit_order} vs true order {trace.true_order} "
          f"(reference: {trace.ref_kind})")
    print(f"  final distance to reference: {trace.final_dist:.6e}")
    print(f"  final residual norm:         {trace.final_residual:.6e}")
    print(f"  asymptote relative error:    {trace.asymptote_rel_error:.3e}")
    return 0


def cmd_experiment(args) -> int:
    config = load_config(args.config)
    out_dir = args.out_dir or config.out_dir
    if not out_dir:
        raise ValidationError("no output directory: pass --out-dir or set out_dir in the config")
    manifest = run_experiment(config, out_dir)
    failures = [r for r in manifest.runs if r["status"] != "ok"]
    print(f"experiment complete: {len(manifest.runs) - len(failures)}/{len(manifest.runs)} "
          f"orders succeeded; manifest hash {manifest.manifest_hash[:16]}…")
    for r in failures:
        print(f"  order {r['fit_order']}: {r['status']}")
    return 0 if not failures else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sysid-rls",
        description="Simulation, equivalence, reduction, RLS identification, and "
                    "excitation diagnostics for discrete-time input/output models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="recursive least-squares fit on a trajectory CSV")
    p.add_argument("--data", required=True, help="trajectory CSV (k,u_1..,y_1..)")
    p.add_argument("--order", type=int, required=True, help="fit order")
    p.add_argument("--p0-scale", type=float, default=1e3, help="prior covariance scale")
    p.add_argument("--theta0", default="zeros",
                   help="'zeros' or a JSON file with the initial coefficient matrix")
    p.add_argument("--ref-model", default=None,
                   help="model JSON used as the trace reference (default: final estimate)")
    p.add_argument("--emit-trace", default=None, help="per-step trace CSV path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("excite", help="persistent-excitation diagnostics for a trajectory")
    p.add_argument("--data", required=True)
    p.add_argument("--order", type=int, required=True, help="regressor order")
    p.add_argument("--true-order", type=int, default=None,
                   help="diagnose the reduced regressor for this true order")
    p.add_argument("--emit", default=None, help="excitation curve CSV path")
    p.set_defaults(func=cmd_excite)

    p = sub.add_parser("equiv", help="decide equivalence of two model JSON files")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("reduce", help="search for an equivalent lower-order model")
    p.add_argument("model")
    p.add_argument("--strategy", default="auto",
                   choices=["auto", "scalar-root-search", "newton-search"])
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--once", action="store_true", help="only one reduction step")
    p.add_argument("--seed", type=int, default=0, help="seed for the Newton starts")
    p.add_argument("--out", default=None, help="output model JSON path")
    p.add_argument("--witness-out", default=None, help="witness JSON path")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("converge", help="tracked identification run against a known model")
    p.add_argument("--model", required=True, help="true model JSON")
    p.add_argument("--fit-order", type=int, required=True)
    p.add_argument("--input", default="white:seed=0:scale=1.0",
                   help="input spec, e.g. white:seed=7:scale=1.0")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--p0-scale", type=float, default=1e3)
    p.add_argument("--theta0", default="zeros")
    p.add_argument("--emit", default=None, help="trace CSV path")
    p.add_argument("--emit-summary", default=None, help="summary JSON path")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("experiment", help="run a multi-order experiment from a config")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
