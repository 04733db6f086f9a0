"""Command-line front end: ``gibbsline {estimate,sweep,verify-qbp,verify-lr,oracle}``.

Every subcommand writes a versioned JSON report (``sweep`` can also emit
CSV).  Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings
from pathlib import Path

import jsonschema

from . import __version__
from .chain import exact_ratio, log_partition_function
from .errors import NumericalError, ValidationError
from .free_energy import (
    calibrate_constants,
    estimate_free_energy,
    fit_exponential_decay,
    ratio_convergence_sweep,
    resolve_sweep_method,
    select_parameters,
)
from .lieb_robinson import dominance_table
from .models import BUILTIN_MODELS, ResolvedModel, parse_model_file, resolve_builtin, term_to_json
from .mpo import GibbsBackendSpec, dense_feasible
from .qbp import PerturbationSetup, eta_locality_profile, verify_ratio_identity

SCHEMA_VERSION = 1

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "version", "command", "model", "params", "results", "notes", "timings"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "version": {"type": "string"},
        "command": {
            "type": "object",
            "required": ["subcommand", "argv"],
            "properties": {"subcommand": {"type": "string"}, "argv": {"type": "array", "items": {"type": "string"}}},
        },
        "model": {
            "type": "object",
            "required": ["source", "name", "d", "scale", "term"],
        },
        "params": {"type": "object"},
        "results": {"type": "object"},
        "notes": {"type": "array", "items": {"type": "string"}},
        "timings": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gibbsline", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gibbsline {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--model", choices=BUILTIN_MODELS, default=None, help="builtin interaction (default tfim)")
    src.add_argument("--model-file", type=Path, help="JSON file with fields d and matrix")
    common.add_argument("--d", type=int, default=2, help="local dimension for --model free")
    common.add_argument("--J", type=float, default=1.0, help="tfim coupling")
    common.add_argument("--g", type=float, default=1.0, help="tfim transverse field")
    common.add_argument("--coupling", type=float, default=1.0, help="ising coupling, |coupling| <= 1")
    common.add_argument("--beta", type=float, default=1.0)
    common.add_argument("--out", type=Path, help="write the report here instead of stdout")

    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("estimate", parents=[common], help="free energy density from two Gibbs MPOs")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--xi-hat", type=float, default=1.0)
    p.add_argument("--a-hat", type=float, default=1.0)
    p.add_argument("--l-override", type=int)
    p.add_argument("--backend", choices=("dense", "trotter"), default="dense")
    p.add_argument("--trotter-steps", type=int, default=20)
    p.add_argument("--svd-tol", type=float, default=1e-10)
    p.add_argument("--max-bond", type=int)

    p = sub.add_parser("sweep", parents=[common], help="exact Z_{l+1}/Z_l against l with a decay fit")
    p.add_argument("--l-max", type=int, default=8)
    p.add_argument("--l-min", type=int, default=1)
    p.add_argument("--method", choices=("ed", "free-fermion", "auto"), default="ed")
    p.add_argument("--fit-from", type=int, default=2, help="smallest l used in the decay fit")
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("verify-qbp", parents=[common], help="check the belief-propagation ratio identity")
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--locality-steps", type=int, default=50, help="steps for the eta locality table (0 skips it)")

    p = sub.add_parser("verify-lr", parents=[common], help="truncation error against the Lieb-Robinson bound")
    p.add_argument("--L", type=int, default=7)
    p.add_argument("--t-grid", type=_float_list, default=[0.0, 0.005, 0.01])
    p.add_argument("--D-grid", type=_float_list, default=[0.5, 1.0])
    p.add_argument("--s", type=float, default=1.0)

    p = sub.add_parser("oracle", parents=[common], help="exact log Z_n and ratio estimates by diagonalization")
    p.add_argument("--N", type=int, default=8)
    return parser


def resolve_model(args) -> ResolvedModel:
    if args.model_file is not None:
        term = parse_model_file(args.model_file)
        return ResolvedModel("file", {"path": str(args.model_file)}, term)
    return resolve_builtin(args.model or "tfim", d=args.d, J=args.J, g=args.g, coupling=args.coupling)


def _model_block(model: ResolvedModel) -> dict:
    return {
        "source": "file" if model.name == "file" else "builtin",
        "name": model.name,
        "params": model.params,
        "d": model.term.d,
        "norm": model.term.norm,
        "scale": model.scale,
        "term": term_to_json(model.term),
    }


def _run_estimate(args, model, notes):
    h = model.term
    params = select_parameters(args.beta, args.eps, args.xi_hat, args.a_hat, args.l_override)
    kind = "dense-compress" if args.backend == "dense" else "trotter"
    backend = GibbsBackendSpec(kind, args.svd_tol, args.max_bond, args.trotter_steps)
    if args.l_override is None and not dense_feasible(h.d, params.l + 1, backend) and not h.is_zero:
        l = params.l
        while l > 2 and not dense_feasible(h.d, l + 1, backend):
            l -= 1
        if not dense_feasible(h.d, l + 1, backend):
            raise ValidationError(
                f"dense backend cannot reach l+1 = 3 sites at d = {h.d} (limit dimension {backend.dense_max_dim})"
            )
        notes.append(
            f"prescribed l={params.l} exceeds the dense backend limit (dimension {backend.dense_max_dim}); "
            f"clamped to l={l}, so the truncation part of the error budget is not guaranteed"
        )
        params = select_parameters(args.beta, args.eps, args.xi_hat, args.a_hat, l)
        params = type(params)(**{**params.__dict__, "l_source": "clamped"})
    est = estimate_free_energy(h, args.beta, args.eps, params, backend)
    wall = est.backend_report.pop("wall_time_s")
    out = est.to_dict()
    if est.backend_report["heuristic"]:
        notes.append("trotter backend: MPO errors are heuristic Frobenius-norm estimates, not certified")
    elif not est.backend_report["contract_met"]:
        notes.append("an MPO error target was not met (see backend_report); f_tilde is not certified to eps")
    p = {"beta": args.beta, "eps": args.eps, "backend": kind}
    return p, out, {"estimate_s": wall}


def _run_sweep(args, model, notes):
    h = model.term
    method = resolve_sweep_method(h, args.method)
    start = time.perf_counter()
    points = ratio_convergence_sweep(h, args.beta, args.l_max, args.l_min, method)
    elapsed = time.perf_counter() - start
    results = {"points": [{"l": p.l, "ratio": p.ratio, "delta": p.delta} for p in points]}
    fit_points = [p for p in points if p.l >= args.fit_from]
    try:
        fit = fit_exponential_decay(fit_points)
    except ValidationError as exc:
        notes.append(f"decay fit skipped: {exc}")
        results["fit"] = None
    else:
        xi_hat, a_hat = calibrate_constants(fit) if fit.rate > 0 else (None, None)
        results["fit"] = {
            "slope": -fit.rate,
            "rate": fit.rate,
            "amplitude": fit.amplitude,
            "r_squared": fit.r_squared,
            "l_range": [fit_points[0].l, fit_points[-1].l],
            "xi_hat": xi_hat,
            "a_hat": a_hat,
        }
    if method == "ed":
        notes.append("ed method: increments below about 1e-13 times the ratio are rounding noise")
    p = {"beta": args.beta, "l_min": args.l_min, "l_max": args.l_max, "method": method, "fit_from": args.fit_from}
    return p, results, {"sweep_s": elapsed}


def _run_verify_qbp(args, model, notes):
    h = model.term
    start = time.perf_counter()
    check = verify_ratio_identity(PerturbationSetup(h, args.L, args.beta), args.steps)
    timings = {"identity_s": time.perf_counter() - start}
    results = {"lhs": check.lhs, "rhs": check.rhs, "abs_diff": check.abs_diff}
    if args.locality_steps > 0:
        start = time.perf_counter()
        rows = eta_locality_profile(h, args.L, args.beta, args.locality_steps)
        timings["locality_s"] = time.perf_counter() - start
        results["eta_locality"] = [{"l": l, "norm_diff": v} for l, v in rows]
    notes.append("rhs integrates eta with fourth-order steps; abs_diff shrinks roughly as steps^-4")
    p = {"beta": args.beta, "L": args.L, "steps": args.steps, "locality_steps": args.locality_steps}
    return p, results, timings


def _run_verify_lr(args, model, notes):
    start = time.perf_counter()
    rows = dominance_table(model.term, args.L, args.beta, args.t_grid, args.D_grid, args.s)
    elapsed = time.perf_counter() - start
    table = [
        {"t": r.t, "D": r.D, "l": r.l, "error": r.error, "bound": r.bound, "valid": r.valid, "dominated": r.dominated}
        for r in rows
    ]
    results = {"table": table, "all_dominated": all(r.dominated for r in rows)}
    notes.append("bound applies only where valid is true (l >= 48 beta |t| e^{2D})")
    p = {"beta": args.beta, "L": args.L, "t_grid": args.t_grid, "D_grid": args.D_grid, "s": args.s}
    return p, results, {"lr_s": elapsed}


def _run_oracle(args, model, notes):
    h = model.term
    if args.N < 2:
        raise ValidationError(f"--N must be >= 2, got {args.N}")
    start = time.perf_counter()
    log_z = [{"n": n, "log_z": log_partition_function(h, n, args.beta)} for n in range(1, args.N + 1)]
    f_est = [
        {"l": l, "ratio": exact_ratio(h, l, args.beta), "f": -(log_z[l]["log_z"] - log_z[l - 1]["log_z"]) / args.beta}
        for l in range(1, args.N)
    ]
    elapsed = time.perf_counter() - start
    notes.append("exact diagonalization in double precision")
    return {"beta": args.beta, "N": args.N}, {"log_z": log_z, "f_estimates": f_est}, {"oracle_s": elapsed}


_RUNNERS = {
    "estimate": _run_estimate,
    "sweep": _run_sweep,
    "verify-qbp": _run_verify_qbp,
    "verify-lr": _run_verify_lr,
    "oracle": _run_oracle,
}


def _clean(value):
    """Replace non-finite floats so the report stays strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def run(argv: list[str]) -> dict:
    """Parse ``argv``, run the subcommand, and return the validated report."""
    args = build_parser().parse_args(argv)
    if args.beta <= 0:
        raise ValidationError(f"--beta must be positive, got {args.beta}")
    notes: list[str] = []
    model = resolve_model(args)
    if model.scale != 1.0:
        notes.append(f"builtin {model.name} rescaled by {model.scale:.17g} to unit norm")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        params, results, timings = _RUNNERS[args.subcommand](args, model, notes)
    notes.extend(str(w.message) for w in caught)
    report = _clean(
        {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "command": {"subcommand": args.subcommand, "argv": list(argv)},
            "model": _model_block(model),
            "params": params,
            "results": results,
            "notes": notes,
            "timings": timings,
        }
    )
    jsonschema.validate(report, REPORT_SCHEMA)
    report["_format"] = getattr(args, "format", "json")
    report["_out"] = args.out
    return report


def sweep_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["l", "ratio", "delta"])
    for p in report["results"]["points"]:
        writer.writerow([p["l"], repr(p["ratio"]), repr(p["delta"])])
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        report = run(argv)
    except ValidationError as exc:
        print(f"gibbsline: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"gibbsline: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    fmt, out = report.pop("_format"), report.pop("_out")
    text = sweep_csv(report) if fmt == "csv" else json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
