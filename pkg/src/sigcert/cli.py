"""Command-line interface: bound computation, membership checks, certificate
verification, and brute-force oracle cross-checks, all with JSON problem files.

Problem file schema::

    {
      "signomial": {"exponents": [[...], ...], "coeffs": [...]},
      "set":       {"type": "box" | "polyhedron" | "ball" | "intersection" | "fullspace", ...},
      "options":   {"level": 0, "pMax": 3, "seed": 0,
                    "tolerances": {"slack": 1e-6, "feas": 1e-8, "gap": 1e-8, "verify": 1e-6}}
    }

Exit codes: bound 0=solved (any reported status) / 2=input error / 3=backend
failure; check 0=member / 1=not member / 3=numerical; verify 0=pass / 1=fail
/ 2=structural mismatch; oracle 2 on unbounded sets or more than 3 variables.
The solver backend is selected with the SIGCERT_SOLVER environment variable
(clarabel by default).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass

from .conic import BackendFailure, SolverOptions, default_backend
from .convexset import ConvexSet, UnboundedSetError, set_from_json_dict
from .relax import STATUS_OPTIMAL, grid_oracle, hierarchy_scan, sage_bound, scan_to_json_dict
from .sage import (
    DEFAULT_SLACK_TOL,
    SageCertificate,
    StructuralMismatchError,
    sage_membership,
    verify_certificate,
)
from .signomial import InputError, Signomial

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3


@dataclass
class Problem:
    signomial: Signomial
    set: ConvexSet
    level: int | None
    p_max: int | None
    seed: int
    slack_tol: float
    feas_tol: float
    gap_tol: float
    verify_tol: float


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")


def load_problem(path: str) -> Problem:
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: problem file must be a JSON object")
    for key in ("signomial", "set"):
        if key not in data:
            raise InputError(f"{path}: missing required field '{key}'")
    sig = Signomial.from_json_dict(data["signomial"])
    cset = set_from_json_dict(data["set"])
    if sig.dim != cset.dim:
        raise InputError(
            f"{path}: signomial has {sig.dim} variables but the set has dimension {cset.dim}"
        )
    options = data.get("options", {})
    if not isinstance(options, dict):
        raise InputError(f"{path}: field 'options' must be an object")
    tols = options.get("tolerances", {})
    if not isinstance(tols, dict):
        raise InputError(f"{path}: field 'options.tolerances' must be an object")
    return Problem(
        signomial=sig,
        set=cset,
        level=int(options["level"]) if "level" in options else None,
        p_max=int(options["pMax"]) if "pMax" in options else None,
        seed=int(options.get("seed", 0)),
        slack_tol=float(tols.get("slack", DEFAULT_SLACK_TOL)),
        feas_tol=float(tols.get("feas", 1e-8)),
        gap_tol=float(tols.get("gap", 1e-8)),
        verify_tol=float(tols.get("verify", 1e-6)),
    )


def _solver_options(prob: Problem) -> SolverOptions:
    return SolverOptions(feas_tol=prob.feas_tol, gap_tol=prob.gap_tol)


def _emit_json(payload: dict, started: float) -> None:
    payload["timing"] = time.perf_counter() - started
    print(json.dumps(payload, indent=2, sort_keys=True))


def _fmt(v: float | None) -> str:
    return "-" if v is None else f"{v:.9g}"


# -- subcommands --------------------------------------------------------------


def cmd_bound(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    prob = load_problem(args.problem)
    if args.scan is None and args.level is None and prob.level is None and prob.p_max is None:
        level, scan = 0, None
    else:
        level = args.level if args.level is not None else prob.level
        scan = args.scan if args.scan is not None else (prob.p_max if level is None else None)
    backend = default_backend()
    opts = _solver_options(prob)

    if scan is not None:
        results = hierarchy_scan(
            prob.signomial, prob.set, scan, stop_gap=args.stop_gap, backend=backend, opts=opts
        )
    else:
        results = [sage_bound(prob.signomial, prob.set, level or 0, backend, opts)]

    if args.certificate:
        best = next(
            (r for r in reversed(results) if r.status == STATUS_OPTIMAL and r.certificate), None
        )
        if best is not None:
            with open(args.certificate, "w") as fh:
                json.dump(best.certificate.to_json_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
        else:
            print("no level solved to optimality; certificate not written", file=sys.stderr)

    if args.json:
        _emit_json(scan_to_json_dict(results), started)
    else:
        print(f"{'p':>3}  {'bound':>16}  status")
        for r in results:
            print(f"{r.level:>3}  {_fmt(r.bound):>16}  {r.status}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    prob = load_problem(args.problem)
    level = args.level if args.level is not None else (prob.level or 0)
    result = sage_membership(
        prob.signomial,
        prob.set,
        level,
        backend=default_backend(),
        opts=_solver_options(prob),
        slack_tol=args.slack_tol if args.slack_tol is not None else prob.slack_tol,
    )
    verdict = {"member": "MEMBER", "not_member": "NOT-MEMBER", "numerical": "NUMERICAL"}[
        result.status
    ]
    if args.json:
        payload = {"level": level, "verdict": verdict, "slack": result.slack}
        _emit_json(payload, started)
    else:
        print(f"{verdict} (level {level}, slack {_fmt(result.slack)})")
    return {"MEMBER": EXIT_OK, "NOT-MEMBER": EXIT_FAIL, "NUMERICAL": EXIT_BACKEND}[verdict]


def cmd_verify(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cert = SageCertificate.from_json_dict(_load_json(args.certificate))
    prob = load_problem(args.problem)
    if prob.level is not None and prob.level != cert.level:
        raise StructuralMismatchError(
            f"problem requests level {prob.level} but certificate is level {cert.level}"
        )
    report = verify_certificate(
        cert,
        prob.signomial,
        prob.set,
        tol=args.tol if args.tol is not None else prob.verify_tol,
        samples=args.samples,
        seed=args.seed if args.seed is not None else prob.seed,
        backend=default_backend(),
    )
    if args.json:
        payload = {
            "passed": report.passed,
            "max_violation": report.max_violation,
            "violations": report.violations,
            "failures": list(report.failures),
            "sample_minima": report.sample_minima,
        }
        _emit_json(payload, started)
    else:
        print(f"{'constraint':<28} violation")
        for name in sorted(report.violations):
            print(f"{name:<28} {report.violations[name]:.3e}")
        if report.sample_minima is not None:
            for name in sorted(report.sample_minima):
                print(f"min {name:<24} {report.sample_minima[name]:.6g}")
        else:
            print("sampling skipped")
        print("PASS" if report.passed else f"FAIL: {', '.join(report.failures)}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_oracle(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    prob = load_problem(args.problem)
    try:
        value = grid_oracle(prob.signomial, prob.set, args.resolution)
    except (UnboundedSetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.json:
        _emit_json({"oracle": value, "resolution": args.resolution}, started)
    else:
        print(f"{value:.9g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigcert",
        description="Certify signomial nonnegativity over convex sets and compute "
        "the hierarchy of SAGE lower bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bound = sub.add_parser("bound", help="compute lower bound(s) with certificates")
    p_bound.add_argument("problem")
    group = p_bound.add_mutually_exclusive_group()
    group.add_argument("--level", type=int, default=None, help="single hierarchy level")
    group.add_argument("--scan", type=int, default=None, help="scan levels 0..PMAX")
    p_bound.add_argument("--certificate", metavar="OUT.json", default=None)
    p_bound.add_argument("--stop-gap", type=float, default=1e-7)
    p_bound.add_argument("--json", action="store_true")
    p_bound.set_defaults(func=cmd_bound)

    p_check = sub.add_parser("check", help="SAGE cone membership at a level")
    p_check.add_argument("problem")
    p_check.add_argument("--level", type=int, default=None)
    p_check.add_argument("--slack-tol", type=float, default=None)
    p_check.add_argument("--json", action="store_true")
    p_check.set_defaults(func=cmd_check)

    p_verify = sub.add_parser("verify", help="re-check a certificate against a problem")
    p_verify.add_argument("certificate")
    p_verify.add_argument("problem")
    p_verify.add_argument("--tol", type=float, default=None)
    p_verify.add_argument("--samples", type=int, default=64)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--json", action="store_true")
    p_verify.set_defaults(func=cmd_verify)

    p_oracle = sub.add_parser("oracle", help="brute-force grid minimum (bounded X, n <= 3)")
    p_oracle.add_argument("problem")
    p_oracle.add_argument("--resolution", type=float, default=1e-2)
    p_oracle.add_argument("--json", action="store_true")
    p_oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StructuralMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendFailure as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
