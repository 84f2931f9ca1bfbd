"""Hierarchy of conditional-SAGE lower bounds for constrained signomial minimization.

The level-p bound is ``sup { shift : f - shift in SAGE^(p)(A, X) }``.  The
shift only touches the constant coefficient, and modulation acts linearly on
coefficients, so the shift enters the decomposition's coupling constraints
affinely through one column of the modulation matrix — a single conic solve
per level.

A brute-force grid oracle over bounded sets (n <= 3) provides the independent
upper bound used by tests and the CLI to cross-check soundness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conic import (
    Aff,
    ConicProgram,
    SolverBackend,
    SolverOptions,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    default_backend,
)
from .convexset import ConvexSet, bounding_box, contains_many, sample_points
from .sage import (
    SageCertificate,
    _build_sage_system,
    _extract_certificate,
    certificate_violations,
    presolve_indices,
)
from .signomial import Signomial, ensure_constant_term, modulation_matrix

__all__ = [
    "BoundResult",
    "MonotonicityError",
    "sage_bound",
    "hierarchy_scan",
    "grid_oracle",
    "scan_to_json_dict",
]

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible_all_lambda"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL = "numerical_trouble"


class MonotonicityError(RuntimeError):
    """Bounds decreased along the hierarchy beyond tolerance (should not happen)."""

    def __init__(self, message: str, results: list["BoundResult"]):
        super().__init__(message)
        self.results = results


@dataclass(frozen=True)
class BoundResult:
    level: int
    bound: float | None
    status: str
    certificate: SageCertificate | None
    solver_status: str

    def to_json_dict(self, include_certificate: bool = False) -> dict:
        out: dict = {"p": self.level, "status": self.status}
        if self.bound is not None:
            out["bound"] = float(self.bound)
        if include_certificate and self.certificate is not None:
            out["certificate"] = self.certificate.to_json_dict()
        return out


def sage_bound(
    f: Signomial,
    X: ConvexSet,
    level: int = 0,
    backend: SolverBackend | None = None,
    opts: SolverOptions | None = None,
    presolve: bool = True,
) -> BoundResult:
    """Level-``level`` SAGE lower bound on ``inf_{x in X} f(x)``, with certificate.

    Status 'infeasible_all_lambda' means no shift makes the shifted signomial
    certifiable at this level (the bound is conventionally -inf); 'unbounded'
    is surfaced as reported by the backend.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if X.dim != f.dim:
        raise ValueError(f"set dimension {X.dim} does not match signomial ({f.dim})")
    base, k0 = ensure_constant_term(f.canonicalize())
    rows, M = modulation_matrix(base.exponents, level)
    g = M @ base.coeffs
    shift_col = M[:, k0]

    if presolve:
        touched = {int(r) for r in np.flatnonzero(shift_col > 0)}
        indices = sorted(set(presolve_indices(g, rows)) | touched)
    else:
        indices = list(range(rows.shape[0]))

    prog = ConicProgram()
    shift_var = prog.add_var()
    targets = [
        Aff({shift_var: -float(shift_col[r])}, float(g[r])) if shift_col[r] != 0.0
        else Aff.constant(float(g[r]))
        for r in range(rows.shape[0])
    ]
    system = _build_sage_system(prog, rows, X, indices, targets, slack=None)
    prog.maximize(Aff.var(shift_var))
    solver = backend or default_backend()
    result = solver.solve(prog, opts or SolverOptions())

    if result.status == OPTIMAL:
        bound = float(result.objective)
        cert = _extract_certificate(result.x, rows, system, level, bound)
        violations = certificate_violations(cert, g - bound * shift_col, X, solver)
        cert = SageCertificate(level, rows, cert.blocks, max(violations.values()), bound)
        return BoundResult(level, bound, STATUS_OPTIMAL, cert, result.solver_status)
    if result.status == INFEASIBLE:
        return BoundResult(level, None, STATUS_INFEASIBLE, None, result.solver_status)
    if result.status == UNBOUNDED:
        return BoundResult(level, None, STATUS_UNBOUNDED, None, result.solver_status)
    return BoundResult(level, None, STATUS_NUMERICAL, None, result.solver_status)


def hierarchy_scan(
    f: Signomial,
    X: ConvexSet,
    p_max: int = 3,
    stop_gap: float = 1e-7,
    backend: SolverBackend | None = None,
    opts: SolverOptions | None = None,
    monotone_tol: float = 1e-6,
) -> list[BoundResult]:
    """Bounds for levels 0..p_max, stopping early once successive bounds agree.

    Solver failures at a level are recorded and the scan continues.  A
    decrease between consecutive optimal bounds beyond ``monotone_tol`` raises
    :class:`MonotonicityError` (the hierarchy is nested, so this indicates a
    numerical breakdown), with the partial results attached.
    """
    if p_max < 0:
        raise ValueError("p_max must be nonnegative")
    results: list[BoundResult] = []
    last_bound: float | None = None
    for level in range(p_max + 1):
        res = sage_bound(f, X, level, backend, opts)
        results.append(res)
        if res.status == STATUS_OPTIMAL:
            if last_bound is not None:
                if res.bound < last_bound - monotone_tol:
                    raise MonotonicityError(
                        f"bound decreased from {last_bound!r} at level {level - 1} "
                        f"to {res.bound!r} at level {level}",
                        results,
                    )
                if abs(res.bound - last_bound) < stop_gap:
                    break
            last_bound = res.bound
    return results


def scan_to_json_dict(results: list[BoundResult], include_certificates: bool = False) -> dict:
    out: dict = {"levels": [r.to_json_dict() for r in results]}
    if include_certificates:
        certs = {
            str(r.level): r.certificate.to_json_dict()
            for r in results
            if r.certificate is not None
        }
        if certs:
            out["certificates"] = certs
    return out


_GRID_BUDGET = 2_097_152  # points per sweep
_REFINE_ROUNDS = 5
_CHUNK = 262_144


def _axis_points(lo: float, hi: float, spacing: float, cap: int) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    count = int(math.ceil((hi - lo) / spacing)) + 1
    return np.linspace(lo, hi, min(max(count, 2), cap))


def _sweep(f: Signomial, X: ConvexSet, axes: list[np.ndarray]) -> tuple[float, np.ndarray | None]:
    """Minimum of f over the feasible points of the axis grid, chunked."""
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    best = math.inf
    best_pt: np.ndarray | None = None
    for start in range(0, pts.shape[0], _CHUNK):
        chunk = pts[start : start + _CHUNK]
        good = contains_many(X, chunk, 1e-9)
        if not np.any(good):
            continue
        feas = chunk[good]
        vals = f(feas)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best = float(vals[k])
            best_pt = feas[k]
    return best, best_pt


def grid_oracle(
    f: Signomial,
    X: ConvexSet,
    resolution: float = 1e-2,
    backend: SolverBackend | None = None,
) -> float:
    """Brute-force upper bound on ``inf_{x in X} f(x)`` for bounded X, n <= 3.

    Sweeps a deterministic grid over the bounding box, keeps points inside X,
    then refines locally around the incumbent.  Independent of the conic
    machinery; intended for tests and CLI cross-checks only.
    """
    if f.dim != X.dim:
        raise ValueError(f"set dimension {X.dim} does not match signomial ({f.dim})")
    if X.dim > 3:
        raise ValueError("grid oracle supports at most 3 variables")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    lo, hi = bounding_box(X, backend)
    cap = max(2, int(_GRID_BUDGET ** (1.0 / X.dim)))
    axes = [_axis_points(lo[k], hi[k], resolution, cap) for k in range(X.dim)]
    best, best_pt = _sweep(f, X, axes)

    if best_pt is None:
        # grid missed a thin set: fall back to feasible samples
        pts = sample_points(X, 512, seed=0, backend=backend)
        vals = f(pts)
        k = int(np.argmin(vals))
        best, best_pt = float(vals[k]), pts[k]

    spacing = max((ax[1] - ax[0]) if ax.size > 1 else 0.0 for ax in axes)
    for _ in range(_REFINE_ROUNDS):
        if spacing <= resolution / 16 or spacing == 0.0:
            break
        local_lo = np.maximum(lo, best_pt - 2 * spacing)
        local_hi = np.minimum(hi, best_pt + 2 * spacing)
        axes = [np.linspace(local_lo[k], local_hi[k], 41) for k in range(X.dim)]
        value, point = _sweep(f, X, axes)
        if point is None:
            break
        if value < best:
            best, best_pt = value, point
        spacing /= 10.0
    return best
