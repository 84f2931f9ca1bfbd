"""Conditional AGE/SAGE membership tests, certificates, and verification.

A signomial with at most one negative coefficient (at index ``i``) is
nonnegative on a convex set X iff there are ``v >= 0`` and ``lam`` with

    sigma_X(lam) + sum_j v_j log(v_j / c_j) - sum_j v_j <= c_i,
    [A_minus_i - 1 A_i]' v + lam = 0,

which is an exponential-cone feasibility problem once the support function
enters through its epigraph.  SAGE membership asks for a decomposition of the
coefficient vector into such blocks, one per participating index; level-p
membership applies the same test to the signomial multiplied by
``(sum_j exp(A_j.x))**p`` over the degree-(p+1) exponent lattice.

Membership is solved as slack minimization: each block's scalar inequality is
relaxed by a shared slack ``s`` and ``s`` is minimized, so the optimum grades
how far the instance sits inside or outside the cone.  Membership holds when
the optimal slack is at most ``slack_tol`` (default 1e-6).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .conic import (
    Aff,
    ConicProgram,
    SolveResult,
    SolverBackend,
    SolverOptions,
    OPTIMAL,
    add_relative_entropy_epigraph,
    default_backend,
)
from .convexset import (
    ConvexSet,
    SamplingFailureError,
    UnboundedSetError,
    sample_points,
    support_epigraph,
    support_value,
)
from .signomial import InputError, Signomial, ensure_constant_term, modulation_matrix

__all__ = [
    "AgeWitness",
    "AgeBlock",
    "SageCertificate",
    "AgeMembership",
    "SageMembership",
    "VerificationReport",
    "StructuralMismatchError",
    "age_membership",
    "sage_membership",
    "presolve_indices",
    "verify_certificate",
    "relative_entropy",
    "DEFAULT_SLACK_TOL",
]

DEFAULT_SLACK_TOL = 1e-6

MEMBER = "member"
NOT_MEMBER = "not_member"
NUMERICAL = "numerical"


class StructuralMismatchError(ValueError):
    """Certificate shape does not match the problem it claims to certify."""


def relative_entropy(v: np.ndarray, u: np.ndarray) -> float:
    """``sum_j v_j * log(v_j / u_j)`` with the 0*log(0) = 0 convention."""
    total = 0.0
    for vj, uj in zip(np.asarray(v, float), np.asarray(u, float)):
        if vj <= 0.0:
            continue
        if uj <= 0.0:
            return math.inf
        total += vj * math.log(vj / uj)
    return total


@dataclass(frozen=True)
class AgeWitness:
    """Dual witness for one AGE block: center index, v, lam, and t >= sigma_X(lam)."""

    index: int
    v: np.ndarray
    lam: np.ndarray
    support_bound: float


@dataclass(frozen=True)
class AgeBlock:
    coeffs: np.ndarray
    witness: AgeWitness

    @property
    def index(self) -> int:
        return self.witness.index


@dataclass(frozen=True)
class SageCertificate:
    """Decomposition over the modulated exponent set, plus dual witnesses.

    ``shift`` records the lower-bound value subtracted from the constant term
    when the certificate comes out of a relaxation solve; membership
    certificates have shift 0.
    """

    level: int
    exponents: np.ndarray
    blocks: tuple[AgeBlock, ...]
    residual: float
    shift: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "level": self.level,
            "shift": float(self.shift),
            "exponents": [[float(v) for v in row] for row in self.exponents],
            "blocks": [
                {
                    "i": b.index,
                    "c": [float(v) for v in b.coeffs],
                    "v": [float(v) for v in b.witness.v],
                    "lam": [float(v) for v in b.witness.lam],
                    "t": float(b.witness.support_bound),
                }
                for b in self.blocks
            ],
            "residual": float(self.residual),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SageCertificate":
        if not isinstance(data, dict):
            raise InputError("certificate must be a JSON object")
        for key in ("level", "exponents", "blocks", "residual"):
            if key not in data:
                raise InputError(f"certificate is missing required field '{key}'")
        try:
            exponents = np.atleast_2d(np.asarray(data["exponents"], dtype=float))
            blocks = []
            for item in data["blocks"]:
                blocks.append(
                    AgeBlock(
                        np.asarray(item["c"], dtype=float),
                        AgeWitness(
                            int(item["i"]),
                            np.asarray(item["v"], dtype=float),
                            np.asarray(item["lam"], dtype=float),
                            float(item["t"]),
                        ),
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed certificate: {exc}") from exc
        return cls(
            int(data["level"]),
            exponents,
            tuple(blocks),
            float(data["residual"]),
            float(data.get("shift", 0.0)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "SageCertificate":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class AgeMembership:
    status: str  # member | not_member | numerical
    slack: float | None
    witness: AgeWitness | None
    solve: SolveResult

    @property
    def feasible(self) -> bool:
        return self.status == MEMBER


@dataclass(frozen=True)
class SageMembership:
    status: str
    slack: float | None
    certificate: SageCertificate | None
    solve: SolveResult

    @property
    def feasible(self) -> bool:
        return self.status == MEMBER


def presolve_indices(coeffs: np.ndarray, exponents: np.ndarray) -> list[int]:
    """Indices needing AGE blocks: negative entries plus one designated index.

    The designated index is the all-zero exponent row when present, else the
    first row; folding any nonnegative remainder into an existing block keeps
    the reduced system equivalent to instantiating every index.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    exponents = np.atleast_2d(np.asarray(exponents, dtype=float))
    negatives = {int(i) for i in np.flatnonzero(coeffs < 0)}
    zero_rows = np.flatnonzero(~exponents.any(axis=1))
    designated = int(zero_rows[0]) if zero_rows.size else 0
    return sorted(negatives | {designated})


# -- program construction -------------------------------------------------------


def _add_slack(prog: ConicProgram) -> int:
    """Shared tie slack, capped below at -1.

    Only the sign region of the optimal slack matters for the verdict;
    without the cap, deeply feasible instances push the entropy variables to
    exponentially spread values chasing an irrelevant margin, which stalls
    interior-point solvers.  Reported margins therefore saturate at -1.
    """
    slack = prog.add_var()
    prog.add_ineq(-Aff.var(slack), 1.0)
    return slack


def _age_core(
    prog: ConicProgram,
    rows: np.ndarray,
    X: ConvexSet,
    i: int,
    coeff_exprs: list[Aff],
    slack: int | None,
) -> tuple[list[int], list[int], int]:
    """AGE feasibility constraints for center ``i``; returns (v, lam, t) ids."""
    num_rows, n = rows.shape
    others = [j for j in range(num_rows) if j != i]
    v = prog.add_vars(len(others))
    u = prog.add_vars(len(others))
    lam = prog.add_vars(n)
    t = prog.add_var()
    support_epigraph(X, prog, lam, t)
    for vj, uj, j in zip(v, u, others):
        add_relative_entropy_epigraph(prog, vj, coeff_exprs[j], uj)
    tie = Aff.var(t)
    for uj in u:
        tie = tie + Aff.var(uj)
    for vj in v:
        tie = tie - Aff.var(vj)
    tie = tie - coeff_exprs[i]
    if slack is not None:
        tie = tie - Aff.var(slack)
    prog.add_ineq(tie)
    for k in range(n):
        balance = Aff.var(lam[k])
        for vj, j in zip(v, others):
            coef = float(rows[j, k] - rows[i, k])
            if coef != 0.0:
                balance = balance + Aff.var(vj, coef)
        prog.add_eq(balance)
    return v, lam, t


def _build_sage_system(
    prog: ConicProgram,
    rows: np.ndarray,
    X: ConvexSet,
    indices: list[int],
    targets: list[Aff],
    slack: int | None,
) -> dict[int, tuple[list[int], list[int], list[int], int]]:
    """Per-index AGE blocks with fresh coefficient variables, coupled so the
    block coefficients sum to ``targets`` row by row."""
    num_rows = rows.shape[0]
    system: dict[int, tuple[list[int], list[int], list[int], int]] = {}
    coupling: list[Aff] = [Aff() for _ in range(num_rows)]
    for i in indices:
        c_vars = prog.add_vars(num_rows)
        coeff_exprs = [Aff.var(j) for j in c_vars]
        v, lam, t = _age_core(prog, rows, X, i, coeff_exprs, slack)
        for r in range(num_rows):
            coupling[r] = coupling[r] + Aff.var(c_vars[r])
        system[i] = (c_vars, v, lam, t)
    for r in range(num_rows):
        prog.add_eq(coupling[r] - targets[r])
    return system


# zeroing entries below this changes any certificate constraint by well under
# the 1e-6 verification tolerance (the log factor contributes at most ~40x)
_NOISE_FLOOR = 1e-8


def _extract_certificate(
    x: np.ndarray,
    rows: np.ndarray,
    system: dict[int, tuple[list[int], list[int], list[int], int]],
    level: int,
    shift: float,
) -> SageCertificate:
    """Read block variables out of a solution, scrubbing solver noise.

    Off-center coefficients are cone-constrained nonnegative, so tiny negative
    values are clipped to 0; v entries that are noise paired with a zero
    coefficient are zeroed (the exponential-cone closure point).  Entries
    above the noise floor are never touched, so a genuinely invalid witness
    still fails verification.
    """
    blocks = []
    for i in sorted(system):
        c_vars, v_vars, lam_vars, t_var = system[i]
        c = np.array([x[j] for j in c_vars])
        v = np.maximum(np.array([x[j] for j in v_vars]), 0.0)
        others = [j for j in range(rows.shape[0]) if j != i]
        for k, j in enumerate(others):
            if -_NOISE_FLOOR < c[j] < 0.0:
                c[j] = 0.0
            if c[j] <= 0.0 and v[k] <= _NOISE_FLOOR:
                v[k] = 0.0
        blocks.append(
            AgeBlock(
                c,
                AgeWitness(i, v, np.array([x[j] for j in lam_vars]), float(x[t_var])),
            )
        )
    return SageCertificate(level, rows, tuple(blocks), math.nan, shift)


def certificate_violations(
    cert: SageCertificate,
    target: np.ndarray,
    X: ConvexSet,
    backend: SolverBackend | None = None,
) -> dict[str, float]:
    """Recompute every certificate constraint; values are violations (0 = holds)."""
    rows = cert.exponents
    out: dict[str, float] = {}
    total = np.zeros(rows.shape[0])
    for block in cert.blocks:
        i = block.index
        c = block.coeffs
        w = block.witness
        total += c
        others = [j for j in range(rows.shape[0]) if j != i]
        c_rest = c[others]
        out[f"nonneg[{i}]"] = max(0.0, float(-c_rest.min())) if others else 0.0
        balance = rows[others].T @ w.v - float(w.v.sum()) * rows[i] + w.lam
        out[f"balance[{i}]"] = float(np.abs(balance).max()) if balance.size else 0.0
        tie = w.support_bound + relative_entropy(w.v, c_rest) - float(w.v.sum()) - c[i]
        out[f"entropy_tie[{i}]"] = max(0.0, tie)
        sigma = support_value(X, w.lam, backend)
        out[f"support[{i}]"] = max(0.0, sigma - w.support_bound)
    out["coupling"] = float(np.abs(total - target).max())
    return out


# -- membership operations ----------------------------------------------------------


def age_membership(
    coeffs: np.ndarray,
    exponents: np.ndarray,
    index: int,
    X: ConvexSet,
    backend: SolverBackend | None = None,
    opts: SolverOptions | None = None,
    slack_tol: float = DEFAULT_SLACK_TOL,
) -> AgeMembership:
    """Test membership of ``Sig(coeffs, exponents)`` in the AGE cone at ``index``.

    Requires all off-index coefficients nonnegative and distinct exponent
    rows.  Returns the dual witness when the optimal slack is within
    ``slack_tol``; solver trouble is reported as status 'numerical' rather
    than 'not_member'.
    """
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    rows = np.atleast_2d(np.asarray(exponents, dtype=float))
    if coeffs.shape[0] != rows.shape[0]:
        raise ValueError("coeffs length must match exponent row count")
    if X.dim != rows.shape[1]:
        raise ValueError(f"set dimension {X.dim} does not match exponents ({rows.shape[1]})")
    if not 0 <= index < rows.shape[0]:
        raise ValueError(f"index {index} out of range for {rows.shape[0]} rows")
    if len({tuple(r) for r in rows}) != rows.shape[0]:
        raise ValueError("exponent rows must be distinct")
    others = [j for j in range(rows.shape[0]) if j != index]
    if others and min(coeffs[j] for j in others) < 0:
        raise ValueError("all coefficients except the chosen index must be nonnegative")

    prog = ConicProgram()
    slack = _add_slack(prog)
    coeff_exprs = [Aff.constant(float(c)) for c in coeffs]
    v_vars, lam_vars, t_var = _age_core(prog, rows, X, index, coeff_exprs, slack)
    prog.minimize(Aff.var(slack))
    result = (backend or default_backend()).solve(prog, opts or SolverOptions())

    if result.status != OPTIMAL:
        return AgeMembership(NUMERICAL, None, None, result)
    s = float(result.objective)
    if s > slack_tol:
        return AgeMembership(NOT_MEMBER, s, None, result)
    v = np.maximum(result.x[v_vars], 0.0)
    for k, j in enumerate(others):
        if coeffs[j] <= 0.0 and v[k] <= _NOISE_FLOOR:
            v[k] = 0.0
    witness = AgeWitness(
        index, v, np.asarray(result.x[lam_vars], dtype=float), float(result.x[t_var])
    )
    return AgeMembership(MEMBER, s, witness, result)


def sage_membership(
    f: Signomial,
    X: ConvexSet,
    level: int = 0,
    backend: SolverBackend | None = None,
    opts: SolverOptions | None = None,
    slack_tol: float = DEFAULT_SLACK_TOL,
    presolve: bool = True,
) -> SageMembership:
    """Level-``level`` conditional SAGE membership of ``f`` on X.

    Forms the modulated signomial over the degree-(level+1) exponent lattice
    and solves the joint decomposition program.  ``presolve`` restricts AGE
    blocks to negative coefficients plus one designated index; disabling it
    instantiates every lattice row.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if X.dim != f.dim:
        raise ValueError(f"set dimension {X.dim} does not match signomial ({f.dim})")
    base = f.canonicalize()
    rows, M = modulation_matrix(base.exponents, level)
    g = M @ base.coeffs
    indices = presolve_indices(g, rows) if presolve else list(range(rows.shape[0]))

    prog = ConicProgram()
    slack = _add_slack(prog)
    targets = [Aff.constant(float(v)) for v in g]
    system = _build_sage_system(prog, rows, X, indices, targets, slack)
    prog.minimize(Aff.var(slack))
    solver = backend or default_backend()
    result = solver.solve(prog, opts or SolverOptions())

    if result.status != OPTIMAL:
        return SageMembership(NUMERICAL, None, None, result)
    s = float(result.objective)
    if s > slack_tol:
        return SageMembership(NOT_MEMBER, s, None, result)
    cert = _extract_certificate(result.x, rows, system, level, 0.0)
    violations = certificate_violations(cert, g, X, solver)
    cert = SageCertificate(level, rows, cert.blocks, max(violations.values()), 0.0)
    return SageMembership(MEMBER, s, cert, result)


# -- verification ------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    max_violation: float
    violations: dict[str, float]
    failures: tuple[str, ...]
    sample_minima: dict[str, float] | None  # None when X was not sampled

    def worst(self) -> str:
        if not self.violations:
            return "none"
        name = max(self.violations, key=lambda k: self.violations[k])
        return f"{name}={self.violations[name]:.3e}"


def _match_problem(
    cert: SageCertificate, f: Signomial
) -> tuple[np.ndarray, np.ndarray]:
    """Return (target coefficients, lattice rows) for the certified signomial.

    Tries the signomial as-is, then with a constant row ensured (the
    relaxation path); the certificate's recorded exponent set must match one
    of the two lattices bit-exactly.
    """
    candidates = []
    base = f.canonicalize()
    shifted, k0 = ensure_constant_term(base)
    if cert.shift == 0.0:
        candidates.append((base, None))
    candidates.append((shifted, k0))
    for sig, k0_idx in candidates:
        rows, M = modulation_matrix(sig.exponents, cert.level)
        if rows.shape == cert.exponents.shape and np.array_equal(rows, cert.exponents):
            coeffs = sig.coeffs.copy()
            if cert.shift != 0.0:
                if k0_idx is None:
                    continue
                coeffs[k0_idx] -= cert.shift
            return M @ coeffs, rows
    raise StructuralMismatchError(
        "certificate exponent set does not match the problem's modulated lattice "
        f"at level {cert.level}"
    )


def verify_certificate(
    cert: SageCertificate,
    f: Signomial,
    X: ConvexSet,
    tol: float = 1e-6,
    samples: int = 64,
    seed: int = 0,
    backend: SolverBackend | None = None,
) -> VerificationReport:
    """Independently re-check every constraint a certificate asserts.

    Recomputes the decomposition coupling, each block's sign, balance, and
    relative-entropy conditions, and compares each block's support bound
    against a fresh support-function evaluation.  For bounded X it
    additionally samples points and requires every AGE summand (and the full
    modulated signomial) to evaluate above ``-tol``; when X is unbounded (or
    too thin to sample within budget) the sampling leg is skipped and
    ``sample_minima`` is None.
    """
    if cert.level < 0:
        raise StructuralMismatchError("certificate level must be nonnegative")
    if not cert.blocks:
        raise StructuralMismatchError("certificate has no blocks")
    if X.dim != f.dim:
        raise StructuralMismatchError(
            f"set dimension {X.dim} does not match signomial ({f.dim})"
        )
    num_rows = cert.exponents.shape[0]
    seen = set()
    for block in cert.blocks:
        i = block.index
        if not 0 <= i < num_rows or i in seen:
            raise StructuralMismatchError(f"bad or repeated block index {i}")
        seen.add(i)
        if block.coeffs.shape[0] != num_rows:
            raise StructuralMismatchError(f"block {i} coefficient length mismatch")
        if block.witness.v.shape[0] != num_rows - 1:
            raise StructuralMismatchError(f"block {i} witness v length mismatch")
        if block.witness.lam.shape[0] != cert.exponents.shape[1]:
            raise StructuralMismatchError(f"block {i} witness lam length mismatch")

    target, rows = _match_problem(cert, f)
    violations = certificate_violations(cert, target, X, backend)

    sample_minima: dict[str, float] | None = None
    try:
        pts = sample_points(X, samples, seed, backend) if samples > 0 else np.zeros((0, X.dim))
        if pts.shape[0]:
            sample_minima = {}
            modulated = Signomial(rows, target)
            sample_minima["modulated"] = float(np.min(modulated(pts)))
            violations["sampling[modulated]"] = max(0.0, -sample_minima["modulated"])
            for block in cert.blocks:
                summand = Signomial(rows, block.coeffs)
                key = f"age[{block.index}]"
                sample_minima[key] = float(np.min(summand(pts)))
                violations[f"sampling[{key}]"] = max(0.0, -sample_minima[key])
    except (UnboundedSetError, SamplingFailureError):
        sample_minima = None  # exact recomputation above still stands on its own

    worst = max(violations.values()) if violations else 0.0
    failures = tuple(sorted(k for k, v in violations.items() if v > tol))
    return VerificationReport(not failures, worst, violations, failures, sample_minima)
