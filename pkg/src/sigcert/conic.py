"""Solver-agnostic conic programs: linear rows, exponential cones, second-order cones.

A :class:`ConicProgram` is a plain container of sparse constraint rows over
integer-indexed variables.  Backends translate it to a concrete solver's
standard form ``min q'z  s.t.  Az + s = b,  s in K`` and return a
:class:`SolveResult` with a status drawn from a small fixed vocabulary, so
that everything downstream (membership tests, bound computations) is
independent of which solver is installed.

Exponential cone convention: an ordered triple ``(x, y, z)`` is feasible iff
``y * exp(x / y) <= z`` with ``y > 0``, together with the closure points
``(x, 0, z)`` for ``x <= 0, z >= 0``.  Relative entropy ``v*log(v/c) <= u``
is the triple ``(-u, v, c)``; the natural logarithm is used throughout.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse

__all__ = [
    "Aff",
    "ConicProgram",
    "SolveResult",
    "SolverOptions",
    "SolverBackend",
    "ClarabelBackend",
    "ScsBackend",
    "BackendFailure",
    "add_relative_entropy_epigraph",
    "default_backend",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "NUMERICAL",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical_trouble"


class BackendFailure(RuntimeError):
    """A solver backend raised internally or produced unusable output."""


@dataclass
class Aff:
    """Affine expression ``sum_j terms[j] * z_j + const`` over program variables."""

    terms: dict[int, float] = field(default_factory=dict)
    const: float = 0.0

    @staticmethod
    def var(index: int, scale: float = 1.0) -> "Aff":
        return Aff({index: float(scale)})

    @staticmethod
    def constant(value: float) -> "Aff":
        return Aff({}, float(value))

    def copy(self) -> "Aff":
        return Aff(dict(self.terms), self.const)

    def __add__(self, other: "Aff | float") -> "Aff":
        out = self.copy()
        if isinstance(other, Aff):
            for j, v in other.terms.items():
                out.terms[j] = out.terms.get(j, 0.0) + v
            out.const += other.const
        else:
            out.const += float(other)
        return out

    __radd__ = __add__

    def __neg__(self) -> "Aff":
        return Aff({j: -v for j, v in self.terms.items()}, -self.const)

    def __sub__(self, other: "Aff | float") -> "Aff":
        return self + (-other if isinstance(other, Aff) else -float(other))

    def __rsub__(self, other: float) -> "Aff":
        return (-self) + float(other)

    def __mul__(self, scalar: float) -> "Aff":
        s = float(scalar)
        return Aff({j: s * v for j, v in self.terms.items()}, s * self.const)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(v * x[j] for j, v in self.terms.items())


def _as_aff(expr: "Aff | int | float") -> Aff:
    if isinstance(expr, Aff):
        return expr
    if isinstance(expr, (int, np.integer)):
        return Aff.var(int(expr))
    return Aff.constant(float(expr))


class ConicProgram:
    """Incrementally built conic model with a linear objective.

    Variables are integer indices handed out by :meth:`add_vars`.  Linear
    rows are stored sparsely as ``(coeff dict, rhs)``; cone members are
    affine expressions.
    """

    def __init__(self) -> None:
        self.num_vars: int = 0
        self.lin_eq: list[tuple[dict[int, float], float]] = []
        self.lin_ineq: list[tuple[dict[int, float], float]] = []
        self.exp_cones: list[tuple[Aff, Aff, Aff]] = []
        self.soc_cones: list[tuple[Aff, tuple[Aff, ...]]] = []
        self.objective: Aff = Aff()
        self.sense: str = "min"

    def add_vars(self, count: int) -> list[int]:
        ids = list(range(self.num_vars, self.num_vars + count))
        self.num_vars += count
        return ids

    def add_var(self) -> int:
        return self.add_vars(1)[0]

    def _check(self, expr: Aff) -> Aff:
        for j in expr.terms:
            if not 0 <= j < self.num_vars:
                raise ValueError(f"variable index {j} out of range (num_vars={self.num_vars})")
        return expr

    def add_eq(self, expr: "Aff | int", rhs: float = 0.0) -> None:
        """Append the linear equality ``expr == rhs``."""
        e = self._check(_as_aff(expr))
        self.lin_eq.append((dict(e.terms), float(rhs) - e.const))

    def add_ineq(self, expr: "Aff | int", rhs: float = 0.0) -> None:
        """Append the linear inequality ``expr <= rhs``."""
        e = self._check(_as_aff(expr))
        self.lin_ineq.append((dict(e.terms), float(rhs) - e.const))

    def add_exp_cone(self, x: "Aff | int | float", y: "Aff | int | float", z: "Aff | int | float") -> None:
        """Constrain the ordered triple ``(x, y, z)`` to the exponential cone."""
        triple = tuple(self._check(_as_aff(e)) for e in (x, y, z))
        self.exp_cones.append(triple)  # type: ignore[arg-type]

    def add_soc(self, t: "Aff | int | float", u: Iterable["Aff | int | float"]) -> None:
        """Constrain ``norm(u) <= t``."""
        tt = self._check(_as_aff(t))
        uu = tuple(self._check(_as_aff(e)) for e in u)
        self.soc_cones.append((tt, uu))

    def minimize(self, expr: "Aff | int") -> None:
        self.objective = self._check(_as_aff(expr))
        self.sense = "min"

    def maximize(self, expr: "Aff | int") -> None:
        self.objective = self._check(_as_aff(expr))
        self.sense = "max"

    # -- violation measurement -------------------------------------------

    def max_violation(self, x: np.ndarray) -> float:
        """Worst primal violation of ``x``, relative to each constraint's scale.

        Each row or cone violation is divided by ``max(1, magnitudes of the
        participating terms)``, matching how solvers state their feasibility
        tolerances; absolute and relative coincide for O(1)-scaled problems.
        """
        worst = 0.0
        for terms, rhs in self.lin_eq:
            value, scale = _row_value_scale(terms, x, rhs)
            worst = max(worst, abs(value - rhs) / scale)
        for terms, rhs in self.lin_ineq:
            value, scale = _row_value_scale(terms, x, rhs)
            worst = max(worst, (value - rhs) / scale)
        for t, u in self.soc_cones:
            norm = math.sqrt(sum(e.value(x) ** 2 for e in u))
            tv = t.value(x)
            worst = max(worst, (norm - tv) / max(1.0, norm, abs(tv)))
        for xe, ye, ze in self.exp_cones:
            xv, yv, zv = xe.value(x), ye.value(x), ze.value(x)
            scale = max(1.0, abs(xv), abs(yv), abs(zv))
            worst = max(worst, _exp_cone_violation(xv, yv, zv) / scale)
        return worst

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        def rows(items):
            return [[sorted(t.items()), rhs] for t, rhs in items]

        def aff(e: Aff):
            return [sorted(e.terms.items()), e.const]

        return {
            "num_vars": self.num_vars,
            "sense": self.sense,
            "objective": aff(self.objective),
            "lin_eq": rows(self.lin_eq),
            "lin_ineq": rows(self.lin_ineq),
            "exp_cones": [[aff(a), aff(b), aff(c)] for a, b, c in self.exp_cones],
            "soc_cones": [[aff(t), [aff(e) for e in u]] for t, u in self.soc_cones],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ConicProgram":
        prog = cls()
        prog.add_vars(int(data["num_vars"]))

        def aff(item) -> Aff:
            terms, const = item
            return Aff({int(j): float(v) for j, v in terms}, float(const))

        prog.sense = data["sense"]
        prog.objective = aff(data["objective"])
        for terms, rhs in data["lin_eq"]:
            prog.lin_eq.append(({int(j): float(v) for j, v in terms}, float(rhs)))
        for terms, rhs in data["lin_ineq"]:
            prog.lin_ineq.append(({int(j): float(v) for j, v in terms}, float(rhs)))
        for a, b, c in data["exp_cones"]:
            prog.exp_cones.append((aff(a), aff(b), aff(c)))
        for t, u in data["soc_cones"]:
            prog.soc_cones.append((aff(t), tuple(aff(e) for e in u)))
        return prog

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "ConicProgram":
        return cls.from_json_dict(json.loads(text))


def _row_value(terms: dict[int, float], x: np.ndarray) -> float:
    return sum(v * x[j] for j, v in terms.items())


def _row_value_scale(terms: dict[int, float], x: np.ndarray, rhs: float) -> tuple[float, float]:
    value = 0.0
    scale = max(1.0, abs(rhs))
    for j, v in terms.items():
        term = v * x[j]
        value += term
        scale = max(scale, abs(term))
    return value, scale


def _exp_cone_violation(x: float, y: float, z: float) -> float:
    """Violation of (x, y, z) against y*exp(x/y) <= z, y >= 0 (with closure).

    Measured as the cheaper of the two single-coordinate repairs: raising z
    (functional form ``y*exp(x/y) - z``) or lowering x (log form
    ``x - y*log(z/y)``).  Either repair lands on the cone, so the minimum
    upper-bounds the distance to the cone without the blowups each form has
    alone (overflow for large x/y, amplification for z near 0).
    """
    worst = max(0.0, -y, -z)
    if y > 0.0:
        t = x / y
        viol_z = math.inf if t > 700.0 else y * math.exp(t) - z
        if z > 0.0:
            viol_x = x - y * (math.log(z) - math.log(y))
            return max(worst, min(viol_z, viol_x))
        return max(worst, viol_z)
    # closure face at y = 0 requires x <= 0 (z >= 0 is in `worst`)
    return max(worst, x)


def add_relative_entropy_epigraph(
    prog: ConicProgram,
    v: "Aff | int | float",
    c: "Aff | int | float",
    u: "Aff | int | float",
) -> None:
    """Constrain ``v * log(v / c) <= u`` (natural log, 0*log 0 = 0).

    Encoded as the exponential-cone triple ``(-u, v, c)``: feasible iff
    ``v * exp(-u/v) <= c`` with ``v, c >= 0``.
    """
    prog.add_exp_cone(-_as_aff(u), v, c)


@dataclass(frozen=True)
class SolverOptions:
    """Acceptance thresholds and internal solve targets.

    ``feas_tol``/``gap_tol`` are what an OPTIMAL result must satisfy;
    ``solve_tol`` is the (tighter) tolerance requested from the solver, with
    the acceptance thresholds used as its reduced-accuracy fallback.
    """

    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    solve_tol: float = 1e-12
    max_iter: int = 200
    verbose: bool = False


@dataclass
class SolveResult:
    status: str
    objective: float | None
    x: np.ndarray | None
    residual: float
    solver_status: str
    solver: str

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class SolverBackend:
    """Contract: translate a ConicProgram, solve deterministically, report status.

    Implementations must support exponential and second-order cones natively,
    be deterministic for fixed options, and be safe to call concurrently on
    distinct programs.
    """

    name: str = "abstract"

    def solve(self, prog: ConicProgram, opts: SolverOptions | None = None) -> SolveResult:
        raise NotImplementedError


def _standard_form(prog: ConicProgram):
    """Rows (A, b) ordered [zero, nonneg, soc..., exp...] with cone sizes."""
    rows: list[dict[int, float]] = []
    rhs: list[float] = []
    meta: list[tuple[str, int]] = []

    if prog.lin_eq:
        for terms, b in prog.lin_eq:
            rows.append(terms)
            rhs.append(b)
        meta.append(("zero", len(prog.lin_eq)))
    if prog.lin_ineq:
        for terms, b in prog.lin_ineq:
            rows.append(terms)
            rhs.append(b)
        meta.append(("nonneg", len(prog.lin_ineq)))
    for t, u in prog.soc_cones:
        for e in (t, *u):
            rows.append({j: -v for j, v in e.terms.items()})
            rhs.append(e.const)
        meta.append(("soc", 1 + len(u)))
    for triple in prog.exp_cones:
        for e in triple:
            rows.append({j: -v for j, v in e.terms.items()})
            rhs.append(e.const)
        meta.append(("exp", 3))

    data, ri, ci = [], [], []
    for r, terms in enumerate(rows):
        for j, v in terms.items():
            if v != 0.0:
                ri.append(r)
                ci.append(j)
                data.append(v)
    A = sparse.csc_matrix((data, (ri, ci)), shape=(len(rows), prog.num_vars))
    b = np.asarray(rhs, dtype=float)
    q = np.zeros(prog.num_vars)
    sign = 1.0 if prog.sense == "min" else -1.0
    for j, v in prog.objective.terms.items():
        q[j] = sign * v
    return A, b, q, meta


def _finish(prog: ConicProgram, opts: SolverOptions, status: str, x, solver_status: str, name: str) -> SolveResult:
    if status == OPTIMAL and x is not None:
        xa = np.asarray(x, dtype=float)
        residual = prog.max_violation(xa)
        if not math.isfinite(residual) or residual > opts.feas_tol:
            return SolveResult(NUMERICAL, None, xa, residual, solver_status, name)
        return SolveResult(OPTIMAL, prog.objective.value(xa), xa, residual, solver_status, name)
    xa = None if x is None else np.asarray(x, dtype=float)
    return SolveResult(status, None, xa, math.inf, solver_status, name)


class ClarabelBackend(SolverBackend):
    """Interior-point backend (Rust Clarabel); high-accuracy default.

    Solves are retried through a fixed ladder of settings tweaks (scaling
    toggles, shorter steps) when the solver stalls, so results remain
    deterministic for fixed options.
    """

    name = "clarabel"

    _RETRY_LADDER = (
        {},
        {"equilibrate_enable": False},
        {"max_step_fraction": 0.9},
    )

    def solve(self, prog: ConicProgram, opts: SolverOptions | None = None) -> SolveResult:
        opts = opts or SolverOptions()
        A, b, q, meta = _standard_form(prog)
        if A.shape[0] == 0:
            x = np.zeros(prog.num_vars)
            status = OPTIMAL if not np.any(q) else UNBOUNDED
            return _finish(prog, opts, status, x if status == OPTIMAL else None, "trivial", self.name)
        result = None
        for tweaks in self._RETRY_LADDER:
            result = self._solve_once(prog, opts, A, b, q, meta, tweaks)
            if result.status != NUMERICAL:
                return result
        return result

    def _solve_once(self, prog, opts, A, b, q, meta, tweaks) -> SolveResult:
        import clarabel

        cone_map = {
            "zero": clarabel.ZeroConeT,
            "nonneg": clarabel.NonnegativeConeT,
            "soc": clarabel.SecondOrderConeT,
        }
        cones = []
        for kind, size in meta:
            if kind == "exp":
                cones.append(clarabel.ExponentialConeT())
            else:
                cones.append(cone_map[kind](size))

        st = clarabel.DefaultSettings()
        st.verbose = opts.verbose
        st.max_iter = opts.max_iter
        st.tol_feas = opts.solve_tol
        st.tol_gap_abs = opts.solve_tol
        st.tol_gap_rel = opts.solve_tol
        st.reduced_tol_feas = opts.feas_tol
        st.reduced_tol_gap_abs = opts.gap_tol
        st.reduced_tol_gap_rel = opts.gap_tol
        for key, value in tweaks.items():
            setattr(st, key, value)
        try:
            P = sparse.csc_matrix((prog.num_vars, prog.num_vars))
            sol = clarabel.DefaultSolver(P, q, A, b, cones, st).solve()
        except BaseException as exc:  # the Rust layer may raise odd exception types
            raise BackendFailure(f"clarabel failed: {exc}") from exc

        raw = str(sol.status)
        if raw in ("Solved", "AlmostSolved"):
            return _finish(prog, opts, OPTIMAL, np.array(sol.x), raw, self.name)
        if raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return _finish(prog, opts, INFEASIBLE, None, raw, self.name)
        if raw in ("DualInfeasible", "AlmostDualInfeasible"):
            return _finish(prog, opts, UNBOUNDED, None, raw, self.name)
        return _finish(prog, opts, NUMERICAL, None, raw, self.name)


class ScsBackend(SolverBackend):
    """First-order backend (SCS); alternate, lower-accuracy fallback."""

    name = "scs"

    def solve(self, prog: ConicProgram, opts: SolverOptions | None = None) -> SolveResult:
        import scs

        opts = opts or SolverOptions()
        A, b, q, meta = _standard_form(prog)
        if A.shape[0] == 0:
            x = np.zeros(prog.num_vars)
            status = OPTIMAL if not np.any(q) else UNBOUNDED
            return _finish(prog, opts, status, x if status == OPTIMAL else None, "trivial", self.name)

        cone: dict = {}
        soc_dims = [size for kind, size in meta if kind == "soc"]
        for kind, size in meta:
            if kind == "zero":
                cone["z"] = size
            elif kind == "nonneg":
                cone["l"] = size
        if soc_dims:
            cone["q"] = soc_dims
        n_exp = sum(1 for kind, _ in meta if kind == "exp")
        if n_exp:
            cone["ep"] = n_exp

        eps = max(opts.solve_tol, 1e-10)
        try:
            sol = scs.solve(
                {"A": A, "b": b, "c": q},
                cone,
                verbose=opts.verbose,
                eps_abs=eps,
                eps_rel=eps,
                eps_infeas=1e-9,
                max_iters=200_000,
            )
        except BaseException as exc:
            raise BackendFailure(f"scs failed: {exc}") from exc

        raw = str(sol["info"]["status"]).lower()
        if "unbounded" in raw:
            return _finish(prog, opts, UNBOUNDED, None, raw, self.name)
        if "infeasible" in raw:
            return _finish(prog, opts, INFEASIBLE, None, raw, self.name)
        if "solved" in raw and "inaccurate" not in raw:
            return _finish(prog, opts, OPTIMAL, sol["x"], raw, self.name)
        return _finish(prog, opts, NUMERICAL, sol.get("x"), raw, self.name)


_BACKENDS = {"clarabel": ClarabelBackend, "scs": ScsBackend}


def default_backend(name: str | None = None) -> SolverBackend:
    """Backend by name, or per the SIGCERT_SOLVER env var, defaulting to clarabel."""
    chosen = name or os.environ.get("SIGCERT_SOLVER", "clarabel")
    try:
        return _BACKENDS[chosen.lower()]()
    except KeyError:
        raise BackendFailure(f"unknown solver backend {chosen!r}; options: {sorted(_BACKENDS)}")


def solve(
    prog: ConicProgram,
    backend: SolverBackend | None = None,
    opts: SolverOptions | None = None,
) -> SolveResult:
    """Solve ``prog`` on ``backend`` (default per env), returning a SolveResult."""
    return (backend or default_backend()).solve(prog, opts or SolverOptions())
