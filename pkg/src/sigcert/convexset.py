"""Declarative convex sets with support-function values and epigraph constraints.

Each variant knows how to

* evaluate its support function ``sigma(lam) = sup_{x in X} lam . x``
  (closed form for boxes/balls, an LP for polyhedra, a small conic solve for
  intersections),
* append conic constraints exactly characterizing ``{(lam, t): sigma(lam) <= t}``
  to a :class:`~sigcert.conic.ConicProgram`, and
* test membership and produce deterministic sample points for verification.

Equalities are modeled as opposing polyhedron rows; there is no dedicated
equality variant.  Intersections use per-member infimal convolution, which is
exact when the members' relative interiors overlap (not checked).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

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
from .signomial import InputError

__all__ = [
    "Box",
    "Polyhedron",
    "Ball",
    "Intersection",
    "FullSpace",
    "ConvexSet",
    "support_value",
    "support_epigraph",
    "contains",
    "contains_many",
    "sample_points",
    "bounding_box",
    "project",
    "set_from_json_dict",
    "set_to_json_dict",
    "EmptySetError",
    "UnboundedSetError",
    "SamplingFailureError",
]


class EmptySetError(RuntimeError):
    """The set was detected to be empty (e.g. infeasible polyhedron LP)."""


class UnboundedSetError(RuntimeError):
    """A bounding box was required but the set is unbounded."""


class SamplingFailureError(RuntimeError):
    """Rejection sampling exhausted its retry budget."""


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have equal length")
        if np.any(lo > hi):
            raise ValueError("box has lower > upper in some coordinate")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True)
class Polyhedron:
    """``{x : W x <= b}`` with finite rows."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if W.shape[0] != b.shape[0]:
            raise ValueError("W row count must match b length")
        if not np.all(np.isfinite(W)) or not np.all(np.isfinite(b)):
            raise ValueError("polyhedron rows must be finite")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=float).reshape(-1)
        r = float(self.radius)
        if r < 0:
            raise ValueError("radius must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class Intersection:
    members: tuple

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise ValueError("intersection needs at least one member")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise ValueError(f"members have mixed ambient dimensions {sorted(dims)}")
        object.__setattr__(self, "members", members)

    @property
    def dim(self) -> int:
        return self.members[0].dim


@dataclass(frozen=True)
class FullSpace:
    n: int

    def __post_init__(self) -> None:
        if int(self.n) < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dim(self) -> int:
        return self.n


ConvexSet = Box | Polyhedron | Ball | Intersection | FullSpace


def _check_dim(X: ConvexSet, v: np.ndarray, what: str = "vector") -> np.ndarray:
    va = np.asarray(v, dtype=float).reshape(-1)
    if va.shape[0] != X.dim:
        raise ValueError(f"{what} has dimension {va.shape[0]}, set has {X.dim}")
    return va


# -- support function --------------------------------------------------------


def support_value(
    X: ConvexSet,
    lam: np.ndarray,
    backend: SolverBackend | None = None,
    opts: SolverOptions | None = None,
) -> float:
    """``sup_{x in X} lam . x``; +inf when unbounded in that direction.

    Raises :class:`EmptySetError` when emptiness is detected (polyhedron LP
    infeasible, or an intersection whose epigraph program is unbounded below).
    """
    lam = _check_dim(X, lam, "lam")
    if isinstance(X, Box):
        total = 0.0
        for lj, lo, hi in zip(lam, X.lower, X.upper):
            if lj > 0:
                total += lj * hi  # inf * positive propagates to +inf
            elif lj < 0:
                total += lj * lo
        return float(total)
    if isinstance(X, Ball):
        return float(X.center @ lam + X.radius * math.sqrt(float(lam @ lam)))
    if isinstance(X, FullSpace):
        return 0.0 if not np.any(lam) else math.inf
    if isinstance(X, Polyhedron):
        res = linprog(-lam, A_ub=X.W, b_ub=X.b, bounds=(None, None), method="highs")
        if res.status == 0:
            return float(-res.fun)
        if res.status == 3:
            return math.inf
        if res.status == 2:
            raise EmptySetError("polyhedron is empty (support LP infeasible)")
        raise RuntimeError(f"support LP failed: {res.message}")
    if isinstance(X, Intersection):
        prog = ConicProgram()
        lam_vars = prog.add_vars(X.dim)
        t_var = prog.add_var()
        for j, lj in zip(lam_vars, lam):
            prog.add_eq(Aff.var(j), float(lj))
        support_epigraph(X, prog, lam_vars, t_var)
        prog.minimize(Aff.var(t_var))
        result = (backend or default_backend()).solve(prog, opts or SolverOptions())
        if result.status == OPTIMAL:
            return float(result.objective)
        if result.status == INFEASIBLE:
            return math.inf
        if result.status == UNBOUNDED:
            raise EmptySetError("intersection support is unbounded below; set is empty")
        raise RuntimeError(f"support epigraph solve ended with status {result.status}")
    raise TypeError(f"unsupported set variant {type(X).__name__}")


def support_epigraph(X: ConvexSet, prog: ConicProgram, lam_vars: list[int], t_var: int) -> None:
    """Append constraints exactly characterizing ``sigma_X(lam) <= t``."""
    if len(lam_vars) != X.dim:
        raise ValueError(f"lam has {len(lam_vars)} variables, set has dimension {X.dim}")
    if isinstance(X, FullSpace):
        for j in lam_vars:
            prog.add_eq(Aff.var(j))
        prog.add_ineq(-Aff.var(t_var))  # t >= 0
        return
    if isinstance(X, Box):
        s_vars = prog.add_vars(X.dim)
        for sj, lj, lo, hi in zip(s_vars, lam_vars, X.lower, X.upper):
            if math.isfinite(hi):
                prog.add_ineq(Aff.var(lj, hi) - Aff.var(sj))  # hi*lam <= s
            else:
                prog.add_ineq(Aff.var(lj))  # lam <= 0
            if math.isfinite(lo):
                prog.add_ineq(Aff.var(lj, lo) - Aff.var(sj))  # lo*lam <= s
            else:
                prog.add_ineq(-Aff.var(lj))  # lam >= 0
            if not math.isfinite(lo) and not math.isfinite(hi):
                prog.add_ineq(-Aff.var(sj))  # s >= 0 (lam pinned to 0 above)
        total = Aff({j: 1.0 for j in s_vars})
        prog.add_ineq(total - Aff.var(t_var))
        return
    if isinstance(X, Ball):
        # radius*norm(lam) <= t - center.lam
        gap = Aff.var(t_var) - Aff({j: float(c) for j, c in zip(lam_vars, X.center) if c != 0.0})
        prog.add_soc(gap, [Aff.var(j, X.radius) for j in lam_vars])
        return
    if isinstance(X, Polyhedron):
        # LP duality: exists mu >= 0 with W' mu = lam and b.mu <= t
        m = X.W.shape[0]
        mu = prog.add_vars(m)
        for j in mu:
            prog.add_ineq(-Aff.var(j))
        for k in range(X.dim):
            col = Aff({mu[i]: float(X.W[i, k]) for i in range(m) if X.W[i, k] != 0.0})
            prog.add_eq(col - Aff.var(lam_vars[k]))
        cost = Aff({mu[i]: float(X.b[i]) for i in range(m) if X.b[i] != 0.0})
        prog.add_ineq(cost - Aff.var(t_var))
        return
    if isinstance(X, Intersection):
        # infimal convolution: lam = sum lam_k, t = sum t_k
        lam_parts, t_parts = [], []
        for member in X.members:
            lam_k = prog.add_vars(X.dim)
            t_k = prog.add_var()
            support_epigraph(member, prog, lam_k, t_k)
            lam_parts.append(lam_k)
            t_parts.append(t_k)
        for k in range(X.dim):
            total = Aff({part[k]: 1.0 for part in lam_parts})
            prog.add_eq(total - Aff.var(lam_vars[k]))
        prog.add_eq(Aff({tk: 1.0 for tk in t_parts}) - Aff.var(t_var))
        return
    raise TypeError(f"unsupported set variant {type(X).__name__}")


# -- membership ----------------------------------------------------------------


def contains(X: ConvexSet, x: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff ``x`` satisfies every defining inequality within additive tol."""
    x = _check_dim(X, x)
    return bool(contains_many(X, x[None, :], tol)[0])


def contains_many(X: ConvexSet, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vectorized :func:`contains` over an (m, n) array of points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if isinstance(X, FullSpace):
        return np.ones(pts.shape[0], dtype=bool)
    if isinstance(X, Box):
        lo = np.where(np.isfinite(X.lower), X.lower, -np.inf)
        hi = np.where(np.isfinite(X.upper), X.upper, np.inf)
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)
    if isinstance(X, Ball):
        d = np.linalg.norm(pts - X.center, axis=1)
        return d <= X.radius + tol
    if isinstance(X, Polyhedron):
        return np.all(pts @ X.W.T <= X.b + tol, axis=1)
    if isinstance(X, Intersection):
        ok = np.ones(pts.shape[0], dtype=bool)
        for member in X.members:
            ok &= contains_many(member, pts, tol)
        return ok
    raise TypeError(f"unsupported set variant {type(X).__name__}")


def membership_constraints(X: ConvexSet, prog: ConicProgram, x_vars: list[int]) -> None:
    """Append conic constraints forcing the variable point into X."""
    if isinstance(X, FullSpace):
        return
    if isinstance(X, Box):
        for j, lo, hi in zip(x_vars, X.lower, X.upper):
            if math.isfinite(hi):
                prog.add_ineq(Aff.var(j), float(hi))
            if math.isfinite(lo):
                prog.add_ineq(-Aff.var(j), float(-lo))
        return
    if isinstance(X, Polyhedron):
        for row, rhs in zip(X.W, X.b):
            prog.add_ineq(Aff({x_vars[k]: float(v) for k, v in enumerate(row) if v != 0.0}), float(rhs))
        return
    if isinstance(X, Ball):
        prog.add_soc(Aff.constant(X.radius), [Aff.var(j) - float(c) for j, c in zip(x_vars, X.center)])
        return
    if isinstance(X, Intersection):
        for member in X.members:
            membership_constraints(member, prog, x_vars)
        return
    raise TypeError(f"unsupported set variant {type(X).__name__}")


def project(
    X: ConvexSet,
    z: np.ndarray,
    backend: SolverBackend | None = None,
    opts: SolverOptions | None = None,
) -> np.ndarray | None:
    """Euclidean projection of ``z`` onto X, or None if the solve fails."""
    z = _check_dim(X, z)
    if isinstance(X, FullSpace):
        return z.copy()
    if isinstance(X, Box):
        lo = np.where(np.isfinite(X.lower), X.lower, -np.inf)
        hi = np.where(np.isfinite(X.upper), X.upper, np.inf)
        return np.clip(z, lo, hi)
    prog = ConicProgram()
    x_vars = prog.add_vars(X.dim)
    r_var = prog.add_var()
    membership_constraints(X, prog, x_vars)
    prog.add_soc(Aff.var(r_var), [Aff.var(j) - float(v) for j, v in zip(x_vars, z)])
    prog.minimize(Aff.var(r_var))
    result = (backend or default_backend()).solve(prog, opts or SolverOptions())
    if result.status != OPTIMAL:
        return None
    return np.asarray(result.x[: X.dim], dtype=float)


# -- sampling --------------------------------------------------------------------


def bounding_box(X: ConvexSet, backend: SolverBackend | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate bounds from support values along +/- each axis.

    Raises :class:`UnboundedSetError` if any direction is unbounded.
    """
    n = X.dim
    lo = np.empty(n)
    hi = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        hi[k] = support_value(X, e, backend)
        lo[k] = -support_value(X, -e, backend)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise UnboundedSetError("set has no finite bounding box")
    return lo, hi


_REJECTION_BUDGET_PER_POINT = 2000


def sample_points(
    X: ConvexSet,
    count: int,
    seed: int,
    backend: SolverBackend | None = None,
) -> np.ndarray:
    """Deterministic-for-seed points of X, each inside within 1e-9.

    Projections of the bounding-box corners come first, then rejection samples
    drawn uniformly from the bounding box.  Raises
    :class:`SamplingFailureError` once the retry budget
    (2000 draws per requested point) is exhausted.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return np.zeros((0, X.dim))
    lo, hi = bounding_box(X, backend)
    pts: list[np.ndarray] = []
    if X.dim <= 12:  # 2**n corners; beyond that corners are pointless anyway
        for corner in itertools.product(*zip(lo, hi)):
            proj = project(X, np.asarray(corner), backend)
            if proj is not None and contains(X, proj, 1e-9):
                pts.append(proj)
            if len(pts) >= count:
                return np.array(pts[:count])
    rng = np.random.default_rng(seed)
    budget = _REJECTION_BUDGET_PER_POINT * count
    used = 0
    while len(pts) < count and used < budget:
        block = min(256, budget - used)
        used += block
        draws = rng.uniform(lo, hi, size=(block, X.dim))
        good = contains_many(X, draws, 1e-9)
        for row in draws[good]:
            pts.append(row)
            if len(pts) >= count:
                break
    if len(pts) < count:
        raise SamplingFailureError(
            f"could only sample {len(pts)}/{count} points within {budget} draws"
        )
    return np.array(pts[:count])


# -- serialization ------------------------------------------------------------------


def _num_from_json(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    if isinstance(v, (int, float)):
        return float(v)
    raise InputError(f"expected a number or 'inf'/'-inf', got {v!r}")


def _num_to_json(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def set_to_json_dict(X: ConvexSet) -> dict:
    if isinstance(X, Box):
        return {
            "type": "box",
            "lower": [_num_to_json(v) for v in X.lower],
            "upper": [_num_to_json(v) for v in X.upper],
        }
    if isinstance(X, Polyhedron):
        return {"type": "polyhedron", "W": X.W.tolist(), "b": X.b.tolist()}
    if isinstance(X, Ball):
        return {"type": "ball", "center": X.center.tolist(), "radius": X.radius}
    if isinstance(X, Intersection):
        return {"type": "intersection", "members": [set_to_json_dict(m) for m in X.members]}
    if isinstance(X, FullSpace):
        return {"type": "fullspace", "n": X.n}
    raise TypeError(f"unsupported set variant {type(X).__name__}")


def set_from_json_dict(data: dict) -> ConvexSet:
    if not isinstance(data, dict) or "type" not in data:
        raise InputError("set must be a JSON object with a 'type' field")
    kind = data["type"]
    try:
        if kind == "box":
            lower = [_num_from_json(v) for v in data["lower"]]
            upper = [_num_from_json(v) for v in data["upper"]]
            return Box(np.array(lower), np.array(upper))
        if kind == "polyhedron":
            return Polyhedron(np.array(data["W"], dtype=float), np.array(data["b"], dtype=float))
        if kind == "ball":
            return Ball(np.array(data["center"], dtype=float), float(data["radius"]))
        if kind == "intersection":
            return Intersection(tuple(set_from_json_dict(m) for m in data["members"]))
        if kind == "fullspace":
            return FullSpace(int(data["n"]))
    except KeyError as exc:
        raise InputError(f"set of type '{kind}' is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed '{kind}' set: {exc}") from exc
    raise InputError(f"unknown set type {kind!r}")
