"""Signomials ``sum_j c_j * exp(A_j . x)`` with exact term arithmetic.

The exponent matrix ``A`` has one row per term; rows are kept canonical
(lexicographically sorted, duplicates merged by summing coefficients).
Row equality during deduplication is exact bitwise comparison of the parsed
floats; an optional tolerance merges user-supplied near-duplicates.

Zero-coefficient rows are dropped during canonicalization unless their
exponent is *pinned* — :func:`ensure_constant_term` pins the zero row that
hosts the shift variable of the lower-bound relaxation.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Signomial",
    "ExponentLattice",
    "exponent_lattice",
    "modulation_matrix",
    "ensure_constant_term",
    "InputError",
]


class InputError(ValueError):
    """Malformed external input (JSON field missing or of the wrong type)."""


def _normalize(row: np.ndarray) -> tuple[float, ...]:
    # + 0.0 collapses -0.0 onto 0.0 so bitwise row comparison is stable
    return tuple(float(v) + 0.0 for v in row)


@dataclass(frozen=True, eq=False)
class Signomial:
    """Immutable signomial defined by an exponent matrix and coefficient vector.

    ``exponents`` is an (l, n) float array, ``coeffs`` has length l.
    ``pinned`` lists exponent rows (as tuples) that survive canonicalization
    even with a zero coefficient.
    """

    exponents: np.ndarray
    coeffs: np.ndarray
    pinned: frozenset[tuple[float, ...]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        exps = np.atleast_2d(np.asarray(self.exponents, dtype=float))
        coef = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if exps.shape[0] != coef.shape[0]:
            raise ValueError(
                f"coeffs length {coef.shape[0]} does not match {exps.shape[0]} exponent rows"
            )
        if exps.shape[0] < 1 or exps.shape[1] < 1:
            raise ValueError("need at least one term and one variable")
        exps = exps + 0.0  # normalize -0.0
        exps.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coeffs", coef)
        object.__setattr__(self, "pinned", frozenset(self.pinned))

    # -- basic queries ------------------------------------------------------

    @property
    def num_terms(self) -> int:
        return self.exponents.shape[0]

    @property
    def dim(self) -> int:
        return self.exponents.shape[1]

    def __call__(self, x: np.ndarray) -> float | np.ndarray:
        """Evaluate at a point of shape (n,) or a batch of shape (m, n)."""
        xa = np.asarray(x, dtype=float)
        if xa.ndim == 1:
            if xa.shape[0] != self.dim:
                raise ValueError(f"point has dimension {xa.shape[0]}, expected {self.dim}")
            return float(np.exp(self.exponents @ xa) @ self.coeffs)
        if xa.ndim == 2:
            if xa.shape[1] != self.dim:
                raise ValueError(f"points have dimension {xa.shape[1]}, expected {self.dim}")
            return np.exp(xa @ self.exponents.T) @ self.coeffs
        raise ValueError("x must be a vector or a 2-d batch of row vectors")

    def constant_row_index(self) -> int | None:
        """Index of the all-zero exponent row, if present."""
        hits = np.flatnonzero(~self.exponents.any(axis=1))
        return int(hits[0]) if hits.size else None

    # -- canonicalization ----------------------------------------------------

    def canonicalize(self, merge_tol: float = 0.0) -> "Signomial":
        """Merge duplicate rows, sort rows lexicographically, drop unpinned zeros.

        ``merge_tol > 0`` additionally merges rows within that sup-norm
        distance of an earlier representative (greedy, deterministic).
        """
        reps: list[tuple[float, ...]] = []
        sums: dict[tuple[float, ...], float] = {}
        for row, c in zip(self.exponents, self.coeffs):
            key = _normalize(row)
            if key not in sums and merge_tol > 0.0:
                for rep in reps:
                    if max(abs(a - b) for a, b in zip(rep, key)) <= merge_tol:
                        key = rep
                        break
            if key not in sums:
                reps.append(key)
                sums[key] = 0.0
            sums[key] += c
        kept = [(k, v) for k, v in sorted(sums.items()) if v != 0.0 or k in self.pinned]
        if not kept:
            kept = [(sorted(sums)[0], 0.0)]
        rows = np.array([k for k, _ in kept], dtype=float)
        coefs = np.array([v for _, v in kept], dtype=float)
        return Signomial(rows, coefs, self.pinned)

    # -- arithmetic ------------------------------------------------------------

    def __mul__(self, other: "Signomial") -> "Signomial":
        if not isinstance(other, Signomial):
            return NotImplemented
        if self.dim != other.dim:
            raise ValueError(f"ambient dimensions differ: {self.dim} vs {other.dim}")
        acc: dict[tuple[float, ...], float] = {}
        for aj, cj in zip(self.exponents, self.coeffs):
            for bk, dk in zip(other.exponents, other.coeffs):
                key = _normalize(aj + bk)
                acc[key] = acc.get(key, 0.0) + cj * dk
        rows = np.array(list(acc.keys()), dtype=float)
        coefs = np.array(list(acc.values()), dtype=float)
        return Signomial(rows, coefs).canonicalize()

    def modulate(self, power: int) -> "Signomial":
        """Multiply by ``(sum_j exp(A_j . x)) ** power`` and canonicalize.

        The result is supported on sums of exactly ``power + 1`` rows of the
        (canonicalized) exponent matrix.  ``power = 0`` returns the canonical
        form unchanged.
        """
        if power < 0:
            raise ValueError("power must be nonnegative")
        base = self.canonicalize()
        if power == 0:
            return base
        rows, M = modulation_matrix(base.exponents, power)
        return Signomial(rows, M @ base.coeffs).canonicalize()

    # -- serialization -----------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "exponents": [[float(v) for v in row] for row in self.exponents],
            "coeffs": [float(c) for c in self.coeffs],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Signomial":
        """Parse and canonicalize.  Explicit zero-coefficient rows are pinned."""
        if not isinstance(data, dict):
            raise InputError("signomial must be a JSON object")
        for key in ("exponents", "coeffs"):
            if key not in data:
                raise InputError(f"signomial is missing required field '{key}'")
        try:
            exps = np.atleast_2d(np.asarray(data["exponents"], dtype=float))
            coefs = np.asarray(data["coeffs"], dtype=float).reshape(-1)
        except (TypeError, ValueError) as exc:
            raise InputError(f"signomial fields must be numeric arrays: {exc}") from exc
        if exps.shape[0] != coefs.shape[0]:
            raise InputError(
                f"field 'coeffs' has length {coefs.shape[0]} but 'exponents' has "
                f"{exps.shape[0]} rows"
            )
        pins = frozenset(_normalize(row) for row, c in zip(exps, coefs) if c == 0.0)
        return cls(exps, coefs, pins).canonicalize()

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "Signomial":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ExponentLattice:
    """Distinct sums of exactly ``degree`` rows of ``base`` (with repetition).

    ``rows`` are sorted lexicographically.  :meth:`row_of` maps any index
    tuple ``(j_1, ..., j_degree)`` to the deduplicated row it sums to, making
    the tuple index total over all l**degree tuples.
    """

    base: np.ndarray
    degree: int
    rows: np.ndarray
    multiset_index: dict[tuple[int, ...], int]

    def row_of(self, index_tuple: tuple[int, ...]) -> int:
        key = tuple(sorted(index_tuple))
        if len(key) != self.degree:
            raise ValueError(f"expected a tuple of {self.degree} indices")
        return self.multiset_index[key]

    @property
    def num_rows(self) -> int:
        return self.rows.shape[0]


def exponent_lattice(base: np.ndarray, degree: int) -> ExponentLattice:
    """All distinct sums of exactly ``degree`` rows of ``base``, degree >= 1.

    Each sum is computed with :func:`math.fsum`, so equal multisets always
    land on bitwise-identical rows regardless of summation order.
    """
    A = np.atleast_2d(np.asarray(base, dtype=float))
    if degree < 1:
        raise ValueError("degree must be >= 1")
    l, n = A.shape
    groups: dict[tuple[float, ...], list[tuple[int, ...]]] = {}
    for combo in itertools.combinations_with_replacement(range(l), degree):
        key = tuple(math.fsum(A[j, k] for j in combo) + 0.0 for k in range(n))
        groups.setdefault(key, []).append(combo)
    keys = sorted(groups)
    index = {combo: r for r, key in enumerate(keys) for combo in groups[key]}
    rows = np.array(keys, dtype=float)
    rows.setflags(write=False)
    return ExponentLattice(A, degree, rows, index)


def _arrangements(multiset: tuple[int, ...]) -> int:
    """Number of ordered tuples realizing the multiset."""
    out = math.factorial(len(multiset))
    for count in Counter(multiset).values():
        out //= math.factorial(count)
    return out


def modulation_matrix(base: np.ndarray, power: int) -> tuple[np.ndarray, np.ndarray]:
    """Structural coefficient map of multiplication by ``(sum_j exp(A_j.x))**power``.

    Returns ``(rows, M)`` where ``rows`` are the sums of exactly ``power + 1``
    rows of ``base`` (sorted, deduplicated) and ``M`` is the (l', l) matrix
    with ``coeffs(modulate(f, power)) = M @ coeffs(f)`` for any signomial on
    ``base``.  The map is what lets a shift variable enter the coupling
    constraints affinely.
    """
    A = np.atleast_2d(np.asarray(base, dtype=float))
    if power < 0:
        raise ValueError("power must be nonnegative")
    l = A.shape[0]
    lattice = exponent_lattice(A, power + 1)
    M = np.zeros((lattice.num_rows, l))
    if power == 0:
        for k in range(l):
            M[lattice.row_of((k,)), k] += 1.0
    else:
        for combo in itertools.combinations_with_replacement(range(l), power):
            weight = float(_arrangements(combo))
            for k in range(l):
                M[lattice.row_of(tuple(sorted(combo + (k,)))), k] += weight
    M.setflags(write=False)
    return lattice.rows, M


def ensure_constant_term(f: Signomial) -> tuple[Signomial, int]:
    """Return ``f`` with an all-zero exponent row present, plus its row index.

    If absent, the zero row is appended with coefficient 0 and pinned so later
    canonicalization keeps it.  If present, ``f`` is returned unchanged.
    """
    idx = f.constant_row_index()
    if idx is not None:
        return f, idx
    zero = (0.0,) * f.dim
    rows = np.vstack([f.exponents, np.zeros((1, f.dim))])
    coefs = np.append(f.coeffs, 0.0)
    out = Signomial(rows, coefs, f.pinned | {zero}).canonicalize()
    new_idx = out.constant_row_index()
    assert new_idx is not None
    return out, new_idx
