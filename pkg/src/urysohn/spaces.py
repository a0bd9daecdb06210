"""Finite metric spaces of diameter at most 1.

A space is a dense symmetric matrix of distances in [0, 1].  Everything else
in the library (sentence evaluation, random generation, experiments) works on
top of the operations here: validation, the Katetov admissibility test for a
prospective new point, the interval of distances a partially-placed new point
may still take, one-point extension, and substructure extraction.

Two construction modes exist.  Metric mode (the default) requires distinct
points to have positive distance; pseudometric mode permits zero distances,
which is what substructures spanned by tuples with repeated entries need.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np
from numpy.typing import NDArray

#: Absolute tolerance for triangle-inequality and Katetov comparisons.
TOL = 1e-12

# Violation kinds reported by find_violations.
NON_SQUARE = "non-square"
ASYMMETRIC_ENTRY = "asymmetric-entry"
DIAGONAL_NONZERO = "diagonal-nonzero"
OUT_OF_RANGE = "out-of-range"
TRIANGLE_VIOLATION = "triangle-violation"
ZERO_DISTANCE_DISTINCT = "zero-distance-distinct-points"


@dataclass(frozen=True)
class Violation:
    """One invariant failure found in a candidate distance matrix.

    ``indices`` identifies the offending entries: a pair (i, j) for entry
    violations, a triple (a, b, via) for triangle violations meaning
    d(a, b) > d(a, via) + d(via, b) by ``magnitude``.
    """

    kind: str
    indices: tuple[int, ...]
    magnitude: float

    def __str__(self) -> str:
        ij = ",".join(str(i) for i in self.indices)
        return f"{self.kind} at ({ij}) magnitude {self.magnitude:.6g}"


class InvalidSpaceError(ValueError):
    """Raised when a matrix fails validation; carries every violation found."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations[:8])
        more = "" if len(violations) <= 8 else f" (+{len(violations) - 8} more)"
        super().__init__(f"{len(violations)} violation(s): {lines}{more}")


class NotKatetovError(ValueError):
    """Raised by extend_space when the extension vector is not admissible."""

    def __init__(self, pair: tuple[int, int]):
        self.pair = pair
        super().__init__(f"extension vector violates the Katetov condition at pair {pair}")


class InconsistentPartialError(ValueError):
    """Raised when a partial assignment already violates the Katetov condition."""


class DuplicateIndexError(ValueError):
    """Raised when duplicate indices are used outside pseudometric mode."""


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Immutable n-point (pseudo)metric space with distances in [0, 1].

    Instances are safe to share across threads; the distance matrix is
    materialized densely and marked read-only.  Construct via
    :func:`validate_space` (or the generators) so the invariants hold.
    """

    dist: NDArray[np.float64]
    pseudometric: bool = False

    def __post_init__(self):
        d = np.array(self.dist, dtype=np.float64, copy=True, order="C")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def as_pseudometric(self) -> "FiniteMetricSpace":
        """The same space with zero distances between distinct points allowed."""
        if self.pseudometric:
            return self
        return FiniteMetricSpace(self.dist, pseudometric=True)

    def __repr__(self) -> str:
        return f"FiniteMetricSpace(size={self.size}, pseudometric={self.pseudometric})"


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] of admissible distances; may be empty (lo > hi)."""

    lo: float
    hi: float

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    @property
    def width(self) -> float:
        return max(0.0, self.hi - self.lo)


def find_violations(matrix, pseudometric: bool = False, tol: float = TOL) -> list[Violation]:
    """Check every space invariant and return all violations (empty list if valid).

    Triangle comparisons use absolute tolerance ``tol``; symmetry, zero
    diagonal, and the [0, 1] range are exact.  In metric mode a zero distance
    between distinct points is a violation.
    """
    d = np.asarray(matrix, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        return [Violation(NON_SQUARE, tuple(d.shape), 0.0)]
    n = d.shape[0]
    if n == 0:
        raise ValueError("matrix must contain at least one point")

    out: list[Violation] = []

    asym = d - d.T
    for i, j in np.argwhere(asym != 0.0):
        if i < j:
            out.append(Violation(ASYMMETRIC_ENTRY, (int(i), int(j)), abs(float(asym[i, j]))))

    diag = np.diagonal(d)
    for (i,) in np.argwhere(diag != 0.0):
        out.append(Violation(DIAGONAL_NONZERO, (int(i), int(i)), abs(float(diag[i]))))

    bad_range = ~((d >= 0.0) & (d <= 1.0))  # also catches NaN
    for i, j in np.argwhere(bad_range):
        if i <= j:
            v = float(d[i, j])
            mag = abs(v - np.clip(v, 0.0, 1.0)) if np.isfinite(v) else np.inf
            out.append(Violation(OUT_OF_RANGE, (int(i), int(j)), mag))

    if not pseudometric:
        zero = (d == 0.0) & ~np.eye(n, dtype=bool)
        for i, j in np.argwhere(zero):
            if i < j:
                out.append(Violation(ZERO_DISTANCE_DISTINCT, (int(i), int(j)), 0.0))

    # d(a,b) <= d(a,via) + d(via,b) + tol, one witness column at a time to
    # keep memory at O(n^2) for hosts with a few hundred points.
    for via in range(n):
        excess = d - (d[:, via][:, None] + d[via, :][None, :])
        mask = excess > tol
        if mask.any():
            for a, b in np.argwhere(mask):
                out.append(
                    Violation(TRIANGLE_VIOLATION, (int(a), int(b), via), float(excess[a, b]))
                )
    return out


def validate_space(matrix, pseudometric: bool = False, tol: float = TOL) -> FiniteMetricSpace:
    """Validate a distance matrix and wrap it; raise InvalidSpaceError listing
    every violation otherwise."""
    violations = find_violations(matrix, pseudometric=pseudometric, tol=tol)
    if violations:
        raise InvalidSpaceError(violations)
    return FiniteMetricSpace(np.asarray(matrix, dtype=np.float64), pseudometric=pseudometric)


def _check_extension_length(space: FiniteMetricSpace, r) -> NDArray[np.float64]:
    vec = np.asarray(r, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != space.size:
        raise ValueError(
            f"extension vector has length {vec.shape}, expected ({space.size},)"
        )
    return vec


def katetov_violation(
    space: FiniteMetricSpace, r, tol: float = TOL
) -> Union[tuple[int, int], None]:
    """First pair (i, j) violating the Katetov condition for distances ``r``,
    or None when the one-point extension is admissible.

    The condition is |r_i - r_j| <= d(i, j) <= r_i + r_j for all pairs, plus
    r_i in [0, 1].  A range violation at index i is reported as (i, i).
    """
    vec = _check_extension_length(space, r)
    in_range = (vec >= 0.0) & (vec <= 1.0)
    if not in_range.all():
        i = int(np.argmin(in_range))
        return (i, i)
    d = space.dist
    lower_bad = np.abs(vec[:, None] - vec[None, :]) > d + tol
    upper_bad = d > (vec[:, None] + vec[None, :]) + tol
    bad = np.triu(lower_bad | upper_bad, k=1)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        return (int(i), int(j))
    return None


def is_katetov(space: FiniteMetricSpace, r, tol: float = TOL) -> bool:
    """True iff adding a point at distances ``r`` yields a valid pseudometric
    space of diameter at most 1."""
    return katetov_violation(space, r, tol=tol) is None


def admissible_interval(
    space: FiniteMetricSpace,
    assigned: Mapping[int, float],
    target: int,
    tol: float = TOL,
) -> Interval:
    """Interval of distances from a new point to ``target`` compatible with the
    distances already assigned to other points.

    With no assignments the interval is [0, 1].  Otherwise it is
    [max_i |a_i - d(i, t)|, min(1, min_i a_i + d(i, t))], which may be empty;
    an empty interval tells the caller to backtrack.  Raises
    InconsistentPartialError if ``assigned`` violates the Katetov condition
    on its own domain.
    """
    n = space.size
    if not (0 <= target < n):
        raise IndexError(f"target {target} out of range for {n} points")
    if target in assigned:
        raise ValueError(f"target {target} already has an assigned distance")
    if not assigned:
        return Interval(0.0, 1.0)

    idx = np.fromiter(assigned.keys(), dtype=np.intp)
    vals = np.fromiter((assigned[int(i)] for i in idx), dtype=np.float64)
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError("assigned point index out of range")
    if ((vals < 0.0) | (vals > 1.0)).any():
        raise InconsistentPartialError("assigned distances must lie in [0, 1]")

    sub = space.dist[np.ix_(idx, idx)]
    lower_bad = np.abs(vals[:, None] - vals[None, :]) > sub + tol
    upper_bad = sub > (vals[:, None] + vals[None, :]) + tol
    if (np.triu(lower_bad | upper_bad, k=1)).any():
        raise InconsistentPartialError(
            "partial assignment violates the Katetov condition on its own domain"
        )

    d_t = space.dist[idx, target]
    lo = float(np.max(np.abs(vals - d_t)))
    hi = float(min(1.0, np.min(vals + d_t)))
    return Interval(lo, hi)


def extend_space(space: FiniteMetricSpace, r, tol: float = TOL) -> FiniteMetricSpace:
    """Amalgamate one new point at distances ``r`` from the existing points.

    The result keeps the input's mode and is re-validated in it, so in metric
    mode an extension that duplicates a point (zero distance) is rejected.
    """
    vec = _check_extension_length(space, r)
    pair = katetov_violation(space, vec, tol=tol)
    if pair is not None:
        raise NotKatetovError(pair)
    n = space.size
    out = np.zeros((n + 1, n + 1), dtype=np.float64)
    out[:n, :n] = space.dist
    out[n, :n] = vec
    out[:n, n] = vec
    return validate_space(out, pseudometric=space.pseudometric, tol=tol)


def extract_substructure(space: FiniteMetricSpace, indices: Sequence[int]) -> FiniteMetricSpace:
    """Substructure spanned by ``indices`` in the given order.

    This realizes the map from point tuples to finite structures with
    universe {1, ..., m}.  Duplicate indices produce zero distances between
    distinct result points and are therefore only allowed in pseudometric
    mode (use ``space.as_pseudometric()`` for tuples with repeats).
    """
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("indices must be a nonempty 1-d sequence")
    if idx.min() < 0 or idx.max() >= space.size:
        raise IndexError(f"point index out of range for {space.size} points")
    if not space.pseudometric and len(np.unique(idx)) != idx.size:
        raise DuplicateIndexError("duplicate indices require pseudometric mode")
    sub = space.dist[np.ix_(idx, idx)]
    return FiniteMetricSpace(sub, pseudometric=space.pseudometric)


# ---------------------------------------------------------------------------
# .fms text format: line 1 holds the point count n, then n-1 lines of
# upper-triangular distances (line i: d(i, i+1) ... d(i, n)).  '#' starts a
# comment; writers emit 17 significant digits.
# ---------------------------------------------------------------------------


def write_fms(space: FiniteMetricSpace, path_or_file) -> None:
    """Write a space in the .fms text format."""
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w") if own else path_or_file
    try:
        n = space.size
        fh.write(f"{n}\n")
        for i in range(n - 1):
            row = " ".join(format(float(v), ".17g") for v in space.dist[i, i + 1:])
            fh.write(row + "\n")
    finally:
        if own:
            fh.close()


def read_fms(path_or_file, pseudometric: bool = False) -> FiniteMetricSpace:
    """Read and validate a space from the .fms text format."""
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "r") if own else path_or_file
    try:
        lines: list[str] = []
        for raw in fh:
            text = raw.split("#", 1)[0].strip()
            if text:
                lines.append(text)
    finally:
        if own:
            fh.close()

    if not lines:
        raise ValueError("empty .fms input")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise ValueError(f"first .fms line must be the point count, got {lines[0]!r}") from exc
    if n < 1:
        raise ValueError(f"point count must be positive, got {n}")
    if len(lines) != n:
        raise ValueError(f"expected {n - 1} distance lines after the count, got {len(lines) - 1}")

    d = np.zeros((n, n), dtype=np.float64)
    for i in range(n - 1):
        parts = lines[1 + i].split()
        expected = n - i - 1
        if len(parts) != expected:
            raise ValueError(f"distance line {i + 1} has {len(parts)} entries, expected {expected}")
        vals = [float(p) for p in parts]
        d[i, i + 1:] = vals
        d[i + 1:, i] = vals
    return validate_space(d, pseudometric=pseudometric)


def dumps_fms(space: FiniteMetricSpace) -> str:
    """The .fms text for a space, as a string."""
    buf = io.StringIO()
    write_fms(space, buf)
    return buf.getvalue()


def loads_fms(text: str, pseudometric: bool = False) -> FiniteMetricSpace:
    """Parse a space from .fms text."""
    return read_fms(io.StringIO(text), pseudometric=pseudometric)
