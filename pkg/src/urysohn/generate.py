"""Random finite metric spaces and seeded point samplers.

``build_approximation`` grows a desk-scale stand-in for the Urysohn sphere by
iterated admissible one-point extensions: each new point picks a uniform
random base of at most ``max_base`` existing points, places itself at a
random radius from the first base member (the anchor), and receives every
other distance by folding the anchor's distance row through that radius and
projecting into the admissible interval.  The folded placement keeps each
point's distance profile spread over (0, 1), so every point retains
near-witnesses at small, medium, and large radii; a plain uniform draw from
the admissible interval equilibrates to a narrow band around 0.7 and starves
the small-radius bands.  ``sequential_random_space`` is the host-free
generator that fills a distance matrix row by row with exactly that plain
uniform draw.

Uniform sampling from a generated host plays the role of a strictly positive
atomless measure at finite scale; ``Sampler`` draws point tuples from it,
without replacement by default so tuple entries are pairwise distinct.

All randomness derives from (seed, step) substreams, so equal seeds give
bit-identical spaces and draws regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .rng import derive_seed, substream
from .spaces import TOL, FiniteMetricSpace, validate_space


class GridInfeasibleError(RuntimeError):
    """No grid point fell inside an admissible interval after retries;
    increase the grid denominator."""


class TupleTooLargeError(ValueError):
    """Requested more distinct points than the host has."""


@dataclass(frozen=True)
class ApproximationParams:
    """Knobs for :func:`build_approximation`.

    ``grid`` > 0 snaps distances to multiples of 1/grid; 0 keeps them
    continuous.  ``max_base`` is the size of the random base each new point
    extends over before the remaining distances are filled in.
    """

    target_size: int
    max_base: int = 4
    grid: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.target_size < 1:
            raise ValueError("target_size must be at least 1")
        if self.max_base < 1:
            raise ValueError("max_base must be at least 1")
        if self.grid < 0:
            raise ValueError("grid must be nonnegative")


_DRAW_RETRIES = 100

# Anchored placement constants, calibrated against the per-point radius
# coverage oracle (every point of an N=400 host should keep >= ~15% of the
# space within 0.2 of each radius in {0.25, 0.5, 0.75}).
_RADIUS_BIAS = 0.25  # anchor radius ~ U(0,1)^bias, weighted toward long radii
_PLACEMENT_NOISE = 0.1  # one-sided jitter added to folded target distances


def _interval_bounds(lo, hi, t) -> tuple[float, float]:
    l, h = float(lo[t]), float(hi[t])
    if l > h + TOL:
        raise RuntimeError(
            f"admissible interval for target {t} unexpectedly empty ({l:.17g} > {h:.17g})"
        )
    return l, max(l, h)


def _snap_ok(v: float, l: float, h: float, grid: int, positive: bool) -> float | None:
    """Snap v to the grid and check it stays admissible; None on violation."""
    if grid > 0:
        v = round(v * grid) / grid
        if v < l or v > h:
            return None
    if positive and v <= 0.0:
        return None
    return v


def _draw_uniform(rng, l: float, h: float, grid: int, positive: bool) -> float:
    """Uniform draw from [l, h], snapped to the grid; re-drawn on snap-induced
    violations, GridInfeasibleError after too many retries."""
    for _ in range(_DRAW_RETRIES):
        v = _snap_ok(float(rng.uniform(l, h)), l, h, grid, positive)
        if v is not None:
            return v
    raise GridInfeasibleError(
        f"no admissible grid value in [{l:.6g}, {h:.6g}] with denominator {grid}"
    )


def _update_bounds(lo, hi, v: float, d_t) -> None:
    # Katetov sandwich for the still-unassigned targets: |v - d| <= r <= v + d.
    np.maximum(lo, np.abs(v - d_t), out=lo)
    np.minimum(hi, v + d_t, out=hi)


def _uniform_row(dist, count: int, order, rng, grid: int) -> NDArray[np.float64]:
    """New-point distances drawn uniformly from their admissible intervals."""
    lo = np.zeros(count)
    hi = np.ones(count)
    row = np.empty(count)
    for t in order:
        l, h = _interval_bounds(lo, hi, t)
        v = _draw_uniform(rng, l, h, grid, positive=True)
        row[t] = v
        _update_bounds(lo, hi, v, dist[t, :count])
    return row


def _anchored_row(dist, count: int, order, rng, grid: int) -> NDArray[np.float64]:
    """New-point distances via anchored folding.

    The first target in ``order`` is the anchor: its distance is a free
    radius draw.  Every later target distance aims at |d(anchor, t) - radius|
    plus one-sided jitter, projected into the admissible interval, which
    places the new point "at the radius, toward t's side" whenever the
    triangle constraints allow it.
    """
    lo = np.zeros(count)
    hi = np.ones(count)
    row = np.empty(count)
    anchor = -1
    radius = 0.0
    for pos, t in enumerate(order):
        l, h = _interval_bounds(lo, hi, t)
        v = None
        for _ in range(_DRAW_RETRIES):
            if pos == 0:
                cand = float(rng.uniform(0.0, 1.0)) ** _RADIUS_BIAS
            else:
                cand = abs(float(dist[anchor, t]) - radius)
                cand += float(rng.uniform(0.0, _PLACEMENT_NOISE))
                cand = min(max(cand, l), h)
            v = _snap_ok(cand, l, h, grid, positive=True)
            if v is not None:
                break
        if v is None:
            raise GridInfeasibleError(
                f"no admissible grid value in [{l:.6g}, {h:.6g}] with denominator {grid}"
            )
        if pos == 0:
            anchor = t
            radius = v
        row[t] = v
        _update_bounds(lo, hi, v, dist[t, :count])
    return row


def build_approximation(params: ApproximationParams) -> FiniteMetricSpace:
    """Grow a random metric space of diameter <= 1 by one-point extensions.

    Starting from a single point, each step derives its own random stream
    from (seed, step), picks a uniform random base of at most ``max_base``
    current points, assigns the new point's distances to the base via
    anchored folding, then fills the distances to all remaining points the
    same way under the accumulated admissibility constraints.  The result
    passes validation in metric mode.
    """
    n = params.target_size
    dist = np.zeros((n, n))
    for step in range(1, n):
        rng = substream(params.seed, step)
        base_size = min(params.max_base, step)
        base = rng.choice(step, size=base_size, replace=False)
        rest = np.setdiff1d(np.arange(step), base)
        order = [int(i) for i in base] + [int(i) for i in rest]
        row = _anchored_row(dist, step, order, rng, params.grid)
        dist[step, :step] = row
        dist[:step, step] = row
    return validate_space(dist)


def sequential_random_space(size: int, grid: int = 0, seed: int = 0) -> FiniteMetricSpace:
    """Random metric space built without a host: d(j, i) for j < i is drawn
    uniformly from its admissible interval, in ascending j order."""
    if size < 1:
        raise ValueError("size must be at least 1")
    if grid < 0:
        raise ValueError("grid must be nonnegative")
    dist = np.zeros((size, size))
    for step in range(1, size):
        rng = substream(seed, step)
        row = _uniform_row(dist, step, range(step), rng, grid)
        dist[step, :step] = row
        dist[:step, step] = row
    return validate_space(dist)


def random_extension(
    space: FiniteMetricSpace, rng: np.random.Generator, grid: int = 0
) -> NDArray[np.float64]:
    """A random Katetov-admissible distance vector for one new point, each
    entry drawn uniformly from its admissible interval."""
    return _uniform_row(space.dist, space.size, range(space.size), rng, grid)


@dataclass
class Sampler:
    """Seeded tuple sampler over a host space's points.

    Uniform without replacement by default (tuple entries pairwise
    distinct); set ``replace`` for i.i.d. draws.  Drawing advances internal
    state; use :meth:`split` to hand independent samplers to concurrent
    consumers instead of sharing one.
    """

    host: FiniteMetricSpace
    seed: int = 0
    replace: bool = False
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = substream(self.seed)

    def sample_tuple(self, m: int) -> NDArray[np.intp]:
        """Ordered tuple of m point indices."""
        if m < 1:
            raise ValueError("tuple length must be at least 1")
        n = self.host.size
        if self.replace:
            return self._rng.integers(0, n, size=m).astype(np.intp)
        if m > n:
            raise TupleTooLargeError(f"cannot draw {m} distinct points from {n}")
        return self._rng.choice(n, size=m, replace=False).astype(np.intp)

    def split(self, *path: int) -> "Sampler":
        """Independent sampler derived from this one's seed and a path."""
        return Sampler(self.host, derive_seed(self.seed, *path), self.replace)
