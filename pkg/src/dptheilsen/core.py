"""Datasets, the pairwise slope subroutine, and the three pairing strategies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DatasetError(ValueError):
    """Raised when a dataset cannot support the requested operation."""


@dataclass(frozen=True)
class Dataset:
    """A multiset of ``(x, y)`` points stored as two aligned float arrays.

    Storage order carries no meaning; every operation in this package is
    invariant under a joint permutation of ``x`` and ``y``.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise DatasetError(f"x and y differ in length ({x.size} vs {y.size})")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DatasetError("x and y must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_points(cls, points) -> "Dataset":
        pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
        return cls(pts[:, 0], pts[:, 1])

    @property
    def n(self) -> int:
        return int(self.x.size)

    def points(self) -> np.ndarray:
        """Return an ``(n, 2)`` array of the points."""
        return np.column_stack([self.x, self.y])

    def canonical_order(self) -> np.ndarray:
        """Indices sorting the points by ``x``, ties broken by ``y``."""
        return np.lexsort((self.y, self.x))

    def replace(self, index: int, x: float, y: float) -> "Dataset":
        """Neighbouring dataset with the point at ``index`` swapped for ``(x, y)``."""
        xs = self.x.copy()
        ys = self.y.copy()
        xs[index] = x
        ys[index] = y
        return Dataset(xs, ys)


def _require_size(d: Dataset, minimum: int = 2):
    if d.n < minimum:
        raise DatasetError(f"need at least {minimum} points, got {d.n}")


def slope(a, b) -> float:
    """Slope between two points, defined for every pair.

    The pair is put in lexicographic ``(x, y)`` order first, so the
    result depends only on the unordered pair. Vertical pairs give
    ``+inf`` (the canonical order makes ``dy >= 0``) and coincident
    points give 0.
    """
    (x0, y0), (x1, y1) = sorted([tuple(map(float, a)), tuple(map(float, b))])
    return float(pair_slopes(np.array([x0]), np.array([y0]), np.array([x1]), np.array([y1]))[0])


def pair_slopes(x0, y0, x1, y1) -> np.ndarray:
    """Vectorised slope over aligned endpoint arrays.

    Endpoints are canonically reordered per pair before differencing.
    """
    x0, y0, x1, y1 = (np.asarray(v, dtype=float) for v in (x0, y0, x1, y1))
    swap = (x1 < x0) | ((x1 == x0) & (y1 < y0))
    dx = np.where(swap, x0 - x1, x1 - x0)
    dy = np.where(swap, y0 - y1, y1 - y0)
    out = np.empty(dx.shape, dtype=float)
    vertical = dx == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        np.divide(dy, dx, out=out, where=~vertical)
    out[vertical] = np.where(dy[vertical] > 0, np.inf, np.where(dy[vertical] < 0, -np.inf, 0.0))
    return out


def all_pairs_slopes(d: Dataset) -> np.ndarray:
    """Slopes of all ``n choose 2`` unordered pairs, degenerate pairs included."""
    _require_size(d)
    i, j = np.triu_indices(d.n, k=1)
    return pair_slopes(d.x[i], d.y[i], d.x[j], d.y[j])


def sorted_half_slopes(d: Dataset) -> np.ndarray:
    """Slopes of the abbreviated pairing.

    With points sorted by ``(x, y)``, point ``j`` is paired with point
    ``ceil(n/2) + j`` for ``j < floor(n/2)``. For odd ``n`` the median
    point by ``x`` sits unpaired at the top of the lower half.
    """
    _require_size(d)
    order = d.canonical_order()
    lo, hi = d.n // 2, d.n - d.n // 2
    a = order[:lo]
    b = order[hi:hi + lo]
    return pair_slopes(d.x[a], d.y[a], d.x[b], d.y[b])


def partition_and_permute(d: Dataset, rng: np.random.Generator):
    """Split into a low-``x`` bin of ``floor(n/2)`` points and a high-``x`` bin.

    Ties at the boundary are broken by ``y`` and then at random, never by
    storage position. Each bin is returned in uniformly random order as an
    ``(m, 2)`` array of points.
    """
    _require_size(d)
    shuffle = rng.permutation(d.n)
    xs, ys = d.x[shuffle], d.y[shuffle]
    order = shuffle[np.lexsort((ys, xs))]
    lo = d.n // 2
    pts = d.points()
    bin1 = pts[order[:lo]]
    bin2 = pts[order[lo:]]
    return bin1[rng.permutation(len(bin1))], bin2[rng.permutation(len(bin2))]


@dataclass(frozen=True)
class Matching:
    """Concatenation of ``k`` circular-shift matchings between two bins.

    ``left[i]`` is matched with ``right[i]``; ``shifts`` holds the drawn
    offsets, one per matching, each in ``1..len(bin2)``.
    """

    left: np.ndarray
    right: np.ndarray
    shifts: np.ndarray

    @property
    def k(self) -> int:
        return int(self.shifts.size)

    def __len__(self):
        return int(self.left.shape[0])

    def slopes(self) -> np.ndarray:
        return pair_slopes(self.left[:, 0], self.left[:, 1], self.right[:, 0], self.right[:, 1])


def shift_indices(m1: int, m2: int, shifts) -> np.ndarray:
    """Indices into bin 2 for each matching: row ``p`` is ``(i + r_p) mod m2``."""
    shifts = np.asarray(shifts, dtype=np.int64).reshape(-1, 1)
    return (np.arange(m1)[None, :] + shifts) % m2


def match_bins(bin1, bin2, k: int, rng: np.random.Generator) -> Matching:
    """Draw ``k`` shifts with replacement and build the matched pairs.

    Within one matching the map ``i -> (i + r) mod len(bin2)`` is
    injective, so no high-bin point is reused; across matchings repeats
    are allowed, including identical matchings.
    """
    bin1 = np.asarray(bin1, dtype=float).reshape(-1, 2)
    bin2 = np.asarray(bin2, dtype=float).reshape(-1, 2)
    if len(bin1) == 0 or len(bin2) == 0:
        raise DatasetError("cannot match an empty bin")
    if len(bin1) > len(bin2):
        raise DatasetError("low bin must not be larger than the high bin")
    if k < 1:
        raise ValueError("k must be a positive integer")
    m2 = len(bin2)
    shifts = rng.integers(1, m2 + 1, size=k)
    idx = shift_indices(len(bin1), m2, shifts)
    left = np.tile(bin1, (k, 1))
    right = bin2[idx.ravel()]
    return Matching(left, right, shifts)


def k_matching_slopes(d: Dataset, k: int, rng: np.random.Generator) -> np.ndarray:
    """Partition, permute, match ``k`` times and return the ``k * floor(n/2)`` slopes."""
    bin1, bin2 = partition_and_permute(d, rng)
    return match_bins(bin1, bin2, k, rng).slopes()
