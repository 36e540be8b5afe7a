"""Exact output densities for privacy audits on small datasets.

Everything here enumerates the algorithms' internal randomness, so it is
only practical for a handful of points.
"""

from __future__ import annotations

import itertools

import numpy as np

from .core import Dataset, all_pairs_slopes, pair_slopes, shift_indices
from .dpwide import PiecewiseDensity, QuantileQuery, exact_density


def max_log_ratio(log_p, log_q) -> float:
    """Largest ``|log p - log q|`` over points where either density is positive."""
    log_p = np.asarray(log_p, dtype=float)
    log_q = np.asarray(log_q, dtype=float)
    both = np.isfinite(log_p) & np.isfinite(log_q)
    if np.any(np.isfinite(log_p) != np.isfinite(log_q)):
        return float("inf")
    return float(np.max(np.abs(log_p[both] - log_q[both]))) if both.any() else 0.0


def midpoints(*edge_arrays) -> np.ndarray:
    """Midpoints of the common refinement of several breakpoint sets."""
    e = np.unique(np.concatenate([np.asarray(a, dtype=float) for a in edge_arrays]))
    return 0.5 * (e[:-1] + e[1:])


def density_log_ratio(a: PiecewiseDensity, b: PiecewiseDensity) -> float:
    """Sup of ``|log(a/b)|``; both densities are constant on the joint refinement."""
    grid = midpoints(a.edges, b.edges)
    return max_log_ratio(a.log_pdf(grid), b.log_pdf(grid))


def dp_theil_sen_density(d: Dataset, eps: float, R: float, theta: float) -> PiecewiseDensity:
    """Output density of the all-pairs private estimator (no internal randomness besides the mechanism)."""
    return exact_density(all_pairs_slopes(d), QuantileQuery(0.5, R, theta, eps / (d.n - 1)))


def _bins(d: Dataset):
    order = d.canonical_order()
    pts = d.points()[order]
    lo = d.n // 2
    return pts[:lo], pts[lo:]


def k_half_slope_sets(d: Dataset, k: int):
    """Every equally likely slope multiset of the ``k``-matching estimator.

    Enumerates both bins' permutations and all ``k``-tuples of shifts.
    Identical points make the boundary tie-break irrelevant, so the
    ``(x, y)`` sort fixes the bins as multisets.
    """
    b1, b2 = _bins(d)
    m1, m2 = len(b1), len(b2)
    out = []
    for p1 in itertools.permutations(range(m1)):
        left = b1[list(p1)]
        for p2 in itertools.permutations(range(m2)):
            right = b2[list(p2)]
            for shifts in itertools.product(range(1, m2 + 1), repeat=k):
                idx = shift_indices(m1, m2, shifts).ravel()
                L = np.tile(left, (k, 1))
                Rt = right[idx]
                out.append(pair_slopes(L[:, 0], L[:, 1], Rt[:, 0], Rt[:, 1]))
    return out


def mixture_log_pdf(densities, y) -> np.ndarray:
    """Log of the equal-weight mixture of ``densities`` at ``y``."""
    logs = np.stack([dn.log_pdf(y) for dn in densities])
    m = np.max(logs, axis=0)
    safe = np.where(np.isfinite(m), m, 0.0)
    return safe + np.log(np.mean(np.exp(logs - safe), axis=0))


def k_half_densities(d: Dataset, eps: float, k: int, R: float, theta: float, q: float = 0.5,
                     eps_mech: float | None = None):
    if eps_mech is None:
        eps_mech = eps / (2 * k)
    query = QuantileQuery(q, R, theta, eps_mech, extrapolate=True)
    return [exact_density(s, query) for s in k_half_slope_sets(d, k)]


def k_half_log_ratio(d: Dataset, d2: Dataset, eps: float, k: int, R: float, theta: float) -> float:
    """Sup log-ratio of the marginal output densities on two datasets."""
    a = k_half_densities(d, eps, k, R, theta)
    b = k_half_densities(d2, eps, k, R, theta)
    grid = midpoints(*[x.edges for x in a + b])
    return max_log_ratio(mixture_log_pdf(a, grid), mixture_log_pdf(b, grid))
