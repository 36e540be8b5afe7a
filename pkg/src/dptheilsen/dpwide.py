"""Widened exponential mechanism for quantiles.

Outputs live in ``[-R, R]`` and are drawn with density proportional to
``exp(eps * u(y) / 2)``, where the utility is the rank error of the best
point within distance ``theta`` of ``y``::

    u(y) = -min_{z in [y - theta, y + theta] & [-R, R]} dist(q N, [#{s_i < z}, #{s_i <= z}])

A point sitting on a block of tied slopes may take any rank inside the
block, which is what lets the mechanism concentrate on heavily tied
(concentrated) slopes. Changing one slope moves both rank counts by at
most one, so ``u`` has sensitivity 1. The utility is constant between consecutive points of
``{-R, R} | {s_i - theta, s_i + theta}``, which makes the density
piecewise constant; sampling picks an interval by Gumbel-max over log
masses and then draws uniformly inside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QueryError(ValueError):
    """Invalid mechanism parameters or an empty slope multiset."""


@dataclass(frozen=True)
class QuantileQuery:
    """Target quantile ``q``, output range ``[-R, R]``, widening and epsilon.

    ``q`` must lie in (0, 1) unless ``extrapolate`` is set. An extrapolated
    target below 0 (above 1) yields the same density as ``q = 0`` (``q = 1``)
    because the utility then differs from the boundary one by a constant.
    """

    q: float
    R: float
    theta: float
    eps: float
    extrapolate: bool = False

    def __post_init__(self):
        if not np.isfinite(self.q):
            raise QueryError("target quantile must be finite")
        if not self.extrapolate and not 0.0 < self.q < 1.0:
            raise QueryError(f"target quantile must lie in (0, 1), got {self.q}")
        if not self.R > 0:
            raise QueryError("range bound R must be positive")
        if not self.theta > 0:
            raise QueryError("widening theta must be positive")
        if not self.theta < self.R:
            raise QueryError(f"theta ({self.theta}) must be smaller than R ({self.R})")
        if not self.eps > 0:
            raise QueryError("mechanism epsilon must be positive")


def clamp_slopes(slopes, R: float) -> np.ndarray:
    """Clip slopes (including infinities) into ``[-R, R]``."""
    return np.clip(np.asarray(slopes, dtype=float), -R, R)


def _prepare(slopes, R):
    s = np.sort(clamp_slopes(slopes, R).ravel())
    if s.size == 0:
        raise QueryError("slope multiset is empty")
    return s


def _window_utility(s, target, a, b):
    """Utility of windows ``[a, b]`` against sorted slopes ``s``.

    Every rank from ``#{s_i < a}`` to ``#{s_i <= b}`` is attainable inside
    the window (a tie block spans all the ranks it covers), so the utility
    is minus the distance from ``target`` to that rank interval.
    """
    lo = np.searchsorted(s, a, side="left")
    hi = np.searchsorted(s, b, side="right")
    return -np.maximum(np.maximum(lo - target, target - hi), 0.0)


def widened_utility(slopes, q: float, theta: float, y, R: float) -> np.ndarray:
    """Evaluate the widened rank utility at one or more points ``y``.

    Slopes are clamped to ``[-R, R]`` first. The result is fractional
    when ``q * N`` is not an integer.
    """
    s = _prepare(slopes, R)
    y = np.asarray(y, dtype=float)
    if np.any((y < -R) | (y > R)):
        raise QueryError("utility is only defined on [-R, R]")
    target = q * s.size
    a = np.maximum(y - theta, -R)
    b = np.minimum(y + theta, R)
    return _window_utility(s, target, a, b)


@dataclass(frozen=True)
class PiecewiseDensity:
    """Exact output density of the mechanism.

    ``edges`` has one more entry than ``utility`` and ``log_mass``; the
    density on ``(edges[i], edges[i + 1])`` is
    ``exp(log_mass[i] - log_norm) / width[i]``.
    """

    edges: np.ndarray
    utility: np.ndarray
    log_mass: np.ndarray
    log_norm: float

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def probs(self) -> np.ndarray:
        """Probability of each interval."""
        return np.exp(self.log_mass - self.log_norm)

    def log_pdf(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, y, side="right") - 1, 0, self.utility.size - 1)
        out = self.log_mass[idx] - self.log_norm - np.log(self.widths[idx])
        outside = (y < self.edges[0]) | (y > self.edges[-1])
        return np.where(outside, -np.inf, out)

    def pdf(self, y) -> np.ndarray:
        return np.exp(self.log_pdf(y))

    def cdf(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        idx = np.clip(np.searchsorted(self.edges, y, side="right") - 1, 0, self.utility.size - 1)
        frac = np.clip((y - self.edges[idx]) / self.widths[idx], 0.0, 1.0)
        out = cum[idx] + frac * self.probs[idx]
        return np.clip(np.where(y >= self.edges[-1], 1.0, np.where(y <= self.edges[0], 0.0, out)), 0.0, 1.0)

    def shifted(self, offset: float) -> "PiecewiseDensity":
        return PiecewiseDensity(self.edges + offset, self.utility, self.log_mass, self.log_norm)


def _logsumexp(v):
    m = np.max(v)
    return float(m + np.log(np.sum(np.exp(v - m))))


def exact_density(slopes, query: QuantileQuery) -> PiecewiseDensity:
    """Exact normalised output density, computed in log space."""
    s = _prepare(slopes, query.R)
    R, theta = query.R, query.theta
    edges = np.concatenate([[-R, R], s - theta, s + theta])
    edges = np.unique(np.clip(edges, -R, R))
    width = np.diff(edges)
    keep = width > 0
    left, right = edges[:-1][keep], edges[1:][keep]
    edges = np.concatenate([left, right[-1:]])
    mid = 0.5 * (left + right)
    target = query.q * s.size
    u = _window_utility(s, target, np.maximum(mid - theta, -R), np.minimum(mid + theta, R))
    log_mass = 0.5 * query.eps * u + np.log(right - left)
    return PiecewiseDensity(edges, u.astype(float), log_mass, _logsumexp(log_mass))


def dpwide_sample(slopes, query: QuantileQuery, rng: np.random.Generator, size=None):
    """Draw from the widened exponential mechanism.

    Returns a float, or an array when ``size`` is given.
    """
    dens = exact_density(slopes, query)
    m = dens.log_mass.size
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    gumbel = rng.gumbel(size=shape + (m,))
    idx = np.argmax(dens.log_mass + gumbel, axis=-1)
    lo = dens.edges[idx]
    hi = dens.edges[idx + 1]
    out = lo + (hi - lo) * rng.random(size=shape)
    out = np.clip(out, -query.R, query.R)
    return float(out) if size is None else out
