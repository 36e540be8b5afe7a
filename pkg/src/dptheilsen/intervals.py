"""Private non-parametric confidence intervals for the slope."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .core import Dataset, all_pairs_slopes, k_matching_slopes
from .dpwide import QuantileQuery, clamp_slopes, dpwide_sample

_STD_NORMAL = NormalDist()

CI_VARIANTS = ("ts", "half", "khalf")


class IntervalError(ValueError):
    """Raised when the target quantiles fall outside (0, 1)."""


def normal_quantile(q: float) -> float:
    """Inverse standard normal CDF (Wichura's AS241 rational approximation)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {q}")
    return _STD_NORMAL.inv_cdf(q)


def normal_cdf(z: float) -> float:
    return _STD_NORMAL.cdf(z)


def c_quantile(q: float, n: int | None = None) -> float:
    """``Phi^-1(1 - q)``, divided by ``sqrt(n)`` when ``n`` is given."""
    c = normal_quantile(1.0 - q)
    return c if n is None else c / math.sqrt(n)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    nominal_coverage: float
    variant: str
    meta: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        out = {"variant": self.variant, "lower": self.lower, "upper": self.upper,
               "nominal_coverage": self.nominal_coverage}
        out.update(self.meta)
        return out


def slope_multiplicity(variant: str, n: int, k: int = 1) -> int:
    """Most slopes one replaced data point can change under ``variant``."""
    if variant == "ts":
        return n - 1
    if variant == "khalf":
        return 2 * k
    if variant == "half":
        return 2
    raise ValueError(f"unknown interval variant {variant!r}; expected one of {CI_VARIANTS}")


def half_width_b(variant: str, n: int, p: float, k: int = 1) -> float:
    """Sampling half-width (in quantile units) of the non-private interval."""
    c = c_quantile(p / 4, n)
    if variant == "ts":
        return math.sqrt(4 / 9) * c
    if variant == "khalf":
        return math.sqrt((2 * k + 1) / (3 * k)) * c
    if variant == "half":
        return math.sqrt(2) * c
    raise ValueError(f"unknown interval variant {variant!r}")


def privacy_slack_t(eps_call: float, N: int, R: float, theta: float, p: float) -> float:
    """Quantile slack absorbing the mechanism's rank error.

    ``eps_call`` is the budget each mechanism invocation actually runs at,
    so ``eps_call * N`` is the rank scale of the mechanism's noise.
    """
    return math.log(4 * (R - theta) / (theta * p)) / (eps_call * N)


def ci_slopes(d: Dataset, variant: str, k: int, rng: np.random.Generator) -> np.ndarray:
    if variant == "ts":
        return all_pairs_slopes(d)
    if variant == "half":
        return k_matching_slopes(d, 1, rng)
    if variant == "khalf":
        return k_matching_slopes(d, k, rng)
    raise ValueError(f"unknown interval variant {variant!r}; expected one of {CI_VARIANTS}")


def target_quantiles(variant: str, n: int, N: int, eps_call: float, p: float, R: float,
                     theta: float, k: int = 1, strict: bool = True):
    """Return ``(q_lower, q_upper, b, t)``.

    With ``strict`` set, a target outside (0, 1) raises ``IntervalError``.
    """
    b = half_width_b(variant, n, p, k)
    t = privacy_slack_t(eps_call, N, R, theta, p)
    q_lo, q_hi = 0.5 - b - t, 0.5 + b + t
    if strict and not (0.0 < q_lo < 0.5 < q_hi < 1.0):
        raise IntervalError(
            f"target quantiles 1/2 -+ (b + t) = {q_lo:.4g}, {q_hi:.4g} fall outside (0, 1) "
            f"(b={b:.4g}, t={t:.4g}); n or epsilon is too small for p={p}")
    return q_lo, q_hi, b, t


def dp_theil_sen_ci(d: Dataset, eps: float, p: float, R: float, theta: float,
                    variant: str = "half", k: int = 1,
                    rng: np.random.Generator | None = None,
                    strict: bool = True) -> ConfidenceInterval:
    """Two widened-mechanism quantile draws around the median slope.

    Each draw gets half of ``eps``, further divided by the number of slopes
    a single data point can touch. The lower draw is shifted down by
    ``theta`` and the upper draw up by ``theta``.

    When ``n`` or ``eps`` is small the target quantiles ``1/2 -+ (b + t)``
    can leave (0, 1). ``strict=True`` raises ``IntervalError`` then;
    otherwise the mechanism runs at the out-of-range target, which behaves
    like the boundary quantile and typically returns a bound near
    ``-+R``. ``meta["target_outside"]`` records whether that happened.
    """
    if rng is None:
        rng = np.random.default_rng()
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    if variant != "khalf":
        k = 1
    QuantileQuery(0.5, R, theta, 1.0)
    delta = slope_multiplicity(variant, d.n, k)
    eps_call = 0.5 * eps / delta
    # validate before touching the data's slopes: N depends only on n and k
    N = d.n * (d.n - 1) // 2 if variant == "ts" else k * (d.n // 2)
    q_lo, q_hi, b, t = target_quantiles(variant, d.n, N, eps_call, p, R, theta, k, strict)
    outside = not (0.0 < q_lo and q_hi < 1.0)
    s = clamp_slopes(ci_slopes(d, variant, k, rng), R)
    lo = dpwide_sample(s, QuantileQuery(q_lo, R, theta, eps_call, extrapolate=True), rng) - theta
    hi = dpwide_sample(s, QuantileQuery(q_hi, R, theta, eps_call, extrapolate=True), rng) + theta
    swapped = lo > hi
    if swapped:
        lo, hi = hi, lo
    return ConfidenceInterval(lo, hi, 1.0 - p, variant, meta={
        "epsilon": eps, "eps_call": eps_call, "R": R, "theta": theta, "k": k,
        "b": b, "t": t, "N": N, "q_lower": q_lo, "q_upper": q_hi,
        "asymptotic": variant != "half", "swapped": bool(swapped),
        "target_outside": outside})
