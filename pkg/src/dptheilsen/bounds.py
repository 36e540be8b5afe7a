"""Closed-form (1 - p)-convergence bounds and the widening-parameter rule.

Asymptotic rows drop their ``1 + o(1)`` factor and set the
``asymptotic`` flag. Constraints are always evaluated and reported; a
violated constraint never suppresses the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .intervals import c_quantile

ESTIMATORS = ("ols", "ts", "half", "dpsuffstats", "dpts", "dphalf", "dpkhalf")

_PREFACTOR = {
    "ols": 1.0,
    "ts": math.sqrt(math.pi / 3),
    "half": math.sqrt(2 * math.pi / 3),
    "dpts": math.sqrt(math.pi / 3),
    "dphalf": math.sqrt(2 * math.pi / 3),
}

_ASYMPTOTIC = {"ts", "dpts", "dpkhalf"}


@dataclass(frozen=True)
class BoundParams:
    sigma_e: float
    sigma_x: float
    n: int
    p: float
    eps: float | None = None
    R: float | None = None
    theta: float | None = None
    k: int = 1
    abs_beta: float | None = None
    r_u: float | None = None
    tau_n: float | None = None

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be positive")
        for name in ("sigma_e", "sigma_x", "eps", "R", "theta", "r_u", "tau_n"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.theta is not None and self.R is not None and self.theta >= self.R:
            raise ValueError("theta must be smaller than R")

    @property
    def tau_cap(self) -> float:
        """Largest admissible privacy term; ``1 / sqrt(n)`` unless given."""
        return self.tau_n if self.tau_n is not None else 1.0 / math.sqrt(self.n)

    def with_(self, **changes) -> "BoundParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class BoundResult:
    estimator: str
    value: float
    constraints: list = field(default_factory=list)
    asymptotic: bool = False
    tau: float | None = None

    @property
    def constraints_ok(self) -> bool:
        return all(ok for _, ok in self.constraints)

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "value": self.value,
            "asymptotic": self.asymptotic,
            "tau": self.tau,
            "constraints_ok": self.constraints_ok,
            "constraints": {name: ok for name, ok in self.constraints},
        }


class MissingParameter(ValueError):
    pass


def _need(params: BoundParams, *names):
    missing = [nm for nm in names if getattr(params, nm) is None]
    if missing:
        raise MissingParameter(f"missing parameter(s): {', '.join(missing)}")


def dp_prefactor(estimator: str, k: int = 1) -> float:
    if estimator == "dpkhalf":
        return math.sqrt(2 * math.pi * (2 * k + 1) / (9 * k))
    return _PREFACTOR[estimator]


def tau(estimator: str, params: BoundParams) -> tuple[float, list]:
    """Privacy term of a private row and the constraints it must meet.

    Returns ``(tau, constraints)``. For the Theil-Sen rows the log argument
    must exceed 1, i.e. ``p < R / (sqrt(pi) * theta * sigma_e)``; when it
    does not, tau is reported as 0 with that constraint failing.
    """
    if estimator == "dpsuffstats":
        _need(params, "eps", "r_u")
        n, p = params.n, params.p
        t = (1 - 1 / n) * params.r_u ** 2 * math.log(3 / p) / (params.eps * n * params.sigma_x ** 2)
        lower = 3 * math.exp(-params.eps * n * params.sigma_x ** 2 / (3 * params.r_u ** 2))
        return t, [("p > 3 exp(-eps n sigma_x^2 / (3 r_u^2))", params.p > lower)]
    if estimator in ("dpts", "dphalf", "dpkhalf"):
        _need(params, "eps", "R", "theta")
        arg = params.R / (math.sqrt(math.pi) * params.p * params.theta * params.sigma_e)
        ok_log = arg > 1.0
        t = math.log(arg) / (params.eps * params.n) if ok_log else 0.0
        return t, [
            ("p < R / (sqrt(pi) theta sigma_e)", ok_log),
            ("tau <= tau_n", t <= params.tau_cap),
        ]
    raise ValueError(f"{estimator!r} has no privacy term")


def convergence_bound(estimator: str, params: BoundParams) -> BoundResult:
    """Evaluate one row of the bound table."""
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    ratio = params.sigma_e / params.sigma_x
    sqrt_n = math.sqrt(params.n)
    p = params.p
    asym = estimator in _ASYMPTOTIC

    if estimator in ("ols", "ts", "half"):
        value = _PREFACTOR[estimator] * ratio * c_quantile(p / 4) / sqrt_n
        cons = [("n > ln(4/p)", params.n > math.log(4 / p))] if estimator == "half" else []
        return BoundResult(estimator, value, cons, asym)

    if estimator == "dpsuffstats":
        _need(params, "abs_beta")
        t, cons = tau(estimator, params)
        value = ratio * c_quantile(p / 12) / sqrt_n * (1 + t) + t * (1 + t + params.abs_beta)
        return BoundResult(estimator, value, cons, asym, tau=t)

    t, cons = tau(estimator, params)
    value = dp_prefactor(estimator, params.k) * ratio * (c_quantile(p / 16) / sqrt_n + t) + params.theta
    if estimator == "dphalf":
        cons = cons + [("n > 16 ln(16/p)", params.n > 16 * math.log(16 / p))]
    return BoundResult(estimator, value, cons, asym, tau=t)


def bound_table(params: BoundParams, estimators=ESTIMATORS) -> list[BoundResult]:
    return [convergence_bound(e, params) for e in estimators]


@dataclass(frozen=True)
class ThetaSuggestion:
    theta: float
    spread_term: float
    floor_term: float

    @property
    def dominant(self) -> str:
        return "spread" if self.spread_term >= self.floor_term else "floor"


def suggest_theta_terms(sigma_e: float, sigma_x: float, n: int, eps: float, p: float,
                        R: float, tau_n: float | None = None) -> ThetaSuggestion:
    """Both terms of the widening rule.

    ``spread_term = sigma_e / (eps n sigma_x)`` tracks the spread of the
    slopes; ``floor_term = R exp(-eps n ln(2/p) tau_n)`` keeps theta away
    from zero when the slopes are concentrated.
    """
    if tau_n is None:
        tau_n = 1.0 / math.sqrt(n)
    spread = sigma_e / (eps * n * sigma_x)
    floor = R * math.exp(-eps * n * math.log(2 / p) * tau_n)
    return ThetaSuggestion(max(spread, floor), spread, floor)


def suggest_theta(params: BoundParams) -> float:
    _need(params, "eps", "R")
    return suggest_theta_terms(params.sigma_e, params.sigma_x, params.n, params.eps,
                               params.p, params.R, params.tau_cap).theta
