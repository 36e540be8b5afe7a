"""Monte-Carlo harness for the point estimators and confidence intervals.

Each trial draws a fresh dataset ``y_i = alpha + beta x_i + e_i`` over a
fixed ``x`` design and runs every configured job on it. Randomness is
split by ``numpy.random.SeedSequence``: trial ``t`` draws its data from
``SeedSequence(seed, spawn_key=(t, 0))`` and job ``j`` (in configuration
order) uses ``spawn_key=(t, j + 1)``. Trials therefore do not depend on
execution order, and the report is identical for any number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import suggest_theta_terms
from .core import Dataset
from .estimators import dp_theil_sen, dp_theil_sen_k_half, ols_fit, theil_sen, theil_sen_half
from .intervals import dp_theil_sen_ci

POINT_ESTIMATORS = ("ols", "ts", "half", "dpts", "dpkhalf")
CI_ESTIMATORS = ("ci_ts", "ci_half", "ci_khalf")
PRIVATE = {"dpts", "dpkhalf", *CI_ESTIMATORS}


@dataclass(frozen=True)
class XDesign:
    """Fixed predictor values: equally spaced, two endpoints, or a custom list."""

    kind: str = "equally_spaced"
    lo: float = 0.0
    hi: float = 1.0
    values: tuple = ()

    def points(self, n: int) -> np.ndarray:
        if self.kind == "equally_spaced":
            x = np.linspace(self.lo, self.hi, n)
        elif self.kind == "two_point":
            # lower half at lo, upper half at hi
            x = np.where(np.arange(n) < n // 2, self.lo, self.hi).astype(float)
        elif self.kind == "custom":
            x = np.asarray(self.values, dtype=float)
            if x.size != n:
                raise ValueError(f"custom design has {x.size} values but n={n}")
        else:
            raise ValueError(f"unknown design kind {self.kind!r}")
        if n < 2 or np.all(x == x[0]):
            raise ValueError("design needs at least two distinct x values")
        return x


@dataclass(frozen=True)
class PrivacySetting:
    eps: float = 1.0
    R: float = 10.0
    theta: float | str = "auto"
    k: int = 1
    p: float = 0.1

    def label(self) -> str:
        return f"eps={self.eps:g},R={self.R:g},theta={self.theta},k={self.k},p={self.p:g}"


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    alpha: float = 0.0
    beta: float = 1.0
    sigma_e: float = 1.0
    design: XDesign = XDesign()
    trials: int = 1000
    seed: int = 0
    estimators: tuple = ("ts",)
    settings: tuple = (PrivacySetting(),)
    strict_ci: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.estimators:
            raise ValueError("no estimators configured")
        unknown = set(self.estimators) - set(POINT_ESTIMATORS) - set(CI_ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if PRIVATE & set(self.estimators) and not self.settings:
            raise ValueError("private estimators need at least one privacy setting")
        self.design.points(self.n)

    @property
    def x(self) -> np.ndarray:
        return self.design.points(self.n)

    @property
    def sigma_x(self) -> float:
        """Population standard deviation of the design."""
        return float(np.std(self.x))

    def jobs(self) -> list:
        """``(estimator, setting)`` pairs in a fixed order; ``setting`` is None for non-private ones."""
        out = []
        for est in self.estimators:
            if est in PRIVATE:
                out.extend((est, s) for s in self.settings)
            else:
                out.append((est, None))
        return out

    def resolve_theta(self, setting: PrivacySetting) -> float:
        if setting.theta != "auto":
            return float(setting.theta)
        # oracle values of sigma_e and sigma_x are known inside a simulation
        return suggest_theta_terms(self.sigma_e, self.sigma_x, self.n,
                                   setting.eps, setting.p, setting.R).theta


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, stream)))


def generate_dataset(config: SimConfig, rng: np.random.Generator) -> Dataset:
    """Draw one dataset; errors are ``sigma_e`` times standard normal deviates.

    Deviates come from ``Generator.standard_normal`` (ziggurat transform of
    the bit stream), so they are a deterministic function of the seed.
    """
    x = config.x
    e = config.sigma_e * rng.standard_normal(x.size)
    return Dataset(x, config.alpha + config.beta * x + e)


def _run_job(est, setting, d, theta, rng, strict):
    if est == "ols":
        return ols_fit(d).beta, None
    if est == "ts":
        return theil_sen(d).beta, None
    if est == "half":
        return theil_sen_half(d).beta, None
    if est == "dpts":
        return dp_theil_sen(d, setting.eps, setting.R, theta, rng).beta, None
    if est == "dpkhalf":
        return dp_theil_sen_k_half(d, setting.eps, setting.k, setting.R, theta, rng).beta, None
    variant = est.removeprefix("ci_")
    ci = dp_theil_sen_ci(d, setting.eps, setting.p, setting.R, theta, variant, setting.k, rng,
                         strict=strict)
    return 0.5 * (ci.lower + ci.upper), (ci.lower, ci.upper)


def _run_chunk(config: SimConfig, start: int, stop: int):
    jobs = config.jobs()
    thetas = [config.resolve_theta(s) if s is not None else None for _, s in jobs]
    m = stop - start
    est = np.full((len(jobs), m), np.nan)
    lower = np.full((len(jobs), m), np.nan)
    upper = np.full((len(jobs), m), np.nan)
    failures = [[] for _ in jobs]
    for i, t in enumerate(range(start, stop)):
        d = generate_dataset(config, trial_rng(config.seed, t, 0))
        for j, (name, setting) in enumerate(jobs):
            rng = trial_rng(config.seed, t, j + 1)
            try:
                val, interval = _run_job(name, setting, d, thetas[j], rng, config.strict_ci)
            except ValueError as exc:
                failures[j].append(f"{type(exc).__name__}: {exc}")
                continue
            est[j, i] = val
            if interval is not None:
                lower[j, i], upper[j, i] = interval
    return est, lower, upper, failures


@dataclass
class JobRecord:
    """Per-trial outputs of one (estimator, setting) job."""

    estimator: str
    setting: PrivacySetting | None
    theta: float | None
    estimates: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def is_interval(self) -> bool:
        return self.estimator in CI_ESTIMATORS

    def ok(self) -> np.ndarray:
        return ~np.isnan(self.estimates)


@dataclass
class SimReport:
    config: SimConfig
    records: list
    wall_time: float = 0.0

    def record(self, estimator: str, setting_index: int = 0) -> JobRecord:
        matches = [r for r in self.records if r.estimator == estimator]
        if not matches:
            raise KeyError(estimator)
        return matches[setting_index]

    def abs_errors(self, estimator: str, setting_index: int = 0) -> np.ndarray:
        r = self.record(estimator, setting_index)
        return np.abs(r.estimates[r.ok()] - self.config.beta)

    def scaled_variance(self, estimator: str, setting_index: int = 0) -> float:
        """Sample variance of ``sqrt(n) * (estimate - beta)``."""
        return self._variance_of(self.record(estimator, setting_index))

    def coverage(self, estimator: str, setting_index: int = 0) -> float:
        """Fraction of all trials whose interval contains beta; failed trials count as misses."""
        r = self.record(estimator, setting_index)
        hit = (r.lower <= self.config.beta) & (self.config.beta <= r.upper)
        return float(np.mean(hit))

    def widths(self, estimator: str, setting_index: int = 0) -> np.ndarray:
        r = self.record(estimator, setting_index)
        return (r.upper - r.lower)[r.ok()]

    def metric_rows(self) -> list[dict]:
        """Long-format rows: configuration columns plus ``metric`` and ``value``."""
        cfg = self.config
        rows = []
        for r in self.records:
            s = r.setting
            base = {
                "estimator": r.estimator,
                "n": cfg.n,
                "beta": cfg.beta,
                "sigma_e": cfg.sigma_e,
                "sigma_x": cfg.sigma_x,
                "design": cfg.design.kind,
                "eps": s.eps if s else "",
                "R": s.R if s else "",
                "theta": r.theta if r.theta is not None else "",
                "k": s.k if s else "",
                "p": s.p if s else "",
                "trials": cfg.trials,
                "seed": cfg.seed,
            }
            ok = r.ok()
            errs = np.abs(r.estimates[ok] - cfg.beta)
            metrics = {
                "trials_ok": int(ok.sum()),
                "failures": len(r.failures),
                "mean_estimate": float(np.mean(r.estimates[ok])) if ok.any() else float("nan"),
                "scaled_variance": self._variance_of(r),
            }
            for p in (0.5, 0.1, 0.05):
                key = f"error_q{1 - p:g}"
                metrics[key] = empirical_convergence(errs, p) if errs.size and p * errs.size >= 1 else float("nan")
            if r.is_interval:
                hit = (r.lower <= cfg.beta) & (cfg.beta <= r.upper)
                w = (r.upper - r.lower)[ok]
                metrics["coverage"] = float(np.mean(hit))
                metrics["mean_width"] = float(np.mean(w)) if w.size else float("nan")
                metrics["median_width"] = float(np.median(w)) if w.size else float("nan")
            for name, value in metrics.items():
                rows.append({**base, "metric": name, "value": value})
        return rows

    def _variance_of(self, r):
        z = math.sqrt(self.config.n) * (r.estimates[r.ok()] - self.config.beta)
        return float(np.var(z, ddof=1)) if z.size > 1 else float("nan")

    def to_csv(self) -> str:
        rows = self.metric_rows()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def to_jsonl(self) -> str:
        return "".join(json.dumps(row, sort_keys=True) + "\n" for row in self.metric_rows())

    def summary(self) -> dict:
        cfg = asdict(self.config)
        return {"config": cfg, "wall_time": self.wall_time,
                "failures": {f"{r.estimator}[{r.setting.label() if r.setting else ''}]": r.failures[:5]
                             for r in self.records if r.failures}}


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def run_trials(config: SimConfig, workers: int = 1, chunk: int = 250) -> SimReport:
    """Run every configured job on ``config.trials`` fresh datasets."""
    t0 = time.perf_counter()
    bounds = [(a, min(a + chunk, config.trials)) for a in range(0, config.trials, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [config] * len(bounds), *zip(*bounds)))
    else:
        parts = [_run_chunk(config, a, b) for a, b in bounds]
    est = np.concatenate([p[0] for p in parts], axis=1)
    lower = np.concatenate([p[1] for p in parts], axis=1)
    upper = np.concatenate([p[2] for p in parts], axis=1)
    records = []
    for j, (name, setting) in enumerate(config.jobs()):
        fails = [f for p in parts for f in p[3][j]]
        theta = config.resolve_theta(setting) if setting is not None else None
        records.append(JobRecord(name, setting, theta, est[j], lower[j], upper[j], fails))
    return SimReport(config, records, time.perf_counter() - t0)


def empirical_convergence(errors, p: float) -> float:
    """Empirical (1 - p) quantile of absolute errors.

    Uses the inverted empirical CDF: the smallest stored error ``e`` with at
    least ``(1 - p)`` of the errors at or below it, i.e. the
    ``ceil((1 - p) T)``-th order statistic. ``p = 1`` returns the minimum.
    Accepts an array of errors or a ``(SimReport, estimator)`` pair.
    """
    if isinstance(errors, tuple):
        report, estimator = errors[:2]
        errors = report.abs_errors(estimator, *errors[2:])
    e = np.sort(np.asarray(errors, dtype=float).ravel())
    if e.size == 0:
        raise ValueError("no errors recorded")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if p * e.size < 1 - 1e-9:
        raise ValueError(f"{e.size} trials cannot resolve the {1 - p:g} quantile")
    rank = max(math.ceil((1.0 - p) * e.size - 1e-9), 1)
    return float(e[rank - 1])
