"""Command-line front end.

Subcommands: ``fit``, ``ci``, ``bounds``, ``simulate``, ``suggest-theta``.
Exit codes: 0 success, 2 usage, 3 data, 4 algorithm or constraint failure.

Input CSV: UTF-8, comma separated, ``.`` decimal point, header row
required. Any malformed row is an error, since dropping rows would change
``n`` and with it the privacy accounting.

``simulate`` writes into ``--output-dir``:

* ``report.csv``: long format with columns ``estimator, n, beta, sigma_e,
  sigma_x, design, eps, R, theta, k, p, trials, seed, metric, value``;
* ``report.jsonl``: the same rows, one JSON object per line;
* ``plot_<metric>.csv``: columns ``estimator, eps, x, y`` with ``x = n``
  (or ``x = eps`` when a single ``n`` is simulated);
* ``summary.json``: configuration and failure messages (wall time only
  with ``--timing``, so reruns stay byte-identical).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import ESTIMATORS as BOUND_ROWS
from .bounds import BoundParams, MissingParameter, convergence_bound, suggest_theta_terms
from .core import Dataset, DatasetError
from .dpwide import QueryError
from .estimators import EstimationError, dp_theil_sen, dp_theil_sen_k_half, theil_sen
from .intervals import IntervalError, dp_theil_sen_ci
from .sim import CI_ESTIMATORS, POINT_ESTIMATORS, PrivacySetting, SimConfig, XDesign, generate_dataset, run_trials, trial_rng

SCHEMA_VERSION = 1

EXIT_USAGE, EXIT_DATA, EXIT_ALGO = 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _usage(msg):
    return CliError(msg, EXIT_USAGE)


def read_csv_dataset(path, x_col: str, y_col: str) -> Dataset:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot open {path}: {exc.strerror}", EXIT_DATA)
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CliError(f"{path}: empty file, header row required", EXIT_DATA)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise CliError(f"{path}: unreadable header: {exc}", EXIT_DATA)
        header = [h.strip() for h in header]
        for col in (x_col, y_col):
            if col not in header:
                raise CliError(f"{path}: column {col!r} not found (have {header})", EXIT_DATA)
        ix, iy = header.index(x_col), header.index(y_col)
        xs, ys = [], []
        try:
            for row in reader:
                line = reader.line_num
                if len(row) != len(header):
                    raise CliError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}", EXIT_DATA)
                try:
                    x, y = float(row[ix]), float(row[iy])
                except ValueError:
                    raise CliError(f"{path}:{line}: non-numeric x or y ({row[ix]!r}, {row[iy]!r})", EXIT_DATA)
                if not (math.isfinite(x) and math.isfinite(y)):
                    raise CliError(f"{path}:{line}: x and y must be finite", EXIT_DATA)
                xs.append(x)
                ys.append(y)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise CliError(f"{path}: malformed CSV: {exc}", EXIT_DATA)
    if len(xs) < 2:
        raise CliError(f"{path}: need at least 2 data rows, got {len(xs)}", EXIT_DATA)
    return Dataset(np.array(xs), np.array(ys))


def write_csv_dataset(d: Dataset, path, x_col="x", y_col="y"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([x_col, y_col])
        for x, y in zip(d.x, d.y):
            w.writerow([repr(float(x)), repr(float(y))])


def _serialize(obj, fmt: str) -> str:
    rows = obj if isinstance(obj, list) else [obj]
    if fmt == "json":
        payload = {"schema_version": SCHEMA_VERSION, "results" if isinstance(obj, list) else "result": obj}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    delim = "," if fmt == "csv" else "\t"
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["schema_version"] + keys, delimiter=delim, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({"schema_version": SCHEMA_VERSION,
                    **{k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()}})
    return buf.getvalue()


def _emit(text: str, output):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _positive(name, value):
    if value is None or not value > 0:
        raise _usage(f"--{name} must be a positive number")


def _parse_theta(raw):
    if raw is None:
        raise _usage("--theta is required (a positive number or 'auto')")
    if raw == "auto":
        return "auto"
    try:
        v = float(raw)
    except ValueError:
        raise _usage(f"--theta must be a positive number or 'auto', got {raw!r}")
    if not v > 0:
        raise _usage("--theta must be positive")
    return v


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _auto_theta(args, d: Dataset | None, n: int):
    sigma_e, sigma_x = args.sigma_e, args.sigma_x
    if sigma_e is None or sigma_x is None:
        if d is None:
            raise _usage("--theta auto needs --sigma-e and --sigma-x")
        _warn("theta 'auto' is estimating sigma_e and sigma_x from the private data; "
              "this choice is NOT covered by the differential privacy guarantee")
        if sigma_x is None:
            sigma_x = float(np.std(d.x))
        if sigma_e is None:
            b = theil_sen(d).beta
            resid = d.y - b * d.x
            sigma_e = float(np.std(resid - np.median(resid)))
    if not sigma_x > 0:
        raise CliError("cannot derive theta: sigma_x is zero", EXIT_ALGO)
    sugg = suggest_theta_terms(sigma_e, sigma_x, n, args.epsilon, args.p, args.range, args.tau_n)
    if not 0 < sugg.theta < args.range:
        raise CliError(f"suggested theta {sugg.theta:g} is not in (0, R)", EXIT_ALGO)
    return sugg.theta


def _validate_private(args):
    _positive("epsilon", args.epsilon)
    _positive("range", args.range)
    theta = _parse_theta(args.theta)
    if theta != "auto" and theta >= args.range:
        raise _usage("--theta must be smaller than --range")
    if args.k < 1:
        raise _usage("--k must be a positive integer")
    if not 0 < args.p < 1:
        raise _usage("--p must lie in (0, 1)")
    if args.input is None:
        raise _usage("--input is required")
    return theta


def cmd_fit(args):
    theta = _validate_private(args)
    d = read_csv_dataset(args.input, args.x_col, args.y_col)
    if theta == "auto":
        theta = _auto_theta(args, d, d.n)
    rng = np.random.default_rng(args.seed)
    if args.variant == "ts":
        res = dp_theil_sen(d, args.epsilon, args.range, theta, rng)
    else:
        k = 1 if args.variant == "half" else args.k
        res = dp_theil_sen_k_half(d, args.epsilon, k, args.range, theta, rng)
    out = res.to_dict()
    out.update({"cli_variant": args.variant, "seed": args.seed, "n": d.n})
    return out


def cmd_ci(args):
    theta = _validate_private(args)
    d = read_csv_dataset(args.input, args.x_col, args.y_col)
    if theta == "auto":
        theta = _auto_theta(args, d, d.n)
    rng = np.random.default_rng(args.seed)
    ci = dp_theil_sen_ci(d, args.epsilon, args.p, args.range, theta, args.variant, args.k, rng,
                         strict=not args.allow_extreme_quantiles)
    out = ci.to_dict()
    out.update({"seed": args.seed, "n": d.n})
    return out


def cmd_bounds(args):
    wanted = args.estimators or list(BOUND_ROWS)
    for e in wanted:
        if e not in BOUND_ROWS:
            raise _usage(f"unknown estimator {e!r}; choose from {', '.join(BOUND_ROWS)}")
    for name in ("sigma_e", "sigma_x", "n"):
        if getattr(args, name) is None:
            raise _usage(f"missing --{name.replace('_', '-')}")
    theta = args.theta
    try:
        if theta == "auto":
            if args.epsilon is None or args.range is None:
                raise _usage("--theta auto needs --epsilon and --range")
            theta = suggest_theta_terms(args.sigma_e, args.sigma_x, args.n, args.epsilon, args.p,
                                        args.range, args.tau_n).theta
        elif theta is not None:
            theta = float(theta)
        params = BoundParams(sigma_e=args.sigma_e, sigma_x=args.sigma_x, n=args.n, p=args.p,
                             eps=args.epsilon, R=args.range, theta=theta, k=args.k,
                             abs_beta=args.abs_beta, r_u=args.r_u, tau_n=args.tau_n)
        ols = convergence_bound("ols", params).value
        ts = convergence_bound("ts", params).value
        rows = []
        for e in wanted:
            try:
                r = convergence_bound(e, params)
            except MissingParameter as exc:
                if args.estimators:
                    raise
                # only rows the user asked for must be computable
                _warn(f"skipping {e}: {exc}")
                continue
            row = r.to_dict()
            row["ratio_to_ols"] = r.value / ols
            row["ratio_to_ts"] = r.value / ts
            rows.append(row)
    except MissingParameter as exc:
        raise _usage(str(exc))
    except ValueError as exc:
        raise _usage(str(exc))
    for row in rows:
        if not row["constraints_ok"]:
            bad = [c for c, ok in row["constraints"].items() if not ok]
            _warn(f"{row['estimator']}: constraint(s) violated: {'; '.join(bad)}")
    return rows


def cmd_suggest_theta(args):
    for name in ("sigma_e", "sigma_x", "n", "epsilon", "range"):
        if getattr(args, name) is None:
            raise _usage(f"missing --{name.replace('_', '-')} (sigma estimates must be supplied)")
    if not 0 < args.p < 1:
        raise _usage("--p must lie in (0, 1)")
    s = suggest_theta_terms(args.sigma_e, args.sigma_x, args.n, args.epsilon, args.p, args.range, args.tau_n)
    return {"theta": s.theta, "spread_term": s.spread_term, "floor_term": s.floor_term,
            "dominant": s.dominant, "tau_n": args.tau_n if args.tau_n is not None else 1 / math.sqrt(args.n)}


def _sim_configs(args):
    ns = args.n or []
    estimators = args.estimators or []
    if not ns or not estimators:
        raise _usage("simulate needs a non-empty grid: give --n and --estimators")
    allowed = set(POINT_ESTIMATORS) | set(CI_ESTIMATORS)
    for e in estimators:
        if e not in allowed:
            raise _usage(f"unknown estimator {e!r}; choose from {', '.join(sorted(allowed))}")
    if args.trials is None or args.trials < 1:
        raise _usage("--trials must be at least 1")
    eps_list = args.epsilon or [1.0]
    theta = _parse_theta(args.theta if args.theta is not None else "auto")
    settings = []
    for eps in eps_list:
        _positive("epsilon", eps)
        settings.append(PrivacySetting(eps=eps, R=args.range, theta=theta, k=args.k, p=args.p))
    design = XDesign(kind=args.design, lo=args.x_lo, hi=args.x_hi)
    try:
        return [SimConfig(n=n, alpha=args.alpha, beta=args.beta, sigma_e=args.sigma_e or 1.0,
                          design=design, trials=args.trials, seed=args.seed,
                          estimators=tuple(estimators), settings=tuple(settings),
                          strict_ci=not args.allow_extreme_quantiles) for n in ns]
    except ValueError as exc:
        raise _usage(str(exc))


def cmd_simulate(args):
    configs = _sim_configs(args)
    if args.output_dir is None:
        raise _usage("--output-dir is required for simulate")
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = [run_trials(c, workers=args.workers) for c in configs]
    csv_text = "".join(r.to_csv() if i == 0 else r.to_csv().split("\n", 1)[1]
                       for i, r in enumerate(reports))
    (outdir / "report.csv").write_text(csv_text, encoding="utf-8")
    (outdir / "report.jsonl").write_text("".join(r.to_jsonl() for r in reports), encoding="utf-8")
    rows = [row for r in reports for row in r.metric_rows()]
    x_key = "n" if len(configs) > 1 else "eps"
    for metric in sorted({r["metric"] for r in rows}):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "eps", "x", "y"])
        for r in rows:
            if r["metric"] == metric:
                w.writerow([r["estimator"], r["eps"], r[x_key], repr(r["value"])])
        (outdir / f"plot_{metric}.csv").write_text(buf.getvalue(), encoding="utf-8")
    summary = {"schema_version": SCHEMA_VERSION, "x_axis": x_key,
               "runs": [r.summary() for r in reports]}
    if not args.timing:
        for run in summary["runs"]:
            run.pop("wall_time")
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n",
                                         encoding="utf-8")
    if args.dump_datasets:
        for c in configs:
            for t in range(min(args.dump_datasets, c.trials)):
                d = generate_dataset(c, trial_rng(c.seed, t, 0))
                write_csv_dataset(d, outdir / f"dataset_n{c.n}_trial{t}.csv")
    return {"output_dir": str(outdir), "files": sorted(p.name for p in outdir.iterdir()),
            "configurations": len(configs), "metric_rows": len(rows)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dptheilsen", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p):
        p.add_argument("--input", help="CSV file with a header row")
        p.add_argument("--x-col", default="x")
        p.add_argument("--y-col", default="y")

    def privacy_flags(p, multi_eps=False):
        if multi_eps:
            p.add_argument("--epsilon", type=float, nargs="+")
        else:
            p.add_argument("--epsilon", type=float)
        p.add_argument("--range", type=float, default=None, metavar="R")
        p.add_argument("--theta", default=None, help="positive number or 'auto'")
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--p", type=float, default=0.1)
        p.add_argument("--sigma-e", type=float, default=None)
        p.add_argument("--sigma-x", type=float, default=None)
        p.add_argument("--tau-n", type=float, default=None)

    def output_flags(p):
        p.add_argument("--format", choices=("json", "csv", "tsv"), default="json")
        p.add_argument("--output", default=None)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", help="private point estimate of the slope")
    data_flags(p)
    privacy_flags(p)
    p.add_argument("--variant", choices=("ts", "half", "khalf"), default="ts")
    output_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ci", help="private confidence interval for the slope")
    data_flags(p)
    privacy_flags(p)
    p.add_argument("--variant", choices=("ts", "half", "khalf"), default="half")
    p.add_argument("--allow-extreme-quantiles", action="store_true",
                   help="run even when the target quantiles leave (0, 1)")
    output_flags(p)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("bounds", help="(1-p)-convergence bounds")
    privacy_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--abs-beta", type=float)
    p.add_argument("--r-u", type=float)
    p.add_argument("--estimators", nargs="+", choices=BOUND_ROWS)
    output_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("suggest-theta", help="widening parameter rule")
    privacy_flags(p)
    p.add_argument("--n", type=int)
    output_flags(p)
    p.set_defaults(func=cmd_suggest_theta)

    p = sub.add_parser("simulate", help="Monte-Carlo campaign")
    privacy_flags(p, multi_eps=True)
    p.set_defaults(range=10.0)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--estimators", nargs="+")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--design", choices=("equally_spaced", "two_point"), default="equally_spaced")
    p.add_argument("--x-lo", type=float, default=0.0)
    p.add_argument("--x-hi", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir")
    p.add_argument("--dump-datasets", type=int, default=0, metavar="K",
                   help="also write the first K trial datasets as CSV")
    p.add_argument("--timing", action="store_true", help="record wall time in summary.json")
    p.add_argument("--allow-extreme-quantiles", action="store_true")
    output_flags(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = args.func(args)
        _emit(_serialize(result, args.format), args.output)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DatasetError,) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IntervalError, QueryError, EstimationError, ValueError) as exc:
        print(f"algorithm error: {exc}", file=sys.stderr)
        return EXIT_ALGO
    return 0


if __name__ == "__main__":
    sys.exit(main())
