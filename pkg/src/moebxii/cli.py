"""Command-line front end: ``moebxii fit | sample | simulate``.

Datasets are plain text, one positive value per line; ``#`` starts a
comment.  Every command exits 0 on success and 1 with a one-line message
on stderr when something goes wrong (2 for usage errors).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import sim
from ._backend import BACKEND
from .dist import Params, Sample, pdf, quantile, sample
from .estimators import (FIT_ERRORS, EstimationResult, FitSettings, MEstConfig, Method,
                         ObreConfig, fit_many, fit_obre_state)
from .estimators._common import positive_log_values
from .numkit import OptimConfig, QuadratureConfig

log = logging.getLogger("moebxii")

DENSITY_POINTS = 512
DENSITY_SPAN = 1.05


class CLIError(Exception):
    """Problem with the user's input; reported without a traceback."""


# ---------------------------------------------------------------------------
# dataset I/O

def read_dataset(path: str) -> np.ndarray:
    """Positive reals, one per line; blank lines and ``#`` comments skipped."""
    values = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    v = float(line)
                except ValueError:
                    raise CLIError(f"{path}:{lineno}: not a number: {line!r}") from None
                if not (math.isfinite(v) and v > 0):
                    raise CLIError(f"{path}:{lineno}: observations must be finite and > 0")
                values.append(v)
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}") from None
    if not values:
        raise CLIError(f"{path}: no observations")
    return np.array(values)


def _open_out(path):
    if path in (None, "-"):
        return _Stdout()
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc.strerror}") from None


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


# ---------------------------------------------------------------------------
# fit report

@dataclass
class FitReport:
    n: int
    results: dict                      # Method -> EstimationResult
    failures: dict                     # Method -> message
    grid: np.ndarray
    densities: dict                    # Method -> pdf values on grid
    histogram: dict
    modes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "backend": BACKEND,
            "methods": [r.as_dict() for r in self.results.values()],
            "failures": {m.value: msg for m, msg in self.failures.items()},
            "histogram": self.histogram,
            "density_grid": {"start": float(self.grid[0]), "stop": float(self.grid[-1]),
                             "points": int(self.grid.size)},
            "modes": {m.value: v for m, v in self.modes.items()},
        }


def sturges_histogram(x: np.ndarray) -> dict:
    bins = int(math.ceil(math.log2(x.size))) + 1
    counts, edges = np.histogram(x, bins=bins)
    width = edges[1] - edges[0]
    return {"rule": "sturges", "bins": bins, "edges": edges.tolist(),
            "counts": counts.tolist(), "density": (counts / (x.size * width)).tolist()}


def density_grid(xmax: float) -> np.ndarray:
    """512 points on ``(0, 1.05 * xmax]``; ``x = 0`` is left out because the
    density is unbounded there when ``c < 1``."""
    top = DENSITY_SPAN * xmax
    return top * np.arange(1, DENSITY_POINTS + 1) / DENSITY_POINTS


def density_mode(p: Params) -> dict:
    """Location and height of the fitted density's maximum."""
    if p.c < 1.0:
        return {"x": 0.0, "pdf": None}
    lo, hi = quantile(p, 1e-8), quantile(p, 1 - 1e-6)
    grid = np.geomspace(lo, hi, 2001)
    vals = pdf(p, grid)
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda v: -pdf(p, v), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12 * b})
    x_mode, f_mode = float(res.x), float(-res.fun)
    at_zero = float(pdf(p, 0.0))
    if at_zero >= f_mode:
        x_mode, f_mode = 0.0, at_zero
    return {"x": x_mode, "pdf": f_mode}


def fit_report(x: np.ndarray, methods, settings: FitSettings) -> FitReport:
    """Run the requested fits on ``x``.

    OBRE follows a three-step protocol: start from ML, solve at ``c_B``,
    then solve once more warm-started from the first OBRE fit.
    """
    s = Sample(x)
    positive_log_values(s)
    methods = [m if isinstance(m, Method) else Method.parse(m) for m in methods]
    plain = [m for m in methods if m is not Method.OBRE]
    need_ml = Method.OBRE in methods and Method.ML not in plain
    fitted = fit_many(s, plain + ([Method.ML] if need_ml else []), settings)
    if Method.OBRE in methods:
        fitted[Method.OBRE] = _obre_protocol(s, fitted[Method.ML], settings.obre)

    results, failures = {}, {}
    for m in methods:
        r = fitted[m]
        if isinstance(r, Exception):
            failures[m] = str(r)
        else:
            results[m] = r
    grid = density_grid(float(x.max()))
    densities = {m: pdf(r.params, grid) for m, r in results.items()}
    modes = {m: density_mode(r.params) for m, r in results.items()}
    return FitReport(n=x.size, results=results, failures=failures, grid=grid,
                     densities=densities, histogram=sturges_histogram(x), modes=modes)


def _obre_protocol(s, ml, cfg: ObreConfig):
    if isinstance(ml, Exception):
        return ml
    try:
        first = fit_obre_state(s, cfg, init=ml.params)
        second = fit_obre_state(s, cfg, init=first.result.params, warm=first.state)
    except FIT_ERRORS as exc:
        return exc
    r = second.result
    return EstimationResult(r.params, r.method, r.converged,
                            first.result.iterations + r.iterations, r.objective)


def write_density_csv(report: FitReport, path: str) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        methods = list(report.densities)
        w.writerow(["x"] + [m.value for m in methods])
        for i, xv in enumerate(report.grid):
            w.writerow([f"{xv:.10g}"] + [f"{report.densities[m][i]:.10g}" for m in methods])


# ---------------------------------------------------------------------------
# commands

def _settings(args) -> FitSettings:
    quad = QuadratureConfig.from_env()
    return FitSettings(optim=OptimConfig(),
                       mest=MEstConfig(b=args.b),
                       obre=ObreConfig(c_B=args.cb, tol=args.tol, quad=quad))


def _methods(text: str):
    try:
        methods = [Method.parse(m) for m in text.split(",") if m.strip()]
    except ValueError:
        raise CLIError(f"unknown method in {text!r} (choose from ml, ls, m, obre)") from None
    if not methods:
        raise CLIError("no methods given")
    return list(dict.fromkeys(methods))


def cmd_fit(args) -> int:
    x = read_dataset(args.input)
    report = fit_report(x, _methods(args.methods), _settings(args))
    with _open_out(args.out) as fh:
        json.dump(report.as_dict(), fh, indent=2)
        fh.write("\n")
    if args.density_out:
        write_density_csv(report, args.density_out)
    return 0


def cmd_sample(args) -> int:
    p = Params(args.alpha, args.c, args.k)
    s = sample(p, args.n, args.seed)
    with _open_out(args.out) as fh:
        fh.writelines(f"{v!r}\n" for v in s.values.tolist())
    return 0


def cmd_simulate(args) -> int:
    methods = _methods(args.methods)
    if args.paper_grid:
        scenarios = sim.paper_grid(args.replications, args.seed, methods)
    else:
        missing = [f"--{n}" for n in ("alpha", "c", "k", "n") if getattr(args, n) is None]
        if missing:
            raise CLIError("simulate needs --paper-grid or " + ", ".join(missing))
        scenarios = [sim.Scenario(Params(args.alpha, args.c, args.k), args.n, args.outliers,
                                  args.replications, args.seed, tuple(methods))]
    settings = _settings(args)
    results = []
    for sc in scenarios:
        log.info("running %s (%d replications)", sc.scenario_id, sc.replications)
        results.append((sc, sim.run_scenario(sc, settings, jobs=args.jobs)))
    with _open_out(args.out) as fh:
        if args.format == "table":
            fh.write(sim.format_table(results))
        else:
            fh.write(sim.to_csv(row for _, rows in results for row in rows))
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return v


def _add_config(p):
    p.add_argument("--methods", default="ml,ls,m,obre",
                   help="comma-separated subset of ml, ls, m, obre (default: all)")
    p.add_argument("--cb", type=_positive_float, default=3.0,
                   help="OBRE bound c_B, at least sqrt(3) (default 3)")
    p.add_argument("--b", type=_positive_float, default=1.345,
                   help="Tukey biweight constant (default 1.345)")
    p.add_argument("--tol", type=_positive_float, default=1e-6,
                   help="OBRE convergence tolerance (default 1e-6)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moebxii",
        description="Fit, sample and simulate the Marshall-Olkin extended Burr XII distribution.",
        epilog="MOEBXII_QUAD_NODES overrides the number of quadrature nodes.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate parameters from a dataset")
    p.add_argument("--input", required=True, help="text file, one positive value per line")
    _add_config(p)
    p.add_argument("--density-out", help="CSV of fitted densities on a 512-point grid")
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="draw a random sample")
    p.add_argument("--alpha", type=_positive_float, required=True)
    p.add_argument("--c", type=_positive_float, required=True)
    p.add_argument("--k", type=_positive_float, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", help="bias/RMSE study under outlier contamination")
    p.add_argument("--paper-grid", action="store_true",
                   help="nine triples x n in {25, 50, 100} with 1, 2, 4 outliers")
    p.add_argument("--alpha", type=_positive_float)
    p.add_argument("--c", type=_positive_float)
    p.add_argument("--k", type=_positive_float)
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--outliers", type=int, default=0)
    p.add_argument("--replications", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=sim.DEFAULT_SEED)
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    p.add_argument("--format", choices=("csv", "table"), default="csv")
    p.add_argument("--out", help="output path (default: stdout)")
    _add_config(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # one-line diagnostic instead of a traceback
        if args.verbose:
            log.exception("failed")
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"moebxii: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
