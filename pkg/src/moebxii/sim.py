"""Monte Carlo contamination study: bias and RMSE of the four estimators.

Every replication draws a fresh sample from ``SeedSequence([seed, r])``,
overwrites its last positions with outliers and hands the same sample to
each estimator.  Replications are independent; with ``jobs > 1`` they are
spread over worker processes and reduced in replication order, so the
output never depends on scheduling.
"""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dist import DomainError, Params, Sample, sample
from .estimators import FitSettings, Method, fit_many

log = logging.getLogger(__name__)

__all__ = [
    "Scenario",
    "MetricRow",
    "inject_outliers",
    "bias_rmse",
    "run_scenario",
    "replication_sample",
    "paper_grid",
    "to_csv",
    "format_table",
    "PARAMETERS",
    "DEFAULT_SEED",
]

PARAMETERS = ("alpha", "c", "k")
DEFAULT_SEED = 12345
ALL_METHODS = (Method.ML, Method.LS, Method.M_TUKEY, Method.OBRE)

# parameter triples and (n, outliers) pairs of the published study
GRID_TRIPLES = ((3, 1, 1), (3, 1, 2), (3, 2, 1), (3, 2, 2), (3, 3, 3),
                (5, 1, 1), (5, 1, 2), (5, 2, 1), (5, 2, 2))
GRID_SIZES = ((25, 1), (50, 2), (100, 4))


@dataclass(frozen=True)
class Scenario:
    truth: Params
    n: int
    n_outliers: int = 0
    replications: int = 100
    seed: int = DEFAULT_SEED
    estimators: tuple = ALL_METHODS

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if not 0 <= self.n_outliers < self.n:
            raise ValueError("need 0 <= n_outliers < n")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        object.__setattr__(self, "estimators",
                           tuple(m if isinstance(m, Method) else Method.parse(m)
                                 for m in self.estimators))

    @property
    def scenario_id(self) -> str:
        a, c, k = self.truth
        return f"a{a:g}_c{c:g}_k{k:g}_n{self.n}_o{self.n_outliers}"


@dataclass(frozen=True)
class MetricRow:
    """Bias and RMSE of one estimator over the converged replications."""

    scenario_id: str
    estimator: Method
    bias: tuple
    rmse: tuple
    failures: int
    replications: int


def inject_outliers(s, m: int) -> Sample:
    """Replace the last ``m`` values by five times the original maximum."""
    values = np.array(s.values if isinstance(s, Sample) else s, dtype=float)
    if m < 0 or m >= values.size:
        raise DomainError(f"need 0 <= m < n, got m={m}, n={values.size}")
    if m:
        values[-m:] = 5.0 * values.max()
    return Sample(values)


def bias_rmse(estimates: Sequence, truth: Params):
    """Per-parameter ``mean(est - truth)`` and ``sqrt(mean((est - truth)**2))``."""
    est = np.array([e.as_array() if isinstance(e, Params) else e for e in estimates], dtype=float)
    if est.size == 0:
        raise ValueError("no estimates to summarise")
    err = est.reshape(-1, 3) - truth.as_array()
    return err.mean(axis=0), np.sqrt(np.mean(err ** 2, axis=0))


def replication_sample(sc: Scenario, r: int) -> Sample:
    """Contaminated sample of replication ``r``; its stream is ``SeedSequence([seed, r])``."""
    rng = np.random.default_rng(np.random.SeedSequence([sc.seed, r]))
    return inject_outliers(sample(sc.truth, sc.n, rng), sc.n_outliers)


def _replicate(args):
    sc, r, settings = args
    s = replication_sample(sc, r)
    out = {}
    for method, res in fit_many(s, sc.estimators, settings).items():
        ok = not isinstance(res, Exception) and res.converged
        out[method] = res.params.as_array() if ok else None
    return out


def run_scenario(sc: Scenario, settings: FitSettings | None = None,
                 jobs: int = 1) -> list[MetricRow]:
    """One :class:`MetricRow` per estimator, in the order of ``sc.estimators``.

    Failed or non-converged fits are left out of bias and RMSE and counted
    in ``failures``; if every replication fails both are NaN.
    """
    settings = settings or FitSettings()
    tasks = [(sc, r, settings) for r in range(sc.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reps = list(pool.map(_replicate, tasks))
    else:
        reps = [_replicate(t) for t in tasks]

    rows = []
    for method in sc.estimators:
        ests = [rep[method] for rep in reps if rep[method] is not None]
        failures = sc.replications - len(ests)
        if ests:
            bias, rmse = bias_rmse(ests, sc.truth)
        else:
            bias = rmse = np.full(3, np.nan)
        if failures:
            log.info("%s %s: %d of %d replications failed", sc.scenario_id, method.value,
                     failures, sc.replications)
        rows.append(MetricRow(sc.scenario_id, method, tuple(map(float, bias)),
                              tuple(map(float, rmse)), failures, sc.replications))
    return rows


def paper_grid(replications: int = 100, seed: int = DEFAULT_SEED,
               estimators: Iterable = ALL_METHODS) -> list[Scenario]:
    """Nine parameter triples times three (n, outliers) settings."""
    estimators = tuple(estimators)
    return [Scenario(Params(*tr), n, m, replications, seed, estimators)
            for n, m in GRID_SIZES for tr in GRID_TRIPLES]


# ---------------------------------------------------------------------------
# output

CSV_HEADER = ("scenario_id", "estimator", "parameter", "bias", "rmse", "failures")


def _num(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.10g}"


def to_csv(rows: Iterable[MetricRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        for j, name in enumerate(PARAMETERS):
            w.writerow((row.scenario_id, row.estimator.value, name, _num(row.bias[j]),
                        _num(row.rmse[j]), row.failures))
    return buf.getvalue()


def format_table(results: Sequence[tuple[Scenario, list[MetricRow]]]) -> str:
    """Aligned text table: one block per parameter, ``bias (rmse)`` cells."""
    methods = []
    for _, rows in results:
        for r in rows:
            if r.estimator not in methods:
                methods.append(r.estimator)
    labels = []
    for sc, _ in results:
        a, c, k = sc.truth
        labels.append(f"({a:g},{c:g},{k:g}) n={sc.n} o={sc.n_outliers}")
    width = max([len(s) for s in labels] + [10])
    cell = 22
    lines = []
    for j, name in enumerate(PARAMETERS):
        lines.append(f"Parameter {name}")
        lines.append(" " * width + "".join(f"{m.value:>{cell}}" for m in methods))
        for label, (_, rows) in zip(labels, results):
            by = {r.estimator: r for r in rows}
            cells = []
            for m in methods:
                r = by.get(m)
                txt = "" if r is None else f"{r.bias[j]:.4f} ({r.rmse[j]:.4f})"
                cells.append(f"{txt:>{cell}}")
            lines.append(f"{label:<{width}}" + "".join(cells))
        lines.append("")
    return "\n".join(lines)
