"""Simulation designs, accuracy metrics and the runtime benchmark runner."""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import ChangepointError, InfeasibleError, PenaltyScheme, Segmentation, TimeSeries
from .costs import CostModel, NormalVarCost
from .penalty import make_constant_penalty
from .search import binary_segmentation, optimal_partitioning, pelt

__all__ = [
    "SimDesign",
    "EvalReport",
    "changepoint_count",
    "sample_changepoints",
    "generate_variance_series",
    "generate_ar_series",
    "draw_stationary_ar",
    "is_stationary",
    "match_changepoints",
    "evaluate",
    "run_benchmark",
    "BenchmarkResult",
    "CSV_COLUMNS",
    "loglog_slope",
]

VARIANCE_LOG_SD = math.log(10.0) / 2.0
AR_BURN_IN = 100
ROOT_MARGIN = 1.001
CSV_COLUMNS = ["scenario", "n", "m", "algorithm", "rep", "runtime_s", "cost", "mse", "true_det", "false_det"]


def changepoint_count(n: int, growth: str) -> int:
    if growth == "linear":
        return n // 100
    if growth == "sqrt":
        return int(math.floor(math.sqrt(n) / 4))
    if growth == "fixed":
        return 2
    if growth == "ar":
        return int(round(0.003 * n))
    raise ChangepointError(f"unknown growth {growth!r}")


@dataclass(frozen=True)
class SimDesign:
    """A simulation scenario.

    ``growth`` sets the number of changepoints: ``linear`` (n/100), ``sqrt``
    (floor(sqrt(n)/4)), ``fixed`` (2) or ``ar`` (0.003 n); ``m`` overrides it.
    ``law`` is ``variance`` (log-normal segment variances, mean 0) or ``ar``.
    """

    n: int
    growth: str = "linear"
    min_gap: int = 30
    law: str = "variance"
    seed: int = 0
    m: int | None = None

    @property
    def n_changepoints(self) -> int:
        return changepoint_count(self.n, self.growth) if self.m is None else self.m

    @property
    def label(self) -> str:
        return f"{self.law}-{self.growth}-n{self.n}"

    def with_seed(self, seed: int) -> SimDesign:
        return replace(self, seed=seed)

    def check(self) -> None:
        m = self.n_changepoints
        if self.n < 5 or m < 0 or self.min_gap < 1:
            raise InfeasibleError(f"invalid design {self}")
        if m and (self.n - 3) - (m - 1) * (self.min_gap - 1) < m:
            raise InfeasibleError(f"{m} changepoints {self.min_gap} apart do not fit in n={self.n}")


def sample_changepoints(n: int, m: int, min_gap: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` changepoints uniform on ``[2, n-2]`` with consecutive gaps ``>= min_gap``.

    Draws sorted points from a shrunken range and re-inserts the mandatory
    gaps, which is uniform over all admissible configurations.
    """
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    span = (n - 3) - (m - 1) * (min_gap - 1)
    if span < m:
        raise InfeasibleError(f"{m} changepoints {min_gap} apart do not fit in n={n}")
    base = np.sort(rng.choice(span, size=m, replace=False))
    return 2 + base + np.arange(m) * (min_gap - 1)


def generate_variance_series(design: SimDesign) -> tuple[TimeSeries, Segmentation, np.ndarray]:
    """Zero-mean Gaussian data with a log-normal variance per segment.

    Returns the series, the true segmentation and the true variance at each
    point.
    """
    design.check()
    rng = np.random.default_rng(design.seed)
    cps = sample_changepoints(design.n, design.n_changepoints, design.min_gap, rng)
    bounds = np.concatenate([[0], cps, [design.n]])
    variances = np.exp(rng.normal(0.0, VARIANCE_LOG_SD, size=bounds.size - 1))
    theta = np.repeat(variances, np.diff(bounds))
    values = rng.normal(size=design.n) * np.sqrt(theta)
    truth = Segmentation(tuple(cps.tolist()), design.n, info={"variances": variances.tolist()})
    return TimeSeries(values), truth, theta


def ar_roots_modulus(coefs: Sequence[float]) -> np.ndarray:
    """Moduli of the roots of ``1 - a_1 z - ... - a_p z^p``."""
    coefs = np.asarray(coefs, dtype=np.float64)
    if coefs.size == 0:
        return np.zeros(0)
    poly = np.concatenate([-coefs[::-1], [1.0]])
    return np.abs(np.roots(poly))


def is_stationary(coefs: Sequence[float], margin: float = ROOT_MARGIN) -> bool:
    return bool(np.all(ar_roots_modulus(coefs) > margin))


def draw_stationary_ar(order: int, rng: np.random.Generator, max_tries: int = 100_000) -> np.ndarray:
    """Standard-normal AR coefficients, redrawn until the process is stationary."""
    for _ in range(max_tries):
        coefs = rng.normal(size=order)
        if is_stationary(coefs):
            return coefs
    raise ChangepointError(f"no stationary AR({order}) draw in {max_tries} tries")


def generate_ar_series(design: SimDesign, max_order: int = 3) -> tuple[TimeSeries, Segmentation]:
    """Piecewise AR data with unit-variance innovations.

    Each segment draws its order from ``0..max_order`` and stationary
    coefficients. Only the first segment gets a burn-in; later segments use
    the previous observations as their pre-history.
    """
    design.check()
    rng = np.random.default_rng(design.seed)
    cps = sample_changepoints(design.n, design.n_changepoints, design.min_gap, rng)
    bounds = np.concatenate([[0], cps, [design.n]])
    orders = rng.integers(0, max_order + 1, size=bounds.size - 1)
    coef_list = [draw_stationary_ar(int(p), rng) for p in orders]

    out = np.zeros(AR_BURN_IN + design.n)
    eps = rng.normal(size=out.size)
    for i, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        coefs = coef_list[i]
        start = 0 if i == 0 else AR_BURN_IN + a
        for j in range(start, AR_BURN_IN + b):
            acc = eps[j]
            for k, c in enumerate(coefs, start=1):
                if j - k >= 0:
                    acc += c * out[j - k]
            out[j] = acc
    truth = Segmentation(
        tuple(cps.tolist()),
        design.n,
        info={"orders": orders.tolist(), "coefficients": [c.tolist() for c in coef_list]},
    )
    return TimeSeries(out[AR_BURN_IN:]), truth


def match_changepoints(true_cps: Sequence[int], detected: Sequence[int], window: int = 10) -> int:
    """Greedy one-to-one matching within ``window``; closest pairs first."""
    pairs = sorted(
        (abs(d - t), t, d) for t in true_cps for d in detected if abs(d - t) <= window
    )
    used_t, used_d = set(), set()
    matched = 0
    for _, t, d in pairs:
        if t in used_t or d in used_d:
            continue
        used_t.add(t)
        used_d.add(d)
        matched += 1
    return matched


def variance_about_zero(values: np.ndarray, t: int, s: int) -> float:
    seg = values[t:s]
    return float(np.mean(seg * seg))


def pointwise_estimates(values: np.ndarray, seg: Segmentation, theta_hat: Callable) -> np.ndarray:
    out = np.empty(values.size)
    for t, s in seg.bounds():
        out[t:s] = theta_hat(values, t, s)
    return out


@dataclass
class EvalReport:
    mse: float
    true_detected: int
    false_detected: int
    cost_gap: float = math.nan
    runtime: dict = field(default_factory=dict)

    @property
    def detected(self) -> int:
        return self.true_detected + self.false_detected


def evaluate(
    series: TimeSeries,
    truth: Segmentation,
    detected: Segmentation,
    theta: np.ndarray | None = None,
    window: int = 10,
    theta_hat: Callable = variance_about_zero,
) -> EvalReport:
    """Detection counts within ``window`` and pointwise parameter MSE.

    ``theta_hat(values, t, s)`` estimates the segment parameter (default: the
    zero-mean variance MLE). It may return a vector, in which case squared
    errors are summed over coordinates. When ``theta`` is omitted the true
    parameters are refitted on the true segmentation.
    """
    if truth.n != series.n or detected.n != series.n:
        raise ChangepointError("segmentations must match the series length")
    values = series.values
    if theta is None:
        theta = pointwise_estimates(values, truth, theta_hat)
    est = pointwise_estimates(values, detected, theta_hat)
    err = (est - np.asarray(theta, dtype=np.float64)) ** 2
    mse = float(err.sum() / series.n)
    hits = match_changepoints(truth.changepoints, detected.changepoints, window)
    return EvalReport(mse, hits, detected.m - hits)


def loglog_slope(ns: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of ``log(time)`` against ``log(n)``."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(times, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def _timed(fn, repeats: int):
    times = []
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return result, statistics.median(times)


@dataclass
class BenchmarkResult:
    rows: list[dict]
    summary: list[dict]
    errors: list[dict] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: _fmt(row[k]) for k in CSV_COLUMNS})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


ALGORITHMS = ("pelt", "op", "bs", "subbs")


def _mean_se(xs):
    xs = [x for x in xs if x is not None and not (isinstance(x, float) and math.isnan(x))]
    if not xs:
        return math.nan, math.nan
    mean = math.fsum(xs) / len(xs)
    se = statistics.stdev(xs) / math.sqrt(len(xs)) if len(xs) > 1 else math.nan
    return mean, se


def _warm_up(model: CostModel, algorithms) -> None:
    # First calls pay for JIT compilation or cache loading; keep that out of timings.
    warm = TimeSeries(np.random.default_rng(0).normal(size=4 * model.min_segment_length + 8))
    pelt(warm, model, 1.0)
    if "op" in algorithms:
        optimal_partitioning(warm, model, 1.0)
    if "bs" in algorithms or "subbs" in algorithms:
        binary_segmentation(warm, model, 1.0)


def run_benchmark(
    scenarios: Iterable[SimDesign],
    algorithms: Sequence[str] = ("pelt", "op", "bs", "subbs"),
    model: CostModel | None = None,
    penalty: Callable[[int, CostModel], PenaltyScheme] | str = "sic",
    reps: int = 1,
    seed: int = 0,
    timing_repeats: int | Callable[[int], int] = 1,
    window: int = 10,
    progress: Callable[[str], None] | None = None,
) -> BenchmarkResult:
    """Run every algorithm on ``reps`` simulated series per scenario.

    Rep ``r`` of every scenario uses seed ``seed + r``. ``penalty`` is ``sic``,
    ``aic`` or a callable ``(n, model) -> PenaltyScheme``. Timings cover the
    search call only (median over ``timing_repeats`` runs). ``subbs`` is
    binary segmentation forced to PELT's changepoint count; ``cost_gap`` in
    the summary is the mean of ``cost(algorithm) - cost(pelt)``. A failing rep
    is recorded in ``errors`` and skipped.
    """
    model = NormalVarCost(mu=0.0) if model is None else model
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ChangepointError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
    if isinstance(penalty, str):
        kind = penalty

        def penalty(n, mdl):
            return make_constant_penalty(kind, mdl.n_params, n)

    _warm_up(model, algorithms)
    rows: list[dict] = []
    errors: list[dict] = []
    for design in scenarios:
        design.check()
        repeats = timing_repeats(design.n) if callable(timing_repeats) else timing_repeats
        for rep in range(reps):
            d = design.with_seed(seed + rep)
            try:
                if d.law == "variance":
                    series, truth, theta = generate_variance_series(d)
                else:
                    series, truth = generate_ar_series(d)
                    theta = None
                beta = penalty(series.n, model).beta
                results = {}
                need_pelt = any(a in ("pelt", "bs", "subbs") for a in algorithms)
                if need_pelt:
                    results["pelt"] = _timed(lambda: pelt(series, model, beta), repeats)
                for a in algorithms:
                    if a == "op":
                        results[a] = _timed(lambda: optimal_partitioning(series, model, beta), repeats)
                    elif a == "bs":
                        results[a] = _timed(lambda: binary_segmentation(series, model, beta), repeats)
                    elif a == "subbs":
                        m_pelt = results["pelt"][0].m
                        results[a] = _timed(
                            lambda: binary_segmentation(series, model, beta, max_changepoints=m_pelt), repeats
                        )
                ref = results["pelt"][0].total_cost if "pelt" in results else math.nan
                for a in algorithms:
                    seg, runtime = results[a]
                    if d.law == "variance":
                        report = evaluate(series, truth, seg, theta, window=window)
                    else:
                        hits = match_changepoints(truth.changepoints, seg.changepoints, window)
                        report = EvalReport(math.nan, hits, seg.m - hits)
                    rows.append({
                        "scenario": d.label, "n": d.n, "m": d.n_changepoints, "algorithm": a,
                        "rep": rep, "runtime_s": runtime, "cost": seg.total_cost, "mse": report.mse,
                        "true_det": report.true_detected, "false_det": report.false_detected,
                        "detected": seg.m, "cost_gap": seg.total_cost - ref,
                    })
            except Exception as exc:  # noqa: BLE001 - recorded per rep, not fatal
                errors.append({"scenario": d.label, "rep": rep, "error": f"{type(exc).__name__}: {exc}"})
            if progress is not None:
                progress(f"{d.label} rep {rep}")
    return BenchmarkResult(rows, summarize_rows(rows), errors)


def summarize_rows(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["scenario"], row["n"], row["m"], row["algorithm"]), []).append(row)
    out = []
    for (scenario, n, m, algorithm), rs in groups.items():
        entry = {"scenario": scenario, "n": n, "m": m, "algorithm": algorithm, "reps": len(rs)}
        for key in ("runtime_s", "cost", "mse", "true_det", "false_det", "cost_gap"):
            mean, se = _mean_se([r[key] for r in rs])
            entry[key] = mean
            entry[f"{key}_se"] = se
        out.append(entry)
    return out
