"""Segment cost functions evaluated from cumulative summaries.

Every cost works on half-open index pairs ``(t, s)``, i.e. the segment
``values[t:s]`` (observations ``t+1 .. s`` in 1-based terms). Gaussian costs
are O(1) per segment; the AR-MDL cost is O(p_max**2) per segment because
sample autocovariances are recovered from lagged-product prefix sums.

Each model owns a numba-compiled scalar ``kernel(table, params, t, s)`` that
the search routines call in their inner loops.

Costs that would be ``-inf`` on constant segments are kept finite by a
variance floor of ``1e-12 * (var(y) + 1e-300)``. The floor is applied as a
constraint on the variance parameter, so the value is still a maximised
(constrained) likelihood and the costs stay subadditive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import ChangepointError, InfeasibleError, TimeSeries, as_series

__all__ = [
    "SummaryStats",
    "CostModel",
    "NormalMeanCost",
    "NormalVarCost",
    "NormalMeanVarCost",
    "ARMDLCost",
    "cost_normal_mean",
    "cost_normal_var",
    "cost_normal_meanvar",
    "cost_ar_mdl",
    "pruning_constant",
    "levinson_durbin",
    "make_cost_model",
    "MODELS",
]

LOG2PI = math.log(2.0 * math.pi)
FLOOR_SCALE = 1e-12


@dataclass(frozen=True, eq=False)
class SummaryStats:
    """Precomputed cumulative arrays for one series under one cost model.

    ``table`` rows are prefix sums with a leading zero column, so the sum over
    ``values[t:s]`` is ``table[r, s] - table[r, t]``. ``params`` holds the
    model's scalar parameters in the layout its kernel expects.
    """

    table: np.ndarray
    params: np.ndarray
    values: np.ndarray
    floor: float

    @property
    def n(self) -> int:
        return int(self.values.size)


def variance_floor(values: np.ndarray) -> float:
    return FLOOR_SCALE * (float(np.var(values)) + 1e-300)


def _prefix(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.size + 1)
    np.cumsum(x, out=out[1:])
    return out


# --- numba kernels -------------------------------------------------------


@numba.njit(cache=True)
def _mean_kernel(table, params, t, s):
    length = s - t
    if length <= 1:
        return 0.0
    s1 = table[0, s] - table[0, t]
    s2 = table[1, s] - table[1, t]
    rss = s2 - s1 * s1 / length
    return rss if rss > 0.0 else 0.0


@numba.njit(cache=True)
def _gauss_twice_nll(length, v, floor):
    sigma2 = v if v > floor else floor
    return length * (LOG2PI + math.log(sigma2) + v / sigma2)


@numba.njit(cache=True)
def _var_kernel(table, params, t, s):
    length = s - t
    v = (table[0, s] - table[0, t]) / length
    if v < 0.0:
        v = 0.0
    return _gauss_twice_nll(length, v, params[1])


@numba.njit(cache=True)
def _meanvar_kernel(table, params, t, s):
    length = s - t
    s1 = table[0, s] - table[0, t]
    s2 = table[1, s] - table[1, t]
    v = (s2 - s1 * s1 / length) / length
    if v < 0.0:
        v = 0.0
    return _gauss_twice_nll(length, v, params[0])


@numba.njit(cache=True)
def _autocov(table, t, s, pmax):
    """Biased sample autocovariances of ``values[t:s]`` at lags 0..pmax."""
    length = s - t
    ybar = (table[0, s] - table[0, t]) / length
    r = np.zeros(pmax + 1)
    for k in range(pmax + 1):
        if k >= length:
            break
        prod = table[1 + k, s - k] - table[1 + k, t]
        head = table[0, s - k] - table[0, t]
        tail = table[0, s] - table[0, t + k]
        r[k] = (prod - ybar * (head + tail) + (length - k) * ybar * ybar) / length
    return r


@numba.njit(cache=True)
def _levinson(r, pmax, floor):
    """Innovation variances for orders 0..pmax (floored) and last coefficients."""
    sig = np.empty(pmax + 1)
    a = np.zeros(pmax + 1)
    prev = np.zeros(pmax + 1)
    err = r[0]
    sig[0] = err if err > floor else floor
    for p in range(1, pmax + 1):
        if err <= floor:
            sig[p] = floor
            continue
        acc = r[p]
        for j in range(1, p):
            acc -= prev[j] * r[p - j]
        k = acc / err
        a[p] = k
        for j in range(1, p):
            a[j] = prev[j] - k * prev[p - j]
        err = err * (1.0 - k * k)
        sig[p] = err if err > floor else floor
        for j in range(1, p + 1):
            prev[j] = a[j]
    return sig, a


@numba.njit(cache=True)
def _ar_mdl_eval(table, params, t, s):
    pmax = int(params[0])
    floor = params[1]
    length = s - t
    r = _autocov(table, t, s, pmax)
    sig, _ = _levinson(r, pmax, floor)
    best = np.inf
    best_p = 1
    for p in range(1, pmax + 1):
        c = (math.log(p) + 0.5 * (p + 2) * math.log(length)
             + 0.5 * length * math.log(2.0 * math.pi * sig[p]))
        if c < best:
            best = c
            best_p = p
    return best, best_p


@numba.njit(cache=True)
def _ar_mdl_kernel(table, params, t, s):
    return _ar_mdl_eval(table, params, t, s)[0]


# --- cost models ---------------------------------------------------------


class CostModel:
    """Base class: a segment cost ``C(values[t:s])`` and its pruning constant.

    Subclasses define ``name``, ``n_params`` (parameters added per extra
    segment, used by SIC/AIC), ``min_segment_length``, ``summarize`` and
    ``kernel``.
    """

    name = "abstract"
    n_params = 1
    min_segment_length = 1
    kernel = None

    def summarize(self, series) -> SummaryStats:
        raise NotImplementedError

    def cost(self, stats: SummaryStats, t: int, s: int) -> float:
        self._check_segment(stats, t, s)
        return float(self.kernel(stats.table, stats.params, t, s))

    def segment_params(self, stats: SummaryStats, t: int, s: int) -> dict:
        raise NotImplementedError

    def pruning_constant(self, n: int) -> float:
        return 0.0

    def config(self) -> dict:
        return {"name": self.name}

    def _check_segment(self, stats, t, s):
        if not 0 <= t < s <= stats.n:
            raise ChangepointError(f"segment ({t}, {s}] outside series of length {stats.n}")
        if s - t < self.min_segment_length:
            raise ChangepointError(
                f"segment ({t}, {s}] shorter than minimum length {self.min_segment_length}"
            )

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.config().items() if k != "name")
        return f"{type(self).__name__}({args})"


class NormalMeanCost(CostModel):
    """Change in mean, unit variance: the segment's residual sum of squares.

    Segmentation-independent constants (``n log 2 pi``) are dropped, so totals
    are only comparable with other totals from this model.
    """

    name = "mean"
    n_params = 1
    min_segment_length = 1
    kernel = staticmethod(_mean_kernel)

    def __init__(self, min_segment_length: int = 1):
        if min_segment_length < 1:
            raise ChangepointError("minimum segment length must be >= 1")
        self.min_segment_length = int(min_segment_length)

    def summarize(self, series) -> SummaryStats:
        y = as_series(series).values
        c = y - y.mean()
        table = np.vstack([_prefix(c), _prefix(c * c)])
        return SummaryStats(table, np.zeros(1), y, variance_floor(y))

    def segment_params(self, stats, t, s):
        return {"mean": float(stats.values[t:s].mean())}

    def config(self):
        return {"name": self.name, "min_segment_length": self.min_segment_length}


class NormalVarCost(CostModel):
    """Change in variance around a fixed mean ``mu``.

    ``L * (log 2 pi + log(sum (y - mu)^2 / L) + 1)``. ``mu=None`` plugs in the
    full-series sample mean.
    """

    name = "var"
    n_params = 1
    min_segment_length = 2
    kernel = staticmethod(_var_kernel)

    def __init__(self, mu: float | None = None, min_segment_length: int = 2):
        if min_segment_length < 1:
            raise ChangepointError("minimum segment length must be >= 1")
        self.mu = None if mu is None else float(mu)
        self.min_segment_length = int(min_segment_length)

    def resolve_mu(self, values: np.ndarray) -> float:
        return float(values.mean()) if self.mu is None else self.mu

    def summarize(self, series) -> SummaryStats:
        y = as_series(series).values
        mu = self.resolve_mu(y)
        floor = variance_floor(y)
        table = _prefix((y - mu) ** 2).reshape(1, -1)
        return SummaryStats(table, np.array([mu, floor]), y, floor)

    def segment_params(self, stats, t, s):
        mu = float(stats.params[0])
        return {"mean": mu, "variance": float(np.mean((stats.values[t:s] - mu) ** 2))}

    def config(self):
        return {"name": self.name, "mu": self.mu, "min_segment_length": self.min_segment_length}


class NormalMeanVarCost(CostModel):
    """Change in both mean and variance: ``L * (log 2 pi + log sigma_hat^2 + 1)``."""

    name = "meanvar"
    n_params = 2
    min_segment_length = 2
    kernel = staticmethod(_meanvar_kernel)

    def __init__(self, min_segment_length: int = 2):
        if min_segment_length < 1:
            raise ChangepointError("minimum segment length must be >= 1")
        self.min_segment_length = int(min_segment_length)

    def summarize(self, series) -> SummaryStats:
        y = as_series(series).values
        c = y - y.mean()
        floor = variance_floor(y)
        table = np.vstack([_prefix(c), _prefix(c * c)])
        return SummaryStats(table, np.array([floor]), y, floor)

    def segment_params(self, stats, t, s):
        seg = stats.values[t:s]
        return {"mean": float(seg.mean()), "variance": float(seg.var())}

    def config(self):
        return {"name": self.name, "min_segment_length": self.min_segment_length}


class ARMDLCost(CostModel):
    """Minimum-description-length cost of an AR(p) fit, minimised over p.

    For each order ``p in 1..p_max``::

        log p + (p + 2)/2 * log L + L/2 * log(2 pi sigma_hat(p)^2)

    where ``sigma_hat(p)^2`` is the Yule-Walker innovation variance from the
    biased sample autocovariances of the segment. The minimum segment length
    defaults to ``p_max + 2``.
    """

    name = "ar-mdl"
    kernel = staticmethod(_ar_mdl_kernel)

    def __init__(self, p_max: int = 7, min_segment_length: int | None = None):
        if p_max < 1:
            raise ChangepointError("p_max must be >= 1")
        self.p_max = int(p_max)
        self.n_params = self.p_max + 1
        self.min_segment_length = self.p_max + 2 if min_segment_length is None else int(min_segment_length)
        if self.min_segment_length < 2:
            raise ChangepointError("AR fitting needs segments of length >= 2")

    def summarize(self, series) -> SummaryStats:
        y = as_series(series).values
        c = y - y.mean()
        n = c.size
        rows = [_prefix(c)]
        for k in range(self.p_max + 1):
            lagged = np.zeros(n)
            if k < n:
                lagged[: n - k] = c[: n - k] * c[k:]
            rows.append(_prefix(lagged))
        floor = variance_floor(y)
        return SummaryStats(np.vstack(rows), np.array([float(self.p_max), floor]), y, floor)

    def cost_and_order(self, stats, t, s) -> tuple[float, int]:
        self._check_segment(stats, t, s)
        c, p = _ar_mdl_eval(stats.table, stats.params, t, s)
        return float(c), int(p)

    def segment_params(self, stats, t, s):
        _, p = self.cost_and_order(stats, t, s)
        r = _autocov(stats.table, t, s, p)
        sig, a = _levinson(r, p, stats.floor)
        return {
            "order": p,
            "coefficients": [float(x) for x in a[1 : p + 1]],
            "innovation_variance": float(sig[p]),
            "mean": float(stats.values[t:s].mean()),
        }

    def pruning_constant(self, n: int) -> float:
        return -(2.0 * math.log(self.p_max) + 0.5 * self.p_max * math.log(n))

    def config(self):
        return {"name": self.name, "p_max": self.p_max, "min_segment_length": self.min_segment_length}


MODELS = {
    "mean": NormalMeanCost,
    "var": NormalVarCost,
    "meanvar": NormalMeanVarCost,
    "ar-mdl": ARMDLCost,
}


def make_cost_model(name: str, **kwargs) -> CostModel:
    """Build a cost model by name, dropping options the model does not take."""
    try:
        cls = MODELS[name]
    except KeyError:
        raise ChangepointError(f"unknown cost model {name!r}; choose from {sorted(MODELS)}") from None
    accepted = {
        "mean": {"min_segment_length"},
        "var": {"mu", "min_segment_length"},
        "meanvar": {"min_segment_length"},
        "ar-mdl": {"p_max", "min_segment_length"},
    }[name]
    return cls(**{k: v for k, v in kwargs.items() if k in accepted and v is not None})


# --- functional surface ----------------------------------------------------


def cost_normal_mean(stats: SummaryStats, t: int, s: int) -> float:
    """Residual sum of squares of ``values[t:s]`` about its own mean."""
    if s - t < 1:
        raise ChangepointError("segment must contain at least one observation")
    return float(_mean_kernel(stats.table, stats.params, t, s))


def cost_normal_var(stats: SummaryStats, t: int, s: int) -> float:
    """Twice the negative Gaussian log-likelihood with the fixed mean baked into ``stats``."""
    if s - t < 2:
        raise ChangepointError("variance cost needs segments of length >= 2")
    return float(_var_kernel(stats.table, stats.params, t, s))


def cost_normal_meanvar(stats: SummaryStats, t: int, s: int) -> float:
    if s - t < 2:
        raise ChangepointError("mean-and-variance cost needs segments of length >= 2")
    return float(_meanvar_kernel(stats.table, stats.params, t, s))


def cost_ar_mdl(series, t: int, s: int, p_max: int, stats: SummaryStats | None = None) -> tuple[float, int]:
    """MDL cost of ``values[t:s]`` and the minimising AR order."""
    model = ARMDLCost(p_max)
    if stats is None:
        stats = model.summarize(series)
    if s - t < model.min_segment_length:
        raise InfeasibleError(f"AR-MDL with p_max={p_max} needs segments of length >= {p_max + 2}")
    return model.cost_and_order(stats, t, s)


def pruning_constant(model: CostModel, n: int) -> float:
    """The constant ``K`` with ``C(a) + C(b) + K <= C(a + b)`` for ``model``."""
    if n < 1:
        raise ChangepointError("n must be >= 1")
    return model.pruning_constant(n)


def levinson_durbin(r, order: int) -> tuple[np.ndarray, float]:
    """AR coefficients and innovation variance from autocovariances ``r[0..order]``."""
    r = np.asarray(r, dtype=np.float64)
    if r.size < order + 1:
        raise ChangepointError("need autocovariances up to the requested order")
    sig, a = _levinson(r[: order + 1].copy(), order, 0.0)
    return a[1 : order + 1].copy(), float(sig[order])


def summarize(model: CostModel, series) -> SummaryStats:
    return model.summarize(series if isinstance(series, TimeSeries) else as_series(series))
