"""Penalty constructors and the iterative scheme for concave penalties.

Two pathways exist for description-length style objectives:

* Penalty terms that belong to a single segment (AR order, segment length)
  live inside the segment cost, see :class:`~peltseg.costs.ARMDLCost`.
* Terms that depend only on the number of changepoints form ``beta * f(m)``.
  When ``f`` is concave, :func:`concave_iteration` finds a per-changepoint
  constant ``gamma = beta * f'(m)`` that PELT can use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import ChangepointError, PenaltyScheme, Segmentation, as_series
from .costs import CostModel
from .search import pelt

__all__ = [
    "make_constant_penalty",
    "make_concave_penalty",
    "make_mdl_penalty",
    "parse_penalty",
    "concave_iteration",
    "IterationRecord",
    "ConcaveResult",
    "CONCAVE_SHAPES",
]


def make_constant_penalty(kind: str, p: int = 1, n: int | None = None, value: float | None = None) -> PenaltyScheme:
    """Linear penalty ``beta * m`` with ``beta`` from AIC (``2p``), SIC (``p log n``) or a manual value."""
    kind = kind.lower()
    if kind == "manual":
        if value is None:
            raise ChangepointError("manual penalty needs a value")
        if not (value >= 0 and math.isfinite(value)):
            raise ChangepointError(f"manual penalty must be finite and >= 0, got {value}")
        return PenaltyScheme("constant", float(value), label="manual")
    if p < 1:
        raise ChangepointError("p must be >= 1")
    if kind == "aic":
        return PenaltyScheme("constant", 2.0 * p, label="aic")
    if kind in ("sic", "bic"):
        if n is None or n < 2:
            raise ChangepointError("SIC needs n >= 2")
        return PenaltyScheme("constant", p * math.log(n), label="sic")
    raise ChangepointError(f"unknown penalty kind {kind!r}")


# f(0) = 0 for every shape; derivatives are only queried at m >= 1.
CONCAVE_SHAPES = {
    "linear": (lambda m: float(m), lambda m: 1.0),
    "sqrt": (math.sqrt, lambda m: 0.5 / math.sqrt(m)),
    "log": (math.log1p, lambda m: 1.0 / (1.0 + m)),
}


def make_concave_penalty(shape: str, beta: float) -> PenaltyScheme:
    try:
        f, fprime = CONCAVE_SHAPES[shape]
    except KeyError:
        raise ChangepointError(f"unknown concave shape {shape!r}; choose from {sorted(CONCAVE_SHAPES)}") from None
    return PenaltyScheme("concave", float(beta), f, fprime, label=f"concave:{shape}")


def make_mdl_penalty(n: int) -> PenaltyScheme:
    """Changepoint-count part of an MDL criterion: ``log(m + 1) + m log n``.

    Combined with :class:`~peltseg.costs.ARMDLCost` this gives the full
    description length up to a constant ``log n``.
    """
    if n < 2:
        raise ChangepointError("MDL penalty needs n >= 2")
    log_n = math.log(n)
    return PenaltyScheme(
        "concave", 1.0, lambda m: math.log1p(m) + m * log_n, lambda m: 1.0 / (1.0 + m) + log_n, label="mdl"
    )


def parse_penalty(spec: str, model: CostModel, n: int) -> PenaltyScheme:
    """Parse ``sic``, ``aic``, ``manual:<x>``, ``mdl`` or ``concave:<shape>[:<beta>]``.

    Concave shapes default to the SIC scale ``p log n``.
    """
    parts = spec.strip().lower().split(":")
    head = parts[0]
    if head in ("sic", "bic", "aic") and len(parts) == 1:
        return make_constant_penalty(head, model.n_params, n)
    if head == "manual" and len(parts) == 2:
        try:
            value = float(parts[1])
        except ValueError:
            raise ChangepointError(f"bad manual penalty value {parts[1]!r}") from None
        return make_constant_penalty("manual", value=value)
    if head == "mdl" and len(parts) == 1:
        return make_mdl_penalty(n)
    if head == "concave" and len(parts) in (2, 3):
        beta = model.n_params * math.log(max(n, 2))
        if len(parts) == 3:
            try:
                beta = float(parts[2])
            except ValueError:
                raise ChangepointError(f"bad penalty scale {parts[2]!r}") from None
        return make_concave_penalty(parts[1], beta)
    raise ChangepointError(f"cannot parse penalty spec {spec!r}")


@dataclass(frozen=True)
class IterationRecord:
    gamma: float
    m: int
    score: float
    best_score: float


@dataclass(frozen=True)
class ConcaveResult:
    segmentation: Segmentation
    trace: tuple[IterationRecord, ...]
    converged: bool
    cycled: bool = False
    info: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        """Number of PELT runs performed."""
        return len(self.trace)


def concave_iteration(
    series,
    model: CostModel,
    penalty: PenaltyScheme,
    max_iters: int = 20,
    initial_gamma: float | None = None,
) -> ConcaveResult:
    """Minimise ``beta * f(m) + sum C`` by re-running PELT with ``gamma = beta * f'(m)``.

    Starts from ``gamma = beta * f'(1)`` and stops once the changepoint count
    repeats. A count that comes back after an intermediate value is treated
    as a cycle and also stops. ``f'(0)`` is never queried: a run that finds no
    changepoints is followed by ``gamma = beta * f'(1)``.

    Not guaranteed to reach the global optimum. The returned segmentation is
    the best-scoring iterate, scored under the concave objective.
    """
    if max_iters < 1:
        raise ChangepointError("max_iters must be >= 1")
    series = as_series(series)
    gamma = penalty.derivative(1) if initial_gamma is None else float(initial_gamma)

    trace: list[IterationRecord] = []
    seen: list[int] = []
    best: Segmentation | None = None
    best_score = math.inf
    converged = cycled = False
    for _ in range(max_iters):
        seg = pelt(series, model, gamma)
        sum_cost = seg.segment_cost_sum()
        score = sum_cost + penalty.value(seg.m)
        if score <= best_score:
            best_score = score
            best = Segmentation(
                seg.changepoints, seg.n, score, penalty.value(seg.m), seg.segments,
                {**seg.info, "algorithm": "pelt-concave", "gamma": gamma, "penalty": penalty.describe()},
            )
        trace.append(IterationRecord(gamma, seg.m, score, best_score))
        if seen and seen[-1] == seg.m:
            converged = True
            break
        if seg.m in seen:
            cycled = True
            break
        seen.append(seg.m)
        gamma = penalty.derivative(seg.m if seg.m > 0 else 1)
    return ConcaveResult(best, tuple(trace), converged, cycled)
