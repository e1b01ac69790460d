"""Segmentation search: Optimal Partitioning, PELT, Segment Neighbourhood,
Binary Segmentation and an exhaustive oracle.

All exact methods break ties between equally good last changepoints by
taking the smallest one, so their outputs can be compared changepoint by
changepoint.

Minimum segment length ``ell``: candidate ``tau`` is only evaluated at step
``s`` when ``s - tau >= ell``. PELT's pruning test at step ``s`` shows that
``tau`` loses to ``s`` for every later end ``T``; with ``ell > 1`` that is
only true once ``s`` itself is admissible (``T >= s + ell``), so discarding
is deferred until then. With ``ell == 1`` this is the textbook rule.
"""

from __future__ import annotations

import heapq
import itertools
import math
import warnings

import numba
import numpy as np

from .core import (
    ChangepointError,
    DPState,
    InfeasibleError,
    PenaltyScheme,
    Segmentation,
    SegmentFit,
    TimeSeries,
    as_series,
)
from .costs import CostModel, SummaryStats

__all__ = [
    "run_dp",
    "optimal_partitioning",
    "pelt",
    "binary_segmentation",
    "segment_neighbourhood",
    "brute_force_oracle",
    "build_segmentation",
    "check_pruning_constant",
    "select_from_neighbourhood",
]

_NEVER = np.iinfo(np.int64).max
ORACLE_MAX_N = 20


@numba.njit(cache=True)
def _dp_kernel(cost, table, params, n, beta, K, ell, prune):
    F = np.full(n + 1, np.inf)
    F[0] = -beta
    cp = np.full(n + 1, -1, dtype=np.int64)
    cp[0] = 0
    counts = np.zeros(n + 1, dtype=np.int64)
    R = np.empty(n + 1, dtype=np.int64)
    vals = np.empty(n + 1)
    prune_at = np.full(n + 1, _NEVER, dtype=np.int64)
    n_r = 0
    for s in range(ell, n + 1):
        new = s - ell
        if new == 0 or new >= ell:
            R[n_r] = new
            n_r += 1
        if prune:
            w = 0
            for i in range(n_r):
                tau = R[i]
                if prune_at[tau] > s:
                    R[w] = tau
                    w += 1
            n_r = w
        best = np.inf
        arg = -1
        for i in range(n_r):
            tau = R[i]
            v = F[tau] + cost(table, params, tau, s)
            vals[i] = v
            if v < best:
                best = v
                arg = tau
        counts[s] = n_r
        F[s] = best + beta
        cp[s] = arg
        if prune:
            limit = F[s]
            for i in range(n_r):
                if vals[i] + K > limit:
                    tau = R[i]
                    if prune_at[tau] > s + ell:
                        prune_at[tau] = s + ell
    alive = np.empty(n_r, dtype=np.int64)
    w = 0
    for i in range(n_r):
        if prune_at[R[i]] > n:
            alive[w] = R[i]
            w += 1
    return F, cp, counts, alive[:w]


@numba.njit(cache=True)
def _sn_kernel(cost, table, params, n, Q, ell):
    G = np.full((Q + 1, n + 1), np.inf)
    back = np.full((Q + 1, n + 1), -1, dtype=np.int64)
    for s in range(ell, n + 1):
        G[0, s] = cost(table, params, 0, s)
        back[0, s] = 0
    for m in range(1, Q + 1):
        for s in range((m + 1) * ell, n + 1):
            best = np.inf
            arg = -1
            for t in range(m * ell, s - ell + 1):
                if G[m - 1, t] < np.inf:
                    v = G[m - 1, t] + cost(table, params, t, s)
                    if v < best:
                        best = v
                        arg = t
            G[m, s] = best
            back[m, s] = arg
    return G, back


@numba.njit(cache=True)
def _best_split(cost, table, params, a, b, ell):
    best = np.inf
    arg = -1
    for tau in range(a + ell, b - ell + 1):
        v = cost(table, params, a, tau) + cost(table, params, tau, b)
        if v < best:
            best = v
            arg = tau
    return arg, best


def _prepare(series, model: CostModel, beta: float | None = None):
    series = as_series(series)
    if series.n < model.min_segment_length:
        raise InfeasibleError(
            f"series of length {series.n} is shorter than one {model.name} segment "
            f"(minimum length {model.min_segment_length})"
        )
    if beta is not None and not (beta >= 0 and math.isfinite(beta)):
        raise ChangepointError(f"penalty must be finite and >= 0, got {beta}")
    return series, model.summarize(series)


def build_segmentation(
    series: TimeSeries,
    model: CostModel,
    changepoints,
    penalty: float,
    stats: SummaryStats | None = None,
    total_cost: float | None = None,
    info: dict | None = None,
) -> Segmentation:
    """Attach per-segment costs and fitted parameters to a changepoint set.

    ``penalty`` is the penalty term charged (already ``beta * f(m)``). When
    ``total_cost`` is omitted it is the sum of segment costs plus ``penalty``.
    """
    stats = model.summarize(series) if stats is None else stats
    bounds = (0, *changepoints, series.n)
    segments = []
    for t, s in zip(bounds[:-1], bounds[1:]):
        segments.append(SegmentFit(t, s, model.cost(stats, t, s), model.segment_params(stats, t, s)))
    if total_cost is None:
        total_cost = math.fsum(seg.cost for seg in segments) + penalty
    return Segmentation(tuple(changepoints), series.n, float(total_cost), float(penalty), tuple(segments), info or {})


def run_dp(series, model: CostModel, beta: float, prune: bool = True, K: float | None = None) -> DPState:
    """Fill the optimal-partitioning arrays, optionally with PELT pruning."""
    series, stats = _prepare(series, model, beta)
    if K is None:
        K = model.pruning_constant(series.n)
    F, cp, counts, alive = _dp_kernel(
        model.kernel, stats.table, stats.params, series.n, float(beta), float(K),
        model.min_segment_length, bool(prune),
    )
    return DPState(F=F, cp=cp, R=alive, candidates=counts)


def _from_state(series, model, beta, state: DPState, algorithm: str, extra: dict) -> Segmentation:
    cps = state.changepoints()
    info = {"algorithm": algorithm, "beta": float(beta), **extra}
    return build_segmentation(
        series, model, cps, beta * len(cps), total_cost=float(state.F[-1]), info=info
    )


def optimal_partitioning(series, model: CostModel, beta: float) -> Segmentation:
    """Exact minimiser of ``sum C(segment) + beta * m`` in O(n^2) cost evaluations."""
    series = as_series(series)
    state = run_dp(series, model, beta, prune=False)
    return _from_state(series, model, beta, state, "op", {})


def check_pruning_constant(series, model: CostModel, samples: int = 200, seed: int = 0, K: float | None = None) -> int:
    """Count sampled triples ``t < s < T`` violating ``C(t,s) + C(s,T) + K <= C(t,T)``."""
    series, stats = _prepare(series, model)
    n, ell = series.n, model.min_segment_length
    if n < 2 * ell:
        return 0
    K = model.pruning_constant(n) if K is None else K
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(samples):
        t = int(rng.integers(0, n - 2 * ell + 1))
        T = int(rng.integers(t + 2 * ell, n + 1))
        s = int(rng.integers(t + ell, T - ell + 1))
        whole = model.cost(stats, t, T)
        if model.cost(stats, t, s) + model.cost(stats, s, T) + K > whole + 1e-9 * max(1.0, abs(whole)):
            bad += 1
    return bad


def pelt(
    series,
    model: CostModel,
    beta: float,
    prune: bool = True,
    K: float | None = None,
    check_pruning: bool = False,
) -> Segmentation:
    """Optimal partitioning with candidate pruning; same optimum, far fewer evaluations.

    ``K`` defaults to the model's pruning constant. ``check_pruning`` samples
    the subadditivity assumption first and warns if it looks violated; the
    declared constant is used either way.

    The returned ``info`` holds the largest and mean candidate-set sizes.
    """
    series = as_series(series)
    if K is None:
        K = model.pruning_constant(series.n)
    if check_pruning:
        bad = check_pruning_constant(series, model, K=K)
        if bad:
            warnings.warn(
                f"{bad} sampled triples violate C(a)+C(b)+K <= C(a+b) for K={K:.6g}; "
                "pruning may discard optimal changepoints",
                RuntimeWarning,
                stacklevel=2,
            )
    state = run_dp(series, model, beta, prune=prune, K=K)
    evaluated = state.candidates[model.min_segment_length :]
    stats = {
        "K": float(K),
        "max_candidates": int(evaluated.max()),
        "mean_candidates": float(evaluated.mean()),
        "evaluations": int(evaluated.sum()),
    }
    return _from_state(series, model, beta, state, "pelt", stats)


def binary_segmentation(
    series,
    model: CostModel,
    beta: float,
    max_changepoints: int | None = None,
) -> Segmentation:
    """Greedy top-down splitting.

    Without ``max_changepoints`` an interval is split at its best point only
    when ``C(left) + C(right) + beta < C(interval)``. With it, the interval
    whose best split gains most is split next until exactly that many
    changepoints exist (or nothing can be split), ignoring ``beta``.
    """
    series, stats = _prepare(series, model, beta)
    ell = model.min_segment_length
    if max_changepoints is not None and max_changepoints < 0:
        raise ChangepointError("max_changepoints must be >= 0")
    kernel, table, params = model.kernel, stats.table, stats.params

    heap = []

    def push(a, b):
        if b - a < 2 * ell:
            return
        tau, split = _best_split(kernel, table, params, a, b, ell)
        whole = float(kernel(table, params, a, b))
        heapq.heappush(heap, (-(whole - split), tau, a, b))

    push(0, series.n)
    cps = []
    while heap:
        if max_changepoints is not None and len(cps) >= max_changepoints:
            break
        neg_gain, tau, a, b = heapq.heappop(heap)
        if max_changepoints is None and not -neg_gain > beta:
            break
        cps.append(int(tau))
        push(a, tau)
        push(tau, b)
    cps.sort()
    info = {"algorithm": "bs" if max_changepoints is None else "subbs", "beta": float(beta)}
    return build_segmentation(series, model, cps, beta * len(cps), stats=stats, info=info)


def segment_neighbourhood(series, model: CostModel, Q: int) -> list[Segmentation | None]:
    """Best segmentation with exactly ``m`` changepoints for every ``m <= Q``.

    Entry ``m`` is ``None`` when ``m + 1`` admissible segments do not fit.
    Reported totals carry no penalty.
    """
    if Q < 0:
        raise ChangepointError("Q must be >= 0")
    series, stats = _prepare(series, model)
    n, ell = series.n, model.min_segment_length
    q_feasible = min(Q, n // ell - 1)
    G, back = _sn_kernel(model.kernel, stats.table, stats.params, n, q_feasible, ell)
    out: list[Segmentation | None] = []
    for m in range(Q + 1):
        if m > q_feasible or not np.isfinite(G[m, n]):
            out.append(None)
            continue
        cps = []
        s = n
        for k in range(m, 0, -1):
            s = int(back[k, s])
            cps.append(s)
        cps.reverse()
        out.append(build_segmentation(
            series, model, cps, 0.0, stats=stats, total_cost=float(G[m, n]),
            info={"algorithm": "sn", "m": m},
        ))
    return out


def select_from_neighbourhood(results, penalty: PenaltyScheme | float) -> Segmentation:
    """Pick the penalised optimum from Segment Neighbourhood output."""
    if not isinstance(penalty, PenaltyScheme):
        penalty = PenaltyScheme("constant", float(penalty))
    best = None
    best_score = math.inf
    for seg in results:
        if seg is None:
            continue
        score = seg.total_cost + penalty.value(seg.m)
        if score < best_score:
            best, best_score = seg, score
    if best is None:
        raise InfeasibleError("no feasible segmentation")
    return Segmentation(
        best.changepoints, best.n, best_score, penalty.value(best.m), best.segments,
        {**best.info, "penalty": penalty.describe()},
    )


def _tie_key(cps: tuple[int, ...]) -> tuple[int, ...]:
    # DP backtracking prefers the smallest last changepoint, then the smallest
    # one before it, and so on.
    return (*reversed(cps), 0)


def brute_force_oracle(series, model: CostModel, penalty: PenaltyScheme | float) -> Segmentation:
    """Exhaustive minimiser of ``sum C(segment) + beta * f(m)`` for ``n <= 20``."""
    series, stats = _prepare(series, model)
    n, ell = series.n, model.min_segment_length
    if n > ORACLE_MAX_N:
        raise ChangepointError(f"brute-force oracle refuses n={n} > {ORACLE_MAX_N}")
    if not isinstance(penalty, PenaltyScheme):
        penalty = PenaltyScheme("constant", float(penalty))

    memo: dict[tuple[int, int], float] = {}

    def seg_cost(t, s):
        if (t, s) not in memo:
            memo[(t, s)] = model.cost(stats, t, s)
        return memo[(t, s)]

    best_cps: tuple[int, ...] | None = None
    best = math.inf
    for m in range(n):
        pen = penalty.value(m)
        for cps in itertools.combinations(range(1, n), m):
            bounds = (0, *cps, n)
            if any(b - a < ell for a, b in zip(bounds[:-1], bounds[1:])):
                continue
            total = math.fsum(seg_cost(a, b) for a, b in zip(bounds[:-1], bounds[1:])) + pen
            tol = 1e-12 * max(1.0, abs(best))
            if best_cps is None or total < best - tol:
                best, best_cps = total, cps
            elif abs(total - best) <= tol and _tie_key(cps) < _tie_key(best_cps):
                best, best_cps = min(best, total), cps
    if best_cps is None:
        raise InfeasibleError("no admissible segmentation")
    return build_segmentation(
        series, model, best_cps, penalty.value(len(best_cps)), stats=stats, total_cost=best,
        info={"algorithm": "oracle"},
    )
