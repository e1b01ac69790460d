"""Shared domain types: series, segmentations, penalties and DP state.

Changepoint convention
----------------------
A changepoint ``tau = t`` means the change happens *after* observation ``t``
(1-based), i.e. between ``y[t]`` and ``y[t + 1]``. With implicit boundaries
``0`` and ``n``, segment ``i`` covers observations ``tau_{i-1} + 1 .. tau_i``,
which in 0-based Python slicing is ``values[tau_{i-1}:tau_i]``. Every
``(t, s)`` pair in this package therefore doubles as a slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .costs import CostModel

__all__ = [
    "ChangepointError",
    "InvalidSegmentationError",
    "InfeasibleError",
    "TimeSeries",
    "SegmentFit",
    "Segmentation",
    "PenaltyScheme",
    "DPState",
    "recompute_cost",
]


class ChangepointError(ValueError):
    """Base class for errors raised by this package."""


class InvalidSegmentationError(ChangepointError):
    """A segmentation is inconsistent with its series or cost model."""


class InfeasibleError(ChangepointError):
    """The series is too short for the requested model or design."""


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Ordered real-valued observations ``y_1..y_n``.

    Values are copied into a read-only float64 array. Timestamps are kept for
    display only and must be strictly increasing when given.
    """

    values: np.ndarray
    timestamps: tuple | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size < 1:
            raise ChangepointError("a series needs at least one observation")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise ChangepointError(
                f"series contains non-finite values at positions {(bad + 1).tolist()}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.timestamps is not None:
            stamps = tuple(self.timestamps)
            if len(stamps) != values.size:
                raise ChangepointError("timestamps must match the number of values")
            if any(b <= a for a, b in zip(stamps, stamps[1:])):
                raise ChangepointError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", stamps)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def diff(self, order: int = 1) -> TimeSeries:
        """Return the ``order``-th difference; timestamps keep the later label."""
        if order < 0:
            raise ChangepointError("difference order must be nonnegative")
        if order == 0:
            return self
        if order >= self.n:
            raise InfeasibleError(f"cannot difference {self.n} values {order} times")
        stamps = None if self.timestamps is None else self.timestamps[order:]
        return TimeSeries(np.diff(self.values, n=order), stamps)


@dataclass(frozen=True)
class SegmentFit:
    """One fitted segment ``values[start:end]`` with its cost and parameters."""

    start: int
    end: int
    cost: float
    params: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "cost": self.cost, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> SegmentFit:
        return cls(int(data["start"]), int(data["end"]), float(data["cost"]), dict(data.get("params", {})))


@dataclass(frozen=True)
class Segmentation:
    """Changepoints ``tau_1 < ... < tau_m`` of a length-``n`` series.

    ``total_cost`` is the minimised objective: the sum of segment costs plus
    ``penalty``, the penalty term actually charged (``beta * f(m)``).
    ``info`` carries algorithm-specific extras such as pruning statistics.
    """

    changepoints: tuple[int, ...]
    n: int
    total_cost: float = math.nan
    penalty: float = 0.0
    segments: tuple[SegmentFit, ...] = ()
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        cps = tuple(int(c) for c in self.changepoints)
        object.__setattr__(self, "changepoints", cps)
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.n < 1:
            raise InvalidSegmentationError("series length must be positive")
        for c in cps:
            if not 1 <= c <= self.n - 1:
                raise InvalidSegmentationError(f"changepoint {c} outside [1, {self.n - 1}]")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise InvalidSegmentationError("changepoints must be strictly increasing")

    @property
    def m(self) -> int:
        return len(self.changepoints)

    @property
    def boundaries(self) -> tuple[int, ...]:
        return (0, *self.changepoints, self.n)

    def bounds(self) -> list[tuple[int, int]]:
        """``(t, s)`` pairs for every segment; each is also a Python slice."""
        b = self.boundaries
        return list(zip(b[:-1], b[1:]))

    def segment_cost_sum(self) -> float:
        return self.total_cost - self.penalty

    def to_dict(self) -> dict:
        return {
            "convention": "change-after-index",
            "n": self.n,
            "changepoints": list(self.changepoints),
            "total_cost": self.total_cost,
            "penalty_term": self.penalty,
            "segments": [s.to_dict() for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Segmentation:
        conv = data.get("convention", "change-after-index")
        if conv != "change-after-index":
            raise InvalidSegmentationError(f"unsupported changepoint convention {conv!r}")
        return cls(
            changepoints=tuple(int(c) for c in data["changepoints"]),
            n=int(data["n"]),
            total_cost=float(data.get("total_cost", math.nan)),
            penalty=float(data.get("penalty_term", 0.0)),
            segments=tuple(SegmentFit.from_dict(s) for s in data.get("segments", [])),
        )


def _linear(m: float) -> float:
    return float(m)


def _unit(m: float) -> float:
    return 1.0


@dataclass(frozen=True)
class PenaltyScheme:
    """Penalty ``beta * f(m)`` on the number of changepoints ``m``.

    ``kind == "constant"`` means ``f(m) = m``. Concave schemes carry ``f`` and
    its derivative; ``f(0)`` must be 0 so an unsegmented series is free.
    """

    kind: str
    beta: float
    f: Callable[[float], float] = _linear
    fprime: Callable[[float], float] = _unit
    label: str = "manual"

    def __post_init__(self):
        if self.kind not in ("constant", "concave"):
            raise ChangepointError(f"unknown penalty kind {self.kind!r}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ChangepointError(f"penalty scale must be finite and >= 0, got {self.beta}")

    @property
    def is_linear(self) -> bool:
        return self.kind == "constant"

    def value(self, m: int) -> float:
        if m == 0:
            return 0.0
        return self.beta * self.f(m)

    def derivative(self, m: float) -> float:
        return self.beta * self.fprime(m)

    def describe(self) -> dict:
        return {"kind": self.kind, "label": self.label, "beta": self.beta}


@dataclass
class DPState:
    """Arrays of one optimal-partitioning / PELT run.

    ``F[s]`` is the optimal penalised cost of ``values[:s]`` (``F[0] = -beta``,
    ``inf`` where no admissible segmentation exists); ``cp[s]`` is the optimal
    last changepoint before ``s``; ``R`` is the candidate set alive at the end;
    ``candidates[s]`` is how many candidates were evaluated at step ``s``.
    """

    F: np.ndarray
    cp: np.ndarray
    R: np.ndarray
    candidates: np.ndarray

    def changepoints(self, end: int | None = None) -> tuple[int, ...]:
        s = len(self.F) - 1 if end is None else end
        out = []
        while s > 0:
            s = int(self.cp[s])
            if s > 0:
                out.append(s)
        return tuple(reversed(out))


def check_segmentation(seg: Segmentation, n: int, min_segment_length: int) -> None:
    if seg.n != n:
        raise InvalidSegmentationError(f"segmentation is for n={seg.n}, series has n={n}")
    for t, s in seg.bounds():
        if s - t < min_segment_length:
            raise InvalidSegmentationError(
                f"segment ({t}, {s}] has length {s - t} < minimum {min_segment_length}"
            )


def recompute_cost(
    series: TimeSeries,
    seg: Segmentation | Sequence[int],
    model: CostModel,
    penalty: PenaltyScheme | float,
) -> float:
    """Sum of segment costs plus ``beta * f(m)``, evaluated from scratch.

    ``penalty`` may be a bare number, read as a linear penalty per changepoint.
    """
    if not isinstance(seg, Segmentation):
        seg = Segmentation(tuple(seg), series.n)
    if not isinstance(penalty, PenaltyScheme):
        penalty = PenaltyScheme("constant", float(penalty))
    check_segmentation(seg, series.n, model.min_segment_length)
    stats = model.summarize(series)
    total = 0.0
    for t, s in seg.bounds():
        total += model.cost(stats, t, s)
    return total + penalty.value(seg.m)


def as_series(data: Any) -> TimeSeries:
    return data if isinstance(data, TimeSeries) else TimeSeries(np.asarray(data, dtype=np.float64))
