"""Exact multiple changepoint detection with PELT.

Changepoint ``t`` means the change happens after observation ``t`` (1-based),
so segment boundaries ``(t, s)`` double as Python slices ``values[t:s]``.
"""

from .core import (
    ChangepointError,
    DPState,
    InfeasibleError,
    InvalidSegmentationError,
    PenaltyScheme,
    Segmentation,
    SegmentFit,
    TimeSeries,
    recompute_cost,
)
from .costs import (
    ARMDLCost,
    CostModel,
    NormalMeanCost,
    NormalMeanVarCost,
    NormalVarCost,
    SummaryStats,
    make_cost_model,
    pruning_constant,
)
from .penalty import (
    concave_iteration,
    make_concave_penalty,
    make_constant_penalty,
    make_mdl_penalty,
    parse_penalty,
)
from .search import (
    binary_segmentation,
    brute_force_oracle,
    optimal_partitioning,
    pelt,
    run_dp,
    segment_neighbourhood,
    select_from_neighbourhood,
)

__version__ = "0.1.0"
