"""Synthetic difference-in-differences for repeated cross-sectional data.

Provides the RC-SDiD estimator (SDiD with reciprocal cell-count weights)
alongside DiD and SDiD baselines, a simplex-constrained weight solver, an
interactive fixed-effects simulator, and a Monte Carlo table harness.
"""

from .data import (
    AggregatedPanel,
    PanelLayout,
    RCDataset,
    SchemaError,
    ValidationError,
    aggregate,
    load_long_csv,
    write_long_csv,
)
from .dgp import (
    CountsMatrix,
    GroupParams,
    ScenarioConfig,
    draw_count_increments,
    draw_group_params,
    simulate_counts,
    simulate_dataset,
)
from .estimators import (
    DegenerateDesignError,
    Estimate,
    WeightSet,
    estimate_all,
    estimate_did,
    estimate_rcsdid,
    estimate_sdid_baseline,
    weighted_twfe_regression,
)
from .harness import (
    EstimatorMetrics,
    MetricsRow,
    TableSpec,
    run_scenario,
    run_table,
    summarize,
    table_spec,
)
from .streams import substream
from .weights import (
    NuWeights,
    SolverReport,
    TimeWeights,
    UnitWeights,
    ZetaResult,
    compute_zeta,
    cross_sectional_weights,
    frank_wolfe_simplex,
    solve_time_weights,
    solve_unit_weights,
)

__version__ = "0.1.0"
