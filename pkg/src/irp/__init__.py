"""Exact multivariate isotonic regression via recursive optimal-cut partitioning.

The fitting engine solves the weighted least-squares isotonic problem by
repeatedly splitting groups at their optimal feasible cut (a min-cut/closure
problem), exposing every intermediate model as a regularization path.
"""

from .analytics import (
    BenchmarkRow,
    DfEstimate,
    PathReport,
    SimulationSpec,
    SplitBalance,
    TestSet,
    auc,
    estimate_df,
    evaluate_path,
    run_benchmark,
    simulate,
    split_balance_stats,
)
from .dataset import (
    DominanceDag,
    Observation,
    WeightedDataset,
    build_order,
    load_csv,
    merge_duplicates,
)
from .engine import (
    FitConfig,
    IrpPath,
    IsotonicModel,
    final_blocks,
    fit_path,
    fit_path_arrays,
    model_at,
    path_from_json,
    path_to_json,
    predict,
    predict_batch,
)
from .errors import IrpError, ParseError, TruncatedPathError, ValidationError
from .losses import (
    binary_log_likelihood,
    fit_binary,
    fit_maxwell_muckstadt,
    fit_poisson,
    poisson_log_likelihood,
)
from .mincut import Cut, FlowNetwork, build_closure_network, max_flow, optimal_cut
from .oracles import CutEnumeration, dykstra_project, enumerate_cuts, pava

__version__ = "0.1.0"
