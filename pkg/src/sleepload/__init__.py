"""Traffic-load estimation for sleeping small cells.

When a small base station sleeps to save energy it stops reporting traffic,
yet the network still needs its load to decide when to wake it.  This
package estimates that hidden load three ways: spatially from neighboring
active cells (nearest or random selection, unweighted or inverse-distance
weighted), by multi-level clustering of day profiles, and temporally with a
from-scratch LSTM forecaster.  A load-dependent power model turns loads into
watts, and Monte-Carlo harnesses score every estimator by MAPE.
"""

from ._util import derive_seed
from .clustering import (
    ClusterModel,
    MlcConfig,
    MlcTraceRow,
    elbow_select,
    kmeans,
    kmeans_best,
    mlc_estimate,
    mlc_estimate_traced,
    sse,
    sse_curve,
)
from .data import (
    CellId,
    CellRecord,
    ClusteredConfig,
    IngestError,
    SyntheticConfig,
    TrafficGrid,
    TrafficSeries,
    WindowSample,
    aggregate_activities,
    average_day_profile,
    generate_clustered,
    generate_synthetic,
    ingest_cdr,
    lattice_positions,
    make_windows,
    normalize_loads,
    remove_outliers_zscore,
    split_train_test,
    write_cdr_csv,
)
from .evaluation import (
    EstimationError,
    ExperimentConfig,
    ResultRow,
    mape,
    run_mlc_experiment,
    run_spatial_experiment,
    run_temporal_experiment,
    write_fig2_csv,
    write_fig3_csv,
    write_fig7_csv,
    write_results_csv,
)
from .lstm import (
    GATE_ORDER,
    GateActivations,
    LstmGradients,
    LstmParams,
    LstmState,
    TrainConfig,
    TrainResult,
    backward_bptt,
    forward_sequence,
    init_params,
    kernel_backend,
    load_params,
    loss_mae,
    lstm_cell_forward,
    predict,
    predict_batch,
    save_params,
    train,
)
from .power import (
    DEFAULT_HAPS,
    DEFAULT_MBS,
    DEFAULT_SBS,
    BsPowerProfile,
    NetworkPower,
    bs_power,
    network_power,
    sleep_saving,
)
from .spatial import (
    NeighborSet,
    estimate_distance_weighted,
    estimate_nearest_mean,
    estimate_random_mean,
    estimate_random_weighted,
    estimate_unweighted_mean,
    nearest_neighbors,
    random_neighbors,
    select_nearest,
    select_random,
    weight_factor,
)

__version__ = "0.1.0"

__all__ = [
    "BsPowerProfile",
    "CellId",
    "CellRecord",
    "ClusterModel",
    "ClusteredConfig",
    "DEFAULT_HAPS",
    "DEFAULT_MBS",
    "DEFAULT_SBS",
    "EstimationError",
    "ExperimentConfig",
    "GATE_ORDER",
    "GateActivations",
    "IngestError",
    "LstmGradients",
    "LstmParams",
    "LstmState",
    "MlcConfig",
    "MlcTraceRow",
    "NeighborSet",
    "NetworkPower",
    "ResultRow",
    "SyntheticConfig",
    "TrafficGrid",
    "TrafficSeries",
    "TrainConfig",
    "TrainResult",
    "WindowSample",
    "aggregate_activities",
    "average_day_profile",
    "backward_bptt",
    "bs_power",
    "derive_seed",
    "elbow_select",
    "estimate_distance_weighted",
    "estimate_nearest_mean",
    "estimate_random_mean",
    "estimate_random_weighted",
    "estimate_unweighted_mean",
    "forward_sequence",
    "generate_clustered",
    "generate_synthetic",
    "ingest_cdr",
    "init_params",
    "kernel_backend",
    "kmeans",
    "kmeans_best",
    "lattice_positions",
    "load_params",
    "loss_mae",
    "lstm_cell_forward",
    "make_windows",
    "mape",
    "mlc_estimate",
    "mlc_estimate_traced",
    "nearest_neighbors",
    "network_power",
    "normalize_loads",
    "predict",
    "predict_batch",
    "random_neighbors",
    "remove_outliers_zscore",
    "run_mlc_experiment",
    "run_spatial_experiment",
    "run_temporal_experiment",
    "save_params",
    "select_nearest",
    "select_random",
    "sleep_saving",
    "split_train_test",
    "sse",
    "sse_curve",
    "train",
    "weight_factor",
    "write_cdr_csv",
    "write_fig2_csv",
    "write_fig3_csv",
    "write_fig7_csv",
    "write_results_csv",
]
