"""
boolcd: Boolean Tucker factorization for change detection

Factorizes binary object x feature x time tensors into Boolean factor
matrices and a Boolean core, and turns the fitted model into change reports.

Features:
- Bit-packed Boolean matrices and 3-way tensors with unfold/fold and Boolean products
- Batch fitting: alternating factor updates and a greedy core sweep
- Incremental fitting: sliding time window with weighted covariance accumulators
- Change reports: feature variance, class proportions, gain/loss
- Ingestion: raw CSV binarization, slot files, the .btt tensor format
- Planted synthetic data and an exhaustive oracle for tiny problems
- Benchmark sweeps with CSV and SVG output
- CLI and HTTP API
"""

__version__ = "1.0.0"

from .errors import (
    BoolcdError,
    ShapeError,
    ConfigError,
    CapacityError,
    DataError,
    ParseError,
    StateError,
    InputError,
)

from .config import (
    ErrorKind,
    Ranks,
    FitConfig,
    StreamConfig,
    TimeWeight,
    Constant,
    ExponentialDecay,
    SeasonalMask,
    parse_time_weight,
    resolve_thread_count,
)

from .seeding import derive_seed, generator

from .logs import Verbosity, set_verbosity, get_verbosity, get_logger

from .tensor_core import (
    BoolMatrix,
    BoolTensor3,
    Mode,
    ErrorFigures,
    unfold,
    fold,
    bool_matmul,
    bool_kronecker,
    transpose,
    tucker_reconstruct,
    hamming_error,
    density,
)

from .batch_tucker import (
    TuckerModel,
    FitStatus,
    FitTrace,
    TraceRecord,
    init_model,
    update_factor,
    update_core,
    fit_batch,
    fit_best_of,
    select_ranks,
)

from .incremental import (
    CovarianceState,
    StreamState,
    covariance_of,
    accumulate,
    bootstrap,
    update_core_prioritized,
    ingest_slot,
    run_stream,
    slot_history,
)

from .reports import (
    FrameSpec,
    FeatureVarianceReport,
    ClassProportionReport,
    GainLossReport,
    feature_variance,
    class_proportions,
    gain_loss,
)

from .ingestion import (
    ThresholdSpec,
    binarize,
    load_slot_csv,
    load_slots_dir,
    load_tensor_btt,
    save_tensor_btt,
)

from .synth import (
    PlantedSpec,
    Stationary,
    StepChange,
    Toggle,
    generate_planted,
    planted_tensor,
    exhaustive_oracle,
)

from .model_store import save_model, load_model

from .svg import ChartKind, ChartData, Series, emit_svg

__all__ = [
    "__version__",
    # Errors
    "BoolcdError",
    "ShapeError",
    "ConfigError",
    "CapacityError",
    "DataError",
    "ParseError",
    "StateError",
    "InputError",
    # Configuration
    "ErrorKind",
    "Ranks",
    "FitConfig",
    "StreamConfig",
    "TimeWeight",
    "Constant",
    "ExponentialDecay",
    "SeasonalMask",
    "parse_time_weight",
    "resolve_thread_count",
    "derive_seed",
    "generator",
    # Logging
    "Verbosity",
    "set_verbosity",
    "get_verbosity",
    "get_logger",
    # Tensor core
    "BoolMatrix",
    "BoolTensor3",
    "Mode",
    "ErrorFigures",
    "unfold",
    "fold",
    "bool_matmul",
    "bool_kronecker",
    "transpose",
    "tucker_reconstruct",
    "hamming_error",
    "density",
    # Batch fitting
    "TuckerModel",
    "FitStatus",
    "FitTrace",
    "TraceRecord",
    "init_model",
    "update_factor",
    "update_core",
    "fit_batch",
    "fit_best_of",
    "select_ranks",
    # Incremental fitting
    "CovarianceState",
    "StreamState",
    "covariance_of",
    "accumulate",
    "bootstrap",
    "update_core_prioritized",
    "ingest_slot",
    "run_stream",
    "slot_history",
    # Reports
    "FrameSpec",
    "FeatureVarianceReport",
    "ClassProportionReport",
    "GainLossReport",
    "feature_variance",
    "class_proportions",
    "gain_loss",
    # Ingestion
    "ThresholdSpec",
    "binarize",
    "load_slot_csv",
    "load_slots_dir",
    "load_tensor_btt",
    "save_tensor_btt",
    # Synthetic data
    "PlantedSpec",
    "Stationary",
    "StepChange",
    "Toggle",
    "generate_planted",
    "planted_tensor",
    "exhaustive_oracle",
    # Storage and charts
    "save_model",
    "load_model",
    "ChartKind",
    "ChartData",
    "Series",
    "emit_svg",
]
