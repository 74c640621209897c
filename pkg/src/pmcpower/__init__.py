"""Linear power modelling from performance-counter and power-sensor traces.

Pipeline: synchronise a cumulative PMC trace with a power trace on shared
TIME keys (datagen can synthesise such pairs), fit OLS power models on the
per-interval dataset, and select a counter subset by greedy or exhaustive
search scored with k-fold cross-validated MAPE.
"""

from .dataset import (
    COUNTER_MODULUS,
    CounterTrace,
    Dataset,
    FREQ_COL,
    POWER_COL,
    PowerTrace,
    SampleRow,
    TIME_KEY,
    concat_datasets,
    read_counter_trace,
    read_dataset,
    read_power_trace,
    write_counter_trace,
    write_dataset,
    write_power_trace,
)
from .datagen import (
    GenResult,
    GenSpec,
    default_gen_spec,
    generate,
    genspec_from_dict,
    genspec_to_dict,
    read_gen_spec,
    write_gen_spec,
)
from .errors import (
    FitError,
    FormatError,
    GenError,
    ModelError,
    PipelineError,
    RankDeficientError,
    SearchError,
    SyncError,
)
from .regress import (
    FitDiagnostics,
    PowerModel,
    TrainingMeta,
    ValidationResult,
    fit_freq_baseline,
    fit_ols,
    format_watts,
    mape,
    model_from_dict,
    model_to_dict,
    predict,
    predict_dataset,
    read_model,
    validate,
    write_model,
    write_prediction_trace,
)
from .search import (
    SEARCH_ALGORITHMS,
    SearchConfig,
    SearchIteration,
    SearchReport,
    bottom_up,
    cv_score,
    exhaustive,
    kfold_split,
    read_report,
    report_from_dict,
    report_to_dict,
    run_search,
    top_down,
    write_report,
)
from .sync import CoverageReport, SyncConfig, coverage_report, synchronize

__version__ = "0.1.0"

__all__ = [
    "COUNTER_MODULUS",
    "CounterTrace",
    "CoverageReport",
    "Dataset",
    "FREQ_COL",
    "FitDiagnostics",
    "FitError",
    "FormatError",
    "GenError",
    "GenResult",
    "GenSpec",
    "ModelError",
    "POWER_COL",
    "PipelineError",
    "PowerModel",
    "PowerTrace",
    "RankDeficientError",
    "SEARCH_ALGORITHMS",
    "SampleRow",
    "SearchConfig",
    "SearchError",
    "SearchIteration",
    "SearchReport",
    "SyncConfig",
    "SyncError",
    "TIME_KEY",
    "TrainingMeta",
    "ValidationResult",
    "bottom_up",
    "concat_datasets",
    "coverage_report",
    "cv_score",
    "default_gen_spec",
    "genspec_from_dict",
    "genspec_to_dict",
    "exhaustive",
    "fit_freq_baseline",
    "fit_ols",
    "format_watts",
    "generate",
    "kfold_split",
    "mape",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "predict_dataset",
    "read_counter_trace",
    "read_gen_spec",
    "read_dataset",
    "read_model",
    "read_power_trace",
    "read_report",
    "report_from_dict",
    "report_to_dict",
    "run_search",
    "synchronize",
    "top_down",
    "validate",
    "write_counter_trace",
    "write_gen_spec",
    "write_dataset",
    "write_model",
    "write_power_trace",
    "write_prediction_trace",
    "write_report",
]
