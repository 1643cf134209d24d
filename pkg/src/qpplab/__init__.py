"""qpplab: query-performance-prediction analysis toolkit.

Computes post-retrieval predictors and per-query effectiveness from
TREC-format files, flags hard-to-predict queries with robust multivariate
outlier detection, and quantifies how predictor quality changes when the
flagged queries are excluded.
"""

from .effectiveness import EffectivenessVector, average_precision, evaluate_run, ndcg
from .matrix import QueryFeatureMatrix
from .outliers import (
    OutlierReport,
    classical_detect,
    mahalanobis_sq,
    psd_repair,
    trc_covariance,
    trc_detect,
    univariate_detect,
    univariate_reports,
)
from .predictors import (
    PredictorConfig,
    PredictorSpec,
    aggregate_feature,
    build_feature_matrix,
    nqc,
    qf,
    uqc,
    wig,
)
from .analysis import (
    CorrelationRow,
    RegressionLine,
    correlation_table,
    error_metrics,
    fisher_z_test,
    ols_regression,
    scatter_report,
)
from .synthetic import SynthScenario, mvn_sample, plant_outliers, synth_qpp_scenario
from .trec_io import (
    FeatureTable,
    ParseError,
    QrelsSet,
    RunEntry,
    RunSet,
    Topic,
    parse_feature_file,
    parse_qrels,
    parse_run,
    parse_topics,
    read_matrix,
    write_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "EffectivenessVector",
    "QueryFeatureMatrix",
    "OutlierReport",
    "PredictorConfig",
    "PredictorSpec",
    "CorrelationRow",
    "RegressionLine",
    "SynthScenario",
    "FeatureTable",
    "ParseError",
    "QrelsSet",
    "RunEntry",
    "RunSet",
    "Topic",
    "average_precision",
    "ndcg",
    "evaluate_run",
    "nqc",
    "uqc",
    "wig",
    "qf",
    "aggregate_feature",
    "build_feature_matrix",
    "mahalanobis_sq",
    "classical_detect",
    "trc_covariance",
    "trc_detect",
    "univariate_detect",
    "univariate_reports",
    "psd_repair",
    "correlation_table",
    "fisher_z_test",
    "ols_regression",
    "error_metrics",
    "scatter_report",
    "mvn_sample",
    "plant_outliers",
    "synth_qpp_scenario",
    "parse_run",
    "parse_qrels",
    "parse_topics",
    "parse_feature_file",
    "read_matrix",
    "write_matrix",
    "__version__",
]
