"""evocast: temporal event-graph representation learning and relation forecasting.

The package ingests timestamped (subject, relation, object, time) events,
learns jointly evolving entity/relation embeddings with soft cluster tracking
across time, and ranks candidate relations for future (subject, object) pairs.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .clustering import (
    AlignmentResult,
    ClusteringConfig,
    ClusterState,
    affinity_matrix,
    clustering_objective,
    cosine_matrix,
    fuse_clusters,
    fuzzy_cmeans,
    hungarian_match,
    soft_assign,
    temporal_smoothness_loss,
)
from .config import ABLATION_FLAGS, RunConfig, load_config, parse_ablation
from .data import (
    Quadruple,
    SyntheticSpec,
    Timeline,
    TkgDataset,
    Vocabulary,
    build_global_graph,
    generate_synthetic_tkg,
    load_quadruples,
    merge_timeline,
    save_quadruples,
    training_in_degrees,
)
from .decoder import ConvPairScorer, prediction_loss
from .errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    DivergenceError,
    EvocastError,
    IoError,
    ParseError,
    RangeError,
    ShapeError,
    VocabularyError,
)
from .metrics import EvaluationReport, load_report, monte_carlo_random_mrr, rank_metrics, save_report
from .model import ForecastModel, PipelineState, WindowOutput, total_loss
from .training import (
    LoadedRun,
    evaluate_run,
    evaluate_timeline,
    export_embeddings,
    load_exported_embeddings,
    load_run,
    load_splits,
    predict_run,
    run_synth,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATION_FLAGS",
    "AlignmentResult",
    "ClusterState",
    "ClusteringConfig",
    "ConfigError",
    "ConvPairScorer",
    "DataError",
    "DegenerateInputError",
    "DivergenceError",
    "EvaluationReport",
    "EvocastError",
    "ForecastModel",
    "IoError",
    "LoadedRun",
    "ParseError",
    "PipelineState",
    "Quadruple",
    "RangeError",
    "RunConfig",
    "ShapeError",
    "SyntheticSpec",
    "Timeline",
    "TkgDataset",
    "Vocabulary",
    "VocabularyError",
    "WindowOutput",
    "affinity_matrix",
    "build_global_graph",
    "clustering_objective",
    "cosine_matrix",
    "evaluate_run",
    "evaluate_timeline",
    "export_embeddings",
    "fuse_clusters",
    "fuzzy_cmeans",
    "generate_synthetic_tkg",
    "hungarian_match",
    "load_checkpoint",
    "load_config",
    "load_quadruples",
    "load_exported_embeddings",
    "load_report",
    "load_run",
    "load_splits",
    "merge_timeline",
    "monte_carlo_random_mrr",
    "parse_ablation",
    "predict_run",
    "prediction_loss",
    "rank_metrics",
    "run_synth",
    "save_checkpoint",
    "save_quadruples",
    "save_report",
    "soft_assign",
    "temporal_smoothness_loss",
    "total_loss",
    "train",
    "training_in_degrees",
]
