"""Online feature selection for sparse streaming features.

Latent-factor completion of buffered columns, cost-sensitive three-way
relevance partitioning with annealed thresholds, and Markov-blanket
redundancy analysis.
"""
from .citest import CITestResult, RelevanceScore, ci_test, dep_score, fisher_z_test, partial_correlation
from .datamodel import FeatureBuffer, FeatureColumn, LabelVector, inject_missing, load_csv, stream_columns
from .errors import (
    DataError,
    DegenerateCostsError,
    DivergenceError,
    InsufficientSamplesError,
    NumericError,
    ParseError,
    SingularityError,
    SparseFSError,
    ValidationError,
)
from .evaluation import EvalReport, cross_validate, knn_predict, run_ablation
from .lfa import LatentFactors, LfaConfig, complete, rmse_known, train
from .selector import OnlineSelector, SelectionResult, SelectorConfig, process_stream, run_selection
from .synthetic import make_synthetic
from .threeway import (
    CostMatrix,
    Region,
    SaParams,
    ThresholdPair,
    anneal_thresholds,
    classify,
    decision_cost,
    initial_thresholds,
)

__version__ = "0.1.0"
