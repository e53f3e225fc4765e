"""Sentence ordering with graph recurrent networks over sentence-entity graphs."""

from .data import (
    EmbeddingTable,
    Paragraph,
    Sentence,
    Token,
    Vocabulary,
    generate_synthetic,
    load_dataset,
    load_embeddings,
    write_dataset,
)
from .errors import (
    CheckpointError,
    ConfigurationError,
    ContractError,
    DataError,
    GrnOrderError,
    NotFittedError,
)
from .estimator import SentenceOrderer
from .graph import SentenceEntityGraph, ablate, build_graph
from .metrics import MetricsReport, accuracy, evaluate_orders, head_tail_accuracy, kendall_tau, pmr
from .model import Example, ModelConfig, SentenceOrderingModel, count_parameters
from .trainer import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train

__all__ = [
    "CheckpointError",
    "ConfigurationError",
    "ContractError",
    "DataError",
    "EmbeddingTable",
    "Example",
    "GrnOrderError",
    "MetricsReport",
    "ModelConfig",
    "NotFittedError",
    "Paragraph",
    "Sentence",
    "SentenceEntityGraph",
    "SentenceOrderer",
    "SentenceOrderingModel",
    "Token",
    "TrainConfig",
    "Vocabulary",
    "ablate",
    "accuracy",
    "build_graph",
    "count_parameters",
    "evaluate",
    "evaluate_orders",
    "generate_synthetic",
    "head_tail_accuracy",
    "kendall_tau",
    "load_checkpoint",
    "load_dataset",
    "load_embeddings",
    "pmr",
    "save_checkpoint",
    "train",
    "write_dataset",
]
