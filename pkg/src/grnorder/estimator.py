"""scikit-learn style wrapper around the training loop and the model."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator

from . import autodiff as ad
from .data import EmbeddingTable
from .metrics import evaluate_orders
from .model import Example
from .trainer import TrainConfig, eval_examples, train
from .validation import check_is_fitted, check_paragraphs


class SentenceOrderer(BaseEstimator):
    """Learns to order the sentences of a paragraph.

    ``fit`` takes paragraphs whose sentences are in their correct order.
    ``predict`` takes paragraphs in any order and returns, for each one,
    the indices of its sentences in predicted reading order. ``transform``
    returns the final paragraph state of each paragraph.

    Parameters mirror :class:`~grnorder.trainer.TrainConfig`.
    """

    def __init__(
        self,
        variant: str = "SE",
        steps: int = 3,
        embedding_dim: int = 100,
        sentence_dim: int = 512,
        entity_dim: int = 150,
        edge_dim: int = 50,
        share_params: bool = False,
        ablation: str = "none",
        dropout: float = 0.5,
        batch_size: int = 16,
        max_epochs: int = 30,
        patience: int = 5,
        l2: float = 1e-5,
        beam_size: int = 64,
        precision: str = "float64",
        seed: int = 0,
        embeddings: EmbeddingTable | None = None,
    ):
        self.variant = variant
        self.steps = steps
        self.embedding_dim = embedding_dim
        self.sentence_dim = sentence_dim
        self.entity_dim = entity_dim
        self.edge_dim = edge_dim
        self.share_params = share_params
        self.ablation = ablation
        self.dropout = dropout
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.l2 = l2
        self.beam_size = beam_size
        self.precision = precision
        self.seed = seed
        self.embeddings = embeddings

    def _config(self) -> TrainConfig:
        params = self.get_params()
        params.pop("embeddings")
        return TrainConfig(**params)

    def fit(self, X, y=None, X_valid=None):
        """Train on ``X`` (gold-ordered paragraphs); ``X_valid`` drives model selection."""
        train_set = [replace(p, split="train") for p in check_paragraphs(X)]
        valid_set = [replace(p, split="valid") for p in check_paragraphs(X_valid, name="X_valid")] if X_valid is not None else []
        result = train(train_set + valid_set, self._config(), embeddings=self.embeddings)
        self.model_ = result.model
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        return self

    def predict(self, X, beam_size: int | None = None) -> list[tuple[int, ...]]:
        """Predicted reading order of each paragraph, as indices into its sentences."""
        check_is_fitted(self)
        X = check_paragraphs(X)
        examples = [Example(p) for p in X]
        beam = self.beam_size if beam_size is None else beam_size
        return [order for order, _ in self.model_.predict_orders(examples, beam_size=beam)]

    def transform(self, X) -> np.ndarray:
        """Final paragraph state of each paragraph, shape ``(n, sentence_dim)``."""
        check_is_fitted(self)
        X = check_paragraphs(X)
        with ad.no_tape():
            _, state = self.model_.encode([Example(p) for p in X])
        return state.glob.data.copy()

    def score(self, X, y=None) -> float:
        """Mean Kendall tau on seeded shuffles of gold-ordered paragraphs."""
        check_is_fitted(self)
        examples = eval_examples(check_paragraphs(X), self.seed)
        predicted = self.model_.predict_orders(examples, beam_size=self.beam_size)
        pairs = [(order, list(range(len(ex.paragraph)))) for ex, (order, _) in zip(examples, predicted)]
        return evaluate_orders(pairs).tau
