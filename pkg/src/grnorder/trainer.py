"""Training loop, Adadelta, checkpoints and configuration files."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import yaml

from . import autodiff as ad
from .data import EmbeddingTable, Paragraph, Vocabulary
from .errors import CheckpointError, ConfigurationError
from .metrics import MetricsReport, evaluate_orders
from .model import Example, ModelConfig, SentenceOrderingModel, stable_seed

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1


@dataclass
class TrainConfig:
    # optimisation
    batch_size: int = 16
    rho: float = 0.95
    epsilon: float = 1e-6
    learning_rate: float = 1.0
    l2: float = 1e-5
    dropout: float = 0.5
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    beam_size: int = 64
    min_freq: int = 1
    # model
    variant: str = "SE"
    steps: int = 3
    embedding_dim: int = 100
    sentence_dim: int = 512
    entity_dim: int = 150
    edge_dim: int = 50
    share_params: bool = False
    ablation: str = "none"
    freeze_embeddings: bool = False
    precision: str = "float64"

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1 or self.beam_size < 1:
            raise ConfigurationError("batch_size, patience and beam_size must be >= 1, max_epochs >= 0")
        if min(self.rho, self.epsilon, self.learning_rate) <= 0 or self.rho >= 1 or self.l2 < 0:
            raise ConfigurationError("need 0 < rho < 1, epsilon > 0, learning_rate > 0, l2 >= 0")
        self.model_config()  # validates the model half

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            variant=self.variant, steps=self.steps, embedding_dim=self.embedding_dim,
            sentence_dim=self.sentence_dim, entity_dim=self.entity_dim, edge_dim=self.edge_dim,
            share_params=self.share_params, ablation=self.ablation, dropout=self.dropout,
            freeze_embeddings=self.freeze_embeddings, precision=self.precision, seed=self.seed,
        )


# config-file key -> TrainConfig field
CONFIG_KEYS = {
    "batch-size": "batch_size",
    "adadelta.rho": "rho",
    "adadelta.epsilon": "epsilon",
    "learning-rate": "learning_rate",
    "l2": "l2",
    "dropout": "dropout",
    "max-epochs": "max_epochs",
    "patience": "patience",
    "seed": "seed",
    "beam-size": "beam_size",
    "min-freq": "min_freq",
    "variant": "variant",
    "grn.steps": "steps",
    "embedding-dim": "embedding_dim",
    "grn.sentence-dim": "sentence_dim",
    "grn.entity-dim": "entity_dim",
    "grn.edge-embed-dim": "edge_dim",
    "grn.share-params": "share_params",
    "ablation": "ablation",
    "freeze-embeddings": "freeze_embeddings",
    "precision": "precision",
}


def config_from_mapping(values: dict, base: TrainConfig | None = None) -> TrainConfig:
    """Apply flat key-value settings (file keys or field names) over ``base``."""
    merged = asdict(base or TrainConfig())
    types = {f.name: f.type for f in fields(TrainConfig)}
    for key, value in values.items():
        name = CONFIG_KEYS.get(key, key.replace("-", "_"))
        if name not in merged:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        kind = types[name]
        try:
            if kind == "bool" and isinstance(value, str):
                value = value.lower() in ("1", "true", "yes", "on")
            merged[name] = {"int": int, "float": float, "bool": bool, "str": str}[kind](value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"bad value {value!r} for {key!r}")
    return TrainConfig(**merged)


def load_config(path) -> TrainConfig:
    """Read a flat YAML/JSON key-value document."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    values = yaml.safe_load(path.read_text()) or {}
    if not isinstance(values, dict):
        raise ConfigurationError(f"{path} must hold a flat key-value mapping")
    return config_from_mapping(values)


# ---------------------------------------------------------------------------
# optimiser


class Adadelta:
    """Adadelta with running averages of squared gradients and squared updates."""

    def __init__(self, params: dict, rho: float = 0.95, epsilon: float = 1e-6, learning_rate: float = 1.0):
        self.params = params
        self.rho, self.epsilon, self.learning_rate = rho, epsilon, learning_rate
        self.sq_grad = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.sq_delta = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        rho, eps = self.rho, self.epsilon
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            sg = self.sq_grad[name]
            sg *= rho
            sg += (1.0 - rho) * g * g
            delta = np.sqrt(self.sq_delta[name] + eps) / np.sqrt(sg + eps) * g
            sd = self.sq_delta[name]
            sd *= rho
            sd += (1.0 - rho) * delta * delta
            p.data -= self.learning_rate * delta


# ---------------------------------------------------------------------------
# evaluation helpers


def eval_examples(paragraphs: Sequence[Paragraph], seed: int) -> list[Example]:
    """Seeded shuffled presentation per paragraph, independent of batching."""
    return [
        Example(p, np.random.default_rng(stable_seed(seed, "present", p.id)).permutation(len(p)))
        for p in paragraphs
    ]


def evaluate(
    model: SentenceOrderingModel, paragraphs: Sequence[Paragraph], beam_size: int = 64, seed: int = 0
) -> tuple[MetricsReport, list]:
    """Metrics plus ``(paragraph, predicted identities, prediction)`` triples."""
    examples = eval_examples(paragraphs, seed)
    predicted = model.predict_orders(examples, beam_size=beam_size)
    pairs = [(order, list(range(len(ex.paragraph)))) for ex, (order, _) in zip(examples, predicted)]
    records = [(ex.paragraph, order, pred) for ex, (order, pred) in zip(examples, predicted)]
    return evaluate_orders(pairs), records


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: SentenceOrderingModel
    history: list[dict]
    best_epoch: int
    best_metrics: MetricsReport | None


def train(
    paragraphs: Sequence[Paragraph],
    config: TrainConfig,
    *,
    embeddings: EmbeddingTable | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Fit a model on the ``train`` split, selecting the epoch with best validation tau."""
    train_set = [p for p in paragraphs if p.split == "train"]
    valid_set = [p for p in paragraphs if p.split == "valid"]
    if not train_set:
        raise ConfigurationError("the corpus has no training paragraphs")
    vocab = Vocabulary.build(train_set, config.min_freq)
    model = SentenceOrderingModel(config.model_config(), vocab, embeddings)
    params = model.trainable()
    opt = Adadelta(params, config.rho, config.epsilon, config.learning_rate)
    rng = np.random.default_rng(config.seed)

    history: list[dict] = []
    best_tau, best_epoch, best_state, stale = -np.inf, 0, None, 0
    for epoch in range(1, config.max_epochs + 1):
        start = time.perf_counter()
        total_nll = 0.0
        order = rng.permutation(len(train_set))
        for b in range(0, len(order), config.batch_size):
            batch = [train_set[k] for k in order[b : b + config.batch_size]]
            examples = [Example(p, rng.permutation(len(p))) for p in batch]
            with ad.Tape():
                nll = model.nll(examples, training=True, rng=rng)
                loss = nll + model.l2(config.l2) if config.l2 else nll
                ad.backward(loss)
            opt.step()
            model.zero_grad()
            total_nll += float(nll.data) * len(batch)
        record = {"epoch": epoch, "train_nll": total_nll / len(train_set)}
        if valid_set:
            report, _ = evaluate(model, valid_set, config.beam_size, config.seed)
            record.update(valid_tau=report.tau, valid_acc=report.acc, valid_pmr=report.pmr)
            improved = report.tau > best_tau
        else:
            improved = True
        record["wall_time"] = time.perf_counter() - start
        history.append(record)
        logger.info(format_log_line(record))
        if on_epoch:
            on_epoch(record)
        if improved:
            best_tau = record.get("valid_tau", best_tau)
            best_epoch, best_state, stale = epoch, {k: p.data.copy() for k, p in model.params.items()}, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_state is not None:
        for k, p in model.params.items():
            p.data[...] = best_state[k]
    best_metrics = None
    if valid_set:
        best_metrics, _ = evaluate(model, valid_set, config.beam_size, config.seed)
        final = {"epoch": "best", "best_epoch": best_epoch, "valid_tau": best_metrics.tau,
                 "valid_acc": best_metrics.acc, "valid_pmr": best_metrics.pmr}
        history.append(final)
        logger.info(format_log_line(final))
        if on_epoch:
            on_epoch(final)
    return TrainResult(model, history, best_epoch, best_metrics)


def format_log_line(record: dict) -> str:
    parts = [f"epoch {record['epoch']}"]
    if "train_nll" in record:
        parts.append(f"train-nll {record['train_nll']:.4f}")
    for key in ("valid_tau", "valid_acc", "valid_pmr"):
        if key in record:
            parts.append(f"{key.replace('_', '-')} {record[key]:.4f}")
    if "wall_time" in record:
        parts.append(f"time {record['wall_time']:.1f}s")
    return "  ".join(parts)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: SentenceOrderingModel, path) -> None:
    """npz container: one array per parameter name plus a JSON header."""
    meta = {"format": CHECKPOINT_FORMAT, "config": asdict(model.config), "vocab": model.vocab.itos[2:]}
    arrays = {f"param:{k}": p.data for k, p in model.params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path, config: ModelConfig | None = None) -> SentenceOrderingModel:
    """Rebuild a model; ``config`` (if given) must agree on every parameter shape."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        arrays = {k[len("param:") :]: data[k] for k in data.files if k.startswith("param:")}
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {meta.get('format')}")
    stored = ModelConfig(**meta["config"])
    config = config or stored
    vocab = Vocabulary(meta["vocab"])
    model = SentenceOrderingModel(ModelConfig(**{**asdict(config), "precision": stored.precision}), vocab)
    missing = sorted(set(model.params) - set(arrays))
    unexpected = sorted(set(arrays) - set(model.params))
    wrong = sorted(k for k in set(model.params) & set(arrays) if model.params[k].shape != arrays[k].shape)
    if missing or unexpected or wrong:
        problems = []
        if wrong:
            problems.append("shape mismatch: " + ", ".join(
                f"{k} {arrays[k].shape} vs {model.params[k].shape}" for k in wrong))
        if missing:
            problems.append("missing: " + ", ".join(missing))
        if unexpected:
            problems.append("unexpected: " + ", ".join(unexpected))
        raise CheckpointError(f"{path} does not match the configuration; " + "; ".join(problems))
    for k, p in model.params.items():
        p.data = arrays[k].copy()
    return model
