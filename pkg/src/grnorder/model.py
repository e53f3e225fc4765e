"""End-to-end sentence ordering model: Bi-LSTM -> graph recurrent encoder -> pointer decoder."""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import EmbeddingTable, Paragraph, Vocabulary
from .decoder import OrderPrediction, beam_decode, pointer_params, score_gold
from .encoder import bilstm_params, encode_sentences, pad_sentences
from .errors import ConfigurationError
from .graph import SentenceEntityGraph, ablate, build_graph, relabel_sentences
from .grn import GrnState, batch_graphs, encode, grn_params

ABLATIONS = {
    "none": None,
    "shuffle-edges": ("shuffle-edges", 0.0),
    "remove-edge-labels": ("remove-edge-labels", 0.0),
    "remove-10%-entities": ("remove-entities", 0.1),
    "remove-50%-entities": ("remove-entities", 0.5),
}


@dataclass
class ModelConfig:
    variant: str = "SE"
    steps: int = 3
    embedding_dim: int = 100
    sentence_dim: int = 512
    entity_dim: int = 150
    edge_dim: int = 50
    share_params: bool = False
    ablation: str = "none"
    dropout: float = 0.5
    freeze_embeddings: bool = False
    precision: str = "float64"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("SE", "S", "F"):
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if self.sentence_dim < 2 or self.sentence_dim % 2:
            raise ConfigurationError("sentence_dim must be a positive even number (two LSTM directions)")
        if min(self.embedding_dim, self.entity_dim, self.edge_dim) < 1:
            raise ConfigurationError("all dimensions must be positive")
        if self.steps < 0:
            raise ConfigurationError("steps must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must lie in [0, 1)")
        if self.ablation not in ABLATIONS:
            raise ConfigurationError(f"unknown ablation {self.ablation!r}; expected one of {sorted(ABLATIONS)}")
        if self.share_params:
            if self.variant != "SE":
                raise ConfigurationError("share_params only applies to the SE variant")
            if self.entity_dim != self.sentence_dim:
                raise ConfigurationError("share_params requires entity_dim == sentence_dim")
        if self.ablation == "remove-edge-labels" and self.variant != "SE":
            raise ConfigurationError("remove-edge-labels applies to the SE variant only")
        if self.ablation != "none" and self.variant == "F":
            raise ConfigurationError("ablations apply to the SE and S variants only")


@dataclass
class Example:
    """A paragraph presented in shuffled order: slot k holds gold sentence ``order[k]``."""

    paragraph: Paragraph
    order: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.order is None:
            self.order = np.arange(len(self.paragraph))
        self.order = np.asarray(self.order, dtype=np.intp)

    @property
    def gold_slots(self) -> np.ndarray:
        """Slot indices listed in gold order."""
        return np.argsort(self.order)


def stable_seed(*parts) -> int:
    return zlib.crc32("|".join(str(p) for p in parts).encode()) & 0x7FFFFFFF


class SentenceOrderingModel:
    def __init__(self, config: ModelConfig, vocab: Vocabulary, embeddings: EmbeddingTable | None = None):
        self.config = config
        self.vocab = vocab
        self._graphs: dict = {}
        rng = np.random.default_rng(config.seed)
        with ad.precision(config.precision):
            table = rng.normal(0.0, 0.1, size=(len(vocab), config.embedding_dim))
            if embeddings is not None:
                if embeddings.dimension != config.embedding_dim:
                    raise ConfigurationError(
                        f"embedding table has dimension {embeddings.dimension}, config says {config.embedding_dim}"
                    )
                for word, k in vocab.stoi.items():
                    if word in embeddings:
                        table[k] = embeddings[word]
            table[0] = 0.0
            self.params: dict[str, Tensor] = {"embed.words": ad.parameter(table, "embed.words")}
            self.params.update(bilstm_params(rng, config.embedding_dim, config.sentence_dim))
            self.params.update(
                grn_params(
                    rng, config.embedding_dim, config.sentence_dim, config.entity_dim, config.edge_dim,
                    entities=config.variant == "SE", share=config.share_params,
                )
            )
            self.params.update(pointer_params(rng, config.sentence_dim))
        self.params["embed.words"].requires_grad = not config.freeze_embeddings

    # -- parameters --------------------------------------------------------

    def trainable(self) -> dict[str, Tensor]:
        return {k: p for k, p in self.params.items() if p.requires_grad}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # -- graphs ------------------------------------------------------------

    def graph(self, paragraph: Paragraph) -> SentenceEntityGraph:
        """Graph in gold sentence order, with the configured ablation applied (cached)."""
        key = (paragraph.id, paragraph)
        if key not in self._graphs:
            g = build_graph(paragraph, self.config.variant)
            corruption = ABLATIONS[self.config.ablation]
            if corruption is not None:
                g = ablate(g, corruption[0], fraction=corruption[1], seed=stable_seed(self.config.seed, paragraph.id))
            self._graphs[key] = g
        return self._graphs[key]

    # -- forward -----------------------------------------------------------

    def encode(
        self, examples: Sequence[Example], *, training: bool = False, rng: np.random.Generator | None = None,
        steps: int | None = None,
    ) -> tuple[Tensor, GrnState]:
        """Initial sentence states (slots stacked over examples) and the final encoder state."""
        cfg = self.config
        id_lists, graphs, entity_words = [], [], []
        for ex in examples:
            presented = ex.paragraph.permuted(ex.order)
            id_lists += [self.vocab.encode(s.words) for s in presented.sentences]
            g = relabel_sentences(self.graph(ex.paragraph), ex.order)
            graphs.append(g)
            entity_words.append([self.vocab.id(e.surface) for e in g.entities])
        tokens, lengths = pad_sentences(id_lists)
        embed = self.params["embed.words"]
        k0 = encode_sentences(
            self.params, embed, tokens, lengths, dropout=cfg.dropout, training=training, rng=rng
        )
        batch = batch_graphs(graphs, entity_words)
        state = encode(self.params, k0, batch, embed, cfg.steps if steps is None else steps, share=cfg.share_params)
        return k0, state

    def log_likelihood(
        self, examples: Sequence[Example], *, training: bool = False, rng: np.random.Generator | None = None
    ) -> Tensor:
        """Teacher-forced log P(gold order) per example."""
        k0, state = self.encode(examples, training=training, rng=rng)
        sizes = [len(ex.paragraph) for ex in examples]
        golds = [ex.gold_slots for ex in examples]
        return score_gold(
            self.params, k0, state.glob, sizes, golds, dropout=self.config.dropout, training=training, rng=rng
        )

    def nll(self, examples: Sequence[Example], *, training: bool = False, rng=None) -> Tensor:
        """Mean negative log-likelihood over the examples (scalar)."""
        ll = self.log_likelihood(examples, training=training, rng=rng)
        return ad.mul(ad.sum(ll), -1.0 / len(examples))

    def l2(self, coefficient: float) -> Tensor:
        terms = [ad.sum(p * p) for p in self.trainable().values()]
        total = terms[0]
        for t in terms[1:]:
            total = total + t
        return ad.mul(total, coefficient)

    def decode(self, examples: Sequence[Example], beam_size: int = 64) -> list[OrderPrediction]:
        """Beam-search orders, expressed in presentation slots."""
        with ad.no_tape():
            k0, state = self.encode(examples)
        out, off = [], 0
        for b, ex in enumerate(examples):
            m = len(ex.paragraph)
            out.append(beam_decode(self.params, k0.data[off : off + m], state.glob.data[b], beam_size))
            off += m
        return out

    def predict_orders(self, examples: Sequence[Example], beam_size: int = 64, batch_size: int = 32):
        """Predicted orders as gold-sentence identities, with their log-probabilities."""
        results = []
        for start in range(0, len(examples), batch_size):
            chunk = examples[start : start + batch_size]
            for ex, pred in zip(chunk, self.decode(chunk, beam_size)):
                results.append((tuple(int(ex.order[s]) for s in pred.order), pred))
        return results

    def describe(self) -> dict:
        return asdict(self.config)


def count_parameters(model, breakdown: bool = False):
    """Trainable scalar count; with ``breakdown`` also per group (embed/sent/grn/dec).

    ``model`` is a :class:`SentenceOrderingModel` or a name -> tensor mapping.
    """
    params = model.trainable() if isinstance(model, SentenceOrderingModel) else model
    total = int(sum(p.data.size for p in params.values()))
    if not breakdown:
        return total
    groups: dict[str, int] = {}
    for name, p in params.items():
        group = name.split(".")[0]
        groups[group] = groups.get(group, 0) + int(p.data.size)
    return total, groups
