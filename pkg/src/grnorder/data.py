"""Annotated paragraphs, dataset/embedding files and synthetic corpora.

Dataset files hold one JSON record per line::

    {"id": "p0", "split": "train",
     "sentences": [[{"w": "my"}, {"w": "dad", "n": true, "r": "S"}], ...]}

Sentences are stored in gold order.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, ContractError, DataError, DataWarning

ROLES = ("S", "O", "X")
SPLITS = ("train", "valid", "test")
PAD, UNK = 0, 1


@dataclass(frozen=True)
class Token:
    surface: str
    is_noun: bool = False
    role: str | None = None

    def __post_init__(self):
        if self.role is not None:
            if self.role not in ROLES:
                raise ContractError(f"unknown role {self.role!r}")
            if not self.is_noun:
                raise ContractError(f"token {self.surface!r} has a role but is not a noun")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise ContractError("a sentence needs at least one token")

    def __len__(self):
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.surface for t in self.tokens]


@dataclass(frozen=True)
class Paragraph:
    id: str
    sentences: tuple[Sentence, ...]
    split: str = "train"

    def __post_init__(self):
        if len(self.sentences) == 0:
            raise ContractError(f"paragraph {self.id!r} has no sentences")
        if self.split not in SPLITS:
            raise ContractError(f"paragraph {self.id!r}: unknown split {self.split!r}")

    def __len__(self):
        return len(self.sentences)

    def permuted(self, order: Sequence[int]) -> "Paragraph":
        """Paragraph whose slot k holds sentence ``order[k]``."""
        return Paragraph(self.id, tuple(self.sentences[i] for i in order), self.split)


# ---------------------------------------------------------------------------
# dataset files


def _token_to_record(token: Token) -> dict:
    rec = {"w": token.surface}
    if token.is_noun:
        rec["n"] = True
    if token.role is not None:
        rec["r"] = token.role
    return rec


def paragraph_to_record(p: Paragraph) -> dict:
    return {
        "id": p.id,
        "split": p.split,
        "sentences": [[_token_to_record(t) for t in s.tokens] for s in p.sentences],
    }


def _parse_token(rec: dict, where: str) -> Token:
    if not isinstance(rec, dict) or not isinstance(rec.get("w"), str):
        raise DataError(f"{where}: token record needs a string 'w'")
    is_noun = bool(rec.get("n", False))
    role = rec.get("r")
    if role is not None and role not in ROLES:
        raise DataError(f"{where}: unknown role {role!r}")
    if role is not None and not is_noun:
        raise DataError(f"{where}: role given for non-noun {rec['w']!r}")
    if is_noun and role is None:
        warnings.warn(f"{where}: noun {rec['w']!r} has no role, using X", DataWarning, stacklevel=3)
        role = "X"
    return Token(rec["w"].lower(), is_noun, role)


def paragraph_from_record(rec: dict, where: str = "record") -> Paragraph:
    if not isinstance(rec, dict):
        raise DataError(f"{where}: expected an object")
    sentences = rec.get("sentences")
    if not isinstance(sentences, list) or not sentences:
        raise DataError(f"{where}: 'sentences' must be a non-empty list")
    split = rec.get("split", "train")
    if split not in SPLITS:
        raise DataError(f"{where}: unknown split {split!r}")
    parsed = []
    for k, sent in enumerate(sentences):
        if not isinstance(sent, list) or not sent:
            raise DataError(f"{where}: sentence {k} is empty")
        parsed.append(Sentence(tuple(_parse_token(t, f"{where}, sentence {k}") for t in sent)))
    return Paragraph(str(rec.get("id", where)), tuple(parsed), split)


def load_dataset(path, format: str = "jsonl") -> list[Paragraph]:
    """Read a line-record dataset; malformed lines are skipped with a warning."""
    if format != "jsonl":
        raise ConfigurationError(f"unsupported dataset format {format!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file {path} does not exist")
    paragraphs, bad = [], []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                paragraphs.append(paragraph_from_record(json.loads(line), f"line {lineno}"))
            except (json.JSONDecodeError, DataError, ContractError) as exc:
                bad.append(lineno)
                warnings.warn(f"{path}: rejected line {lineno}: {exc}", DataWarning, stacklevel=2)
    if bad:
        warnings.warn(f"{path}: {len(bad)} malformed record(s) at lines {bad}", DataWarning, stacklevel=2)
    return paragraphs


def dumps_dataset(paragraphs: Iterable[Paragraph]) -> str:
    return "".join(
        json.dumps(paragraph_to_record(p), ensure_ascii=False, separators=(",", ":")) + "\n"
        for p in paragraphs
    )


def write_dataset(paragraphs: Iterable[Paragraph], path) -> None:
    Path(path).write_text(dumps_dataset(paragraphs), encoding="utf-8")


# ---------------------------------------------------------------------------
# embeddings and vocabulary


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    unknown: np.ndarray | None = None

    def __post_init__(self):
        if self.dimension <= 0:
            raise ConfigurationError("embedding dimension must be positive")
        if self.unknown is None:
            self.unknown = np.zeros(self.dimension)
        for word, vec in self.vectors.items():
            if len(vec) != self.dimension:
                raise ConfigurationError(f"vector for {word!r} has length {len(vec)} != {self.dimension}")

    @property
    def padding(self) -> np.ndarray:
        return np.zeros(self.dimension)

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors.get(word, self.unknown)


def load_embeddings(path, dimension: int = 100) -> EmbeddingTable:
    """Read ``word v1 ... vD`` lines (GloVe text format)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding file {path} does not exist")
    vectors = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            if len(parts) - 1 != dimension:
                if not vectors and lineno == 1:
                    raise ConfigurationError(
                        f"{path} holds {len(parts) - 1}-dimensional vectors but --embedding-dim is {dimension}"
                    )
                warnings.warn(f"{path}:{lineno}: expected {dimension} values, skipping", DataWarning, stacklevel=2)
                continue
            try:
                vectors[parts[0]] = np.array([float(v) for v in parts[1:]])
            except ValueError:
                warnings.warn(f"{path}:{lineno}: non-numeric value, skipping", DataWarning, stacklevel=2)
    return EmbeddingTable(dimension, vectors)


class Vocabulary:
    """Dense word ids; 0 is padding and 1 the unknown word."""

    def __init__(self, words: Sequence[str] = ()):
        self.itos = ["<pad>", "<unk>", *words]
        self.stoi = {w: i for i, w in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ContractError("duplicate words in vocabulary")

    @classmethod
    def build(cls, paragraphs: Iterable[Paragraph], min_freq: int = 1) -> "Vocabulary":
        counts = Counter(t.surface for p in paragraphs for s in p.sentences for t in s.tokens)
        words = sorted((w for w, c in counts.items() if c >= min_freq), key=lambda w: (-counts[w], w))
        return cls(words)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, word):
        return word in self.stoi

    def id(self, word: str) -> int:
        return self.stoi.get(word, UNK)

    def encode(self, words: Iterable[str]) -> list[int]:
        return [self.stoi.get(w, UNK) for w in words]


# ---------------------------------------------------------------------------
# annotation and synthetic data


def annotate_heuristic(words: Sequence[str], noun_lexicon) -> Sentence:
    """Mark lexicon words as nouns with the neutral role X."""
    if not noun_lexicon:
        raise ContractError("noun lexicon must be non-empty")
    lexicon = {w.lower() for w in noun_lexicon}
    return Sentence(
        tuple(Token(w.lower(), True, "X") if w.lower() in lexicon else Token(w.lower()) for w in words)
    )


_ONSETS = "b d f g k l m n p r s t v z".split()
_VOWELS = "a e i o u".split()
DETERMINERS = ("the", "a", "this", "that", "every", "some")
VERBS = ("saw", "took", "found", "moved", "liked", "kept", "lost", "made", "held", "met")
FILLERS = ("with", "near", "by", "after", "for", "over", "into", "from")
HEAD_CUES = ("first", "initially")
TAIL_CUES = ("finally", "lastly")
MIDDLE_CUES = ("then", "next", "later", "afterwards")


def noun_pool(size: int = 400) -> list[str]:
    """Deterministic pseudo-word nouns (CVCV); distinct from every function word."""
    reserved = set(DETERMINERS + VERBS + FILLERS + HEAD_CUES + TAIL_CUES + MIDDLE_CUES)
    words = [a + b + c + d for a in _ONSETS for b in _VOWELS for c in _ONSETS for d in _VOWELS]
    words = [w for w in words if w not in reserved]
    words = [words[i] for i in np.random.default_rng(0).permutation(len(words))]
    if size > len(words):
        raise ConfigurationError(f"noun pool is limited to {len(words)} words")
    return words[:size]


def generate_synthetic(
    seed: int,
    n_paragraphs: int,
    sentences_range: tuple[int, int] = (3, 5),
    entities_range: tuple[int, int] = (4, 8),
    split_fractions: tuple[float, float, float] = (1.0, 0.0, 0.0),
    pool_size: int = 400,
    cue_prob: float = 1.0,
    function_words: bool = True,
) -> list[Paragraph]:
    """Random paragraphs whose gold order is an entity chain.

    Consecutive gold sentences share a noun, extra entities either link
    consecutive sentences again or repeat inside one sentence, and every
    other noun is a singleton. The head and tail sentences carry a cue word
    with probability ``cue_prob``; middle sentences carry only uninformative
    connectives, so the middle of the order must come from the chain.
    With ``function_words=False`` sentences hold only the cue and the nouns.
    """
    lo_s, hi_s = sentences_range
    lo_e, hi_e = entities_range
    if not (2 <= lo_s <= hi_s):
        raise ConfigurationError(f"sentence range {sentences_range} must satisfy 2 <= lo <= hi")
    if not (1 <= lo_e <= hi_e):
        raise ConfigurationError(f"entity range {entities_range} must satisfy 1 <= lo <= hi")
    if hi_e < hi_s - 1:
        raise ConfigurationError(
            f"entity range {entities_range} cannot chain {hi_s} sentences (needs at least {hi_s - 1} shared nouns)"
        )
    if n_paragraphs < 0 or abs(sum(split_fractions) - 1.0) > 1e-9:
        raise ConfigurationError("split fractions must sum to 1")
    nouns = noun_pool(pool_size)
    if hi_e + hi_s > len(nouns):
        raise ConfigurationError("noun pool too small for the requested ranges")
    rng = np.random.default_rng(seed)
    n_train = int(round(split_fractions[0] * n_paragraphs))
    n_valid = int(round(split_fractions[1] * n_paragraphs))
    out = []
    for k in range(n_paragraphs):
        split = "train" if k < n_train else "valid" if k < n_train + n_valid else "test"
        out.append(_synthetic_paragraph(rng, f"syn{seed}-{k}", split, lo_s, hi_s, lo_e, hi_e, nouns, cue_prob, function_words))
    return out


def _synthetic_paragraph(rng, pid, split, lo_s, hi_s, lo_e, hi_e, nouns, cue_prob, function_words=True) -> Paragraph:
    m = int(rng.integers(lo_s, hi_s + 1))
    k = int(rng.integers(max(lo_e, m - 1), hi_e + 1))
    chosen = [nouns[i] for i in rng.choice(len(nouns), size=k + m, replace=False)]
    entities, singles = chosen[:k], chosen[k:]
    mentions: list[list[str]] = [[] for _ in range(m)]
    for i in range(m - 1):
        mentions[i].append(entities[i])
        mentions[i + 1].append(entities[i])
    for e in entities[m - 1 :]:
        if rng.random() < 0.5 and m > 1:
            i = int(rng.integers(0, m - 1))
            mentions[i].append(e)
            mentions[i + 1].append(e)
        else:
            i = int(rng.integers(0, m))
            mentions[i].extend([e, e])
    for i in range(m):
        mentions[i].append(singles[i])
    sentences = []
    for i in range(m):
        words = list(mentions[i])
        rng.shuffle(words)
        tokens: list[Token] = []
        if i == 0 and rng.random() < cue_prob:
            tokens.append(Token(str(rng.choice(HEAD_CUES))))
        elif i == m - 1 and rng.random() < cue_prob:
            tokens.append(Token(str(rng.choice(TAIL_CUES))))
        elif 0 < i < m - 1 and function_words:
            tokens.append(Token(str(rng.choice(MIDDLE_CUES))))
        if not function_words:
            tokens += [Token(w, True, ROLES[int(rng.integers(0, 3))]) for w in words]
            sentences.append(Sentence(tuple(tokens)))
            continue
        for j, w in enumerate(words):
            tokens.append(Token(str(rng.choice(DETERMINERS))))
            tokens.append(Token(w, True, ROLES[int(rng.integers(0, 3))]))
            if j == 0:
                tokens.append(Token(str(rng.choice(VERBS))))
            elif j < len(words) - 1:
                tokens.append(Token(str(rng.choice(FILLERS))))
        sentences.append(Sentence(tuple(tokens)))
    return Paragraph(pid, tuple(sentences), split)
