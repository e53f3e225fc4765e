"""Sentence-entity graphs built from annotated paragraphs.

Entities are lowercased noun surfaces occurring at least twice in the
paragraph (counted over tokens). Entity ids follow alphabetical order of the
surfaces, so presenting the sentences in a different order only relabels the
sentence indices.
"""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .data import Paragraph
from .errors import ContractError

VARIANTS = ("SE", "S", "F")
LABELS = ("S", "O", "X", "N")  # N: neutral label used by the remove-edge-labels ablation
LABEL_INDEX = {label: k for k, label in enumerate(LABELS)}
_RANK = {"S": 0, "O": 1, "X": 2}
TRANSFORMS = ("shuffle-edges", "remove-edge-labels", "remove-entities")


@dataclass(frozen=True)
class EntityNode:
    entity_id: int
    surface: str
    count: int


@dataclass(frozen=True)
class SEEdge:
    sentence: int
    entity: int
    label: str


@dataclass(frozen=True)
class SentenceEntityGraph:
    num_sentences: int
    entities: tuple[EntityNode, ...]
    se_edges: tuple[SEEdge, ...]
    ss_edges: tuple[tuple[int, int], ...]
    variant: str = "SE"
    # entity-bearing graph an S-Graph was projected from; needed to re-derive
    # SS edges when entities are removed
    source: "SentenceEntityGraph | None" = field(default=None, compare=False, repr=False)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    def sentence_neighbors(self, i: int) -> list[int]:
        return sorted({b if a == i else a for a, b in self.ss_edges if i in (a, b)})

    def entity_neighbors(self, i: int) -> list[int]:
        return sorted(e.entity for e in self.se_edges if e.sentence == i)

    def entity_sentences(self, j: int) -> list[int]:
        return sorted(e.sentence for e in self.se_edges if e.entity == j)

    def entity_sets(self) -> list[set[int]]:
        sets = [set() for _ in range(self.num_sentences)]
        for e in self.se_edges:
            sets[e.sentence].add(e.entity)
        return sets

    def to_record(self) -> dict:
        """Plain-JSON dump used for debugging and golden files."""
        return {
            "variant": self.variant,
            "sentences": self.num_sentences,
            "entities": [[e.entity_id, e.surface, e.count] for e in self.entities],
            "se_edges": [[e.sentence, e.entity, e.label] for e in self.se_edges],
            "ss_edges": [list(pair) for pair in self.ss_edges],
        }


def resolve_edge_label(roles: Iterable[str]) -> str:
    """Highest-ranked role under S > O > X."""
    roles = list(roles)
    if not roles:
        raise ContractError("cannot resolve the label of an empty role set")
    return min(roles, key=_RANK.__getitem__)


def _ss_from_sets(sets: list[set[int]]) -> tuple[tuple[int, int], ...]:
    return tuple((a, b) for a, b in itertools.combinations(range(len(sets)), 2) if sets[a] & sets[b])


def _complete(m: int) -> tuple[tuple[int, int], ...]:
    return tuple(itertools.combinations(range(m), 2))


def _project(g: SentenceEntityGraph, variant: str) -> SentenceEntityGraph:
    if variant == "SE":
        return g
    if variant == "S":
        return SentenceEntityGraph(g.num_sentences, (), (), g.ss_edges, "S", source=g)
    return SentenceEntityGraph(g.num_sentences, (), (), _complete(g.num_sentences), "F")


def build_graph(paragraph: Paragraph, variant: str = "SE") -> SentenceEntityGraph:
    if variant not in VARIANTS:
        raise ContractError(f"unknown graph variant {variant!r}; expected one of {VARIANTS}")
    counts = Counter(t.surface.lower() for s in paragraph.sentences for t in s.tokens if t.is_noun)
    surfaces = sorted(w for w, c in counts.items() if c >= 2)
    ids = {w: k for k, w in enumerate(surfaces)}
    entities = tuple(EntityNode(k, w, counts[w]) for k, w in enumerate(surfaces))
    se_edges = []
    for i, sentence in enumerate(paragraph.sentences):
        roles = defaultdict(list)
        for t in sentence.tokens:
            w = t.surface.lower()
            if t.is_noun and w in ids:
                roles[ids[w]].append(t.role or "X")
        se_edges.extend(SEEdge(i, j, resolve_edge_label(roles[j])) for j in sorted(roles))
    graph = SentenceEntityGraph(len(paragraph), entities, tuple(se_edges), (), "SE")
    graph = replace(graph, ss_edges=_ss_from_sets(graph.entity_sets()))
    return _project(graph, variant)


def _remove_entities(g: SentenceEntityGraph, fraction: float, rng) -> SentenceEntityGraph:
    n_remove = int(np.floor(fraction * g.num_entities + 0.5))
    removed = set(rng.choice(g.num_entities, size=n_remove, replace=False).tolist()) if n_remove else set()
    keep = [e for e in g.entities if e.entity_id not in removed]
    new_id = {e.entity_id: k for k, e in enumerate(keep)}
    entities = tuple(EntityNode(new_id[e.entity_id], e.surface, e.count) for e in keep)
    se_edges = tuple(SEEdge(e.sentence, new_id[e.entity], e.label) for e in g.se_edges if e.entity in new_id)
    out = SentenceEntityGraph(g.num_sentences, entities, se_edges, (), "SE")
    return replace(out, ss_edges=_ss_from_sets(out.entity_sets()))


def _shuffle(g: SentenceEntityGraph, rng) -> SentenceEntityGraph:
    pairs = _complete(g.num_sentences)
    picks = np.sort(rng.choice(len(pairs), size=len(g.ss_edges), replace=False))
    ss = tuple(pairs[k] for k in picks)
    if g.variant == "S":
        return SentenceEntityGraph(g.num_sentences, (), (), ss, "S")
    cells = g.num_sentences * g.num_entities
    picks = rng.choice(cells, size=len(g.se_edges), replace=False)
    labels = [e.label for e in g.se_edges]
    rng.shuffle(labels)
    se = sorted(
        (SEEdge(int(c) // g.num_entities, int(c) % g.num_entities, lab) for c, lab in zip(picks, labels)),
        key=lambda e: (e.sentence, e.entity),
    )
    return SentenceEntityGraph(g.num_sentences, g.entities, tuple(se), ss, g.variant)


def ablate(
    graph: SentenceEntityGraph, transform: str, *, fraction: float = 0.0, seed: int = 0
) -> SentenceEntityGraph:
    """Apply one corruption: shuffle-edges, remove-edge-labels or remove-entities."""
    if graph.variant == "F":
        raise ContractError("ablations are defined for entity-bearing graphs, not the F variant")
    if transform not in TRANSFORMS:
        raise ContractError(f"unknown ablation {transform!r}; expected one of {TRANSFORMS}")
    rng = np.random.default_rng(seed)
    if transform == "shuffle-edges":
        return _shuffle(graph, rng)
    if transform == "remove-edge-labels":
        if graph.variant != "SE":
            raise ContractError("remove-edge-labels needs labelled SE edges (SE variant only)")
        return replace(graph, se_edges=tuple(replace(e, label="N") for e in graph.se_edges))
    if not 0.0 <= fraction <= 1.0:
        raise ContractError(f"entity removal fraction must lie in [0, 1], got {fraction}")
    base = graph if graph.variant == "SE" else graph.source
    if base is None:
        raise ContractError("this S-Graph no longer carries its entities; rebuild it before removing entities")
    return _project(_remove_entities(base, fraction, rng), graph.variant)


def relabel_sentences(graph: SentenceEntityGraph, order) -> SentenceEntityGraph:
    """Graph of the presentation whose slot k holds sentence ``order[k]``."""
    slot = {int(s): k for k, s in enumerate(order)}
    if sorted(slot) != list(range(graph.num_sentences)):
        raise ContractError(f"{list(order)} is not a permutation of the graph's sentences")
    ss = tuple(sorted(tuple(sorted((slot[a], slot[b]))) for a, b in graph.ss_edges))
    se = tuple(sorted((replace(e, sentence=slot[e.sentence]) for e in graph.se_edges), key=lambda e: (e.sentence, e.entity)))
    source = relabel_sentences(graph.source, order) if graph.source is not None else None
    return SentenceEntityGraph(graph.num_sentences, graph.entities, se, ss, graph.variant, source=source)
