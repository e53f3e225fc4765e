"""Graph recurrent encoder over sentence-entity graphs.

State per step: sentence states (M x d), entity states (M_hat x d_e) and one
paragraph-level global state (d). Every step computes all messages from the
previous states and then updates all nodes at once.

Several paragraphs are encoded together as the disjoint union of their
graphs; ``GraphBatch`` holds the flattened index arrays.

Dimension bridging between sentence (d) and entity (d_e) states happens in
the message paths: sentence<-entity messages are gated in d_e and projected
to d, entity<-sentence messages are gated in d and projected to d_e.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import LABEL_INDEX, LABELS, SentenceEntityGraph
from .layers import glorot, gru_cell, gru_params


@dataclass
class GraphBatch:
    num_graphs: int
    sent_graph: np.ndarray  # graph id of each sentence node
    ss_recv: np.ndarray  # directed SS edges (both directions)
    ss_send: np.ndarray
    ent_graph: np.ndarray
    ent_words: np.ndarray  # vocabulary id of each entity
    se_sent: np.ndarray
    se_ent: np.ndarray
    se_label: np.ndarray

    @property
    def num_sentences(self) -> int:
        return len(self.sent_graph)

    @property
    def num_entities(self) -> int:
        return len(self.ent_graph)


def batch_graphs(graphs: list[SentenceEntityGraph], entity_word_ids: list[list[int]]) -> GraphBatch:
    """Flatten graphs into one disjoint union; ``entity_word_ids[g][j]`` is entity j's word id."""
    ints = lambda xs: np.asarray(xs, dtype=np.intp)  # noqa: E731
    sent_graph, ent_graph, ent_words = [], [], []
    recv, send, se_sent, se_ent, se_label = [], [], [], [], []
    s_off = e_off = 0
    for gid, (g, words) in enumerate(zip(graphs, entity_word_ids)):
        sent_graph += [gid] * g.num_sentences
        ent_graph += [gid] * g.num_entities
        ent_words += list(words)
        for a, b in g.ss_edges:
            recv += [s_off + a, s_off + b]
            send += [s_off + b, s_off + a]
        for e in g.se_edges:
            se_sent.append(s_off + e.sentence)
            se_ent.append(e_off + e.entity)
            se_label.append(LABEL_INDEX[e.label])
        s_off += g.num_sentences
        e_off += g.num_entities
    return GraphBatch(
        len(graphs), ints(sent_graph), ints(recv), ints(send), ints(ent_graph), ints(ent_words),
        ints(se_sent), ints(se_ent), ints(se_label),
    )


def grn_params(
    rng,
    embedding_dim: int,
    sentence_dim: int,
    entity_dim: int,
    edge_dim: int,
    *,
    entities: bool = True,
    share: bool = False,
) -> dict[str, Tensor]:
    d, de, dl = sentence_dim, entity_dim, edge_dim
    p = {}

    def add(name, values):
        p[name] = ad.parameter(values, name)

    add("grn.init.global.W", glorot(rng, d, d))
    add("grn.init.global.b", np.zeros(d))
    add("grn.gate.ss.W", glorot(rng, 2 * d, d))
    add("grn.gate.ss.b", np.zeros(d))
    p.update(gru_params(rng, "grn.sent", 3 * d, d))
    p.update(gru_params(rng, "grn.glob", d, d))
    if not entities:
        return p
    add("grn.init.entity.W", glorot(rng, embedding_dim, de))
    add("grn.init.entity.b", np.zeros(de))
    add("grn.edge.embed", rng.normal(0.0, 0.1, size=(len(LABELS), dl)))
    add("grn.gate.se.W", glorot(rng, d + de + dl, de))
    add("grn.gate.se.b", np.zeros(de))
    add("grn.proj.se", glorot(rng, de, d))
    add("grn.gate.es.W", glorot(rng, de + d + dl, d))
    add("grn.gate.es.b", np.zeros(d))
    add("grn.proj.es", glorot(rng, d, de))
    add("grn.sent.W_ent", glorot(rng, d, 3 * d))
    add("grn.glob.W_ent", glorot(rng, de, 3 * d))
    if not share:
        p.update(gru_params(rng, "grn.ent", embedding_dim + de + d, de))
    return p


@dataclass
class GrnState:
    sentences: Tensor
    entities: Tensor | None
    glob: Tensor
    step: int = 0


def init_state(params, k0: Tensor, batch: GraphBatch, embeddings: Tensor) -> tuple[GrnState, Tensor | None]:
    """Initial states plus the entity word embeddings (None without entities)."""
    mean_k0 = ad.segment_mean(k0, batch.sent_graph, batch.num_graphs)
    g0 = ad.tanh(ad.linear(mean_k0, params["grn.init.global.W"], params["grn.init.global.b"]))
    if batch.num_entities == 0 or "grn.init.entity.W" not in params:
        return GrnState(k0, None, g0), None
    e = ad.embedding_lookup(embeddings, batch.ent_words)
    eps0 = ad.tanh(ad.linear(e, params["grn.init.entity.W"], params["grn.init.entity.b"]))
    return GrnState(k0, eps0, g0), e


def sentence_messages(params, state: GrnState, batch: GraphBatch, labels: Tensor | None):
    """(m, m_tilde_projected): gated sums from sentence and entity neighbours."""
    kappa = state.sentences
    n, d = kappa.shape
    if len(batch.ss_recv):
        recv, send = ad.rows(kappa, batch.ss_recv), ad.rows(kappa, batch.ss_send)
        w = ad.sigmoid(ad.linear(ad.concat([recv, send], axis=1), params["grn.gate.ss.W"], params["grn.gate.ss.b"]))
        m = ad.segment_sum(w * send, batch.ss_recv, n)
    else:
        m = ad.constant(np.zeros((n, d), dtype=kappa.data.dtype))
    if state.entities is None:
        return m, None
    recv, send = ad.rows(kappa, batch.se_sent), ad.rows(state.entities, batch.se_ent)
    w = ad.sigmoid(ad.linear(ad.concat([recv, send, labels], axis=1), params["grn.gate.se.W"], params["grn.gate.se.b"]))
    m_ent = ad.matmul(ad.segment_sum(w * send, batch.se_sent, n), params["grn.proj.se"])
    return m, m_ent


def entity_messages(params, state: GrnState, batch: GraphBatch, labels: Tensor) -> Tensor:
    recv, send = ad.rows(state.entities, batch.se_ent), ad.rows(state.sentences, batch.se_sent)
    w = ad.sigmoid(ad.linear(ad.concat([recv, send, labels], axis=1), params["grn.gate.es.W"], params["grn.gate.es.b"]))
    summed = ad.segment_sum(w * send, batch.se_ent, batch.num_entities)
    return ad.matmul(summed, params["grn.proj.es"])


def update_sentences(params, state: GrnState, k0: Tensor, m: Tensor, m_ent: Tensor | None, batch: GraphBatch) -> Tensor:
    g_rows = ad.rows(state.glob, batch.sent_graph)
    xi = ad.concat([k0, m, g_rows], axis=1)
    extra = None if m_ent is None else ad.matmul(m_ent, params["grn.sent.W_ent"])
    return gru_cell(params, "grn.sent", xi, state.sentences, extra)


def update_entities(params, state: GrnState, static: Tensor, m_hat: Tensor, batch: GraphBatch, share: bool) -> Tensor:
    """``static`` is the entity word embedding, or the initial entity state when sharing the sentence bank."""
    g_rows = ad.rows(state.glob, batch.ent_graph)
    xi = ad.concat([static, m_hat, g_rows], axis=1)
    return gru_cell(params, "grn.sent" if share else "grn.ent", xi, state.entities)


def update_global(params, state: GrnState, batch: GraphBatch) -> Tensor:
    kbar = ad.segment_mean(state.sentences, batch.sent_graph, batch.num_graphs)
    extra = None
    if state.entities is not None:
        ebar = ad.segment_mean(state.entities, batch.ent_graph, batch.num_graphs)
        extra = ad.matmul(ebar, params["grn.glob.W_ent"])
    return gru_cell(params, "grn.glob", kbar, state.glob, extra)


def encode(
    params, k0: Tensor, batch: GraphBatch, embeddings: Tensor, steps: int, *, share: bool = False
) -> GrnState:
    """Run ``steps`` synchronous rounds; step 0 returns the initial state."""
    state, ent_emb = init_state(params, k0, batch, embeddings)
    labels = None
    if state.entities is not None:
        labels = ad.embedding_lookup(params["grn.edge.embed"], batch.se_label)
        static = state.entities if share else ent_emb
    for t in range(1, steps + 1):
        m, m_ent = sentence_messages(params, state, batch, labels)
        kappa = update_sentences(params, state, k0, m, m_ent, batch)
        eps = None
        if state.entities is not None:
            m_hat = entity_messages(params, state, batch, labels)
            eps = update_entities(params, state, static, m_hat, batch, share)
        glob = update_global(params, state, batch)
        state = GrnState(kappa, eps, glob, t)
    return state
