"""Bidirectional LSTM sentence encoder.

Each sentence becomes ``[h_fw at its last token ; h_bw at its first token]``.
Sentences are encoded together as a padded batch; padded steps leave the
state untouched (exact select), so every row only depends on its own tokens.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import lstm_cell, lstm_params


def bilstm_params(rng, embedding_dim: int, sentence_dim: int) -> dict[str, Tensor]:
    half = sentence_dim // 2
    return {**lstm_params(rng, "sent.fw", embedding_dim, half), **lstm_params(rng, "sent.bw", embedding_dim, half)}


def pad_sentences(id_lists) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(ids) for ids in id_lists], dtype=np.intp)
    tokens = np.zeros((len(id_lists), int(lengths.max()) if len(lengths) else 0), dtype=np.intp)
    for k, ids in enumerate(id_lists):
        tokens[k, : len(ids)] = ids
    return tokens, lengths


def encode_sentences(
    params: dict[str, Tensor],
    embeddings: Tensor,
    tokens: np.ndarray,
    lengths: np.ndarray,
    *,
    dropout: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Sentence states K0 of shape (n_sentences, sentence_dim)."""
    n, length = tokens.shape
    half = params["sent.fw.b"].shape[0] // 4
    words = ad.embedding_lookup(embeddings, tokens.reshape(-1))
    words = ad.dropout(words, dropout, rng, training)
    zeros = ad.constant(np.zeros((n, half), dtype=embeddings.data.dtype))
    base = np.arange(n) * length

    def run(prefix, steps):
        h, c = zeros, zeros
        for t in steps:
            live = (t < lengths)[:, None]
            x = ad.rows(words, base + t)
            h_new, c_new = lstm_cell(params[f"{prefix}.W"], params[f"{prefix}.b"], x, h, c)
            h, c = ad.where(live, h_new, h), ad.where(live, c_new, c)
        return h

    forward = run("sent.fw", range(length))
    backward = run("sent.bw", range(length - 1, -1, -1))
    return ad.concat([forward, backward], axis=1)
