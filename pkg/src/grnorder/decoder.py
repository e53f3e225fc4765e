"""LSTM pointer network over the presented sentence slots.

The decoder starts from the paragraph state (hidden) and a zero cell with a
zero first input; afterwards its input is the initial representation of the
previously chosen sentence. At each step the slots already chosen are masked
out of the pointer softmax, so the chain rule defines a distribution over
permutations.

Beam candidates are ranked by total log-probability; equal scores fall back
to the lexicographically smaller slot sequence, which makes both searches
deterministic and mutually consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, GuardError
from .layers import glorot, lstm_cell, lstm_params

MAX_EXHAUSTIVE = 8


@dataclass(frozen=True)
class OrderPrediction:
    order: tuple[int, ...]
    step_log_probs: tuple[float, ...]
    total_log_prob: float


def pointer_params(rng, sentence_dim: int) -> dict[str, Tensor]:
    d = sentence_dim
    p = lstm_params(rng, "dec.lstm", d, d)
    p["dec.att.W"] = ad.parameter(glorot(rng, d, d), "dec.att.W")
    p["dec.att.U"] = ad.parameter(glorot(rng, d, d), "dec.att.U")
    p["dec.att.v"] = ad.parameter(glorot(rng, d, 1), "dec.att.v")
    return p


def check_permutation(order, m: int) -> np.ndarray:
    arr = np.asarray(order, dtype=np.intp)
    if arr.shape != (m,) or sorted(arr.tolist()) != list(range(m)):
        raise ContractError(f"{list(order)} is not a permutation of 0..{m - 1}")
    return arr


def score_gold(
    params,
    k0: Tensor,
    glob: Tensor,
    sizes: list[int],
    golds: list,
    *,
    dropout: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Teacher-forced log-probability of each gold order, shape (n_paragraphs,).

    ``k0`` stacks the slots of all paragraphs (paragraph b owns rows
    ``offset_b .. offset_b + sizes[b]``); ``glob`` holds one paragraph state
    per row; ``golds[b]`` lists slot indices in gold order.
    """
    n_par = len(sizes)
    total, d = k0.shape
    mmax = max(sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.intp)
    golds = [check_permutation(g, m) for g, m in zip(golds, sizes)]
    zero_row = total
    k0z = ad.concat([k0, ad.constant(np.zeros((1, d), dtype=k0.data.dtype))], axis=0)

    inputs = np.full((mmax, n_par), zero_row, dtype=np.intp)
    for b, (gold, off) in enumerate(zip(golds, offsets)):
        inputs[1 : sizes[b], b] = off + gold[:-1]
    x_all = ad.dropout(ad.rows(k0z, inputs.reshape(-1)), dropout, rng, training)

    w, bias = params["dec.lstm.W"], params["dec.lstm.b"]
    h, c = glob, ad.constant(np.zeros((n_par, d), dtype=k0.data.dtype))
    hidden = []
    for t in range(mmax):
        h, c = lstm_cell(w, bias, ad.rows(x_all, np.arange(t * n_par, (t + 1) * n_par)), h, c)
        hidden.append(h)
    hw = ad.matmul(ad.concat(hidden, axis=0), params["dec.att.W"])  # row t * n_par + b
    uk = ad.matmul(k0z, params["dec.att.U"])

    q_idx = np.empty((n_par, mmax, mmax), dtype=np.intp)
    k_idx = np.empty((n_par, mmax, mmax), dtype=np.intp)
    mask = np.zeros((n_par, mmax, mmax), dtype=bool)
    picks = []
    for b in range(n_par):
        m = sizes[b]
        slot_rows = np.where(np.arange(mmax) < m, offsets[b] + np.arange(mmax), zero_row)
        q_idx[b] = (np.arange(mmax) * n_par + b)[:, None]
        k_idx[b] = slot_rows[None, :]
        live = np.zeros(mmax, dtype=bool)
        live[:m] = True
        for t in range(mmax):
            if t < m:
                mask[b, t] = live
                picks.append((b * mmax + t) * mmax + golds[b][t])
                live = live.copy()
                live[golds[b][t]] = False
            else:
                mask[b, t, 0] = True  # padding row, never picked
    att = ad.tanh(ad.rows(hw, q_idx.reshape(-1)) + ad.rows(uk, k_idx.reshape(-1)))
    scores = ad.reshape(ad.matmul(att, params["dec.att.v"]), (n_par * mmax, mmax))
    logp = ad.log_softmax(scores, mask.reshape(n_par * mmax, mmax))
    picked = ad.pick(logp, picks)
    owner = np.repeat(np.arange(n_par), sizes)
    return ad.reshape(ad.segment_sum(ad.reshape(picked, (len(picks), 1)), owner, n_par), (n_par,))


class _Stepper:
    """Single-paragraph decoder steps evaluated without a tape."""

    def __init__(self, params, k0: np.ndarray, glob: np.ndarray):
        self.params = params
        self.k0 = ad.constant(k0)
        self.m, self.d = k0.shape
        self.glob = np.asarray(glob).reshape(1, self.d)
        with ad.no_tape():
            self.uk = ad.matmul(self.k0, params["dec.att.U"])

    def start(self):
        zeros = np.zeros((1, self.d), dtype=self.k0.data.dtype)
        return self.glob, zeros, zeros

    def step(self, h: np.ndarray, c: np.ndarray, x: np.ndarray, chosen: np.ndarray):
        """Advance n states; ``chosen`` (n, m) marks used slots. Returns (h, c, logp)."""
        p = self.params
        n = h.shape[0]
        with ad.no_tape():
            h_t, c_t = lstm_cell(p["dec.lstm.W"], p["dec.lstm.b"], ad.constant(x), ad.constant(h), ad.constant(c))
            hw = ad.matmul(h_t, p["dec.att.W"])
            att = ad.tanh(ad.rows(hw, np.repeat(np.arange(n), self.m)) + ad.rows(self.uk, np.tile(np.arange(self.m), n)))
            scores = ad.reshape(ad.matmul(att, p["dec.att.v"]), (n, self.m))
            logp = ad.log_softmax(scores, ~chosen)
        return h_t.data, c_t.data, logp.data


def beam_decode(params, k0, glob, beam_size: int = 64) -> OrderPrediction:
    """Length-synchronous beam search; ``beam_size`` 1 is greedy."""
    if beam_size < 1:
        raise ContractError("beam size must be at least 1")
    k0 = k0.data if isinstance(k0, Tensor) else np.asarray(k0)
    glob = glob.data if isinstance(glob, Tensor) else np.asarray(glob)
    stepper = _Stepper(params, k0, glob)
    h, c, x = stepper.start()
    beams = [((), (), 0.0)]  # (sequence, step log-probs, total)
    for _ in range(stepper.m):
        chosen = np.zeros((len(beams), stepper.m), dtype=bool)
        for b, (seq, _, _) in enumerate(beams):
            chosen[b, list(seq)] = True
        h, c, logp = stepper.step(h, c, x, chosen)
        candidates = [
            (total + float(logp[b, k]), seq + (k,), steps + (float(logp[b, k]),), b)
            for b, (seq, steps, total) in enumerate(beams)
            for k in range(stepper.m)
            if not chosen[b, k]
        ]
        candidates.sort(key=lambda cand: (-cand[0], cand[1]))
        kept = candidates[:beam_size]
        parents = np.array([cand[3] for cand in kept])
        last = np.array([cand[1][-1] for cand in kept])
        h, c, x = h[parents], c[parents], k0[last]
        beams = [(seq, steps, total) for total, seq, steps, _ in kept]
    seq, steps, total = beams[0]
    return OrderPrediction(seq, steps, total)


def enumerate_orders(params, k0, glob):
    """Yield ``(order, step_log_probs, total)`` for every permutation, depth-first in lexicographic order."""
    k0 = k0.data if isinstance(k0, Tensor) else np.asarray(k0)
    glob = glob.data if isinstance(glob, Tensor) else np.asarray(glob)
    stepper = _Stepper(params, k0, glob)
    m = stepper.m
    if m > MAX_EXHAUSTIVE:
        raise GuardError(f"exhaustive decoding is limited to {MAX_EXHAUSTIVE} sentences, got {m}")

    def walk(seq, steps, total, h, c, x):
        if len(seq) == m:
            yield seq, steps, total
            return
        chosen = np.zeros((1, m), dtype=bool)
        chosen[0, list(seq)] = True
        h, c, logp = stepper.step(h, c, x, chosen)
        for k in range(m):
            if not chosen[0, k]:
                lp = float(logp[0, k])
                yield from walk(seq + (k,), steps + (lp,), total + lp, h, c, k0[k : k + 1])

    yield from walk((), (), 0.0, *stepper.start())


def exhaustive_decode(params, k0, glob) -> OrderPrediction:
    """Best order over all M! permutations (same tie-breaking as the beam)."""
    best = None
    for seq, steps, total in enumerate_orders(params, k0, glob):
        if best is None or total > best[2]:
            best = (seq, steps, total)
    return OrderPrediction(*best)


def order_log_partition(params, k0, glob) -> float:
    """log of the summed probability of all permutations (0 for a proper distribution)."""
    totals = np.array([total for _, _, total in enumerate_orders(params, k0, glob)])
    top = totals.max()
    return float(top + math.log(np.exp(totals - top).sum()))
