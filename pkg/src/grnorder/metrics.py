"""Ordering metrics: Kendall's tau, positional accuracy, perfect match ratio, head/tail accuracy.

Orders are sequences of gold-sentence identities, so all metrics are
independent of how the sentences were presented to the model.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError


def _check_pair(pred: Sequence[int], gold: Sequence[int]) -> None:
    if len(pred) != len(gold):
        raise ContractError(f"prediction has {len(pred)} items, gold has {len(gold)}")
    if len(gold) == 0:
        raise ContractError("orders must contain at least one item")
    if sorted(pred) != sorted(gold) or len(set(gold)) != len(gold):
        raise ContractError(f"{list(pred)} and {list(gold)} are not permutations of the same items")


def _count_inversions(seq: list[int]) -> int:
    # merge sort; O(M log M)
    if len(seq) < 2:
        return 0
    mid = len(seq) // 2
    left, right = seq[:mid], seq[mid:]
    count = _count_inversions(left) + _count_inversions(right)
    left.sort()
    right.sort()
    j = 0
    for x in left:
        while j < len(right) and right[j] < x:
            j += 1
        count += j
    return count


def kendall_tau(pred: Sequence[int], gold: Sequence[int]) -> float:
    """1 - 2 * inversions / C(M, 2); defined as 1.0 for M = 1."""
    _check_pair(pred, gold)
    m = len(gold)
    if m == 1:
        return 1.0
    rank = {item: k for k, item in enumerate(gold)}
    inversions = _count_inversions([rank[item] for item in pred])
    pairs = m * (m - 1) // 2
    # one integer division, so the result is the correctly rounded ratio
    return (pairs - 2 * inversions) / pairs


def accuracy(pred: Sequence[int], gold: Sequence[int]) -> float:
    """Fraction of positions holding the right sentence."""
    _check_pair(pred, gold)
    return sum(p == g for p, g in zip(pred, gold)) / len(gold)


def _nonempty(batch) -> list:
    batch = list(batch)
    if not batch:
        raise ContractError("metrics need at least one paragraph")
    for pred, gold in batch:
        _check_pair(pred, gold)
    return batch


def pmr(batch: Iterable[tuple[Sequence[int], Sequence[int]]]) -> float:
    """Perfect match ratio over (pred, gold) pairs."""
    batch = _nonempty(batch)
    return sum(list(p) == list(g) for p, g in batch) / len(batch)


def head_tail_accuracy(batch) -> tuple[float, float]:
    batch = _nonempty(batch)
    head = sum(p[0] == g[0] for p, g in batch) / len(batch)
    tail = sum(p[-1] == g[-1] for p, g in batch) / len(batch)
    return head, tail


@dataclass
class MetricsReport:
    tau: float
    acc: float
    pmr: float
    head_acc: float
    tail_acc: float
    count: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_orders(batch) -> MetricsReport:
    """Mean tau/acc over paragraphs plus PMR and head/tail ratios."""
    batch = _nonempty(batch)
    head, tail = head_tail_accuracy(batch)
    report = MetricsReport(
        tau=float(np.mean([kendall_tau(p, g) for p, g in batch])),
        acc=float(np.mean([accuracy(p, g) for p, g in batch])),
        pmr=pmr(batch),
        head_acc=head,
        tail_acc=tail,
        count=len(batch),
    )
    if report.pmr > report.acc + 1e-12:
        raise ContractError("invariant violated: pmr exceeds acc")
    return report


def bootstrap(batch, n_samples: int = 1000, seed: int = 0) -> dict[str, tuple[float, float]]:
    """95% percentile intervals of tau/acc/pmr from paragraph resampling."""
    batch = _nonempty(batch)
    taus = np.array([kendall_tau(p, g) for p, g in batch])
    accs = np.array([accuracy(p, g) for p, g in batch])
    exact = np.array([list(p) == list(g) for p, g in batch], dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(batch), size=(n_samples, len(batch)))
    out = {}
    for name, values in (("tau", taus), ("acc", accs), ("pmr", exact)):
        means = values[idx].mean(axis=1)
        out[name] = (float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5)))
    return out


def format_table(rows: Sequence[dict], columns: Sequence[str], title: str | None = None) -> str:
    """Aligned plain-text table; floats print with four decimals."""

    def cell(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    body = [[cell(r.get(c, "---")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[k]) for b in body)) if body else len(c) for k, c in enumerate(columns)]
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)
