"""Input-validation helpers shared by the estimator, experiments and CLI."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .data import Paragraph
from .errors import ConfigurationError, ContractError, DataError, NotFittedError


def check_paragraphs(X, *, name: str = "X", allow_empty: bool = False) -> list[Paragraph]:
    """Materialise ``X`` as a list of :class:`Paragraph`, rejecting anything else."""
    if isinstance(X, Paragraph):
        raise DataError(f"{name} must be a sequence of paragraphs, got a single paragraph")
    try:
        items = list(X)
    except TypeError:
        raise DataError(f"{name} must be an iterable of paragraphs, got {type(X).__name__}") from None
    bad = [k for k, p in enumerate(items) if not isinstance(p, Paragraph)]
    if bad:
        raise DataError(f"{name}[{bad[0]}] is {type(items[bad[0]]).__name__}, expected Paragraph")
    if not items and not allow_empty:
        raise DataError(f"{name} contains no paragraphs")
    return items


def check_split(paragraphs: Sequence[Paragraph], split: str) -> list[Paragraph]:
    chosen = [p for p in paragraphs if p.split == split]
    if not chosen:
        raise DataError(f"the corpus has no {split!r} paragraphs")
    return chosen


def check_orders(orders: Iterable, sizes: Sequence[int]) -> list[np.ndarray]:
    """Each order must be a permutation of ``range(size)``."""
    orders = list(orders)
    if len(orders) != len(sizes):
        raise ContractError(f"{len(orders)} orders for {len(sizes)} paragraphs")
    out = []
    for order, m in zip(orders, sizes):
        arr = np.asarray(order, dtype=np.intp)
        if arr.shape != (m,) or sorted(arr.tolist()) != list(range(m)):
            raise ContractError(f"{list(order)} is not a permutation of 0..{m - 1}")
        out.append(arr)
    return out


def check_t_values(values: Iterable) -> list[int]:
    try:
        ts = [int(t) for t in values]
    except (TypeError, ValueError):
        raise ConfigurationError("recurrent step values must be integers") from None
    if not ts:
        raise ConfigurationError("need at least one recurrent step value")
    if min(ts) < 0:
        raise ConfigurationError(f"recurrent step values must be >= 0, got {ts}")
    return ts


def check_is_fitted(estimator, attribute: str = "model_") -> None:
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(f"{type(estimator).__name__} is not fitted yet; call fit first")
