"""Ablation grid, recurrent-step sweep and seed-replicated variant comparison."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .data import EmbeddingTable, Paragraph
from .errors import ConfigurationError, InapplicableError
from .graph import VARIANTS
from .metrics import format_table
from .trainer import TrainConfig, train
from .validation import check_split, check_t_values

logger = logging.getLogger(__name__)

SETTINGS = (
    "original",
    "shuffle-edges",
    "remove-edge-labels",
    "remove-50%-entities",
    "remove-10%-entities",
    "share-parameters",
)


def inapplicable(variant: str, setting: str) -> str | None:
    """Why ``setting`` cannot run on ``variant``, or None when it can."""
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    if setting not in SETTINGS:
        raise ConfigurationError(f"unknown ablation setting {setting!r}; expected one of {SETTINGS}")
    if setting == "original":
        return None
    if variant == "F":
        return "F-Graph is fully connected and has no entities, so graph ablations do not apply"
    if setting in ("remove-edge-labels", "share-parameters") and variant != "SE":
        return f"{setting} needs entity nodes with labelled edges (SE variant only)"
    return None


def settings_config(base: TrainConfig, variant: str, setting: str) -> TrainConfig:
    if setting == "original":
        return replace(base, variant=variant, ablation="none", share_params=False)
    if setting == "share-parameters":
        # one GRU bank for both node types forces equal state sizes
        return replace(base, variant=variant, ablation="none", share_params=True, entity_dim=base.sentence_dim)
    return replace(base, variant=variant, ablation=setting, share_params=False)


@dataclass
class ExperimentReport:
    title: str
    rows: list[dict] = field(default_factory=list)

    def records(self) -> list[dict]:
        return [dict(r) for r in self.rows]


def _metrics_row(result) -> dict:
    m = result.best_metrics
    return {"tau": m.tau, "acc": m.acc, "pmr": m.pmr, "best_epoch": result.best_epoch}


def run_ablate(
    paragraphs: Sequence[Paragraph],
    config: TrainConfig,
    grid: Iterable[tuple[str, str]] | None = None,
    *,
    embeddings: EmbeddingTable | None = None,
) -> ExperimentReport:
    """Train and validate each (variant, setting) cell.

    Without ``grid`` the full variant x setting grid is used and inapplicable
    cells are reported as skipped. An explicitly requested inapplicable cell
    raises :class:`InapplicableError`.
    """
    check_split(paragraphs, "train")
    check_split(paragraphs, "valid")
    if grid is None:
        cells = [(v, s) for s in SETTINGS for v in VARIANTS]
        explicit = False
    else:
        cells, explicit = list(grid), True
    report = ExperimentReport("ablation")
    for variant, setting in cells:
        reason = inapplicable(variant, setting)
        if reason is not None:
            if explicit:
                raise InapplicableError(f"cannot run {setting} on {variant}: {reason}")
            report.rows.append({"variant": variant, "setting": setting, "status": "skipped", "reason": reason})
            continue
        logger.info("ablation run: %s / %s", variant, setting)
        result = train(paragraphs, settings_config(config, variant, setting), embeddings=embeddings)
        report.rows.append({"variant": variant, "setting": setting, "status": "ok", **_metrics_row(result)})
    return report


def ablation_table(report: ExperimentReport) -> str:
    """One line per setting, Acc/PMR/tau columns per variant; skipped cells print as ---."""
    variants = [v for v in VARIANTS if any(r["variant"] == v for r in report.rows)]
    settings = [s for s in SETTINGS if any(r["setting"] == s for r in report.rows)]
    columns = ["setting"] + [f"{v} {m}" for v in variants for m in ("acc", "pmr", "tau")]
    lines = []
    for s in settings:
        line = {"setting": s}
        for r in report.rows:
            if r["setting"] == s and r["status"] == "ok":
                line.update({f"{r['variant']} {m}": r[m] for m in ("acc", "pmr", "tau")})
        lines.append(line)
    return format_table(lines, columns, title="Ablation (validation split)")


def run_sweep_t(
    paragraphs: Sequence[Paragraph],
    config: TrainConfig,
    t_values: Iterable[int],
    *,
    embeddings: EmbeddingTable | None = None,
) -> ExperimentReport:
    """One model per recurrent-step count, all else (seed included) fixed."""
    ts = check_t_values(t_values)
    check_split(paragraphs, "train")
    check_split(paragraphs, "valid")
    report = ExperimentReport("recurrent steps")
    for t in ts:
        logger.info("sweep run: steps=%d", t)
        result = train(paragraphs, replace(config, steps=t), embeddings=embeddings)
        report.rows.append({"steps": t, **_metrics_row(result)})
    return report


def sweep_table(report: ExperimentReport) -> str:
    return format_table(report.rows, ["steps", "tau", "acc", "pmr", "best_epoch"], title="Recurrent-step sweep (validation split)")


def compare_variants(
    paragraphs: Sequence[Paragraph],
    config: TrainConfig,
    seeds: Sequence[int],
    variants: Sequence[str] = VARIANTS,
    *,
    embeddings: EmbeddingTable | None = None,
) -> ExperimentReport:
    """Validation metrics per (variant, seed) plus a median row per variant."""
    check_split(paragraphs, "train")
    check_split(paragraphs, "valid")
    report = ExperimentReport("variants")
    for variant in variants:
        runs = []
        for seed in seeds:
            result = train(paragraphs, replace(config, variant=variant, seed=seed), embeddings=embeddings)
            runs.append({"variant": variant, "seed": seed, **_metrics_row(result)})
        report.rows += runs
        report.rows.append(
            {"variant": variant, "seed": "median", **{m: float(np.median([r[m] for r in runs])) for m in ("tau", "acc", "pmr")}}
        )
    return report


def variants_table(report: ExperimentReport) -> str:
    return format_table(report.rows, ["variant", "seed", "tau", "acc", "pmr"], title="Variants (validation split)")
