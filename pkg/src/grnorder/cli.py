"""Command-line entry point.

Exit codes: 0 success, 1 user or configuration error, 2 data error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .data import Vocabulary, generate_synthetic, load_dataset, load_embeddings, write_dataset
from .errors import ConfigurationError, GrnOrderError
from .experiments import (
    SETTINGS,
    ablation_table,
    run_ablate,
    run_sweep_t,
    sweep_table,
)
from .metrics import bootstrap, format_table
from .model import Example, SentenceOrderingModel, count_parameters
from .trainer import (
    TrainConfig,
    config_from_mapping,
    evaluate,
    format_log_line,
    load_checkpoint,
    load_config,
    save_checkpoint,
    train,
)
from .validation import check_split

logger = logging.getLogger("grnorder")

# CLI flag (dest) -> TrainConfig field; flags left unset fall back to the config file, then defaults
OVERRIDES = {
    "seed": "seed",
    "variant": "variant",
    "steps": "steps",
    "embedding_dim": "embedding_dim",
    "sentence_dim": "sentence_dim",
    "entity_dim": "entity_dim",
    "edge_dim": "edge_dim",
    "share_params": "share_params",
    "ablation": "ablation",
    "dropout": "dropout",
    "batch_size": "batch_size",
    "max_epochs": "max_epochs",
    "patience": "patience",
    "l2": "l2",
    "beam_size": "beam_size",
    "min_freq": "min_freq",
    "precision": "precision",
    "freeze_embeddings": "freeze_embeddings",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and training (override the config file)")
    g.add_argument("--config", type=Path, help="flat YAML/JSON key-value file")
    g.add_argument("--variant", choices=["SE", "S", "F"])
    g.add_argument("--steps", type=int, help="GRN recurrent steps T (default 3)")
    g.add_argument("--embedding-dim", type=int, help="word embedding size (default 100)")
    g.add_argument("--sentence-dim", type=int, help="sentence state size d (default 512)")
    g.add_argument("--entity-dim", type=int, help="entity state size (default 150)")
    g.add_argument("--edge-dim", type=int, help="edge label embedding size (default 50)")
    g.add_argument("--share-params", action="store_const", const=True, help="one GRU bank for sentences and entities")
    g.add_argument("--ablation", help="none, shuffle-edges, remove-edge-labels, remove-10%%-entities, remove-50%%-entities")
    g.add_argument("--dropout", type=float)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--max-epochs", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--l2", type=float)
    g.add_argument("--min-freq", type=int)
    g.add_argument("--precision", choices=["float64", "float32"])
    g.add_argument("--freeze-embeddings", action="store_const", const=True)


def _common(p: argparse.ArgumentParser, *, data: bool = True, beam: bool = False, report: bool = True) -> None:
    p.add_argument("--seed", type=int, help="seed for every random choice (default 0)")
    if data:
        p.add_argument("--data", type=Path, required=True, help="JSONL dataset")
        p.add_argument("--embeddings", type=Path, help="text embeddings, one 'word v1 .. vD' per line")
    if beam:
        p.add_argument("--beam-size", type=int, help="beam width (default 64)")
    if report:
        p.add_argument("--report", type=Path, help="write the structured report here as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grnorder", description="Graph recurrent sentence ordering.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write a synthetic entity-chain corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--paragraphs", type=int, default=200)
    p.add_argument("--min-sentences", type=int, default=3)
    p.add_argument("--max-sentences", type=int, default=5)
    p.add_argument("--min-entities", type=int, default=4)
    p.add_argument("--max-entities", type=int, default=8)
    p.add_argument("--valid-fraction", type=float, default=0.0)
    p.add_argument("--test-fraction", type=float, default=0.0)
    p.add_argument("--pool-size", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _common(p, beam=True)
    _model_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True, help="output checkpoint (.npz)")
    p.add_argument("--log", type=Path, help="training log, one JSON record per epoch")

    p = sub.add_parser("eval", help="score a checkpoint on one split")
    _common(p, beam=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--split", default="valid", choices=["train", "valid", "test"])
    p.add_argument("--steps", type=int, help="override the recurrent steps stored in the checkpoint")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N", help="add N-sample bootstrap intervals")

    p = sub.add_parser("order", help="predict sentence orders for every paragraph")
    _common(p, beam=True, report=False)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, help="JSONL predictions (default stdout)")
    p.add_argument("--variant", choices=["SE", "S", "F"], help="must match the checkpoint")
    p.add_argument("--steps", type=int)

    p = sub.add_parser("ablate", help="train and validate the ablation grid")
    _common(p, beam=True)
    _model_flags(p)
    p.add_argument("--cell", action="append", metavar="VARIANT:SETTING",
                   help=f"run only these cells; settings: {', '.join(SETTINGS)}")

    p = sub.add_parser("sweep-t", help="train one model per recurrent-step count")
    _common(p, beam=True)
    _model_flags(p)
    p.add_argument("--t-values", type=int, nargs="+", default=[0, 1, 2, 3])

    p = sub.add_parser("count-params", help="count trainable parameters")
    _common(p, data=False)
    _model_flags(p)
    p.add_argument("--data", type=Path, help="build the vocabulary from this corpus")
    p.add_argument("--vocab-size", type=int, default=0, help="vocabulary size when --data is absent")
    p.add_argument("--breakdown", action="store_true")
    return parser


def resolve_config(args) -> TrainConfig:
    """CLI flag > config file > built-in default."""
    base = load_config(args.config) if getattr(args, "config", None) else TrainConfig()
    overrides = {field: getattr(args, dest) for dest, field in OVERRIDES.items() if getattr(args, dest, None) is not None}
    return config_from_mapping(overrides, base)


def _embeddings(args, config: TrainConfig):
    if getattr(args, "embeddings", None) is None:
        return None
    return load_embeddings(args.embeddings, config.embedding_dim)


def _emit(args, payload, table: str) -> None:
    print(table)
    if getattr(args, "report", None):
        args.report.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(args) -> None:
    fractions = (1.0 - args.valid_fraction - args.test_fraction, args.valid_fraction, args.test_fraction)
    if min(fractions) < 0:
        raise ConfigurationError("valid and test fractions must be non-negative and sum to at most 1")
    paragraphs = generate_synthetic(
        args.seed, args.paragraphs, (args.min_sentences, args.max_sentences),
        (args.min_entities, args.max_entities), fractions, args.pool_size,
    )
    write_dataset(paragraphs, args.out)
    counts = {s: sum(p.split == s for p in paragraphs) for s in ("train", "valid", "test")}
    print(format_table([counts], ["train", "valid", "test"], title=f"wrote {args.out}"))


def cmd_train(args) -> None:
    config = resolve_config(args)
    paragraphs = load_dataset(args.data)
    check_split(paragraphs, "train")
    check_split(paragraphs, "valid")
    log = open(args.log, "w") if args.log else None

    def on_epoch(record):
        print(format_log_line(record), flush=True)
        if log:
            log.write(json.dumps(record, sort_keys=True) + "\n")
            log.flush()

    try:
        result = train(paragraphs, config, embeddings=_embeddings(args, config), on_epoch=on_epoch)
    finally:
        if log:
            log.close()
    save_checkpoint(result.model, args.checkpoint)
    payload = {"config": asdict(config), "best_epoch": result.best_epoch, "valid": result.best_metrics.as_dict(),
               "history": result.history}
    _emit(args, payload, format_table([result.best_metrics.as_dict()], ["tau", "acc", "pmr", "head_acc", "tail_acc", "count"],
                                      title=f"best epoch {result.best_epoch}; checkpoint {args.checkpoint}"))


def _load(args):
    model = load_checkpoint(args.checkpoint)
    cfg = model.config
    wanted = {}
    if getattr(args, "variant", None) is not None:
        wanted["variant"] = args.variant
    if getattr(args, "steps", None) is not None:
        wanted["steps"] = args.steps
    if wanted:
        model = load_checkpoint(args.checkpoint, replace(cfg, **wanted))
    return model


def cmd_eval(args) -> None:
    model = _load(args)
    paragraphs = check_split(load_dataset(args.data), args.split)
    seed = model.config.seed if args.seed is None else args.seed
    beam = 64 if args.beam_size is None else args.beam_size
    report, records = evaluate(model, paragraphs, beam, seed)
    payload = {"split": args.split, "config": model.describe(), "beam_size": beam, "seed": seed, **report.as_dict()}
    if args.bootstrap:
        pairs = [(order, list(range(len(p)))) for p, order, _ in records]
        payload["bootstrap"] = bootstrap(pairs, args.bootstrap, seed)
    _emit(args, payload, format_table([report.as_dict()], ["tau", "acc", "pmr", "head_acc", "tail_acc", "count"],
                                      title=f"{args.split} split, {model.config.variant}-Graph"))


def cmd_order(args) -> None:
    model = _load(args)
    paragraphs = load_dataset(args.data)
    beam = 64 if args.beam_size is None else args.beam_size
    examples = [Example(p) for p in paragraphs]
    lines = []
    for p, (_, pred) in zip(paragraphs, model.predict_orders(examples, beam_size=beam)):
        lines.append(json.dumps({"id": p.id, "predicted-order": list(pred.order), "log-prob": pred.total_log_prob}))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def _parse_cells(values):
    cells = []
    for v in values:
        variant, sep, setting = v.partition(":")
        if not sep:
            raise ConfigurationError(f"--cell expects VARIANT:SETTING, got {v!r}")
        cells.append((variant, setting))
    return cells


def cmd_ablate(args) -> None:
    config = resolve_config(args)
    paragraphs = load_dataset(args.data)
    grid = _parse_cells(args.cell) if args.cell else None
    report = run_ablate(paragraphs, config, grid, embeddings=_embeddings(args, config))
    _emit(args, {"config": asdict(config), "rows": report.records()}, ablation_table(report))


def cmd_sweep_t(args) -> None:
    config = resolve_config(args)
    paragraphs = load_dataset(args.data)
    report = run_sweep_t(paragraphs, config, args.t_values, embeddings=_embeddings(args, config))
    _emit(args, {"config": asdict(config), "rows": report.records()}, sweep_table(report))


def cmd_count_params(args) -> None:
    config = resolve_config(args)
    if args.data:
        vocab = Vocabulary.build(check_split(load_dataset(args.data), "train"), config.min_freq)
    else:
        vocab = Vocabulary([f"w{k}" for k in range(args.vocab_size)])
    model = SentenceOrderingModel(config.model_config(), vocab)
    total, groups = count_parameters(model, breakdown=True)
    rows = [{"group": k, "count": v} for k, v in sorted(groups.items())] + [{"group": "total", "count": total}]
    if not args.breakdown:
        rows = rows[-1:]
    _emit(args, {"config": asdict(config), "vocab_size": len(vocab), "total": total, "groups": groups},
          format_table(rows, ["group", "count"], title=f"{config.variant}-Graph parameters"))


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "order": cmd_order,
    "ablate": cmd_ablate,
    "sweep-t": cmd_sweep_t,
    "count-params": cmd_count_params,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except GrnOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a bug
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
