"""Command-line entry point: synth | train | sweep | ablate | predict |
eval | report.

Every run writes its fully resolved config next to its outputs. One
seed governs corpus generation, parameter init, shuffling, and
tie-breaking; the MTEL_LOG environment variable controls verbosity
only, never behavior.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import evaluation, synth, trainer
from .corpus import CorpusError, load_corpus, save_corpus
from .model import load_checkpoint
from .tokenizer import Vocab
from .trainer import MtlConfig

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_RUNTIME_FAILURE = 4

log = logging.getLogger("mtel")


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def load_config(path: str | None, overrides: list[str]) -> MtlConfig:
    data = {}
    if path:
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
    for ov in overrides:
        key, value = _parse_override(ov)
        data[key] = value
    try:
        return MtlConfig.from_dict(data)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def _write_resolved(config: MtlConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "resolved_config.json", "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=2, sort_keys=True)


def cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        train_size=args.size[0], dev_size=args.size[1], test_size=args.size[2],
        zeroshot=args.zeroshot, mentions_per_doc=args.mentions_per_doc,
        seed=args.seed,
    )
    splits = synth.generate_synthetic_corpus(spec)
    save_corpus(splits, args.out)
    log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config, args.override)
    splits = load_corpus(args.corpus)
    if not splits.get("train"):
        raise DataError(f"no train records in {args.corpus}")
    out_dir = Path(args.out)
    _write_resolved(config, out_dir)
    result = trainer.train(config, splits, out_dir=out_dir,
                           sample_log=out_dir / "mp_samples.jsonl")
    trie = trainer.load_trie(config.trie, result.vocab) if config.trie else None
    metrics = trainer._test_metrics(result, splits, trie)
    metrics["best_epoch"] = result.best_epoch
    metrics["dev_metric"] = result.best_dev_metric
    metrics["rerank_validated"] = result.rerank_validated
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config, args.override)
    splits = load_corpus(args.corpus)
    out_dir = Path(args.out)
    _write_resolved(config, out_dir)
    result = trainer.sweep_task_weights(config, splits)
    with open(out_dir / "sweep.json", "w", encoding="utf-8") as f:
        json.dump(result, f, indent=2, sort_keys=True)
    for stage in ("stage1", "stage2"):
        with open(out_dir / f"{stage}.series.json", "w", encoding="utf-8") as f:
            json.dump(result[stage], f, indent=2, sort_keys=True)
    print(json.dumps(result["selected"], sort_keys=True))
    return EXIT_OK


def cmd_ablate(args) -> int:
    config = load_config(args.config, args.override)
    splits = load_corpus(args.corpus)
    out_dir = Path(args.out)
    _write_resolved(config, out_dir)
    seeds = args.seeds
    suite = trainer.run_low_resource_suite if args.low_resource else trainer.run_ablation_suite
    rows = suite(config, splits, seeds=seeds)
    with open(out_dir / "ablation.json", "w", encoding="utf-8") as f:
        json.dump(rows, f, indent=2, sort_keys=True)
    columns = [c for c in rows[0] if c != "seeds"]
    print(evaluation.format_table(rows, columns))
    return EXIT_OK


def cmd_predict(args) -> int:
    config = load_config(args.config, args.override)
    if args.k is not None:
        config.k = args.k
    if args.max_len is not None:
        config.max_len = args.max_len
    model, extra = load_checkpoint(args.checkpoint)
    vocab = Vocab(extra["vocab"])
    splits = load_corpus(args.corpus)
    docs = splits.get(args.split, [])
    if not docs:
        raise DataError(f"no records in split {args.split!r}")
    trie = None
    if args.trie and args.trie != "none":
        trie = trainer.load_trie(args.trie, vocab)
    records = evaluation.predict(model, docs, vocab, config, trie)
    evaluation.save_predictions(records, args.out)
    log.info("wrote %d prediction records to %s", len(records), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    records = evaluation.load_predictions(args.preds)
    if args.metric == "micro-f1":
        value = evaluation.micro_f1(records, ranking=args.ranking)
    else:
        k = int(args.metric.split("@")[1])
        value = evaluation.acc_at_k(records, k, ranking=args.ranking)
    print(json.dumps({"metric": args.metric, "value": value}))
    return EXIT_OK


def cmd_report(args) -> int:
    table = evaluation.report(args.runs, out_path=args.out)
    print(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtel")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--size", type=int, nargs=3, default=[40, 12, 24],
                    metavar=("TRAIN", "DEV", "TEST"))
    sp.add_argument("--zeroshot", action="store_true")
    sp.add_argument("--mentions-per-doc", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("train", help="run the multi-task training loop")
    tp.add_argument("--config")
    tp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    tp.add_argument("--corpus", required=True)
    tp.add_argument("--out", required=True)
    tp.set_defaults(func=cmd_train)

    wp = sub.add_parser("sweep", help="two-stage task-weight sweep")
    wp.add_argument("--config")
    wp.add_argument("--override", action="append", default=[])
    wp.add_argument("--corpus", required=True)
    wp.add_argument("--out", required=True)
    wp.set_defaults(func=cmd_sweep)

    ap = sub.add_parser("ablate", help="ablation or low-resource suite")
    ap.add_argument("--config")
    ap.add_argument("--override", action="append", default=[])
    ap.add_argument("--corpus", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--low-resource", action="store_true")
    ap.set_defaults(func=cmd_ablate)

    pp = sub.add_parser("predict", help="decode ranked samples for a split")
    pp.add_argument("--config")
    pp.add_argument("--override", action="append", default=[])
    pp.add_argument("--checkpoint", required=True)
    pp.add_argument("--corpus", required=True)
    pp.add_argument("--split", default="test")
    pp.add_argument("--k", type=int)
    pp.add_argument("--max-len", type=int)
    pp.add_argument("--trie", default="none")
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_predict)

    ep = sub.add_parser("eval", help="score a prediction dump")
    ep.add_argument("--preds", required=True)
    ep.add_argument("--metric", required=True,
                    choices=["micro-f1", "acc@1", "acc@10"])
    ep.add_argument("--ranking", default="mp", choices=["mp", "lm"])
    ep.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", help="tabulate metrics across runs")
    rp.add_argument("--runs", nargs="+", required=True)
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_report)

    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("MTEL_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as e:
        print(f"ConfigError: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (DataError, CorpusError, FileNotFoundError, evaluation.MissingRun) as e:
        print(f"DataError: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"RuntimeFailure: {e}", file=sys.stderr)
        return EXIT_RUNTIME_FAILURE


if __name__ == "__main__":
    sys.exit(main())
