"""Metrics (In-KB micro F1, Acc@k) and report generation.

Concept names are compared by exact string equality after whitespace
normalization and case folding. A generated sample counts as correct
only when its full ordered (mention, concept) list equals the gold
annotation; partial credit is never given. Gold mentions flagged as
out-of-KB are excluded from micro-F1 scoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

from .corpus import LinkedDocument, ParseError, parse_annotated
from .decoding import ConceptTrie, NoFinishedHypothesis, constrained_beam_search
from .matchpred import SampleSet, rerank
from .tokenizer import Tokenizer, Vocab, source_tokens

_tokenizer = Tokenizer()


class MissingRun(Exception):
    pass


def _normalize(text: str) -> str:
    return " ".join(_tokenizer.tokenize(text)).casefold()


@dataclass
class SamplePrediction:
    rendered: str
    lm_score: float
    mp_score: float | None
    # (position index, surface, concept) triples; None if unparseable
    pairs: list[tuple[int, str, str]] | None


@dataclass
class PredictionRecord:
    doc_id: str
    gold: list[tuple[int, str, str]]       # all gold mentions, in order
    gold_in_kb: list[bool]
    samples: list[SamplePrediction]        # in LM rank order, best first
    chosen: int                            # index of the selected sample

    def ranked(self, ranking: str) -> list[SamplePrediction]:
        if ranking == "lm":
            return self.samples
        if ranking == "mp":
            order = sorted(
                range(len(self.samples)),
                key=lambda i: (-(self.samples[i].mp_score or 0.0),
                               -self.samples[i].lm_score, i),
            )
            return [self.samples[i] for i in order]
        raise ValueError(f"unknown ranking {ranking!r}")


def _parse_pairs(rendered: str, source: str) -> list[tuple[int, str, str]] | None:
    try:
        pairs = parse_annotated(rendered, source)
    except ParseError:
        return None
    return [(i, _normalize(s), _normalize(c)) for i, (s, c) in enumerate(pairs)]


def _exact_match(sample: SamplePrediction, record: PredictionRecord) -> bool:
    return sample.pairs is not None and sample.pairs == record.gold


def micro_f1(records: Sequence[PredictionRecord], ranking: str = "mp") -> float:
    """Mention-level micro-averaged F1 over the selected samples.

    TP counts predicted (position, surface, concept) triples that
    exactly match an in-KB gold mention; gold mentions outside the KB
    are dropped from the gold count.
    """
    tp = n_pred = n_gold = 0
    for rec in records:
        gold_kb = {g for g, kb in zip(rec.gold, rec.gold_in_kb) if kb}
        n_gold += len(gold_kb)
        chosen = rec.ranked(ranking)[0] if ranking != "chosen" else rec.samples[rec.chosen]
        if chosen.pairs is None:
            continue
        n_pred += len(chosen.pairs)
        tp += sum(1 for p in chosen.pairs if p in gold_kb)
    if n_pred == 0 or n_gold == 0:
        return 0.0
    precision = tp / n_pred
    recall = tp / n_gold
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def acc_at_k(records: Sequence[PredictionRecord], k: int, ranking: str = "lm") -> float:
    """Fraction of records with an exact-match sample in the top k."""
    if not records:
        return 0.0
    hits = 0
    for rec in records:
        top = rec.ranked(ranking)[:k]
        if any(_exact_match(s, rec) for s in top):
            hits += 1
    return hits / len(records)


def primary_metric(records: Sequence[PredictionRecord], dataset_style: str,
                   ranking: str = "mp") -> float:
    if dataset_style == "acc@1":
        return acc_at_k(records, 1, ranking)
    return micro_f1(records, ranking)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def predict(model, docs: Sequence[LinkedDocument], vocab: Vocab, config,
            trie: ConceptTrie | None = None) -> list[PredictionRecord]:
    """Run constrained beam search plus match scoring over documents."""
    from .trainer import _mp_scores  # local import to avoid a cycle
    from .matchpred import MatchPair, Origin

    records = []
    for doc in docs:
        src = source_tokens(doc, vocab)
        source_norm = " ".join(_tokenizer.tokenize(doc.text))
        try:
            from .trainer import decode_budget

            scored = constrained_beam_search(model, src, vocab, config.k,
                                             max_len=decode_budget(len(src), config.max_len),
                                             trie=trie)
        except NoFinishedHypothesis:
            scored = []
        mp_scores: list[float | None] = [None] * len(scored)
        if scored and config.rerank:
            pairs = [MatchPair(tuple(src), s.tokens, 0, Origin.SAMPLED) for s in scored]
            import torch

            with torch.no_grad():
                t = _mp_scores(model, pairs, vocab, config.mp_encoder_sees_pair)
            mp_scores = [float(v) for v in t]
        samples = [
            SamplePrediction(s.rendered, s.score, mp_scores[i],
                             _parse_pairs(s.rendered, source_norm))
            for i, s in enumerate(scored)
        ]
        if scored and config.rerank:
            sset = SampleSet(doc.id, tuple(scored), epoch=-1)
            chosen = rerank(sset, [m or 0.0 for m in mp_scores])
        else:
            chosen = 0
        gold = [(i, _normalize(m.surface), _normalize(m.concept.name))
                for i, m in enumerate(doc.mentions)]
        records.append(PredictionRecord(
            doc_id=doc.id, gold=gold,
            gold_in_kb=[m.concept.in_kb for m in doc.mentions],
            samples=samples, chosen=chosen,
        ))
    return records


def save_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(asdict(rec), sort_keys=True) + "\n")


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            samples = [SamplePrediction(
                s["rendered"], s["lm_score"], s["mp_score"],
                None if s["pairs"] is None else [tuple(p) for p in s["pairs"]],
            ) for s in d["samples"]]
            records.append(PredictionRecord(
                d["doc_id"], [tuple(g) for g in d["gold"]], d["gold_in_kb"],
                samples, d["chosen"],
            ))
    return records


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def format_table(rows: Sequence[dict], columns: Sequence[str]) -> str:
    widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) for c in columns}
    header = "  ".join(c.ljust(widths[c]) for c in columns)
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in columns))
    return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def report(run_dirs: Sequence[str | Path], out_path: str | Path | None = None) -> str:
    """Collect per-run metrics files into one deterministic text table
    plus plot-ready series data."""
    rows = []
    for d in run_dirs:
        d = Path(d)
        metrics_file = d / "metrics.json"
        if not metrics_file.exists():
            raise MissingRun(str(d))
        with open(metrics_file, encoding="utf-8") as f:
            rows.append({"run": d.name, **json.load(f)})
    columns = ["run"] + sorted({k for r in rows for k in r if k != "run"})
    table = format_table(rows, columns)
    if out_path is not None:
        out_path = Path(out_path)
        out_path.write_text(table + "\n", encoding="utf-8")
        series = [{c: r.get(c) for c in columns} for r in rows]
        out_path.with_suffix(".series.json").write_text(
            json.dumps(series, indent=2, sort_keys=True), encoding="utf-8")
    return table
