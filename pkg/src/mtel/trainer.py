"""Multi-task training loop, low-resource subsampling, and the
experiment harnesses (task-weight sweep, ablation and low-resource
suites).

Each optimizer step combines one generation batch, one tagging batch
(both indicator sides), and one match-prediction batch into a single
weighted loss. Match-prediction pairs are regenerated from the model's
own beam outputs at a configurable epoch interval. All randomness flows
from one seed through labeled sub-seeds, so data ordering is identical
across runs that differ only in task weights.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import torch

from . import matchpred
from .corpus import LinkedDocument, Side
from .decoding import ConceptTrie, NoFinishedHypothesis, constrained_beam_search
from .matchpred import MatchPair, Origin, SampleSet, build_mp_batch, schedule_generation
from .model import (
    DecoderId,
    ModelConfig,
    MtlModel,
    make_model,
    make_optimizer,
    save_checkpoint,
)
from .objectives import LossBreakdown, el_loss, md_loss, mp_loss, mtl_loss
from .tokenizer import Tokenizer, Vocab, derive_indicators, source_tokens, target_tokens
from . import evaluation


class TrainingError(Exception):
    pass


def subseed(seed: int, label: str) -> int:
    """Stable sub-seed derived by hashing the master seed with a label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class MtlConfig:
    lambda_md: float = 0.5
    lambda_mp: float = 0.3
    k: int = 10
    epochs: int = 20
    batch_size: int = 8
    lr: float = 3e-4
    mp_gen_interval: int = 1
    mp_batch_pairs: int = 16
    md_keep_ratio: float = 1.0
    mp_keep_ratio: float = 1.0
    seed: int = 0
    mp_encoder_sees_pair: bool = True
    rerank: bool = True
    trie: str | None = None
    dataset_style: str = "acc@1"  # "acc@1" or "micro-f1"
    select_by: str = "dev_metric"  # or "dev_loss"
    model_dim: int = 64
    ffn_dim: int = 128
    num_heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    max_len: int = 96
    dropout: float = 0.0

    def __post_init__(self):
        if not (0 < self.md_keep_ratio <= 1 and 0 < self.mp_keep_ratio <= 1):
            raise ValueError("keep ratios must lie in (0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lambda_md < 0 or self.lambda_mp < 0:
            raise ValueError("task weights must be non-negative")
        if self.dataset_style not in ("acc@1", "micro-f1"):
            raise ValueError(f"unknown dataset_style {self.dataset_style!r}")
        if self.select_by not in ("dev_metric", "dev_loss"):
            raise ValueError(f"unknown select_by {self.select_by!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MtlConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            model_dim=self.model_dim,
            ffn_dim=self.ffn_dim,
            num_heads=self.num_heads,
            enc_layers=self.enc_layers,
            dec_layers=self.dec_layers,
            max_len=self.max_len,
            dropout=self.dropout,
            init_seed=subseed(self.seed, "init"),
        )


@dataclass
class RunLog:
    steps: list[dict] = field(default_factory=list)
    epochs: list[dict] = field(default_factory=list)
    generation_rounds: list[dict] = field(default_factory=list)
    _counter: int = 0

    def log_step(self, breakdown: LossBreakdown) -> None:
        rec = {"step": self._counter}
        rec.update(breakdown.to_floats())
        self.steps.append(rec)
        self._counter += 1

    def log_epoch(self, epoch: int, dev_metric: float, dev_loss: float) -> None:
        self.epochs.append({"epoch": epoch, "dev_metric": dev_metric, "dev_loss": dev_loss})

    def log_generation(self, epoch: int, n_sets: int) -> None:
        self.generation_rounds.append({"epoch": epoch, "sample_sets": n_sets})

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for kind, rows in (("step", self.steps), ("epoch", self.epochs),
                               ("generation", self.generation_rounds)):
                for row in rows:
                    f.write(json.dumps({"kind": kind, **row}, sort_keys=True) + "\n")


def subsample_low_resource(n_items: int, keep_ratio: float, seed: int) -> list[int]:
    """Deterministic kept-index set, fixed once per run and reused every
    epoch. Achieved count is round(n * ratio), at least 1."""
    if not (0 < keep_ratio <= 1):
        raise ValueError("keep_ratio must lie in (0, 1]")
    if keep_ratio == 1.0:
        return list(range(n_items))
    count = max(1, round(n_items * keep_ratio))
    rng = random.Random(seed)
    return sorted(rng.sample(range(n_items), count))


# ---------------------------------------------------------------------------
# per-document tensors
# ---------------------------------------------------------------------------

@dataclass
class Example:
    doc: LinkedDocument
    src: list[int]          # bare source token ids
    tgt: list[int]          # bare annotated target token ids
    src_labels: list[int]   # 0 = O, 1 = E, per source token
    tgt_labels: list[int]   # per target token


def prepare_examples(docs: Sequence[LinkedDocument], vocab: Vocab) -> list[Example]:
    tok = Tokenizer()
    out = []
    for doc in docs:
        src = source_tokens(doc, vocab, tok)
        tgt = target_tokens(doc, vocab, tok)
        src_ind = derive_indicators(doc, Side.SOURCE, tok)
        tgt_ind = derive_indicators(doc, Side.TARGET, tok)
        out.append(Example(doc, src, tgt,
                           [int(b) for b in src_ind.labels],
                           [int(b) for b in tgt_ind.labels]))
    return out


def _pad_batch(seqs: Sequence[Sequence[int]], pad: int, device) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(s) for s in seqs)
    batch = torch.full((len(seqs), width), pad, dtype=torch.long, device=device)
    mask = torch.ones(len(seqs), width, dtype=torch.bool, device=device)
    for i, s in enumerate(seqs):
        batch[i, : len(s)] = torch.tensor(list(s), dtype=torch.long, device=device)
        mask[i, : len(s)] = False
    return batch, mask  # mask True at pad positions


def build_vocab(splits: dict[str, list[LinkedDocument]]) -> Vocab:
    from .corpus import annotate

    texts = []
    for docs in splits.values():
        for doc in docs:
            texts.append(annotate(doc).rendered)
    return Vocab.build(texts)


# ---------------------------------------------------------------------------
# loss computation per task batch
# ---------------------------------------------------------------------------

def _el_batch_loss(model: MtlModel, batch: list[Example], vocab: Vocab) -> torch.Tensor:
    device = next(model.parameters()).device
    pad = vocab.pad_id if vocab.pad_id is not None else 0
    enc_in, enc_mask = _pad_batch([[vocab.bos_id, *ex.src, vocab.eos_id] for ex in batch], pad, device)
    dec_in, _ = _pad_batch([[vocab.bos_id, *ex.tgt] for ex in batch], pad, device)
    targets, tgt_mask = _pad_batch([[*ex.tgt, vocab.eos_id] for ex in batch], pad, device)
    enc_states = model.encode(enc_in, enc_mask)
    states = model.decode(DecoderId.EL, dec_in, enc_states, enc_mask)
    logits = model.el_logits(states)
    return el_loss(logits, targets, ~tgt_mask)


def _md_batch_loss(model: MtlModel, src_items: list[Example], tgt_items: list[Example],
                   vocab: Vocab) -> torch.Tensor:
    device = next(model.parameters()).device
    pad = vocab.pad_id if vocab.pad_id is not None else 0
    zero = torch.zeros((), device=device, dtype=next(model.parameters()).dtype)
    src_term_args = tgt_term_args = None

    if src_items:
        enc_in, enc_mask = _pad_batch(
            [[vocab.bos_id, *ex.src, vocab.eos_id] for ex in src_items], pad, device)
        enc_states = model.encode(enc_in, enc_mask)
        # token positions start at 1 (after <bos>); padded rows are
        # handled by the label mask
        labels, lab_mask = _pad_batch([ex.src_labels for ex in src_items], 0, device)
        logits = model.tag_head_src(enc_states[:, 1 : 1 + labels.shape[1], :])
        src_term_args = (logits, labels, ~lab_mask)

    if tgt_items:
        enc_in, enc_mask = _pad_batch(
            [[vocab.bos_id, *ex.src, vocab.eos_id] for ex in tgt_items], pad, device)
        enc_states = model.encode(enc_in, enc_mask)
        e_id, o_id = vocab.e_tag_id, vocab.o_tag_id
        dec_in, _ = _pad_batch(
            [[vocab.bos_id, *[(e_id if l else o_id) for l in ex.tgt_labels[:-1]]]
             for ex in tgt_items],
            pad, device)
        labels, lab_mask = _pad_batch([ex.tgt_labels for ex in tgt_items], 0, device)
        dec_states = model.decode(DecoderId.MD, dec_in, enc_states, enc_mask)
        logits = model.tag_head_tgt(dec_states[:, : labels.shape[1], :])
        tgt_term_args = (logits, labels, ~lab_mask)

    from .objectives import _tag_ce

    src_term = _tag_ce(*src_term_args) if src_term_args else zero
    tgt_term = _tag_ce(*tgt_term_args) if tgt_term_args else zero
    return src_term + tgt_term


def _mp_pair_tokens(pair: MatchPair, vocab: Vocab, sees_pair: bool) -> tuple[list[int], list[int]]:
    sep = vocab.sep_id
    paired = [vocab.bos_id, *pair.source, sep, *pair.candidate, vocab.eos_id]
    enc = paired if sees_pair else [vocab.bos_id, *pair.source, vocab.eos_id]
    return paired, enc


def _mp_scores(model: MtlModel, pairs: list[MatchPair], vocab: Vocab,
               sees_pair: bool) -> torch.Tensor:
    device = next(model.parameters()).device
    pad = vocab.pad_id if vocab.pad_id is not None else 0
    paired, enc = zip(*(_mp_pair_tokens(p, vocab, sees_pair) for p in pairs))
    pair_batch, pair_mask = _pad_batch(list(paired), pad, device)
    if sees_pair:
        return model.mp_probability(pair_batch, pair_padding_mask=pair_mask)
    enc_batch, enc_mask = _pad_batch(list(enc), pad, device)
    return model.mp_probability(pair_batch, enc_input=enc_batch,
                                pair_padding_mask=pair_mask, enc_padding_mask=enc_mask)


def _mp_batch_loss(model: MtlModel, pairs: list[MatchPair], vocab: Vocab,
                   sees_pair: bool, k: int) -> torch.Tensor:
    scores = _mp_scores(model, pairs, vocab, sees_pair)
    gold_idx = [i for i, p in enumerate(pairs) if p.origin is Origin.GOLD]
    samp_idx = [i for i, p in enumerate(pairs) if p.origin is Origin.SAMPLED]
    gold_scores = scores[gold_idx] if gold_idx else scores.new_zeros(0)
    samp_scores = scores[samp_idx]
    labels = torch.tensor([pairs[i].label for i in samp_idx], device=scores.device)
    # normalize the pair-sum to the scale of one (k+1)-pair datapoint so
    # the match weight is comparable across batch compositions
    return mp_loss(gold_scores, samp_scores, labels) * ((k + 1) / len(pairs))


# ---------------------------------------------------------------------------
# sample generation
# ---------------------------------------------------------------------------

def decode_budget(src_len: int, max_len: int) -> int:
    """Length cap for generated samples: generous enough for every
    annotation, short enough that the <sep>-paired sequence still fits."""
    return min(max_len, 2 * src_len + 16)


def generate_sample_sets(model: MtlModel, examples: Sequence[Example], vocab: Vocab,
                         k: int, epoch: int, max_len: int,
                         trie: ConceptTrie | None = None) -> dict[str, SampleSet]:
    sets = {}
    for ex in examples:
        try:
            scored = constrained_beam_search(model, ex.src, vocab, k,
                                             max_len=decode_budget(len(ex.src), max_len),
                                             trie=trie)
        except NoFinishedHypothesis:
            scored = []
        sets[ex.doc.id] = SampleSet(ex.doc.id, tuple(scored), epoch)
    return sets


def dump_sample_sets(sets: dict[str, SampleSet], examples: dict[str, Example],
                     path: str | Path) -> None:
    """Inspectable per-round dump of generated samples with labels."""
    with open(path, "a", encoding="utf-8") as f:
        for doc_id in sorted(sets):
            s = sets[doc_id]
            for rank, sample in enumerate(s.samples):
                label = matchpred.entities_match(sample.rendered, examples[doc_id].doc)
                f.write(json.dumps({
                    "id": doc_id, "epoch": s.epoch, "rank": rank,
                    "rendered": sample.rendered, "lm_logprob": sample.score,
                    "label": label,
                }, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: MtlModel
    vocab: Vocab
    config: MtlConfig
    run_log: RunLog
    best_epoch: int
    best_dev_metric: float
    # re-ranking is only applied downstream if it beat LM ranking on dev;
    # an unvalidated match head is noise and would undo the LM's work
    rerank_validated: bool = False


def _chunked(indices: list[int], n_chunks: int) -> list[list[int]]:
    # spread a pool evenly over n_chunks steps (some chunks may be empty)
    out = [[] for _ in range(n_chunks)]
    for i, idx in enumerate(indices):
        out[i % n_chunks].append(idx)
    return out


def load_trie(path: str | Path, vocab: Vocab) -> ConceptTrie:
    trie = ConceptTrie()
    tok = Tokenizer()
    with open(path, encoding="utf-8") as f:
        for line in f:
            name = line.strip()
            if name:
                trie.insert(vocab.encode(tok.tokenize(name)))
    return trie


def train(config: MtlConfig, splits: dict[str, list[LinkedDocument]],
          vocab: Vocab | None = None, out_dir: str | Path | None = None,
          sample_log: str | Path | None = None) -> TrainResult:
    """Run the full multi-task loop and return the best model by dev
    metric (or dev loss, per config)."""
    if not splits.get("train"):
        raise TrainingError("train split is empty")
    vocab = vocab or build_vocab(splits)
    torch.manual_seed(subseed(config.seed, "torch"))
    model = make_model(config.model_config(len(vocab)))
    optimizer = make_optimizer(model, lr=config.lr, kind="adam")
    run_log = RunLog()

    train_ex = prepare_examples(splits["train"], vocab)
    dev_ex = prepare_examples(splits.get("dev", []), vocab)
    ex_by_id = {ex.doc.id: ex for ex in train_ex}
    trie = load_trie(config.trie, vocab) if config.trie else None

    use_md = config.lambda_md > 0
    use_mp = config.lambda_mp > 0

    # MD datapoints: one per (document, side); MP datapoints: one per pair.
    md_pool = [(i, side) for i in range(len(train_ex)) for side in ("src", "tgt")]
    md_keep = subsample_low_resource(len(md_pool), config.md_keep_ratio,
                                     subseed(config.seed, "keep:md"))
    # kept MP pair indices fixed once from the nominal (k+1)-per-source
    # count; rounds with fewer finished samples just drop the tail
    mp_keep_nominal = subsample_low_resource((config.k + 1) * len(splits["train"]),
                                             config.mp_keep_ratio,
                                             subseed(config.seed, "keep:mp"))

    rng_el = random.Random(subseed(config.seed, "order:el"))
    rng_md = random.Random(subseed(config.seed, "order:md"))
    rng_mp = random.Random(subseed(config.seed, "order:mp"))

    sample_sets: dict[str, SampleSet] = {}
    mp_pairs: list[MatchPair] = []
    mp_kept_idx: list[int] = []

    best_state = copy.deepcopy(model.state_dict())
    best_epoch, best_metric, best_loss = -1, -math.inf, math.inf

    for epoch in range(config.epochs):
        if use_mp and schedule_generation(epoch, config.mp_gen_interval):
            sample_sets = generate_sample_sets(model, train_ex, vocab, config.k,
                                               epoch, config.max_len, trie)
            mp_pairs = []
            for ex in train_ex:
                mp_pairs.extend(build_mp_batch(ex.src, ex.tgt, ex.doc, sample_sets[ex.doc.id]))
            mp_kept_idx = [i for i in mp_keep_nominal if i < len(mp_pairs)]
            run_log.log_generation(epoch, len(sample_sets))
            if sample_log is not None:
                dump_sample_sets(sample_sets, ex_by_id, sample_log)

        el_order = list(range(len(train_ex)))
        rng_el.shuffle(el_order)
        n_steps = math.ceil(len(el_order) / config.batch_size)

        md_order = list(md_keep)
        rng_md.shuffle(md_order)
        md_chunks = _chunked(md_order, n_steps) if use_md else [[] for _ in range(n_steps)]

        # MP batches are drawn per step from the kept pairs so each pair
        # gets several gradient exposures per pool lifetime
        if use_mp and mp_kept_idx:
            size = min(config.mp_batch_pairs, len(mp_kept_idx))
            mp_chunks = [rng_mp.sample(mp_kept_idx, size) for _ in range(n_steps)]
        else:
            mp_chunks = [[] for _ in range(n_steps)]

        model.train()
        for step in range(n_steps):
            el_batch = [train_ex[i] for i in el_order[step * config.batch_size:
                                                     (step + 1) * config.batch_size]]
            el = _el_batch_loss(model, el_batch, vocab)

            zero = el.new_zeros(())
            if use_md and md_chunks[step]:
                chosen = [md_pool[j] for j in md_chunks[step]]
                src_items = [train_ex[i] for i, side in chosen if side == "src"]
                tgt_items = [train_ex[i] for i, side in chosen if side == "tgt"]
                md = _md_batch_loss(model, src_items, tgt_items, vocab)
            else:
                md = zero

            if use_mp and mp_chunks[step] and mp_pairs:
                step_pairs = [mp_pairs[j] for j in mp_chunks[step]]
                mp = _mp_batch_loss(model, step_pairs, vocab,
                                    config.mp_encoder_sees_pair, config.k)
            else:
                mp = zero

            breakdown = mtl_loss(el, md, mp, config.lambda_md, config.lambda_mp)
            if not torch.isfinite(breakdown.total):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} step {step}: "
                    f"{breakdown.to_floats()}"
                )
            optimizer.zero_grad()
            breakdown.total.backward()
            optimizer.step()
            run_log.log_step(breakdown)

        # epoch-end dev evaluation and model selection
        model.eval()
        dev_metric, dev_loss = _dev_eval(model, dev_ex, vocab, config, trie)
        run_log.log_epoch(epoch, dev_metric, dev_loss)
        improved = (dev_loss < best_loss) if config.select_by == "dev_loss" \
            else (dev_metric > best_metric)
        if improved or best_epoch < 0:
            best_epoch = epoch
            best_metric = dev_metric
            best_loss = dev_loss
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()

    rerank_validated = False
    if config.rerank and dev_ex:
        records = evaluation.predict(model, [ex.doc for ex in dev_ex], vocab,
                                     config, trie)
        dev_lm = evaluation.primary_metric(records, config.dataset_style, "lm")
        dev_mp = evaluation.primary_metric(records, config.dataset_style, "mp")
        rerank_validated = dev_mp > dev_lm

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, out_dir / "checkpoint.pt",
                        extra={"mtl_config": config.to_dict(), "vocab": vocab.to_list(),
                               "rerank_validated": rerank_validated})
        run_log.save(out_dir / "runlog.jsonl")
        with open(out_dir / "resolved_config.json", "w", encoding="utf-8") as f:
            json.dump(config.to_dict(), f, indent=2, sort_keys=True)

    return TrainResult(model, vocab, config, run_log, best_epoch, best_metric,
                       rerank_validated)


def _dev_eval(model: MtlModel, dev_ex: list[Example], vocab: Vocab,
              config: MtlConfig, trie: ConceptTrie | None) -> tuple[float, float]:
    if not dev_ex:
        return 0.0, 0.0
    with torch.no_grad():
        dev_loss = float(_el_batch_loss(model, dev_ex, vocab))
    records = evaluation.predict(model, [ex.doc for ex in dev_ex], vocab, config, trie)
    # checkpoint selection always ranks by LM score: the match head's dev
    # verdicts are noise until it takes off, and a lucky early re-rank
    # would freeze a bad checkpoint
    metric = evaluation.primary_metric(records, config.dataset_style, ranking="lm")
    return metric, dev_loss


# ---------------------------------------------------------------------------
# harnesses
# ---------------------------------------------------------------------------

def _test_metrics(result: TrainResult, splits, trie=None) -> dict[str, float]:
    records = evaluation.predict(result.model, splits["test"], result.vocab, result.config, trie)
    ranking = "mp" if result.config.rerank and result.rerank_validated else "lm"
    return {
        "metric": evaluation.primary_metric(records, result.config.dataset_style, ranking),
        "acc@1": evaluation.acc_at_k(records, 1, ranking),
        "acc@k": evaluation.acc_at_k(records, result.config.k, "lm"),
        "micro_f1": evaluation.micro_f1(records, ranking),
    }


def sweep_task_weights(base: MtlConfig, splits: dict[str, list[LinkedDocument]],
                       grid: Sequence[float] | None = None,
                       pivot_mp: float = 0.3) -> dict:
    """Two-stage protocol: sweep the tagging weight at a fixed match
    weight, then sweep the match weight at the stage-1 argmax."""
    grid = list(grid) if grid is not None else [round(0.1 * i, 1) for i in range(1, 11)]
    vocab = build_vocab(splits)

    def run(lmd: float, lmp: float) -> dict:
        cfg = dataclasses.replace(base, lambda_md=lmd, lambda_mp=lmp)
        result = train(cfg, splits, vocab=vocab)
        return {"lambda_md": lmd, "lambda_mp": lmp,
                "dev_metric": result.best_dev_metric}

    stage1 = [run(lmd, pivot_mp) for lmd in grid]
    best_md = max(stage1, key=lambda r: (r["dev_metric"], -r["lambda_md"]))["lambda_md"]
    stage2 = [run(best_md, lmp) for lmp in grid]
    best_mp = max(stage2, key=lambda r: (r["dev_metric"], -r["lambda_mp"]))["lambda_mp"]
    return {"stage1": stage1, "stage2": stage2,
            "selected": {"lambda_md": best_md, "lambda_mp": best_mp}}


ABLATION_ROWS = [
    # (name, use_md, use_mp, rerank)
    ("none", False, False, False),
    ("md_only", True, False, False),
    ("mp_rk_only", False, True, True),
    ("md_mp_no_rk", True, True, False),
    ("full", True, True, True),
]


def run_ablation_suite(base: MtlConfig, splits: dict[str, list[LinkedDocument]],
                       seeds: Sequence[int] = (0, 1, 2)) -> list[dict]:
    """Five-row ablation table: no aux/no rerank, each aux task alone,
    no rerank, and the full configuration. Metrics are seed means."""
    vocab = build_vocab(splits)
    rows = []
    for name, use_md, use_mp, rk in ABLATION_ROWS:
        metrics = []
        for seed in seeds:
            cfg = dataclasses.replace(
                base, seed=seed,
                lambda_md=base.lambda_md if use_md else 0.0,
                lambda_mp=base.lambda_mp if use_mp else 0.0,
                rerank=rk,
            )
            result = train(cfg, splits, vocab=vocab)
            metrics.append(_test_metrics(result, splits))
        mean = {key: sum(m[key] for m in metrics) / len(metrics) for key in metrics[0]}
        rows.append({"name": name, "md": use_md, "mp": use_mp, "rerank": rk,
                     "seeds": list(seeds), **mean})
    return rows


LOW_RESOURCE_ROWS = [
    # (name, md_keep, mp_keep, use_aux)
    ("none", 1.0, 1.0, False),
    ("md50_mp9", 0.5, 1.0 / 11.0, True),
    ("md50_mp100", 0.5, 1.0, True),
    ("md100_mp9", 1.0, 1.0 / 11.0, True),
    ("full", 1.0, 1.0, True),
]


def run_low_resource_suite(base: MtlConfig, splits: dict[str, list[LinkedDocument]],
                           seeds: Sequence[int] = (0, 1, 2)) -> list[dict]:
    """Auxiliary-data subsampling table: 1:1 regimen rows land between
    the no-auxiliary row and the full-data row."""
    vocab = build_vocab(splits)
    rows = []
    for name, md_keep, mp_keep, use_aux in LOW_RESOURCE_ROWS:
        metrics = []
        for seed in seeds:
            cfg = dataclasses.replace(
                base, seed=seed,
                md_keep_ratio=md_keep, mp_keep_ratio=mp_keep,
                lambda_md=base.lambda_md if use_aux else 0.0,
                lambda_mp=base.lambda_mp if use_aux else 0.0,
                rerank=use_aux,
            )
            result = train(cfg, splits, vocab=vocab)
            metrics.append(_test_metrics(result, splits))
        mean = {key: sum(m[key] for m in metrics) / len(metrics) for key in metrics[0]}
        rows.append({"name": name, "md_keep": md_keep, "mp_keep": mp_keep,
                     "aux": use_aux, "seeds": list(seeds), **mean})
    return rows
