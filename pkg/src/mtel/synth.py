"""Seeded synthetic corpus generator.

Documents are short clinical-flavored utterances containing mention
phrases of the form ``<modifier> <head>``; the linked concept name is
``<modifier> <head> <category>`` where the category word is a fixed
property of the head. The mapping is compositional, so a zeroshot
split (test pairs unseen in training) is still learnable from the
training combinations.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .corpus import ConceptRef, LinkedDocument, MentionSpan

MODIFIERS = [
    "oral", "mild", "acute", "chronic", "viral", "rapid",
    "severe", "local", "broad", "minor", "stable", "painful",
]

# head word -> category word appended in the concept name
HEADS = {
    "shot": "vaccine",
    "rash": "condition",
    "cough": "symptom",
    "scan": "procedure",
    "pill": "medicine",
    "ache": "symptom",
    "swab": "procedure",
    "cream": "medicine",
}

PREFIXES = [
    "patient reported",
    "doctor noted",
    "she mentioned",
    "chart shows",
    "nurse flagged",
    "he described",
    "exam found",
    "notes list",
]

SUFFIXES = [
    "last week",
    "today",
    "at night",
    "since monday",
    "again",
    "after lunch",
    "this morning",
    "on admission",
]


@dataclass(frozen=True)
class SynthSpec:
    train_size: int = 40
    dev_size: int = 12
    test_size: int = 24
    zeroshot: bool = True
    mentions_per_doc: int = 1
    seed: int = 0


def _make_doc(doc_id: str, pairs: list[tuple[str, str]], rng: random.Random) -> LinkedDocument:
    """Build a document embedding the given (mention, head) pairs."""
    parts: list[str] = []
    mentions: list[MentionSpan] = []
    offset = 0
    for mod, head in pairs:
        prefix = rng.choice(PREFIXES)
        suffix = rng.choice(SUFFIXES)
        surface = f"{mod} {head}"
        concept = f"{mod} {head} {HEADS[head]}"
        lead = prefix + " "
        start = offset + len(lead)
        segment = lead + surface + " " + suffix
        parts.append(segment)
        mentions.append(MentionSpan(start, start + len(surface), surface, ConceptRef(concept)))
        offset += len(segment) + 2  # ". " joiner
    text = ". ".join(parts)
    return LinkedDocument(doc_id, text, tuple(mentions))


def generate_synthetic_corpus(spec: SynthSpec) -> dict[str, list[LinkedDocument]]:
    """Deterministic train/dev/test splits for a given seed.

    In zeroshot mode, (modifier, head) combinations used in dev/test
    never occur in training, while every individual modifier and head
    does occur in training.
    """
    rng = random.Random(spec.seed)
    heads = sorted(HEADS)
    combos = [(m, h) for m in MODIFIERS for h in heads]
    rng.shuffle(combos)

    if spec.zeroshot:
        n_held = max(len(heads), len(combos) // 4)
        held_out = combos[:n_held]
        train_pool = combos[n_held:]
        # guarantee coverage of every modifier and head in training
        for word_set, pos in ((set(MODIFIERS), 0), (set(heads), 1)):
            covered = {c[pos] for c in train_pool}
            for missing in sorted(word_set - covered):
                mover = next(c for c in held_out if c[pos] == missing)
                held_out.remove(mover)
                train_pool.append(mover)
    else:
        held_out = combos
        train_pool = combos

    splits: dict[str, list[LinkedDocument]] = {}
    for split, size, pool in (
        ("train", spec.train_size, train_pool),
        ("dev", spec.dev_size, held_out),
        ("test", spec.test_size, held_out),
    ):
        docs = []
        for i in range(size):
            pairs = [rng.choice(pool) for _ in range(spec.mentions_per_doc)]
            docs.append(_make_doc(f"{split}-{i:04d}", pairs, rng))
        splits[split] = docs
    return splits


def concept_names() -> list[str]:
    """All concept names the generator can emit."""
    return sorted(f"{m} {h} {c}" for m in MODIFIERS for h, c in HEADS.items())
