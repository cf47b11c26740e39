"""Match-prediction data generation, pair labeling, and re-ranking.

During training the model's own beam outputs become binary training
pairs: a candidate is a match (label 1) only if its full ordered list
of (mention, concept) pairs equals the gold annotation; anything less,
including an unparseable candidate, is labeled 0. One gold pair with
label 1 is always appended. At inference the same scores re-rank the
beam.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .corpus import LinkedDocument, ParseError, parse_annotated
from .decoding import ScoredSequence
from .tokenizer import Tokenizer

_tokenizer = Tokenizer()


class Origin(enum.Enum):
    GOLD = "gold"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class MatchPair:
    source: tuple[int, ...]
    candidate: tuple[int, ...]
    label: int
    origin: Origin


@dataclass(frozen=True)
class SampleSet:
    source_id: str
    samples: tuple[ScoredSequence, ...]  # sorted by LM score, best first
    epoch: int


class EmptySampleSet(Exception):
    pass


def _normalize(text: str) -> str:
    return " ".join(_tokenizer.tokenize(text)).casefold()


def _normalized_pairs(pairs: Sequence[tuple[str, str]]) -> list[tuple[str, str]]:
    return [(_normalize(s), _normalize(c)) for s, c in pairs]


def entities_match(candidate_rendered: str, gold: LinkedDocument) -> int:
    """1 iff the candidate's ordered (mention, concept) pairs equal the
    gold annotation exactly; unparseable candidates score 0."""
    source = " ".join(_tokenizer.tokenize(gold.text))
    try:
        pairs = parse_annotated(candidate_rendered, source)
    except ParseError:
        return 0
    return int(_normalized_pairs(pairs) == _normalized_pairs(gold.pairs()))


def build_mp_batch(
    source: Sequence[int],
    gold_target: Sequence[int],
    gold_doc: LinkedDocument,
    samples: SampleSet,
) -> list[MatchPair]:
    """k sampled pairs labeled by entities_match, plus one gold pair
    labeled 1. Duplicates of the gold among samples are kept."""
    src = tuple(source)
    pairs = [
        MatchPair(src, tuple(s.tokens), entities_match(s.rendered, gold_doc), Origin.SAMPLED)
        for s in samples.samples
    ]
    pairs.append(MatchPair(src, tuple(gold_target), 1, Origin.GOLD))
    return pairs


def schedule_generation(epoch: int, interval: int) -> bool:
    """True on epochs where the sample pool is regenerated."""
    if interval < 1:
        raise ValueError("interval must be >= 1")
    return epoch % interval == 0


def rerank(samples: SampleSet, mp_scores: Sequence[float]) -> int:
    """Index of the sample with the highest match score.

    Ties go to the higher LM log-probability, then to the earlier beam
    rank. Returns the index into ``samples.samples``.
    """
    if len(samples.samples) == 0:
        raise EmptySampleSet(samples.source_id)
    if len(mp_scores) != len(samples.samples):
        raise ValueError("one score required per sample")
    best = max(
        range(len(samples.samples)),
        key=lambda i: (mp_scores[i], samples.samples[i].score, -i),
    )
    return best
