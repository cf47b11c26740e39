"""Whitespace-plus-punctuation tokenizer and closed vocabulary.

Source text is escaped before tokenization so raw ``[ ] ( )`` characters
in documents become escape tokens (``\\[`` etc.) distinct from the four
markup tokens, which are reserved single-character vocabulary entries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import (
    IndicatorSequence,
    LinkedDocument,
    Side,
    annotate,
    escape_text,
    markup_regions,
)

_TOKEN_RE = re.compile(r"\\.|\w+|[^\w\s]")

PAD, UNK, BOS, EOS, SEP = "<pad>", "<unk>", "<bos>", "<eos>", "<sep>"
OPEN_BRACKET, CLOSE_BRACKET, OPEN_PAREN, CLOSE_PAREN = "[", "]", "(", ")"
E_TAG, O_TAG = "<E>", "<O>"

MARKUP_TOKENS = (OPEN_BRACKET, CLOSE_BRACKET, OPEN_PAREN, CLOSE_PAREN)
FULL_SPECIALS = (PAD, UNK, BOS, EOS, SEP) + MARKUP_TOKENS + (E_TAG, O_TAG)


class Tokenizer:
    """Splits text into word tokens, single punctuation marks, and
    backslash-escape tokens."""

    def tokenize(self, text: str) -> list[str]:
        return _TOKEN_RE.findall(text)

    def token_spans(self, text: str) -> list[tuple[int, int]]:
        return [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]

    def detokenize(self, tokens: Sequence[str]) -> str:
        return " ".join(tokens)


class Vocab:
    """Closed vocabulary mapping tokens to contiguous integer ids."""

    def __init__(self, tokens: Sequence[str]):
        self._id2tok = list(tokens)
        self._tok2id = {t: i for i, t in enumerate(self._id2tok)}
        if len(self._tok2id) != len(self._id2tok):
            raise ValueError("duplicate tokens in vocabulary")
        for t in (BOS, EOS) + MARKUP_TOKENS:
            if t not in self._tok2id:
                raise ValueError(f"vocabulary missing required token {t!r}")

    @classmethod
    def build(cls, texts: Iterable[str], tokenizer: Tokenizer | None = None) -> "Vocab":
        """Full vocabulary: all specials plus sorted corpus tokens.

        ``texts`` are raw document texts; they are escaped first so the
        markup tokens stay reserved.
        """
        tokenizer = tokenizer or Tokenizer()
        words = set()
        for text in texts:
            words.update(tokenizer.tokenize(escape_text(text)))
        words -= set(FULL_SPECIALS)
        return cls(list(FULL_SPECIALS) + sorted(words))

    @classmethod
    def minimal(cls, words: Sequence[str]) -> "Vocab":
        """Smallest usable vocabulary: bos/eos, markup, and ``words``.

        Used for tiny decoding instances where every id counts.
        """
        return cls([BOS, EOS, *MARKUP_TOKENS, *words])

    def __len__(self) -> int:
        return len(self._id2tok)

    def __contains__(self, token: str) -> bool:
        return token in self._tok2id

    def id(self, token: str) -> int:
        if token in self._tok2id:
            return self._tok2id[token]
        if UNK in self._tok2id:
            return self._tok2id[UNK]
        raise KeyError(token)

    def token(self, idx: int) -> str:
        return self._id2tok[idx]

    def _optional(self, token: str) -> int | None:
        return self._tok2id.get(token)

    @property
    def pad_id(self) -> int | None:
        return self._optional(PAD)

    @property
    def unk_id(self) -> int | None:
        return self._optional(UNK)

    @property
    def bos_id(self) -> int:
        return self._tok2id[BOS]

    @property
    def eos_id(self) -> int:
        return self._tok2id[EOS]

    @property
    def sep_id(self) -> int | None:
        return self._optional(SEP)

    @property
    def open_bracket_id(self) -> int:
        return self._tok2id[OPEN_BRACKET]

    @property
    def close_bracket_id(self) -> int:
        return self._tok2id[CLOSE_BRACKET]

    @property
    def open_paren_id(self) -> int:
        return self._tok2id[OPEN_PAREN]

    @property
    def close_paren_id(self) -> int:
        return self._tok2id[CLOSE_PAREN]

    @property
    def e_tag_id(self) -> int | None:
        return self._optional(E_TAG)

    @property
    def o_tag_id(self) -> int | None:
        return self._optional(O_TAG)

    def special_ids(self) -> set[int]:
        ids = {self._tok2id[t] for t in FULL_SPECIALS if t in self._tok2id}
        return ids

    def content_ids(self) -> list[int]:
        """Ids usable as free text (everything except specials/markup)."""
        special = self.special_ids()
        return [i for i in range(len(self._id2tok)) if i not in special]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self._id2tok[i] for i in ids]

    def to_list(self) -> list[str]:
        return list(self._id2tok)


# ---------------------------------------------------------------------------
# document <-> model token space
# ---------------------------------------------------------------------------

def source_tokens(doc: LinkedDocument, vocab: Vocab, tokenizer: Tokenizer | None = None) -> list[int]:
    tokenizer = tokenizer or Tokenizer()
    return vocab.encode(tokenizer.tokenize(escape_text(doc.text)))


def target_tokens(doc: LinkedDocument, vocab: Vocab, tokenizer: Tokenizer | None = None) -> list[int]:
    tokenizer = tokenizer or Tokenizer()
    return vocab.encode(tokenizer.tokenize(annotate(doc).rendered))


def derive_indicators(
    doc: LinkedDocument, side: Side, tokenizer: Tokenizer | None = None
) -> IndicatorSequence:
    """E/O labels per token of the source text or the annotated target.

    Source side: a token is E iff it lies inside a mention span.
    Target side: a token is E iff it lies inside a ``[...] (...)``
    annotation region, markup tokens included.
    """
    tokenizer = tokenizer or Tokenizer()
    if side is Side.SOURCE:
        esc = escape_text(doc.text)
        # raw -> escaped character offset map (escaped chars double up)
        offset = [0] * (len(doc.text) + 1)
        acc = 0
        for i, ch in enumerate(doc.text):
            offset[i] = acc
            acc += 2 if ch in "[]()\\" else 1
        offset[len(doc.text)] = acc
        regions = [(offset[m.start], offset[m.end]) for m in doc.mentions]
        spans = tokenizer.token_spans(esc)
    else:
        rendered = annotate(doc).rendered
        regions = markup_regions(rendered)
        spans = tokenizer.token_spans(rendered)

    labels = tuple(
        any(lo < e and s < hi for lo, hi in regions) for s, e in spans
    )
    return IndicatorSequence(labels=labels, side=side)
