"""Data model and markup codec for entity-linked text.

A document is plain text plus a list of non-overlapping mention spans,
each linked to a knowledge-base concept name. The codec renders a
document into its annotated form ``... [mention] (concept) ...`` and
parses such strings back. Reserved characters ``[ ] ( ) \\`` occurring
in source text or concept names are backslash-escaped at render time
and unescaped on parse, so the grammar stays unambiguous for arbitrary
input.

All functions here are pure and operate on immutable values.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

RESERVED_CHARS = "[]()\\"


class CorpusError(Exception):
    """Base class for ingest/validation failures."""


class OverlappingMentions(CorpusError):
    pass


class MentionTooLong(CorpusError):
    pass


class ParseErrorKind(enum.Enum):
    UNBALANCED_MARKUP = "unbalanced_markup"
    MISSING_CONCEPT = "missing_concept"
    NESTING = "nesting"
    SOURCE_MISMATCH = "source_mismatch"


class ParseError(Exception):
    """Raised when an annotated string does not parse.

    ``offset`` is the character offset of the first offending position
    in the rendered string (for SOURCE_MISMATCH, in the rebuilt source).
    """

    def __init__(self, kind: ParseErrorKind, offset: int, message: str = ""):
        self.kind = kind
        self.offset = offset
        super().__init__(f"{kind.value} at offset {offset}" + (f": {message}" if message else ""))


@dataclass(frozen=True)
class ConceptRef:
    """A knowledge-base concept name; in_kb=False excludes the mention
    from In-KB scoring."""

    name: str
    in_kb: bool = True

    def __post_init__(self):
        if not self.name:
            raise CorpusError("concept name must be non-empty")


@dataclass(frozen=True)
class MentionSpan:
    start: int
    end: int
    surface: str
    concept: ConceptRef

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise CorpusError(f"invalid span [{self.start}, {self.end})")


@dataclass(frozen=True)
class LinkedDocument:
    id: str
    text: str
    mentions: tuple[MentionSpan, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(self.mentions))
        prev_end = 0
        for m in self.mentions:
            if m.end > len(self.text):
                raise CorpusError(f"mention [{m.start}, {m.end}) outside text bounds")
            if m.start < prev_end:
                raise OverlappingMentions(
                    f"mention at {m.start} overlaps or precedes previous span end {prev_end}"
                )
            if self.text[m.start : m.end] != m.surface:
                raise CorpusError(
                    f"surface {m.surface!r} does not match text slice "
                    f"{self.text[m.start:m.end]!r}"
                )
            prev_end = m.end

    def pairs(self) -> list[tuple[str, str]]:
        """Ordered (surface, concept name) pairs."""
        return [(m.surface, m.concept.name) for m in self.mentions]


@dataclass(frozen=True)
class AnnotatedSequence:
    """A rendered annotated string, optionally with its token ids."""

    rendered: str
    tokens: tuple[int, ...] | None = None


class Side(enum.Enum):
    SOURCE = "source"
    TARGET = "target"


@dataclass(frozen=True)
class IndicatorSequence:
    """Per-token E/O labels: True = inside an entity region."""

    labels: tuple[bool, ...]
    side: Side


# ---------------------------------------------------------------------------
# escaping
# ---------------------------------------------------------------------------

def escape_text(s: str) -> str:
    """Backslash-escape reserved markup characters."""
    out = []
    for ch in s:
        if ch in RESERVED_CHARS:
            out.append("\\")
        out.append(ch)
    return "".join(out)


def unescape_text(s: str) -> str:
    out = []
    i = 0
    while i < len(s):
        if s[i] == "\\" and i + 1 < len(s):
            out.append(s[i + 1])
            i += 2
        else:
            out.append(s[i])
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# codec
# ---------------------------------------------------------------------------

def annotate(doc: LinkedDocument) -> AnnotatedSequence:
    """Render a document with ``[mention] (concept)`` markup in place."""
    parts = []
    cursor = 0
    for m in doc.mentions:
        parts.append(escape_text(doc.text[cursor : m.start]))
        parts.append("[" + escape_text(m.surface) + "] (" + escape_text(m.concept.name) + ")")
        cursor = m.end
    parts.append(escape_text(doc.text[cursor:]))
    return AnnotatedSequence(rendered="".join(parts))


def parse_annotated(rendered: str, source: str) -> list[tuple[str, str]]:
    """Parse an annotated string back into (surface, concept) pairs.

    Validates that stripping the markup recovers ``source`` exactly;
    raises ParseError otherwise. Accepts arbitrary input strings.
    """
    pairs: list[tuple[str, str]] = []
    rebuilt: list[str] = []
    i = 0
    n = len(rendered)

    def read_escaped(stop_chars: str, open_offset: int) -> tuple[str, int]:
        # Reads until an unescaped stop char; returns (raw unescaped text, index
        # of the stop char). Raises on EOF or unexpected markup chars.
        nonlocal i
        buf = []
        while i < n:
            ch = rendered[i]
            if ch == "\\":
                if i + 1 >= n:
                    raise ParseError(ParseErrorKind.UNBALANCED_MARKUP, i, "dangling escape")
                buf.append(rendered[i + 1])
                i += 2
                continue
            if ch in stop_chars:
                return "".join(buf), i
            if ch == "[":
                raise ParseError(ParseErrorKind.NESTING, i, "nested '['")
            if ch in "]()":
                raise ParseError(ParseErrorKind.UNBALANCED_MARKUP, i, f"unexpected {ch!r}")
            buf.append(ch)
            i += 1
        raise ParseError(ParseErrorKind.UNBALANCED_MARKUP, open_offset, "unterminated segment")

    while i < n:
        ch = rendered[i]
        if ch == "\\":
            if i + 1 >= n:
                raise ParseError(ParseErrorKind.UNBALANCED_MARKUP, i, "dangling escape")
            rebuilt.append(rendered[i + 1])
            i += 2
        elif ch == "[":
            open_at = i
            i += 1
            surface, close_at = read_escaped("]", open_at)
            if not surface:
                raise ParseError(ParseErrorKind.UNBALANCED_MARKUP, close_at, "empty mention")
            i = close_at + 1
            if not rendered.startswith(" (", i):
                raise ParseError(ParseErrorKind.MISSING_CONCEPT, i, "expected ' (' after ']'")
            paren_at = i + 1
            i += 2
            concept, close_paren = read_escaped(")", paren_at)
            if not concept:
                raise ParseError(ParseErrorKind.MISSING_CONCEPT, close_paren, "empty concept")
            i = close_paren + 1
            pairs.append((surface, concept))
            rebuilt.append(surface)
        elif ch in "]()":
            raise ParseError(ParseErrorKind.UNBALANCED_MARKUP, i, f"unexpected {ch!r}")
        else:
            rebuilt.append(ch)
            i += 1

    stripped = "".join(rebuilt)
    if stripped != source:
        offset = next(
            (k for k, (a, b) in enumerate(zip(stripped, source)) if a != b),
            min(len(stripped), len(source)),
        )
        raise ParseError(ParseErrorKind.SOURCE_MISMATCH, offset)
    return pairs


def markup_regions(rendered: str) -> list[tuple[int, int]]:
    """Character ranges of each ``[...] (...)`` annotation, brackets included.

    Assumes ``rendered`` parses; raises ParseError otherwise.
    """
    regions = []
    i = 0
    n = len(rendered)
    while i < n:
        ch = rendered[i]
        if ch == "\\":
            i += 2
        elif ch == "[":
            start = i
            i += 1
            while i < n and rendered[i] != ")":
                if rendered[i] == "\\":
                    i += 1
                i += 1
            if i >= n:
                raise ParseError(ParseErrorKind.UNBALANCED_MARKUP, start, "unterminated")
            regions.append((start, i + 1))
            i += 1
        else:
            i += 1
    return regions


# ---------------------------------------------------------------------------
# chunking
# ---------------------------------------------------------------------------

def chunk_document(doc: LinkedDocument, max_len: int, tokenizer) -> list[LinkedDocument]:
    """Split a document into chunks of at most ``max_len`` tokens.

    Chunk texts concatenate back to the original text; no mention is
    split across chunks (the split point moves left to the token
    boundary preceding a straddling mention).
    """
    spans = tokenizer.token_spans(doc.text)
    if len(spans) <= max_len:
        return [doc]

    boundaries = [0]  # character offsets where chunks start
    start_tok = 0
    while start_tok + max_len < len(spans):
        end_tok = start_tok + max_len
        boundary_char = spans[end_tok][0]
        moved = True
        while moved:  # each move strictly lowers the boundary, so this terminates
            moved = False
            for m in doc.mentions:
                if m.start < boundary_char < m.end:
                    # move split before the first token of this mention
                    end_tok = next(k for k, (s, e) in enumerate(spans) if e > m.start)
                    if spans[end_tok][0] > m.start and end_tok > 0:
                        # mention starts in the gap before this token
                        end_tok -= 1
                    boundary_char = spans[end_tok][0]
                    moved = True
                    break
        if end_tok <= start_tok:
            raise MentionTooLong(f"a single mention exceeds max_len={max_len}")
        boundaries.append(boundary_char)
        start_tok = end_tok
    boundaries.append(len(doc.text))

    chunks = []
    for idx in range(len(boundaries) - 1):
        lo, hi = boundaries[idx], boundaries[idx + 1]
        mentions = tuple(
            MentionSpan(m.start - lo, m.end - lo, m.surface, m.concept)
            for m in doc.mentions
            if lo <= m.start and m.end <= hi
        )
        chunks.append(LinkedDocument(f"{doc.id}#chunk{idx}", doc.text[lo:hi], mentions))

    total_mentions = sum(len(c.mentions) for c in chunks)
    assert total_mentions == len(doc.mentions), "chunking dropped a mention"
    return chunks


# ---------------------------------------------------------------------------
# file format: one JSON record per line
# ---------------------------------------------------------------------------

def doc_to_record(doc: LinkedDocument, split: str | None = None) -> dict:
    rec = {
        "id": doc.id,
        "text": doc.text,
        "mentions": [
            {"start": m.start, "end": m.end, "concept": m.concept.name, "in_kb": m.concept.in_kb}
            for m in doc.mentions
        ],
    }
    if split is not None:
        rec["split"] = split
    return rec


def doc_from_record(rec: dict) -> LinkedDocument:
    mentions = tuple(
        MentionSpan(
            m["start"],
            m["end"],
            rec["text"][m["start"] : m["end"]],
            ConceptRef(m["concept"], m.get("in_kb", True)),
        )
        for m in rec["mentions"]
    )
    return LinkedDocument(rec["id"], rec["text"], mentions)


def save_corpus(splits: dict[str, list[LinkedDocument]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for split in ("train", "dev", "test"):
            for doc in splits.get(split, []):
                f.write(json.dumps(doc_to_record(doc, split), sort_keys=True) + "\n")


def load_corpus(path: str | Path) -> dict[str, list[LinkedDocument]]:
    splits: dict[str, list[LinkedDocument]] = {"train": [], "dev": [], "test": []}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            splits.setdefault(rec.get("split", "train"), []).append(doc_from_record(rec))
    return splits
