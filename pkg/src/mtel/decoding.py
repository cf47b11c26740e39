"""Grammar-constrained beam search over the annotation markup.

A hypothesis is valid iff its token sequence interleaves a verbatim,
in-order copy of the source tokens with ``[ mention ] ( concept )``
segments, where each mention is a contiguous copy of the next source
tokens and each concept is free text (or trie-constrained when a
concept trie is supplied). The automaton below tracks the copy cursor
and admits exactly the legal next tokens; beam search masks everything
else but scores hypotheses with the raw model log-probabilities.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import torch

from .corpus import AnnotatedSequence
from .model import DecoderId, MtlModel
from .tokenizer import Vocab


class DecodingError(Exception):
    pass


class DeadState(DecodingError):
    """No token is admissible for a live hypothesis (automaton bug)."""


class NoFinishedHypothesis(DecodingError):
    def __init__(self, partials: list["Hypothesis"]):
        self.partials = partials
        super().__init__("beam search exhausted max_len with no finished hypothesis")


class Mode(enum.Enum):
    OUTSIDE = "outside"
    IN_MENTION = "in_mention"
    AWAIT_CONCEPT = "await_concept"
    IN_CONCEPT = "in_concept"


@dataclass(frozen=True)
class AutomatonState:
    mode: Mode = Mode.OUTSIDE
    cursor: int = 0           # next source token to copy
    mention_len: int = 0      # tokens copied since the opening bracket
    concept_prefix: tuple[int, ...] = ()


class ConceptTrie:
    """Prefix trie over tokenized concept names."""

    _TERMINAL = object()

    def __init__(self):
        self._root: dict = {}

    def insert(self, token_ids: Sequence[int]) -> None:
        if not token_ids:
            raise ValueError("cannot insert an empty concept")
        node = self._root
        for t in token_ids:
            node = node.setdefault(t, {})
        node[self._TERMINAL] = True

    def _node(self, prefix: Sequence[int]) -> dict | None:
        node = self._root
        for t in prefix:
            node = node.get(t)
            if node is None:
                return None
        return node

    def continuations(self, prefix: Sequence[int]) -> set[int]:
        node = self._node(prefix)
        if node is None:
            return set()
        return {t for t in node if t is not self._TERMINAL}

    def is_terminal(self, prefix: Sequence[int]) -> bool:
        node = self._node(prefix)
        return bool(node) and self._TERMINAL in node

    def contains(self, token_ids: Sequence[int]) -> bool:
        return self.is_terminal(token_ids)

    def min_depth_from(self, prefix: Sequence[int]) -> int | None:
        """Fewest tokens from ``prefix`` to any inserted name; None if
        the prefix leaves the trie."""
        node = self._node(prefix)
        if node is None:
            return None
        return self._min_depth(node)

    def _min_depth(self, node: dict) -> int:
        if self._TERMINAL in node:
            return 0
        return 1 + min(self._min_depth(child) for t, child in node.items()
                       if t is not self._TERMINAL)


class MarkupAutomaton:
    """Admissible-token oracle for one source token sequence."""

    def __init__(self, source: Sequence[int], vocab: Vocab, trie: ConceptTrie | None = None):
        self.source = tuple(source)
        self.vocab = vocab
        self.trie = trie
        self._concept_ids = set(vocab.content_ids())

    def initial_state(self) -> AutomatonState:
        return AutomatonState()

    def admissible(self, state: AutomatonState) -> set[int]:
        v = self.vocab
        src = self.source
        if state.mode is Mode.OUTSIDE:
            if state.cursor >= len(src):
                return {v.eos_id}
            return {src[state.cursor], v.open_bracket_id}
        if state.mode is Mode.IN_MENTION:
            out = set()
            if state.cursor < len(src):
                out.add(src[state.cursor])
            if state.mention_len >= 1:
                out.add(v.close_bracket_id)
            if not out:
                raise DeadState(f"no admissible token in state {state}")
            return out
        if state.mode is Mode.AWAIT_CONCEPT:
            return {v.open_paren_id}
        # IN_CONCEPT
        if self.trie is not None:
            out = self.trie.continuations(state.concept_prefix)
            if self.trie.is_terminal(state.concept_prefix):
                out = out | {v.close_paren_id}
            if not out:
                raise DeadState(f"trie dead end in state {state}")
            return out
        out = set(self._concept_ids)
        if state.concept_prefix:
            out.add(v.close_paren_id)
        return out

    def step(self, state: AutomatonState, token: int) -> AutomatonState:
        v = self.vocab
        if token not in self.admissible(state):
            raise DecodingError(f"token {token} not admissible in state {state}")
        if state.mode is Mode.OUTSIDE:
            if token == v.open_bracket_id:
                return replace(state, mode=Mode.IN_MENTION, mention_len=0)
            if token == v.eos_id:
                return state
            return replace(state, cursor=state.cursor + 1)
        if state.mode is Mode.IN_MENTION:
            if token == v.close_bracket_id:
                return replace(state, mode=Mode.AWAIT_CONCEPT)
            return replace(state, cursor=state.cursor + 1, mention_len=state.mention_len + 1)
        if state.mode is Mode.AWAIT_CONCEPT:
            return replace(state, mode=Mode.IN_CONCEPT, concept_prefix=())
        if token == v.close_paren_id:
            return replace(state, mode=Mode.OUTSIDE, mention_len=0, concept_prefix=())
        return replace(state, concept_prefix=state.concept_prefix + (token,))

    def can_finish(self, state: AutomatonState) -> bool:
        return state.mode is Mode.OUTSIDE and state.cursor >= len(self.source)

    def min_remaining(self, state: AutomatonState) -> int:
        """Fewest further tokens (including <eos>) needed to reach a
        complete sequence from ``state``. Used to prune hypotheses that
        cannot finish within the length budget."""
        rest = len(self.source) - state.cursor
        if self.trie is None:
            concept_min = 1
        else:
            concept_min = self.trie.min_depth_from(())
        if state.mode is Mode.OUTSIDE:
            return rest + 1
        if state.mode is Mode.IN_MENTION:
            # remaining copies + ']' + '(' + concept + ')' + <eos>
            return rest + concept_min + 4
        if state.mode is Mode.AWAIT_CONCEPT:
            return rest + concept_min + 3
        # IN_CONCEPT
        if self.trie is None:
            here = 0 if state.concept_prefix else 1
        else:
            d = self.trie.min_depth_from(state.concept_prefix)
            here = d if d is not None else 1
        return here + 1 + rest + 1


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]   # decoder tokens after <bos>, including <eos> when finished
    score: float              # sum of selected-token log-probabilities
    state: AutomatonState
    finished: bool = False

    def sort_key(self):
        # higher score first; ties broken by lexicographic token-id order
        return (-self.score, self.tokens)


@dataclass(frozen=True)
class ScoredSequence:
    tokens: tuple[int, ...]   # body tokens, markup included, no <bos>/<eos>
    score: float
    rendered: str


def render_hypothesis(tokens: Sequence[int], vocab: Vocab) -> AnnotatedSequence:
    """Map a finished hypothesis body to its rendered markup string."""
    toks = vocab.decode(tokens)
    parts: list[str] = []
    i = 0
    while i < len(toks):
        t = toks[i]
        if t == "[":
            j = toks.index("]", i)
            mention = " ".join(toks[i + 1 : j])
            k = toks.index(")", j)
            concept = " ".join(toks[j + 2 : k])
            parts.append(f"[{mention}] ({concept})")
            i = k + 1
        else:
            parts.append(t)
            i += 1
    return AnnotatedSequence(rendered=" ".join(parts), tokens=tuple(tokens))


def constrained_beam_search(
    model: MtlModel,
    source: Sequence[int],
    vocab: Vocab,
    k: int,
    max_len: int | None = None,
    trie: ConceptTrie | None = None,
) -> list[ScoredSequence]:
    """Top-k grammar-valid annotated sequences by model log-probability.

    ``source`` is the bare source token ids (no <bos>/<eos>). Returns up
    to k finished sequences sorted by descending score; raises
    NoFinishedHypothesis (carrying partials) if none finish in max_len.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_len is None:
        max_len = model.cfg.max_len
    automaton = MarkupAutomaton(source, vocab, trie)
    device = next(model.parameters()).device

    enc_input = torch.tensor([[vocab.bos_id, *source, vocab.eos_id]], dtype=torch.long, device=device)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            enc_states = model.encode(enc_input)
            active = [Hypothesis(tokens=(), score=0.0, state=automaton.initial_state())]
            finished: list[Hypothesis] = []

            for _ in range(max_len):
                if not active:
                    break
                if len(finished) >= k:
                    worst_kept = sorted(finished, key=Hypothesis.sort_key)[k - 1].score
                    # scores only decrease as hypotheses extend
                    if all(h.score <= worst_kept for h in active):
                        break
                prefixes = [(vocab.bos_id, *h.tokens) for h in active]
                width = max(len(p) for p in prefixes)
                pad_val = vocab.pad_id if vocab.pad_id is not None else vocab.bos_id
                batch = torch.full((len(prefixes), width), pad_val, dtype=torch.long, device=device)
                for r, p in enumerate(prefixes):
                    batch[r, : len(p)] = torch.tensor(p, dtype=torch.long, device=device)
                mem = enc_states.expand(len(prefixes), -1, -1)
                states = model.decode(DecoderId.EL, batch, mem)
                logprobs = torch.log_softmax(model.el_logits(states), dim=-1)

                candidates: list[Hypothesis] = []
                for r, hyp in enumerate(active):
                    row = logprobs[r, len(prefixes[r]) - 1]
                    for tok in sorted(automaton.admissible(hyp.state)):
                        score = hyp.score + float(row[tok])
                        if tok == vocab.eos_id:
                            candidates.append(
                                Hypothesis(hyp.tokens + (tok,), score, hyp.state, finished=True)
                            )
                        else:
                            nxt = automaton.step(hyp.state, tok)
                            # drop continuations that cannot finish in budget
                            used = len(hyp.tokens) + 1
                            if used + automaton.min_remaining(nxt) > max_len:
                                continue
                            candidates.append(Hypothesis(hyp.tokens + (tok,), score, nxt))
                candidates.sort(key=Hypothesis.sort_key)
                newly_finished = [c for c in candidates if c.finished]
                finished.extend(newly_finished)
                active = [c for c in candidates if not c.finished][:k]
    finally:
        if was_training:
            model.train()

    if not finished:
        raise NoFinishedHypothesis(active)
    finished.sort(key=Hypothesis.sort_key)
    results = []
    for h in finished[:k]:
        body = h.tokens[:-1]  # strip <eos>
        ann = render_hypothesis(body, vocab)
        results.append(ScoredSequence(tokens=tuple(body), score=h.score, rendered=ann.rendered))
    return results


def enumerate_valid_sequences(
    automaton: MarkupAutomaton, max_len: int
) -> list[tuple[int, ...]]:
    """Exhaustive enumeration of all grammar-valid complete sequences
    (body + <eos>) of at most max_len tokens. Oracle for small instances."""
    out: list[tuple[int, ...]] = []
    eos = automaton.vocab.eos_id

    def walk(prefix: tuple[int, ...], state: AutomatonState):
        if len(prefix) >= max_len:
            return
        for tok in sorted(automaton.admissible(state)):
            if tok == eos:
                out.append(prefix + (tok,))
            else:
                walk(prefix + (tok,), automaton.step(state, tok))

    walk((), automaton.initial_state())
    return out


def sequence_logprob(model: MtlModel, source: Sequence[int], tokens: Sequence[int],
                     vocab: Vocab) -> float:
    """Model log-probability of a full decoder sequence (body + <eos>)."""
    device = next(model.parameters()).device
    enc_input = torch.tensor([[vocab.bos_id, *source, vocab.eos_id]], dtype=torch.long, device=device)
    dec_input = torch.tensor([[vocab.bos_id, *tokens]], dtype=torch.long, device=device)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            enc_states = model.encode(enc_input)
            states = model.decode(DecoderId.EL, dec_input[:, :-1], enc_states)
            logprobs = torch.log_softmax(model.el_logits(states), dim=-1)
            target = dec_input[0, 1:]
            return float(logprobs[0].gather(-1, target.unsqueeze(-1)).sum())
    finally:
        if was_training:
            model.train()
