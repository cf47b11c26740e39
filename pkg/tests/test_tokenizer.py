import pytest
from hypothesis import given, settings, strategies as st

from mtel.corpus import ConceptRef, LinkedDocument, MentionSpan, Side, escape_text
from mtel.synth import (
    HEADS,
    MODIFIERS,
    SynthSpec,
    concept_names,
    generate_synthetic_corpus,
)
from mtel.tokenizer import (
    FULL_SPECIALS,
    Tokenizer,
    Vocab,
    derive_indicators,
    source_tokens,
    target_tokens,
)


class TestTokenizer:
    def test_words_and_punctuation(self):
        tok = Tokenizer()
        assert tok.tokenize("flu shot, ok") == ["flu", "shot", ",", "ok"]

    def test_escape_tokens_stay_single(self):
        tok = Tokenizer()
        assert tok.tokenize(r"a \[ b \\ c") == ["a", r"\[", "b", "\\\\", "c"]

    def test_markup_is_single_tokens(self):
        tok = Tokenizer()
        assert tok.tokenize("[flu] (vaccine)") == ["[", "flu", "]", "(", "vaccine", ")"]

    def test_spans_cover_tokens(self):
        tok = Tokenizer()
        text = "one two, three"
        for (s, e), t in zip(tok.token_spans(text), tok.tokenize(text)):
            assert text[s:e] == t

    @given(st.text(alphabet="abc []()\\.,", max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_spans_match_tokens(self, text):
        tok = Tokenizer()
        spans = tok.token_spans(text)
        assert [text[s:e] for s, e in spans] == tok.tokenize(text)


class TestVocab:
    def test_build_includes_specials(self):
        v = Vocab.build(["flu shot"])
        for t in FULL_SPECIALS:
            assert t in v
        assert "flu" in v and "shot" in v

    def test_raw_brackets_do_not_alias_markup(self):
        # raw bracket characters in text are escaped before tokenization,
        # so the reserved markup ids never appear in source encodings
        v = Vocab.build(["a [b] c"])
        doc = LinkedDocument("d", "a [b] c")
        ids = source_tokens(doc, v)
        assert v.open_bracket_id not in ids
        assert v.close_bracket_id not in ids

    def test_minimal_has_eight_tokens(self):
        v = Vocab.minimal(["a", "b"])
        assert len(v) == 8
        assert v.pad_id is None and v.sep_id is None

    def test_unknown_token_maps_to_unk(self):
        v = Vocab.build(["hello"])
        assert v.id("zzz") == v.unk_id

    def test_minimal_unknown_raises(self):
        v = Vocab.minimal(["a"])
        with pytest.raises(KeyError):
            v.id("zzz")

    def test_duplicate_tokens_rejected(self):
        with pytest.raises(ValueError):
            Vocab(list(FULL_SPECIALS) + ["a", "a"])

    def test_content_ids_exclude_specials(self):
        v = Vocab.build(["alpha beta"])
        content = v.content_ids()
        assert v.bos_id not in content
        assert v.open_bracket_id not in content
        assert v.id("alpha") in content

    def test_round_trip(self):
        v = Vocab.build(["alpha beta gamma"])
        toks = ["alpha", "gamma", "beta"]
        assert v.decode(v.encode(toks)) == toks

    def test_rebuild_from_list(self):
        v = Vocab.build(["alpha beta"])
        assert Vocab(v.to_list()).to_list() == v.to_list()


def two_mention_doc():
    text = "flu shot and head ache"
    return LinkedDocument("d", text, (
        MentionSpan(0, 8, "flu shot", ConceptRef("influenza vaccine")),
        MentionSpan(13, 22, "head ache", ConceptRef("headache")),
    ))


class TestIndicators:
    def test_source_side(self):
        ind = derive_indicators(two_mention_doc(), Side.SOURCE)
        # flu shot and head ache -> E E O E E
        assert ind.labels == (True, True, False, True, True)

    def test_target_side_includes_markup(self):
        doc = LinkedDocument(
            "d", "I took the flu shot",
            (MentionSpan(11, 19, "flu shot", ConceptRef("influenza vaccine")),),
        )
        ind = derive_indicators(doc, Side.TARGET)
        # I took the [ flu shot ] ( influenza vaccine )
        assert ind.labels == (False,) * 3 + (True,) * 8

    def test_no_mentions_all_outside(self):
        doc = LinkedDocument("d", "plain text")
        assert derive_indicators(doc, Side.SOURCE).labels == (False, False)

    def test_source_with_escaped_chars(self):
        # reserved characters before the mention shift escaped offsets
        doc = LinkedDocument(
            "d", "x (y) flu shot",
            (MentionSpan(6, 14, "flu shot", ConceptRef("influenza vaccine")),),
        )
        ind = derive_indicators(doc, Side.SOURCE)
        tok = Tokenizer()
        n = len(tok.tokenize(escape_text(doc.text)))
        assert len(ind.labels) == n
        assert ind.labels[-2:] == (True, True)

    def test_label_lengths_match_token_streams(self):
        doc = two_mention_doc()
        vocab = Vocab.build([doc.text, "influenza vaccine headache"])
        assert len(derive_indicators(doc, Side.SOURCE).labels) == len(source_tokens(doc, vocab))
        assert len(derive_indicators(doc, Side.TARGET).labels) == len(target_tokens(doc, vocab))


class TestSynth:
    def test_determinism(self):
        a = generate_synthetic_corpus(SynthSpec(seed=7))
        b = generate_synthetic_corpus(SynthSpec(seed=7))
        assert a == b

    def test_sizes(self):
        splits = generate_synthetic_corpus(SynthSpec(train_size=10, dev_size=4, test_size=6))
        assert [len(splits[s]) for s in ("train", "dev", "test")] == [10, 4, 6]

    def test_zeroshot_combos_disjoint(self):
        splits = generate_synthetic_corpus(SynthSpec(seed=3, zeroshot=True))

        def combos(docs):
            out = set()
            for doc in docs:
                for m in doc.mentions:
                    mod, head = m.surface.split()
                    out.add((mod, head))
            return out

        train = combos(splits["train"])
        eval_ = combos(splits["dev"]) | combos(splits["test"])
        assert not (train & eval_)
        # every modifier and head word still occurs in training
        assert {m for m, _ in train} == set(MODIFIERS)
        assert {h for _, h in train} == set(HEADS)

    def test_concepts_follow_head_category(self):
        splits = generate_synthetic_corpus(SynthSpec(seed=1))
        for docs in splits.values():
            for doc in docs:
                for m in doc.mentions:
                    mod, head = m.surface.split()
                    assert m.concept.name == f"{mod} {head} {HEADS[head]}"

    def test_mention_offsets_valid(self):
        splits = generate_synthetic_corpus(SynthSpec(seed=2, mentions_per_doc=2))
        for docs in splits.values():
            for doc in docs:
                for m in doc.mentions:
                    assert doc.text[m.start:m.end] == m.surface

    def test_concept_names_closed_set(self):
        names = set(concept_names())
        splits = generate_synthetic_corpus(SynthSpec(seed=5))
        for docs in splits.values():
            for doc in docs:
                for m in doc.mentions:
                    assert m.concept.name in names
