"""Multi-task autoregressive entity linking at desk scale.

A shared-encoder / three-decoder sequence model trained jointly on
entity linking, mention detection, and match prediction, with
grammar-constrained beam search and match-score re-ranking at
inference.
"""

from .corpus import (
    AnnotatedSequence,
    ConceptRef,
    IndicatorSequence,
    LinkedDocument,
    MentionSpan,
    ParseError,
    Side,
    annotate,
    chunk_document,
    parse_annotated,
)
from .decoding import ConceptTrie, constrained_beam_search
from .matchpred import MatchPair, SampleSet, build_mp_batch, entities_match, rerank
from .model import ModelConfig, MtlModel, make_model
from .objectives import LossBreakdown, el_loss, md_loss, mp_loss, mtl_loss
from .synth import SynthSpec, generate_synthetic_corpus
from .tokenizer import Tokenizer, Vocab, derive_indicators
from .trainer import MtlConfig, train

__version__ = "0.1.0"
