"""Character-level BiGRU-CRF word and morpheme segmentation."""

from .corpus import (
    BIES,
    BIESX,
    Sentence,
    TagScheme,
    TagSequence,
    chop,
    decode_tags,
    encode_tags,
    format_sentence,
    parse_morpheme_line,
    parse_word_line,
    read_corpus,
    stitch,
    write_corpus,
)
from .estimator import BiRnnCrfSegmenter, EnsembleSegmenter
from .metrics import PrfResult, affix_prf, segment_prf
from .training import Checkpoint, TrainConfig, load, save, train, train_ensemble

__version__ = "0.1.0"

__all__ = [
    "BIES", "BIESX", "Sentence", "TagScheme", "TagSequence", "chop", "decode_tags",
    "encode_tags", "format_sentence", "parse_morpheme_line", "parse_word_line", "read_corpus",
    "stitch", "write_corpus",
    "BiRnnCrfSegmenter", "EnsembleSegmenter", "PrfResult", "affix_prf", "segment_prf",
    "Checkpoint", "TrainConfig", "load", "save", "train", "train_ensemble",
]
