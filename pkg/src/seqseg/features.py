"""N-gram vocabularies and concatenated unigram/bigram/trigram input vectors.

Each position ``i`` of a unit stream is described by three n-grams: the unit
itself, the left-adjacent bigram ``(u[i-1], u[i])`` and the centred trigram
``(u[i-1], u[i], u[i+1])``.  Neighbours outside the stream are the pad
symbol.  N-grams seen only once in training share the order's UNK row, which
is also used for anything unseen at test time.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corpus import BIES, Sentence, TagScheme, sentence_stream
from .exceptions import EmptyCorpus, IdOutOfRange, IndexOutOfRange

PAD = "\x00"
UNK_ID = 0
PAD_ID = 1
ORDERS = (1, 2, 3)


def _windows(units: Sequence[str]):
    padded = [PAD, *units, PAD]
    for i in range(len(units)):
        yield (padded[i + 1],), (padded[i], padded[i + 1]), (padded[i], padded[i + 1], padded[i + 2])


@dataclass
class Vocabulary:
    """Id maps for the three n-gram orders.

    Per order, id 0 is UNK, id 1 is the all-pad n-gram (used to fill padded
    batch positions), and kept n-grams follow in first-occurrence order.
    """

    maps: tuple[dict, dict, dict] = field(default_factory=lambda: ({}, {}, {}))

    def __post_init__(self):
        for order, m in zip(ORDERS, self.maps):
            m.setdefault((PAD,) * order, PAD_ID)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return tuple(len(m) + 1 for m in self.maps)

    unk_uni = unk_bi = unk_tri = UNK_ID
    pad_uni = pad_bi = pad_tri = PAD_ID

    def lookup(self, ngram: Sequence[str]) -> int:
        ngram = tuple(ngram)
        return self.maps[len(ngram) - 1].get(ngram, UNK_ID)

    def to_dict(self) -> dict:
        orders = []
        for m in self.maps:
            ordered = sorted(m.items(), key=lambda kv: kv[1])
            orders.append([list(k) for k, v in ordered if v >= 2])
        return {"orders": orders}

    @classmethod
    def from_dict(cls, data: dict) -> Vocabulary:
        maps = []
        for order, grams in zip(ORDERS, data["orders"]):
            m = {(PAD,) * order: PAD_ID}
            for i, g in enumerate(grams, 2):
                m[tuple(g)] = i
            maps.append(m)
        return cls(tuple(maps))

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.maps == other.maps


def build_vocabulary(corpus: Iterable[Sentence | Sequence[str]],
                     scheme: TagScheme = BIES, min_count: int = 2) -> Vocabulary:
    """Count n-grams over the tagging streams of ``corpus``.

    Items may be Sentences (their stream under ``scheme`` is used) or plain
    unit sequences.
    """
    counts = (Counter(), Counter(), Counter())
    seen_any = False
    for item in corpus:
        stream = sentence_stream(item, scheme) if isinstance(item, Sentence) else list(item)
        for grams in _windows(stream):
            seen_any = True
            for c, g in zip(counts, grams):
                c[g] += 1
    if not seen_any:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    maps = []
    for order, c in zip(ORDERS, counts):
        m = {(PAD,) * order: PAD_ID}
        # Counter preserves first-insertion order
        for gram, n in c.items():
            if n >= min_count and gram not in m:
                m[gram] = len(m) + 1
        maps.append(m)
    return Vocabulary(tuple(maps))


def context_ids(units: Sequence[str], i: int, v: Vocabulary) -> tuple[int, int, int]:
    if not 0 <= i < len(units):
        raise IndexOutOfRange(f"position {i} outside stream of length {len(units)}")
    left = units[i - 1] if i > 0 else PAD
    right = units[i + 1] if i + 1 < len(units) else PAD
    return (
        v.lookup((units[i],)),
        v.lookup((left, units[i])),
        v.lookup((left, units[i], right)),
    )


def stream_ids(units: Sequence[str], v: Vocabulary) -> np.ndarray:
    """``L x 3`` int array of (uni, bi, tri) ids for every position."""
    out = np.empty((len(units), 3), dtype=np.int64)
    for i, grams in enumerate(_windows(units)):
        for j, g in enumerate(grams):
            out[i, j] = v.maps[j].get(g, UNK_ID)
    return out


class EmbeddingTables(NamedTuple):
    uni: np.ndarray
    bi: np.ndarray
    tri: np.ndarray


def embed(ids: Sequence[int] | np.ndarray, tables: EmbeddingTables) -> np.ndarray:
    """Concatenate the three n-gram rows.

    ``ids`` is one ``(uni, bi, tri)`` triple or an ``... x 3`` array of them.
    """
    ids = np.asarray(ids, dtype=np.int64)
    parts = []
    for j, table in enumerate(tables):
        col = ids[..., j]
        if col.size and (col.min() < 0 or col.max() >= table.shape[0]):
            raise IdOutOfRange(f"id outside table of {table.shape[0]} rows")
        parts.append(table[col])
    return np.concatenate(parts, axis=-1)
