"""Turn unit streams into segmentations with one model or an averaged ensemble.

Long streams are chopped to the configured length limit, each fragment is
scored and Viterbi-decoded on its own, and the fragment tags are stitched
back together.  Dev evaluation during training and the ``decode`` command go
through :func:`segment`, so both see exactly the same predictions.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from . import crf, recurrent
from .corpus import (
    BIESX,
    SEPARATOR,
    S,
    X,
    Sentence,
    TagScheme,
    TagSequence,
    chop,
    decode_tags,
    stitch,
    tagging_stream,
)
from .features import Vocabulary, stream_ids

# fragments scored per forward pass
_CHUNK = 64


def _fragment_lattices(params: dict, vocab: Vocabulary, fragments: Sequence[Sequence[str]]):
    order = sorted(range(len(fragments)), key=lambda i: len(fragments[i]))
    out: list = [None] * len(fragments)
    for start in range(0, len(order), _CHUNK):
        idx = order[start:start + _CHUNK]
        ems = recurrent.emissions(params, [stream_ids(fragments[i], vocab) for i in idx])
        for i, em in zip(idx, ems):
            out[i] = em
    return out


def tag_streams(models: Sequence[tuple[dict, Vocabulary]], streams: Sequence[Sequence[str]],
                scheme: TagScheme, length_limit: int = 300) -> list[TagSequence]:
    """Viterbi tags for every stream; several models are averaged per fragment."""
    pieces = [chop(list(s), length_limit) for s in streams]
    flat = [f for p in pieces for f in p]
    per_model = [_fragment_lattices(p, v, flat) for p, v in models]
    frag_tags = []
    for i in range(len(flat)):
        lattices = [(em[i], p["transitions"]) for em, (p, _) in zip(per_model, models)]
        if len(lattices) == 1:
            path = crf.viterbi(*lattices[0])
        else:
            path = crf.ensemble_decode(lattices)
        frag_tags.append(TagSequence(path, scheme))
    out = []
    pos = 0
    for p in pieces:
        out.append(stitch(frag_tags[pos:pos + len(p)]))
        pos += len(p)
    return out


def enforce_separators(stream: Sequence[str], tags: TagSequence) -> TagSequence:
    """BIESX only: separator slots become X; X predicted on a unit becomes S."""
    fixed = []
    for sym, t in zip(stream, tags.tags):
        if sym == SEPARATOR:
            fixed.append(X)
        elif t == X:
            fixed.append(S)
        else:
            fixed.append(t)
    return TagSequence(tuple(fixed), tags.scheme)


def segment(models: Sequence[tuple[dict, Vocabulary]], inputs: Sequence[tuple[Sequence[str], Sequence | None]],
            scheme: TagScheme, length_limit: int = 300, threads: int | None = None) -> list[Sentence]:
    """Segment ``(units, word_spans)`` inputs; word spans are needed for BIESX only."""
    streams = [tagging_stream(units, words if scheme == BIESX else None) for units, words in inputs]
    threads = threads or 1
    if threads > 1 and len(streams) > _CHUNK:
        step = -(-len(streams) // threads)
        parts = [streams[i:i + step] for i in range(0, len(streams), step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tagged = [t for chunk in pool.map(lambda s: tag_streams(models, s, scheme, length_limit), parts)
                      for t in chunk]
    else:
        tagged = tag_streams(models, streams, scheme, length_limit)
    out = []
    for (units, _), stream, tags in zip(inputs, streams, tagged):
        if scheme == BIESX:
            tags = enforce_separators(stream, tags)
        out.append(decode_tags(list(units), tags))
    return out


def env_threads(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get("SEQSEG_THREADS", default)))
    except ValueError:
        return default
