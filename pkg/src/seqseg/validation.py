"""Input checking shared by the estimators and the CLI."""

from __future__ import annotations

from typing import Iterable, Sequence

from .corpus import (
    MORPH_JOINER,
    Sentence,
    TagScheme,
    _split_units,
    parse_morpheme_line,
    parse_word_line,
    raw_units,
)
from .exceptions import EmptyCorpus, EmptyLine, SchemeMismatch


def check_corpus(X: Iterable, scheme: TagScheme | str = "BIES", unit_mode: bool = False,
                 name: str = "X") -> list[Sentence]:
    """Gold sentences from Sentence objects or corpus lines.

    Lines are parsed as morph lines for BIESX and word lines otherwise.
    """
    scheme = TagScheme.from_name(scheme)
    parse = parse_morpheme_line if scheme.kind == "BIESX" else parse_word_line
    out = []
    for item in X:
        s = item if isinstance(item, Sentence) else parse(item, unit_mode)
        if scheme.kind == "BIESX" and s.morphs is None:
            raise SchemeMismatch(f"{name}: BIESX training needs morph-annotated sentences")
        out.append(s)
    if not out:
        raise EmptyCorpus(f"{name} is empty")
    return out


def raw_words(line: str, unit_mode: bool = False) -> tuple[list[str], list[tuple[int, int]]]:
    """Units and word spans of a space-separated line without morph marks."""
    if not line.strip():
        raise EmptyLine("blank line")
    units: list[str] = []
    spans = []
    for word in line.strip().split():
        start = len(units)
        units.extend(_split_units(word.replace(MORPH_JOINER, ""), unit_mode))
        spans.append((start, len(units)))
    return units, spans


def check_inputs(X: Iterable, scheme: TagScheme | str = "BIES",
                 unit_mode: bool = False) -> list[tuple[list[str], list | None]]:
    """Normalize prediction inputs to ``(units, word_spans)`` pairs.

    Accepted items: a :class:`Sentence` (its gold segmentation is ignored,
    except word spans under BIESX), a raw text line, or a sequence of units
    (BIES) / a sequence of words each given as a unit sequence (BIESX).
    """
    scheme = TagScheme.from_name(scheme)
    morph = scheme.kind == "BIESX"
    out = []
    for item in X:
        if isinstance(item, Sentence):
            out.append((list(item.units), list(item.words) if morph else None))
        elif isinstance(item, str):
            out.append(raw_words(item, unit_mode) if morph else (raw_units(item, unit_mode), None))
        elif morph:
            words = [list(w) for w in item]
            if not words or any(not w for w in words):
                raise EmptyLine("empty word in input")
            out.append(_flatten(words))
        else:
            units = [str(u) for u in item]
            if not units:
                raise EmptyLine("empty unit sequence")
            out.append((units, None))
    return out


def _flatten(words: Sequence[Sequence[str]]):
    units, spans = [], []
    for w in words:
        spans.append((len(units), len(units) + len(w)))
        units.extend(w)
    return units, spans
