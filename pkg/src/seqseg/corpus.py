"""Segmented corpora, position tags, and sentence chopping.

File formats (UTF-8, one sentence per line):

* word files: words separated by single spaces; with ``unit_mode`` the
  base units inside a word are joined by ``_`` (e.g. ``học_sinh giỏi``),
  otherwise every character is a unit.
* morph files: words separated by single spaces, morphs inside a word
  joined by ``//`` (e.g. ``tu//o kremppo//j//a``).

Word segmentation is tagged with BIES over the unit stream.  Morph
segmentation is tagged at the sentence level with BIESX: the stream fed to
the tagger contains one separator slot between consecutive words and that
slot carries X.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .exceptions import (
    EmptyInput,
    EmptyLine,
    LengthMismatch,
    MalformedMorpheme,
    MalformedWord,
    SchemeMismatch,
    SegmentationError,
)

UNIT_JOINER = "_"
MORPH_JOINER = "//"
# Stream symbol standing for a word boundary in BIESX mode.
SEPARATOR = " "

Span = tuple[int, int]


@dataclass(frozen=True)
class Sentence:
    """Base units plus gold segmentation.

    ``words`` are half-open spans over ``units``.  ``morphs`` is either None or
    holds, for every word, half-open spans relative to the start of that word.
    """

    units: tuple[str, ...]
    words: tuple[Span, ...]
    morphs: tuple[tuple[Span, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "words", tuple(tuple(w) for w in self.words))
        if self.morphs is not None:
            object.__setattr__(
                self, "morphs", tuple(tuple(tuple(m) for m in ms) for ms in self.morphs)
            )
        if any(not u for u in self.units):
            raise MalformedWord("empty unit in sentence")
        _check_partition(self.words, len(self.units), MalformedWord, "word")
        if self.morphs is not None:
            if len(self.morphs) != len(self.words):
                raise MalformedMorpheme("morph annotation must have one entry per word")
            for (start, end), spans in zip(self.words, self.morphs):
                _check_partition(spans, end - start, MalformedMorpheme, "morph")

    @classmethod
    def from_words(cls, words: Iterable[Sequence[str]]) -> Sentence:
        units: list[str] = []
        spans = []
        for word in words:
            start = len(units)
            units.extend(word)
            spans.append((start, len(units)))
        return cls(tuple(units), tuple(spans))

    @classmethod
    def from_morphs(cls, words: Iterable[Iterable[Sequence[str]]]) -> Sentence:
        units: list[str] = []
        spans = []
        morphs = []
        for word in words:
            start = len(units)
            local = []
            for morph in word:
                m_start = len(units) - start
                units.extend(morph)
                local.append((m_start, len(units) - start))
            spans.append((start, len(units)))
            morphs.append(tuple(local))
        return cls(tuple(units), tuple(spans), tuple(morphs))

    def word_units(self) -> list[tuple[str, ...]]:
        return [self.units[s:e] for s, e in self.words]

    def morph_units(self) -> list[list[tuple[str, ...]]]:
        if self.morphs is None:
            raise SchemeMismatch("sentence carries no morph annotation")
        out = []
        for (start, _), spans in zip(self.words, self.morphs):
            out.append([self.units[start + a:start + b] for a, b in spans])
        return out


def _check_partition(spans, length, error, what):
    pos = 0
    for start, end in spans:
        if start != pos or end <= start:
            raise error(f"{what} spans must be contiguous, non-empty and in order")
        pos = end
    if pos != length:
        raise error(f"{what} spans do not cover all {length} units")


@dataclass(frozen=True)
class TagScheme:
    kind: str

    def __post_init__(self):
        if self.kind not in ("BIES", "BIESX"):
            raise ValueError(f"unknown tag scheme {self.kind!r}")

    @property
    def tags(self) -> tuple[str, ...]:
        return ("B", "I", "E", "S", "X") if self.kind == "BIESX" else ("B", "I", "E", "S")

    def __len__(self):
        return len(self.tags)

    def index(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError:
            raise ValueError(f"tag {tag!r} not in scheme {self.kind}") from None

    @classmethod
    def from_name(cls, name: str | TagScheme) -> TagScheme:
        if isinstance(name, TagScheme):
            return name
        return cls(str(name).upper())


BIES = TagScheme("BIES")
BIESX = TagScheme("BIESX")
B, I, E, S, X = range(5)


@dataclass(frozen=True)
class TagSequence:
    tags: tuple[int, ...]
    scheme: TagScheme

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(int(t) for t in self.tags))
        k = len(self.scheme)
        if any(t < 0 or t >= k for t in self.tags):
            raise ValueError(f"tag index out of range for scheme {self.scheme.kind}")

    def __len__(self):
        return len(self.tags)

    def __str__(self):
        symbols = self.scheme.tags
        return "".join(symbols[t] for t in self.tags)

    @classmethod
    def from_string(cls, text: str, scheme: TagScheme = BIES) -> TagSequence:
        return cls(tuple(scheme.index(c) for c in text), scheme)


# ---------------------------------------------------------------- parsing


def _strip_eol(line: str) -> str:
    return line.rstrip("\r\n")


def _split_units(word: str, unit_mode: bool) -> list[str]:
    if not word:
        raise MalformedWord("empty word (check for doubled or edge spaces)")
    if not unit_mode:
        return list(word)
    units = word.split(UNIT_JOINER)
    if any(not u for u in units):
        raise MalformedWord(f"empty unit in {word!r}")
    return units


def parse_word_line(line: str, unit_mode: bool = False) -> Sentence:
    line = _strip_eol(line)
    if not line.strip():
        raise EmptyLine("blank line")
    return Sentence.from_words(_split_units(w, unit_mode) for w in line.split(" "))


def parse_morpheme_line(line: str, unit_mode: bool = False) -> Sentence:
    line = _strip_eol(line)
    if not line.strip():
        raise EmptyLine("blank line")
    words = []
    for word in line.split(" "):
        if not word:
            raise MalformedWord("empty word (check for doubled or edge spaces)")
        morphs = word.split(MORPH_JOINER)
        if any(not m for m in morphs):
            raise MalformedMorpheme(f"empty morph in {word!r}")
        words.append([_split_units(m, unit_mode) for m in morphs])
    return Sentence.from_morphs(words)


def format_sentence(s: Sentence, unit_mode: bool = False, morphs: bool | None = None) -> str:
    """Inverse of the parsers: render ``s`` as a corpus line."""
    if morphs is None:
        morphs = s.morphs is not None
    join = UNIT_JOINER.join if unit_mode else "".join
    if morphs:
        return " ".join(MORPH_JOINER.join(join(m) for m in word) for word in s.morph_units())
    return " ".join(join(w) for w in s.word_units())


def raw_units(line: str, unit_mode: bool = False) -> list[str]:
    """Units of an unsegmented line: characters, or space-separated units."""
    line = _strip_eol(line)
    if not line.strip():
        raise EmptyLine("blank line")
    if unit_mode:
        return line.split()
    return [c for c in line if not c.isspace()]


def iter_lines(path) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, text)`` for non-blank lines of a UTF-8 file."""
    with io.open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                yield n, _strip_eol(line)


def read_corpus(path, fmt: str = "word", unit_mode: bool = False) -> list[Sentence]:
    """Parse a corpus file; errors are re-raised with ``file:line`` context."""
    parse = parse_morpheme_line if fmt == "morph" else parse_word_line
    out = []
    for n, line in iter_lines(path):
        try:
            out.append(parse(line, unit_mode))
        except SegmentationError as exc:
            raise type(exc)(f"{path}:{n}: {exc}") from exc
    return out


def write_corpus(path, sentences: Iterable[Sentence], unit_mode: bool = False,
                 morphs: bool | None = None) -> None:
    text = "".join(format_sentence(s, unit_mode, morphs) + "\n" for s in sentences)
    Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------- tagging


def _segment_tags(n: int) -> list[int]:
    if n == 1:
        return [S]
    return [B] + [I] * (n - 2) + [E]


def encode_tags(s: Sentence, scheme: TagScheme = BIES) -> TagSequence:
    if scheme.kind == "BIES":
        tags = [t for start, end in s.words for t in _segment_tags(end - start)]
        return TagSequence(tuple(tags), scheme)
    if s.morphs is None:
        raise SchemeMismatch("BIESX tagging needs morph annotation")
    tags = []
    for i, spans in enumerate(s.morphs):
        if i:
            tags.append(X)
        for a, b in spans:
            tags.extend(_segment_tags(b - a))
    return TagSequence(tuple(tags), scheme)


def tagging_stream(units: Sequence[str], words: Sequence[Span] | None = None) -> list[str]:
    """Symbol stream seen by the tagger.

    With ``words`` given (BIESX), a :data:`SEPARATOR` slot is inserted between
    consecutive words; otherwise the units are returned unchanged.
    """
    if words is None:
        return list(units)
    out: list[str] = []
    for i, (start, end) in enumerate(words):
        if i:
            out.append(SEPARATOR)
        out.extend(units[start:end])
    return out


def sentence_stream(s: Sentence, scheme: TagScheme) -> list[str]:
    return tagging_stream(s.units, s.words if scheme.kind == "BIESX" else None)


def decode_tags(units: Sequence[str], t: TagSequence) -> Sentence:
    """Rebuild a segmentation from tags, repairing invalid sequences.

    B or S always opens a segment; I or E with no open segment opens one;
    E and S close the segment they end; X closes the current word.  The
    rule is total: any tag string of consistent length decodes.

    For BIES the segments are words.  For BIESX the tags run over the
    separator-augmented stream, ``units`` excludes the separators, and the
    segments are morphs grouped into X-delimited words.
    """
    tags = t.tags
    n_x = sum(1 for tag in tags if tag == X)
    if len(tags) - n_x != len(units):
        raise LengthMismatch(
            f"{len(tags)} tags ({n_x} X) do not fit {len(units)} units"
        )
    segments: list[list[Span]] = [[]]  # per word, absolute spans
    pos = 0
    open_start = None

    def close(end):
        nonlocal open_start
        if open_start is not None:
            segments[-1].append((open_start, end))
            open_start = None

    for tag in tags:
        if tag == X:
            close(pos)
            if segments[-1]:
                segments.append([])
            continue
        if tag in (B, S) or open_start is None:
            close(pos)
            open_start = pos
        pos += 1
        if tag in (E, S):
            close(pos)
    close(pos)
    if not segments[-1]:
        segments.pop()

    if t.scheme.kind == "BIES":
        return Sentence(tuple(units), tuple(span for word in segments for span in word))
    words = tuple((word[0][0], word[-1][1]) for word in segments)
    morphs = tuple(tuple((a - w[0], b - w[0]) for a, b in word) for w, word in zip(words, segments))
    return Sentence(tuple(units), words, morphs)


# ---------------------------------------------------------------- chopping


def chop(units: Sequence, limit: int = 300) -> list:
    """Split into consecutive fragments of ``limit`` items (last may be shorter)."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    if len(units) == 0:
        raise EmptyInput("nothing to chop")
    return [units[i:i + limit] for i in range(0, len(units), limit)]


def stitch(fragment_tags: Sequence[TagSequence]) -> TagSequence:
    if not fragment_tags:
        raise EmptyInput("no fragments to stitch")
    scheme = fragment_tags[0].scheme
    if any(f.scheme != scheme for f in fragment_tags):
        raise SchemeMismatch("fragments use different tag schemes")
    return TagSequence(tuple(t for f in fragment_tags for t in f.tags), scheme)
