"""Segment-level and affix-level precision / recall / F1.

Both scores are micro-averaged over the corpus.  A predicted segment counts
as correct when the gold side has the exact same span; at morph level the
enclosing word span must match too.

Affixes are found per word by picking a stem (by default the longest morph,
leftmost on ties); morphs left of the stem are prefixes, morphs right of it
suffixes.  The stem rule is a plain callable so other conventions can be
plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .corpus import Sentence
from .exceptions import AlignmentError, SchemeMismatch

StemRule = Callable[[Sequence[tuple[int, int]]], int]


@dataclass(frozen=True)
class PrfResult:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def __add__(self, other: PrfResult) -> PrfResult:
        return PrfResult(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def line(self) -> str:
        return f"P {self.precision:.4f} R {self.recall:.4f} F {self.f1:.4f}"


def _count(gold: set, pred: set) -> PrfResult:
    tp = len(gold & pred)
    return PrfResult(tp, len(pred) - tp, len(gold) - tp)


def _check_aligned(gold: Sequence[Sentence], pred: Sequence[Sentence]):
    if len(gold) != len(pred):
        raise AlignmentError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    for n, (g, p) in enumerate(zip(gold, pred)):
        if g.units != p.units:
            raise AlignmentError(f"sentence {n}: unit streams differ")


def _segments(s: Sentence, level: str) -> set:
    if level == "word":
        return set(s.words)
    if level != "morph":
        raise ValueError(f"unknown level {level!r}")
    if s.morphs is None:
        raise SchemeMismatch("morph-level scoring needs morph annotation")
    return {(w, (w[0] + a, w[0] + b)) for w, spans in zip(s.words, s.morphs) for a, b in spans}


def sentence_prf(gold: Sentence, pred: Sentence, level: str = "word") -> PrfResult:
    return _count(_segments(gold, level), _segments(pred, level))


def segment_prf(gold: Sequence[Sentence], pred: Sequence[Sentence], level: str = "word") -> PrfResult:
    _check_aligned(gold, pred)
    total = PrfResult(0, 0, 0)
    for g, p in zip(gold, pred):
        total = total + sentence_prf(g, p, level)
    return total


def longest_morph_stem(spans: Sequence[tuple[int, int]]) -> int:
    best = 0
    for i, (a, b) in enumerate(spans):
        if b - a > spans[best][1] - spans[best][0]:
            best = i
    return best


def affixes(s: Sentence, stem_rule: StemRule = longest_morph_stem) -> set:
    """``(word_span, affix_span_within_word)`` pairs for every prefix and suffix."""
    if s.morphs is None:
        raise SchemeMismatch("affix scoring needs morph annotation")
    out = set()
    for w, spans in zip(s.words, s.morphs):
        stem = stem_rule(spans)
        out.update((w, span) for i, span in enumerate(spans) if i != stem)
    return out


def affix_prf(gold: Sequence[Sentence], pred: Sequence[Sentence],
              stem_rule: StemRule = longest_morph_stem) -> PrfResult:
    _check_aligned(gold, pred)
    total = PrfResult(0, 0, 0)
    for g, p in zip(gold, pred):
        total = total + _count(affixes(g, stem_rule), affixes(p, stem_rule))
    return total


def diff_report(gold: Sequence[Sentence], pred: Sequence[Sentence], level: str = "word",
                render: Callable[[Sentence], str] | None = None) -> Iterable[str]:
    """Per-sentence TSV rows: index, tp, fp, fn, gold, pred."""
    from .corpus import format_sentence

    render = render or (lambda s: format_sentence(s, morphs=level == "morph"))
    _check_aligned(gold, pred)
    yield "index\ttp\tfp\tfn\tgold\tpred"
    for n, (g, p) in enumerate(zip(gold, pred)):
        r = sentence_prf(g, p, level)
        yield f"{n}\t{r.tp}\t{r.fp}\t{r.fn}\t{render(g)}\t{render(p)}"
