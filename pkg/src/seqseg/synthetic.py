"""Rule-generated corpora for smoke tests and sanity runs.

Symbols come from a fixed alphabet split into a "vowel" class and the rest;
a segment ends right after every vowel-class symbol (and at the end of the
sentence), so the gold segmentation is a deterministic function of the
symbol stream.
"""

from __future__ import annotations

import numpy as np

from .corpus import Sentence

VOWELS = "aeiou"
CONSONANTS = "bcdfghjklmnpqrstvwxz"


def _alphabet(size: int) -> tuple[str, str]:
    n_vowels = max(1, size // 4)
    if size - n_vowels > len(CONSONANTS) or n_vowels > len(VOWELS):
        raise ValueError(f"alphabet size {size} not supported")
    return VOWELS[:n_vowels], CONSONANTS[:size - n_vowels]


def _segments(units: list[str], vowels: str) -> list[list[str]]:
    out, cur = [], []
    for u in units:
        cur.append(u)
        if u in vowels:
            out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return out


def make_corpus(n: int, seed: int = 0, alphabet_size: int = 20,
                min_len: int = 5, max_len: int = 25) -> list[Sentence]:
    """Word-segmented sentences: a word boundary follows every vowel."""
    vowels, consonants = _alphabet(alphabet_size)
    symbols = list(vowels + consonants)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        units = [symbols[i] for i in rng.integers(0, len(symbols), length)]
        out.append(Sentence.from_words(_segments(units, vowels)))
    return out


def make_morph_corpus(n: int, seed: int = 0, alphabet_size: int = 20,
                      words: tuple[int, int] = (2, 5), word_len: tuple[int, int] = (2, 9)) -> list[Sentence]:
    """Morph-segmented sentences: a morph boundary follows every vowel inside a word."""
    vowels, consonants = _alphabet(alphabet_size)
    symbols = list(vowels + consonants)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        sent = []
        for _ in range(int(rng.integers(words[0], words[1] + 1))):
            length = int(rng.integers(word_len[0], word_len[1] + 1))
            units = [symbols[i] for i in rng.integers(0, len(symbols), length)]
            sent.append(_segments(units, vowels))
        out.append(Sentence.from_morphs(sent))
    return out
