import pytest

from seqseg.corpus import parse_morpheme_line, parse_word_line
from seqseg.training import TrainConfig

FIG2_LINE = "elämä tu//o kremppo//j//a mukana//an ."
FIG2_TAGS = "BIIIEXBESXBIIIIIESSXBIIIIEBEXS"

_ACCEPTANCE = []


@pytest.fixture
def fig2():
    return parse_morpheme_line(FIG2_LINE)


@pytest.fixture
def fig1():
    return parse_word_line("夏天 太 热")


@pytest.fixture
def tiny_config():
    """Small enough to train in a second or two."""
    return TrainConfig(char_vec=8, ngram_vecs=8, state=16, epochs=6, min_best_epoch=2, seed=3)


@pytest.fixture
def acceptance():
    def report(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
