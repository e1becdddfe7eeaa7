import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from seqseg.corpus import format_sentence, parse_morpheme_line
from seqseg.estimator import BiRnnCrfSegmenter, EnsembleSegmenter
from seqseg.exceptions import SchemeMismatch
from seqseg.synthetic import make_corpus, make_morph_corpus

SMALL = dict(char_vec=8, ngram_vecs=8, state=16, epochs=8, min_best_epoch=2)


@pytest.fixture(scope="module")
def word_data():
    return make_corpus(60, seed=11), make_corpus(15, seed=12)


@pytest.fixture(scope="module")
def fitted(word_data):
    train, dev = word_data
    return BiRnnCrfSegmenter(seed=1, **SMALL).fit(train, X_dev=dev)


def test_get_params_defaults():
    params = BiRnnCrfSegmenter().get_params()
    assert params["state"] == 200 and params["lr0"] == 0.1 and params["scheme"] == "bies"
    est = clone(BiRnnCrfSegmenter(state=7))
    assert est.get_params()["state"] == 7


def test_set_params_roundtrip():
    est = BiRnnCrfSegmenter().set_params(epochs=3, seed=9)
    assert est._config().epochs == 3 and est._config().seed == 9


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        BiRnnCrfSegmenter().predict(["abc"])


def test_fit_predict_accepts_several_input_kinds(fitted, word_data):
    _, dev = word_data
    from_sentences = fitted.predict(dev)
    from_text = fitted.predict(["".join(s.units) for s in dev])
    from_units = fitted.predict([list(s.units) for s in dev])
    assert from_sentences == from_text == from_units
    assert all(p.units == g.units for p, g in zip(from_sentences, dev))


def test_score_matches_recorded_dev_f1(fitted, word_data):
    _, dev = word_data
    assert fitted.score(dev) == fitted.best_dev_f1_
    assert fitted.best_epoch_ >= 2


def test_fit_accepts_corpus_lines(word_data):
    train, dev = word_data
    lines = [format_sentence(s) for s in train[:20]]
    est = BiRnnCrfSegmenter(seed=2, **{**SMALL, "epochs": 2}).fit(lines)
    assert len(est.history_) == 2


def test_save_load(tmp_path, fitted, word_data):
    path = tmp_path / "m.ckpt"
    fitted.save(path)
    loaded = BiRnnCrfSegmenter.load(path)
    assert loaded.get_params() == fitted.get_params()
    assert loaded.predict(word_data[1]) == fitted.predict(word_data[1])


def test_morph_estimator_keeps_word_boundaries():
    train, dev = make_morph_corpus(40, seed=1), make_morph_corpus(10, seed=2)
    est = BiRnnCrfSegmenter(scheme="biesx", seed=0, **SMALL).fit(train, X_dev=dev)
    pred = est.predict(dev)
    assert [p.words for p in pred] == [g.words for g in dev]
    raw = [" ".join("".join(w) for w in g.word_units()) for g in dev]
    assert est.predict(raw) == pred
    assert 0.0 <= est.score(dev) <= 1.0


def test_morph_estimator_rejects_plain_sentences():
    with pytest.raises(SchemeMismatch):
        BiRnnCrfSegmenter(scheme="biesx", **SMALL).fit(make_corpus(5))


def test_ensemble_fit_predict(word_data):
    train, dev = word_data
    base = BiRnnCrfSegmenter(**{**SMALL, "epochs": 3})
    ens = EnsembleSegmenter(base, seeds=(1, 2)).fit(train[:30], X_dev=dev)
    assert [e.seed for e in ens.estimators_] == [1, 2]
    pred = ens.predict(dev)
    assert [p.units for p in pred] == [g.units for g in dev]
    assert 0.0 <= ens.score(dev) <= 1.0


def test_ensemble_of_identical_members_equals_single(fitted, word_data):
    _, dev = word_data
    ens = EnsembleSegmenter.from_checkpoints([fitted.checkpoint_] * 4)
    assert ens.predict(dev) == fitted.predict(dev)


def test_ensemble_rejects_mixed_schemes(fitted):
    morph = BiRnnCrfSegmenter(scheme="biesx", **{**SMALL, "epochs": 2}).fit(
        [parse_morpheme_line("ab//c d"), parse_morpheme_line("e//f gh")]
    )
    with pytest.raises(SchemeMismatch):
        EnsembleSegmenter.from_checkpoints([fitted.checkpoint_, morph.checkpoint_])
