import struct
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from seqseg import training
from seqseg.exceptions import (
    CorruptFile,
    DuplicateSeeds,
    EmptyCorpus,
    InvalidEpoch,
    IoFailure,
    NonFiniteGradient,
    NonFiniteLoss,
    ShapeMismatch,
    VersionMismatch,
)
from seqseg.metrics import PrfResult
from seqseg.synthetic import make_corpus, make_morph_corpus
from seqseg.training import (
    OptimizerState,
    TrainConfig,
    adagrad_step,
    bucket_batches,
    clip_gradients,
    learning_rate,
)


def test_config_defaults():
    c = TrainConfig()
    assert (c.char_vec, c.ngram_vecs, c.state) == (50, 50, 200)
    assert (c.lr0, c.decay, c.clip, c.dropout) == (0.1, 0.05, 5.0, 0.5)
    assert (c.batch, c.length_limit, c.epochs, c.min_best_epoch) == (10, 300, 30, 5)
    assert c.scheme == "BIES"


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch=0)
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)
    assert TrainConfig(scheme="biesx").scheme == "BIESX"
    assert TrainConfig.from_dict(TrainConfig().to_dict()) == TrainConfig()


@pytest.mark.parametrize("t,expected", [(1, 0.1), (2, 0.1 / 1.05), (11, 0.1 / 1.5)])
def test_learning_rate_examples(t, expected):
    assert learning_rate(t) == pytest.approx(expected, rel=1e-15)


def test_learning_rate_exact_and_decreasing():
    rates = [learning_rate(t) for t in range(1, 31)]
    for t, lr in enumerate(rates, 1):
        exact = Fraction(0.1) / (Fraction(0.05) * (t - 1) + 1)
        # correctly rounded: within half an ulp of the exact rational value
        assert abs(Fraction(lr) - exact) <= Fraction(np.spacing(lr)) / 2
    assert all(a > b for a, b in zip(rates, rates[1:]))


def test_learning_rate_invalid_epoch():
    with pytest.raises(InvalidEpoch):
        learning_rate(0)


def test_clip_halves_at_norm_ten():
    grads = {"a": np.array([6.0, 0.0]), "b": np.array([[0.0, 8.0]])}
    clipped = clip_gradients(grads, 5.0)
    np.testing.assert_array_equal(clipped["a"], [3.0, 0.0])
    np.testing.assert_array_equal(clipped["b"], [[0.0, 4.0]])


def test_clip_below_threshold_and_zero():
    grads = {"a": np.array([3.0, 0.0])}
    assert clip_gradients(grads)["a"] is grads["a"]
    zeros = {"a": np.zeros(3)}
    np.testing.assert_array_equal(clip_gradients(zeros)["a"], np.zeros(3))


def test_clip_non_finite():
    with pytest.raises(NonFiniteGradient):
        clip_gradients({"a": np.array([np.nan])})


def test_adagrad_first_step():
    params = {"w": np.array([1.0])}
    state = OptimizerState()
    adagrad_step(params, {"w": np.array([1.0])}, state, 0.1)
    assert params["w"][0] == pytest.approx(1.0 - 0.1 / (1.0 + 1e-6), abs=1e-15)
    assert abs(params["w"][0] - 0.9) < 1e-6


def test_adagrad_zero_gradient_is_noop():
    params = {"w": np.array([1.0, 2.0])}
    state = OptimizerState()
    adagrad_step(params, {"w": np.zeros(2)}, state, 0.1)
    np.testing.assert_array_equal(params["w"], [1.0, 2.0])
    np.testing.assert_array_equal(state.accumulators["w"], [0.0, 0.0])


def test_adagrad_second_step_smaller():
    params = {"w": np.array([0.0])}
    state = OptimizerState()
    adagrad_step(params, {"w": np.array([0.5])}, state, 0.1)
    first = -params["w"][0]
    adagrad_step(params, {"w": np.array([0.5])}, state, 0.1)
    second = -params["w"][0] - first
    assert 0 < second < first


def test_adagrad_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        adagrad_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, OptimizerState(), 0.1)


def test_bucket_batches_cover_every_index_once():
    rng = np.random.default_rng(0)
    lengths = rng.integers(1, 60, 137).tolist()
    batches = bucket_batches(lengths, 10, 10, rng)
    flat = sorted(i for b in batches for i in b)
    assert flat == list(range(137))
    for b in batches:
        assert len(b) <= 10
        assert len({(lengths[i] - 1) // 10 for i in b}) == 1


def test_bucket_order_depends_on_rng():
    lengths = list(range(1, 100))
    a = bucket_batches(lengths, 5, 10, np.random.default_rng(1))
    b = bucket_batches(lengths, 5, 10, np.random.default_rng(2))
    assert a != b
    assert a == bucket_batches(lengths, 5, 10, np.random.default_rng(1))


# ------------------------------------------------------------ checkpoints


@pytest.fixture(scope="module")
def small_run():
    config = TrainConfig(char_vec=8, ngram_vecs=8, state=16, epochs=6, min_best_epoch=2, seed=3)
    train, dev = make_corpus(40, seed=1), make_corpus(15, seed=2)
    return config, train, dev, training.train(config, train, dev)


def test_checkpoint_roundtrip(tmp_path, small_run):
    *_, ckpt = small_run
    path = tmp_path / "m.ckpt"
    training.save(ckpt, path)
    loaded = training.load(path)
    assert loaded == ckpt
    assert training.to_bytes(loaded) == path.read_bytes()


def test_checkpoint_bad_magic(tmp_path, small_run):
    *_, ckpt = small_run
    data = bytearray(training.to_bytes(ckpt))
    data[0:4] = b"XXXX"
    path = tmp_path / "bad.ckpt"
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptFile):
        training.load(path)


def test_checkpoint_newer_version(small_run):
    *_, ckpt = small_run
    data = bytearray(training.to_bytes(ckpt))
    struct.pack_into("<I", data, len(training.MAGIC), training.FORMAT_VERSION + 1)
    with pytest.raises(VersionMismatch):
        training.from_bytes(bytes(data))


def test_checkpoint_corrupted_payload(small_run):
    *_, ckpt = small_run
    data = bytearray(training.to_bytes(ckpt))
    data[len(data) // 2] ^= 0xFF
    with pytest.raises(CorruptFile):
        training.from_bytes(bytes(data))
    with pytest.raises(CorruptFile):
        training.from_bytes(bytes(data[:10]))


def test_checkpoint_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        training.load(tmp_path / "nope.ckpt")


# -------------------------------------------------------------- training


def test_train_is_deterministic(small_run):
    config, train, dev, ckpt = small_run
    again = training.train(config, train, dev)
    assert training.to_bytes(again) == training.to_bytes(ckpt)


def test_train_selection_consistent_with_history(small_run):
    config, _, _, ckpt = small_run
    assert len(ckpt.history) == config.epochs
    eligible = [h for h in ckpt.history if h["epoch"] >= config.min_best_epoch]
    assert ckpt.best_dev_f1 == max(h["dev_f1"] for h in eligible)
    first_best = next(h["epoch"] for h in eligible if h["dev_f1"] == ckpt.best_dev_f1)
    assert ckpt.best_epoch == first_best
    assert all(np.isfinite(h["loss"]) for h in ckpt.history)
    lrs = [h["lr"] for h in ckpt.history]
    assert all(a > b for a, b in zip(lrs, lrs[1:]))


def test_best_epoch_respects_minimum(monkeypatch):
    # epoch 2 gets the top score but may not be selected
    scripted = iter([0.5, 0.99, 0.6, 0.7, 0.8, 0.75, 0.8])
    monkeypatch.setattr(training, "segment_prf", lambda *a, **k: PrfResult(0, 0, 0))
    monkeypatch.setattr(PrfResult, "f1", property(lambda self: next(scripted)))
    config = TrainConfig(char_vec=4, ngram_vecs=4, state=4, epochs=7, seed=0)
    ckpt = training.train(config, make_corpus(10, seed=1), make_corpus(3, seed=2))
    assert ckpt.best_epoch == 5
    assert ckpt.best_dev_f1 == 0.8


def test_accumulators_never_decrease(monkeypatch):
    snapshots = []
    real = training.adagrad_step

    def spy(params, grads, state, lr):
        out = real(params, grads, state, lr)
        snapshots.append({k: v.copy() for k, v in state.accumulators.items()})
        return out

    monkeypatch.setattr(training, "adagrad_step", spy)
    config = TrainConfig(char_vec=4, ngram_vecs=4, state=4, epochs=2, min_best_epoch=1)
    training.train(config, make_corpus(30, seed=1), make_corpus(5, seed=2))
    for before, after in zip(snapshots, snapshots[1:]):
        for k in before:
            assert np.all(after[k] >= before[k])


def test_every_sentence_once_per_epoch(monkeypatch):
    seen = []
    real = training.bucket_batches

    def spy(lengths, *args):
        batches = real(lengths, *args)
        seen.append(sorted(i for b in batches for i in b))
        return batches

    monkeypatch.setattr(training, "bucket_batches", spy)
    config = TrainConfig(char_vec=4, ngram_vecs=4, state=4, epochs=2, min_best_epoch=1)
    train = make_corpus(23, seed=1)
    training.train(config, train, make_corpus(5, seed=2))
    assert seen == [list(range(23))] * 2


def test_chopping_during_training():
    config = TrainConfig(char_vec=4, ngram_vecs=4, state=4, epochs=2, min_best_epoch=1, length_limit=7)
    train = make_corpus(20, seed=1, min_len=10, max_len=30)
    ckpt = training.train(config, train, make_corpus(5, seed=2, min_len=10, max_len=30))
    assert 0.0 <= ckpt.best_dev_f1 <= 1.0


def test_non_finite_loss_returns_last_good(monkeypatch):
    calls = {"n": 0}
    real = training.recurrent.compute_gradients

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] > 6:
            raise NonFiniteLoss("boom")
        return real(*args, **kwargs)

    monkeypatch.setattr(training.recurrent, "compute_gradients", flaky)
    config = TrainConfig(char_vec=4, ngram_vecs=4, state=4, epochs=5, min_best_epoch=1, batch=10)
    with pytest.raises(NonFiniteLoss) as info:
        training.train(config, make_corpus(30, seed=1), make_corpus(5, seed=2))
    assert info.value.checkpoint is not None
    assert info.value.checkpoint.best_epoch >= 1


def test_empty_corpora():
    with pytest.raises(EmptyCorpus):
        training.train(TrainConfig(), [], make_corpus(2))
    with pytest.raises(EmptyCorpus):
        training.train(TrainConfig(), make_corpus(2), [])


def test_morph_training_runs():
    config = TrainConfig(char_vec=8, ngram_vecs=8, state=16, epochs=4, min_best_epoch=2, scheme="biesx")
    train, dev = make_morph_corpus(40, seed=1), make_morph_corpus(10, seed=2)
    ckpt = training.train(config, train, dev)
    assert ckpt.params["transitions"].shape == (5, 5)
    assert ckpt.best_epoch >= 2


def test_train_ensemble_distinct_and_duplicate_seeds():
    config = TrainConfig(char_vec=4, ngram_vecs=4, state=4, epochs=2, min_best_epoch=1)
    train, dev = make_corpus(15, seed=1), make_corpus(4, seed=2)
    with pytest.raises(DuplicateSeeds):
        training.train_ensemble(config, train, dev, seeds=(1, 1, 2, 3))
    ckpts = training.train_ensemble(config, train, dev, seeds=(1, 2, 3, 4))
    assert [c.config.seed for c in ckpts] == [1, 2, 3, 4]
    blobs = {c.params["fw_W"].tobytes() for c in ckpts}
    assert len(blobs) == 4
    assert all(replace(c.config, seed=0) == config for c in ckpts)


def test_log_line():
    line = training.log_line({"epoch": 3, "lr": 0.1, "loss": 1.5, "dev_f1": 0.25})
    assert line.split()[::2] == ["epoch", "lr", "loss", "devF1"]
