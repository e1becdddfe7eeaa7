"""scikit-learn style estimators wrapping training and decoding."""

from __future__ import annotations

from dataclasses import fields
from typing import Sequence

from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from . import training
from .decoding import segment
from .exceptions import SchemeMismatch
from .metrics import PrfResult, segment_prf
from .training import Checkpoint, TrainConfig
from .validation import check_corpus, check_inputs


class BiRnnCrfSegmenter(BaseEstimator):
    """Character-level BiGRU-CRF segmenter.

    ``fit`` takes gold sentences (or corpus lines) and an optional dev set used
    for epoch selection; without one the training set doubles as dev data.
    ``predict`` returns segmented :class:`~seqseg.corpus.Sentence` objects.

    Parameters mirror :class:`~seqseg.training.TrainConfig`; ``scheme`` is
    ``"bies"`` for word segmentation or ``"biesx"`` for morphs.
    """

    def __init__(self, scheme="bies", unit_mode=False, char_vec=50, ngram_vecs=50, state=200,
                 lr0=0.1, decay=0.05, clip=5.0, dropout=0.5, batch=10, length_limit=300,
                 epochs=30, min_best_epoch=5, bucket_width=10, seed=0):
        self.scheme = scheme
        self.unit_mode = unit_mode
        self.char_vec = char_vec
        self.ngram_vecs = ngram_vecs
        self.state = state
        self.lr0 = lr0
        self.decay = decay
        self.clip = clip
        self.dropout = dropout
        self.batch = batch
        self.length_limit = length_limit
        self.epochs = epochs
        self.min_best_epoch = min_best_epoch
        self.bucket_width = bucket_width
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(**{f.name: getattr(self, f.name) for f in fields(TrainConfig)})

    def fit(self, X, y=None, X_dev=None):
        config = self._config()
        train = check_corpus(X, config.scheme, config.unit_mode)
        dev = train if X_dev is None else check_corpus(X_dev, config.scheme, config.unit_mode, "X_dev")
        self._set_checkpoint(training.train(config, train, dev))
        return self

    def _set_checkpoint(self, c: Checkpoint):
        self.checkpoint_ = c
        self.vocabulary_ = c.vocab
        self.best_epoch_ = c.best_epoch
        self.best_dev_f1_ = c.best_dev_f1
        self.history_ = c.history

    def predict(self, X) -> list:
        check_is_fitted(self, "checkpoint_")
        c = self.checkpoint_
        inputs = check_inputs(X, c.config.scheme, c.config.unit_mode)
        return segment([c.model], inputs, c.config.tag_scheme, c.config.length_limit)

    def evaluate(self, X) -> PrfResult:
        gold = check_corpus(X, self.checkpoint_.config.scheme, self.checkpoint_.config.unit_mode)
        return segment_prf(gold, self.predict(gold), self.checkpoint_.config.level)

    def score(self, X, y=None) -> float:
        """Segment F1 of the predictions against the gold segmentation of ``X``."""
        return self.evaluate(X).f1

    def save(self, path):
        check_is_fitted(self, "checkpoint_")
        training.save(self.checkpoint_, path)

    @classmethod
    def from_checkpoint(cls, c: Checkpoint) -> BiRnnCrfSegmenter:
        params = {f.name: getattr(c.config, f.name) for f in fields(TrainConfig)}
        params["scheme"] = params["scheme"].lower()
        est = cls(**params)
        est._set_checkpoint(c)
        return est

    @classmethod
    def load(cls, path) -> BiRnnCrfSegmenter:
        return cls.from_checkpoint(training.load(path))


def check_compatible(checkpoints: Sequence[Checkpoint]) -> None:
    """Ensemble members must agree on tag scheme, unit mode and model shapes."""
    if not checkpoints:
        raise ValueError("no checkpoints given")
    first = checkpoints[0]
    for c in checkpoints[1:]:
        if c.config.scheme != first.config.scheme:
            raise SchemeMismatch(
                f"ensemble mixes tag schemes {first.config.scheme} and {c.config.scheme}"
            )
        if c.config.unit_mode != first.config.unit_mode:
            raise SchemeMismatch("ensemble mixes unit_mode settings")
        if c.params["transitions"].shape != first.params["transitions"].shape:
            raise SchemeMismatch("ensemble members have different tag counts")


class EnsembleSegmenter(BaseEstimator):
    """Averages emission and transition scores of independently seeded models.

    ``estimator`` is the template (a :class:`BiRnnCrfSegmenter`); one clone
    is trained per seed.
    """

    def __init__(self, estimator=None, seeds=(1, 2, 3, 4), n_jobs=1):
        self.estimator = estimator
        self.seeds = seeds
        self.n_jobs = n_jobs

    def fit(self, X, y=None, X_dev=None):
        template = clone(self.estimator) if self.estimator is not None else BiRnnCrfSegmenter()
        config = template._config()
        train = check_corpus(X, config.scheme, config.unit_mode)
        dev = train if X_dev is None else check_corpus(X_dev, config.scheme, config.unit_mode, "X_dev")
        ckpts = training.train_ensemble(config, train, dev, self.seeds, self.n_jobs)
        self.estimators_ = [BiRnnCrfSegmenter.from_checkpoint(c) for c in ckpts]
        return self

    @classmethod
    def from_checkpoints(cls, checkpoints: Sequence[Checkpoint]) -> EnsembleSegmenter:
        check_compatible(checkpoints)
        ens = cls(seeds=tuple(c.config.seed for c in checkpoints))
        ens.estimators_ = [BiRnnCrfSegmenter.from_checkpoint(c) for c in checkpoints]
        return ens

    @property
    def config(self) -> TrainConfig:
        check_is_fitted(self, "estimators_")
        return self.estimators_[0].checkpoint_.config

    def predict(self, X) -> list:
        check_is_fitted(self, "estimators_")
        ckpts = [e.checkpoint_ for e in self.estimators_]
        check_compatible(ckpts)
        config = ckpts[0].config
        inputs = check_inputs(X, config.scheme, config.unit_mode)
        return segment([c.model for c in ckpts], inputs, config.tag_scheme, config.length_limit)

    def evaluate(self, X) -> PrfResult:
        config = self.config
        gold = check_corpus(X, config.scheme, config.unit_mode)
        return segment_prf(gold, self.predict(gold), config.level)

    def score(self, X, y=None) -> float:
        return self.evaluate(X).f1
