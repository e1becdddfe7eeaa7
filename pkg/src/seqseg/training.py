"""Training loop, optimizer, model selection and checkpoint files.

Mini-batch Adagrad with an epoch-wise decaying learning rate
``lr0 / (decay * (t - 1) + 1)``, global-norm gradient clipping and inverted
dropout.  Sentences are chopped to ``length_limit`` units, grouped into
length buckets of ``bucket_width`` and batched within a bucket.  After
every epoch the dev set is decoded; the returned checkpoint is the epoch
with the best dev F1 among epochs ``>= min_best_epoch`` (earliest wins ties).
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import recurrent
from .corpus import Sentence, TagScheme, chop, encode_tags, sentence_stream
from .decoding import segment
from .exceptions import (
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
from .features import Vocabulary, build_vocabulary, stream_ids
from .metrics import segment_prf

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = b"SQSGCKPT"


@dataclass(frozen=True)
class TrainConfig:
    char_vec: int = 50
    ngram_vecs: int = 50
    state: int = 200
    lr0: float = 0.1
    decay: float = 0.05
    clip: float = 5.0
    dropout: float = 0.5
    batch: int = 10
    length_limit: int = 300
    epochs: int = 30
    min_best_epoch: int = 5
    seed: int = 0
    scheme: str = "BIES"
    unit_mode: bool = False
    bucket_width: int = 10

    def __post_init__(self):
        object.__setattr__(self, "scheme", TagScheme.from_name(self.scheme).kind)
        for name in ("char_vec", "ngram_vecs", "state", "batch", "length_limit",
                     "epochs", "min_best_epoch", "bucket_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr0 <= 0 or self.decay < 0 or self.clip <= 0:
            raise ValueError("lr0 and clip must be positive, decay non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def tag_scheme(self) -> TagScheme:
        return TagScheme(self.scheme)

    @property
    def level(self) -> str:
        return "morph" if self.scheme == "BIESX" else "word"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# ------------------------------------------------------------- optimizer


def learning_rate(t: int, lr0: float = 0.1, decay: float = 0.05) -> float:
    """``lr0 / (decay * (t - 1) + 1)``, correctly rounded to float64."""
    if t < 1:
        raise InvalidEpoch(f"epochs are numbered from 1, got {t}")
    # exact rational evaluation avoids the double rounding of the float expression
    return float(Fraction(lr0) / (Fraction(decay) * (t - 1) + 1))


def global_norm(grads: dict) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict, threshold: float = 5.0) -> dict:
    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise NonFiniteGradient("gradient contains NaN or Inf")
    if norm <= threshold:
        return grads
    scale = threshold / norm
    return {k: g * scale for k, g in grads.items()}


@dataclass
class OptimizerState:
    accumulators: dict = field(default_factory=dict)
    epsilon: float = 1e-6


def adagrad_step(params: dict, grads: dict, state: OptimizerState, lr: float):
    """In-place Adagrad update; returns ``(params, state)`` for convenience."""
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        acc = state.accumulators.get(name)
        if acc is None:
            acc = state.accumulators[name] = np.zeros_like(p)
        acc += g * g
        p -= lr * g / (np.sqrt(acc) + state.epsilon)
    return params, state


def bucket_batches(lengths: Sequence[int], batch_size: int, width: int,
                   rng: np.random.Generator) -> list[list[int]]:
    """Index batches drawn within length buckets; every index appears once."""
    buckets: dict[int, list[int]] = {}
    for i, n in enumerate(lengths):
        buckets.setdefault((n - 1) // width, []).append(i)
    keys = sorted(buckets)
    rng.shuffle(keys)
    batches = []
    for key in keys:
        members = np.array(buckets[key])
        rng.shuffle(members)
        batches.extend(members[i:i + batch_size].tolist() for i in range(0, len(members), batch_size))
    return batches


# ------------------------------------------------------------ checkpoint


@dataclass
class Checkpoint:
    config: TrainConfig
    vocab: Vocabulary
    params: dict
    best_epoch: int
    best_dev_f1: float
    history: list = field(default_factory=list)
    version: int = FORMAT_VERSION

    def __eq__(self, other):
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self.version == other.version
            and self.config == other.config
            and self.vocab == other.vocab
            and self.best_epoch == other.best_epoch
            and self.best_dev_f1 == other.best_dev_f1
            and self.history == other.history
            and list(self.params) == list(other.params)
            and all(
                self.params[k].shape == other.params[k].shape
                and self.params[k].tobytes() == other.params[k].tobytes()
                for k in self.params
            )
        )

    @property
    def model(self) -> tuple[dict, Vocabulary]:
        return self.params, self.vocab

    def metadata(self) -> dict:
        return {
            "version": self.version,
            "config": self.config.to_dict(),
            "best_epoch": self.best_epoch,
            "best_dev_f1": self.best_dev_f1,
            "vocab_sizes": list(self.vocab.sizes),
            "params": {k: list(v.shape) for k, v in self.params.items()},
            "history": self.history,
        }


def _section(name: str, kind: int, payload: bytes) -> bytes:
    raw = name.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw + struct.pack("<BQ", kind, len(payload)) + payload


def _array_payload(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(a, dtype="<f8")
    return struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape) + a.tobytes()


def to_bytes(c: Checkpoint) -> bytes:
    """Magic, version, section count, length-prefixed sections, CRC32 trailer."""
    meta = {"best_epoch": c.best_epoch, "best_dev_f1": c.best_dev_f1, "history": c.history}
    sections = [
        _section("config", 0, json.dumps(c.config.to_dict(), sort_keys=True).encode("utf-8")),
        _section("vocab", 0, json.dumps(c.vocab.to_dict()).encode("utf-8")),
        _section("meta", 0, json.dumps(meta).encode("utf-8")),
    ]
    sections += [_section(f"param/{k}", 1, _array_payload(v)) for k, v in c.params.items()]
    body = MAGIC + struct.pack("<II", c.version, len(sections)) + b"".join(sections)
    return body + struct.pack("<I", zlib.crc32(body))


def from_bytes(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC) + 12 or data[:len(MAGIC)] != MAGIC:
        raise CorruptFile("not a checkpoint file (bad magic bytes)")
    version, count = struct.unpack_from("<II", data, len(MAGIC))
    if version > FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format {version} is newer than supported {FORMAT_VERSION}")
    if version < 1:
        raise VersionMismatch(f"unknown checkpoint format {version}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptFile("checksum mismatch")
    pos = len(MAGIC) + 8
    json_parts, arrays = {}, {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos:pos + n].decode("utf-8")
            pos += n
            kind, size = struct.unpack_from("<BQ", body, pos)
            pos += 9
            payload = body[pos:pos + size]
            if len(payload) != size:
                raise CorruptFile(f"section {name!r} is truncated")
            pos += size
            if kind == 0:
                json_parts[name] = json.loads(payload.decode("utf-8"))
            elif kind == 1:
                (ndim,) = struct.unpack_from("<B", payload, 0)
                shape = struct.unpack_from(f"<{ndim}Q", payload, 1)
                arr = np.frombuffer(payload, dtype="<f8", offset=1 + 8 * ndim)
                arrays[name.split("/", 1)[1]] = arr.reshape(shape).astype(np.float64)
            else:
                raise CorruptFile(f"unknown section kind {kind}")
        meta = json_parts["meta"]
        return Checkpoint(
            config=TrainConfig.from_dict(json_parts["config"]),
            vocab=Vocabulary.from_dict(json_parts["vocab"]),
            params=arrays,
            best_epoch=meta["best_epoch"],
            best_dev_f1=meta["best_dev_f1"],
            history=meta["history"],
            version=version,
        )
    except CorruptFile:
        raise
    except (struct.error, KeyError, ValueError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"malformed checkpoint: {exc}") from exc


def save(c: Checkpoint, path) -> None:
    try:
        Path(path).write_bytes(to_bytes(c))
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load(path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    return from_bytes(data)


# ------------------------------------------------------------- training


def _instances(corpus, scheme, limit):
    streams, tags = [], []
    for s in corpus:
        stream = sentence_stream(s, scheme)
        gold = encode_tags(s, scheme).tags
        streams.extend(chop(stream, limit))
        tags.extend(chop(gold, limit))
    return streams, tags


def dev_inputs(corpus: Sequence[Sentence]):
    return [(s.units, s.words) for s in corpus]


def _copy(params):
    return {k: v.copy() for k, v in params.items()}


def train(config: TrainConfig, train_corpus: Sequence[Sentence], dev_corpus: Sequence[Sentence],
          on_epoch: Callable[[dict], None] | None = None) -> Checkpoint:
    """Train one model; deterministic given ``config.seed``.

    ``on_epoch`` receives ``{"epoch", "lr", "loss", "dev_f1"}`` after each epoch.
    """
    if not train_corpus:
        raise EmptyCorpus("training corpus is empty")
    if not dev_corpus:
        raise EmptyCorpus("dev corpus is empty")
    scheme = config.tag_scheme
    rng = np.random.default_rng(config.seed)
    streams, tags = _instances(train_corpus, scheme, config.length_limit)
    vocab = build_vocabulary(streams)
    params = recurrent.init_params(vocab.sizes, len(scheme), rng,
                                   config.char_vec, config.ngram_vecs, config.state)
    ids = [stream_ids(s, vocab) for s in streams]
    lengths = [len(s) for s in streams]
    opt = OptimizerState()
    dev = dev_inputs(dev_corpus)
    first_candidate = min(config.min_best_epoch, config.epochs)

    history: list[dict] = []
    best = None

    def snapshot(p, epoch, f1):
        return Checkpoint(config, vocab, _copy(p), epoch, f1, [dict(h) for h in history])

    for epoch in range(1, config.epochs + 1):
        lr = learning_rate(epoch, config.lr0, config.decay)
        epoch_start = _copy(params)
        total = 0.0
        try:
            for batch in bucket_batches(lengths, config.batch, config.bucket_width, rng):
                loss, grads = recurrent.compute_gradients(
                    params, [ids[i] for i in batch], [tags[i] for i in batch], config.dropout, rng
                )
                grads = clip_gradients(grads, config.clip)
                adagrad_step(params, grads, opt, lr)
                total += loss * len(batch)
        except (NonFiniteLoss, NonFiniteGradient) as exc:
            fallback = best if best is not None else snapshot(epoch_start, epoch - 1, 0.0)
            raise NonFiniteLoss(f"epoch {epoch}: {exc}", checkpoint=fallback) from exc
        pred = segment([(params, vocab)], dev, scheme, config.length_limit)
        f1 = segment_prf(dev_corpus, pred, config.level).f1
        record = {"epoch": epoch, "lr": lr, "loss": total / len(ids), "dev_f1": f1}
        history.append(record)
        log.info("epoch %d lr %.6g loss %.6g devF1 %.4f", epoch, lr, record["loss"], f1)
        if on_epoch is not None:
            on_epoch(record)
        if epoch >= first_candidate and (best is None or f1 > best.best_dev_f1):
            best = snapshot(params, epoch, f1)
    best.history = history
    return best


def log_line(record: dict) -> str:
    return f"epoch {record['epoch']} lr {record['lr']:.10g} loss {record['loss']:.10g} devF1 {record['dev_f1']:.6f}"


def train_ensemble(config: TrainConfig, train_corpus, dev_corpus, seeds: Sequence[int] = (1, 2, 3, 4),
                   n_jobs: int = 1) -> list[Checkpoint]:
    """Independent :func:`train` runs that differ only in their seed."""
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise DuplicateSeeds(f"seeds must be pairwise distinct, got {seeds}")
    configs = [replace(config, seed=s) for s in seeds]
    if n_jobs == 1:
        return [train(c, train_corpus, dev_corpus) for c in configs]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(train)(c, train_corpus, dev_corpus) for c in configs)
