"""Bidirectional GRU encoder, emission projection, and exact backprop.

Parameters live in a flat ``dict`` of float64 arrays (see
:data:`PARAM_NAMES`).  GRU matrices stack the update gate, reset gate and
candidate blocks column-wise::

    z  = sigmoid(x W_z + h U_z + b_z)
    r  = sigmoid(x W_r + h U_r + b_r)
    h~ = tanh(x W_h + (r * h) U_h + b_h)
    h' = z * h + (1 - z) * h~

Batches are right-padded.  The backward direction reverses every sequence
inside its own length, so both directions see valid steps first and padded
steps can never leak into valid outputs.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from . import crf
from .exceptions import NonFiniteLoss, ShapeMismatch
from .features import PAD_ID

PARAM_NAMES = (
    "emb_uni", "emb_bi", "emb_tri",
    "fw_W", "fw_U", "fw_b",
    "bw_W", "bw_U", "bw_b",
    "proj_W", "proj_b",
    "transitions",
)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class GruWeights(NamedTuple):
    """One direction: ``W`` is ``in x 3H``, ``U`` is ``H x 3H``, ``b`` is ``3H``."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def state_size(self) -> int:
        return self.U.shape[0]


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(vocab_sizes: Sequence[int], n_tags: int, rng: np.random.Generator,
                char_dim: int = 50, ngram_dim: int = 50, state: int = 200) -> dict:
    """Uniform Glorot init for every matrix (embeddings included), zero biases."""
    n_uni, n_bi, n_tri = vocab_sizes
    d_in = char_dim + 2 * ngram_dim
    p = {
        "emb_uni": glorot(rng, n_uni, char_dim),
        "emb_bi": glorot(rng, n_bi, ngram_dim),
        "emb_tri": glorot(rng, n_tri, ngram_dim),
    }
    for side in ("fw", "bw"):
        p[f"{side}_W"] = np.concatenate([glorot(rng, d_in, state) for _ in range(3)], axis=1)
        p[f"{side}_U"] = np.concatenate([glorot(rng, state, state) for _ in range(3)], axis=1)
        p[f"{side}_b"] = np.zeros(3 * state)
    p["proj_W"] = glorot(rng, 2 * state, n_tags)
    p["proj_b"] = np.zeros(n_tags)
    p["transitions"] = glorot(rng, n_tags, n_tags)
    return p


def direction(params: dict, side: str) -> GruWeights:
    return GruWeights(params[f"{side}_W"], params[f"{side}_U"], params[f"{side}_b"])


# ------------------------------------------------------------------ GRU


def gru_step(x: np.ndarray, h_prev: np.ndarray, w: GruWeights) -> np.ndarray:
    """One GRU update; ``x`` and ``h_prev`` may carry leading batch axes."""
    h_size = w.state_size
    if w.W.shape[1] != 3 * h_size or w.U.shape != (h_size, 3 * h_size) or w.b.shape != (3 * h_size,):
        raise ShapeMismatch("inconsistent GRU weight shapes")
    if np.shape(x)[-1] != w.W.shape[0] or np.shape(h_prev)[-1] != h_size:
        raise ShapeMismatch(
            f"GRU expects input {w.W.shape[0]} / state {h_size}, got "
            f"{np.shape(x)[-1]} / {np.shape(h_prev)[-1]}"
        )
    h_new, *_ = _step(x @ w.W + w.b, h_prev, w.U)
    return h_new


def _step(xw, h, U):
    hs = U.shape[0]
    zr = sigmoid(xw[..., :2 * hs] + h @ U[:, :2 * hs])
    z, r = zr[..., :hs], zr[..., hs:]
    cand = np.tanh(xw[..., 2 * hs:] + (r * h) @ U[:, 2 * hs:])
    return z * h + (1.0 - z) * cand, z, r, cand


def _run_gru(X, w: GruWeights):
    bsz, length, _ = X.shape
    hs = w.state_size
    xw = X @ w.W + w.b
    H = np.empty((bsz, length, hs))
    Z = np.empty_like(H)
    R = np.empty_like(H)
    C = np.empty_like(H)
    h = np.zeros((bsz, hs))
    prev = np.empty_like(H)
    for t in range(length):
        prev[:, t] = h
        h, Z[:, t], R[:, t], C[:, t] = _step(xw[:, t], h, w.U)
        H[:, t] = h
    return H, (X, prev, Z, R, C)


def _gru_backward(dH, cache, w: GruWeights):
    X, prev, Z, R, C = cache
    bsz, length, hs = dH.shape
    U_zr, U_h = w.U[:, :2 * hs], w.U[:, 2 * hs:]
    dU = np.zeros_like(w.U)
    dxw = np.empty((bsz, length, 3 * hs))
    dh_next = np.zeros((bsz, hs))
    for t in range(length - 1, -1, -1):
        dh = dH[:, t] + dh_next
        hp, z, r, c = prev[:, t], Z[:, t], R[:, t], C[:, t]
        dc = dh * (1.0 - z) * (1.0 - c * c)
        drh = dc @ U_h.T
        dzr = np.concatenate([dh * (hp - c) * z * (1.0 - z), drh * hp * r * (1.0 - r)], axis=1)
        dU[:, 2 * hs:] += (r * hp).T @ dc
        dU[:, :2 * hs] += hp.T @ dzr
        dh_next = dh * z + drh * r + dzr @ U_zr.T
        dxw[:, t, :2 * hs] = dzr
        dxw[:, t, 2 * hs:] = dc
    flat = dxw.reshape(-1, 3 * hs)
    dW = X.reshape(-1, X.shape[2]).T @ flat
    db = flat.sum(axis=0)
    dX = dxw @ w.W.T
    return dX, GruWeights(dW, dU, db)


def _reverse_index(lengths, length):
    t = np.arange(length)[None, :]
    n = np.asarray(lengths)[:, None]
    return np.where(t < n, n - 1 - t, t)


def _gather_time(A, idx):
    return np.take_along_axis(A, idx[..., None], axis=1)


def _dropout_mask(rng, shape, rate):
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def _encode(X, lengths, fw: GruWeights, bw: GruWeights, dropout: float, rng):
    """Batched encoder; returns features (B x L x 2H) and the backprop cache."""
    bsz, length, _ = X.shape
    active = dropout > 0.0 and rng is not None
    m_in = _dropout_mask(rng, X.shape, dropout) if active else None
    Xd = X * m_in if active else X
    rev = _reverse_index(lengths, length)
    H_f, c_f = _run_gru(Xd, fw)
    H_r, c_b = _run_gru(_gather_time(Xd, rev), bw)
    F = np.concatenate([H_f, _gather_time(H_r, rev)], axis=2)
    m_out = _dropout_mask(rng, F.shape, dropout) if active else None
    if active:
        F = F * m_out
    return F, (m_in, m_out, rev, c_f, c_b)


def _encode_backward(dF, cache, fw, bw):
    m_in, m_out, rev, c_f, c_b = cache
    if m_out is not None:
        dF = dF * m_out
    hs = fw.state_size
    dXf, gf = _gru_backward(dF[:, :, :hs], c_f, fw)
    dXr, gb = _gru_backward(_gather_time(dF[:, :, hs:], rev), c_b, bw)
    dX = dXf + _gather_time(dXr, rev)
    if m_in is not None:
        dX = dX * m_in
    return dX, gf, gb


def encode_bidirectional(inputs: np.ndarray, forward: GruWeights, backward: GruWeights,
                         dropout_active: bool = False, rng: np.random.Generator | None = None,
                         rate: float = 0.5) -> np.ndarray:
    """``L x D`` inputs to ``L x 2H`` features (forward state, then backward state)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != forward.W.shape[0] or backward.W.shape[0] != inputs.shape[1]:
        raise ShapeMismatch(f"inputs of shape {inputs.shape} do not match the GRU input size")
    length = inputs.shape[0]
    if length == 0:
        return np.zeros((0, forward.state_size + backward.state_size))
    if dropout_active and rng is None:
        raise ValueError("active dropout needs a random generator")
    F, _ = _encode(inputs[None], [length], forward, backward,
                   rate if dropout_active else 0.0, rng if dropout_active else None)
    return F[0]


def emission_scores(features: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeMismatch(f"features {features.shape} vs projection {W.shape}/{b.shape}")
    return features @ W + b


# ----------------------------------------------------------- full model


def _pad_batch(id_seqs: Sequence[np.ndarray], tags: Sequence[Sequence[int]] | None = None):
    lengths = np.array([len(s) for s in id_seqs], dtype=np.int64)
    if lengths.size == 0 or lengths.min() < 1:
        raise ShapeMismatch("batch needs at least one non-empty sequence")
    length = int(lengths.max())
    ids = np.full((len(id_seqs), length, 3), PAD_ID, dtype=np.int64)
    for i, s in enumerate(id_seqs):
        ids[i, :len(s)] = s
    gold = None
    if tags is not None:
        gold = np.zeros((len(id_seqs), length), dtype=np.int64)
        for i, (s, t) in enumerate(zip(id_seqs, tags)):
            if len(t) != len(s):
                raise ShapeMismatch(f"sequence {i}: {len(s)} positions but {len(t)} tags")
            gold[i, :len(t)] = t
    return ids, lengths, gold


def _embed_batch(params, ids):
    return np.concatenate(
        [params["emb_uni"][ids[..., 0]], params["emb_bi"][ids[..., 1]], params["emb_tri"][ids[..., 2]]],
        axis=2,
    )


def forward(params: dict, ids: np.ndarray, lengths, dropout: float = 0.0, rng=None):
    """Emission scores ``B x L x K`` for padded id batches, plus a cache for :func:`backward`."""
    X = _embed_batch(params, ids)
    fw, bw = direction(params, "fw"), direction(params, "bw")
    F, enc_cache = _encode(X, lengths, fw, bw, dropout, rng)
    S = emission_scores(F, params["proj_W"], params["proj_b"])
    return S, (ids, F, enc_cache)


def backward(params: dict, cache, dS: np.ndarray) -> dict:
    ids, F, enc_cache = cache
    k = dS.shape[2]
    grads = {
        "proj_W": F.reshape(-1, F.shape[2]).T @ dS.reshape(-1, k),
        "proj_b": dS.sum(axis=(0, 1)),
    }
    dF = dS @ params["proj_W"].T
    fw, bw = direction(params, "fw"), direction(params, "bw")
    dX, gf, gb = _encode_backward(dF, enc_cache, fw, bw)
    for side, g in (("fw", gf), ("bw", gb)):
        grads[f"{side}_W"], grads[f"{side}_U"], grads[f"{side}_b"] = g
    offset = 0
    for j, name in enumerate(("emb_uni", "emb_bi", "emb_tri")):
        table = params[name]
        dim = table.shape[1]
        g = np.zeros_like(table)
        np.add.at(g, ids[..., j].ravel(), dX[..., offset:offset + dim].reshape(-1, dim))
        grads[name] = g
        offset += dim
    return grads


def batch_loss(params: dict, id_seqs, tags, dropout: float = 0.0, rng=None) -> float:
    """Mean CRF negative log-likelihood over a batch (no gradients)."""
    ids, lengths, gold = _pad_batch(id_seqs, tags)
    S, _ = forward(params, ids, lengths, dropout, rng)
    nll, _, _ = crf.nll_batch(S, params["transitions"], gold, lengths, with_grad=False)
    return float(np.mean(nll))


def compute_gradients(params: dict, id_seqs: Sequence[np.ndarray], tags: Sequence[Sequence[int]],
                      dropout: float = 0.0, rng: np.random.Generator | None = None):
    """Mean batch NLL and its exact gradient for every parameter.

    ``id_seqs`` holds ``L_i x 3`` n-gram id arrays and ``tags`` the gold tag
    indices.  Rows of the embedding tables not touched by the batch get zero
    gradient.
    """
    ids, lengths, gold = _pad_batch(id_seqs, tags)
    S, cache = forward(params, ids, lengths, dropout, rng)
    nll, dS, dT = crf.nll_batch(S, params["transitions"], gold, lengths)
    loss = float(np.mean(nll))
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"batch loss is {loss}")
    scale = 1.0 / len(id_seqs)
    grads = backward(params, cache, dS * scale)
    grads["transitions"] = dT * scale
    return loss, grads


def emissions(params: dict, id_seqs: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Inference-time emission matrices (dropout off), one ``L_i x K`` per sequence."""
    ids, lengths, _ = _pad_batch(id_seqs)
    S, _ = forward(params, ids, lengths)
    return [S[i, :n] for i, n in enumerate(lengths)]
