"""First-order linear-chain CRF over per-position emission scores.

A lattice is an ``L x K`` emission matrix ``S`` plus a ``K x K`` transition
matrix ``T`` where ``T[a, b]`` scores tag ``a`` followed by tag ``b``.  The
score of a tag path ``y`` is ``sum_i S[i, y_i] + sum_i T[y_i, y_{i+1}]``; there
are no start or stop transitions.  All dynamic programs run in log space.

The ``*_batch`` functions take ``B x L x K`` emissions padded to a common
length together with the true ``lengths``; positions past a sentence's
length are ignored.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import EmptyLattice, LengthMismatch, ShapeMismatch


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def _check(S, T):
    S = np.asarray(S, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if S.ndim != 2:
        raise ShapeMismatch(f"emissions must be L x K, got shape {S.shape}")
    if S.shape[0] == 0:
        raise EmptyLattice("lattice has no positions")
    k = S.shape[1]
    if T.shape != (k, k):
        raise ShapeMismatch(f"transitions must be {k} x {k}, got {T.shape}")
    return S, T


def _check_batch(S, T, lengths):
    S = np.asarray(S, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if S.ndim != 3:
        raise ShapeMismatch(f"batched emissions must be B x L x K, got {S.shape}")
    bsz, length, k = S.shape
    if T.shape != (k, k):
        raise ShapeMismatch(f"transitions must be {k} x {k}, got {T.shape}")
    if lengths is None:
        lengths = np.full(bsz, length, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape != (bsz,) or (bsz and (lengths.min() < 1 or lengths.max() > length)):
        raise EmptyLattice("every lattice in a batch needs 1 <= length <= padded length")
    return S, T, lengths


def forward_batch(S, T, lengths=None):
    """Forward variables ``alpha`` (B x L x K) and log partition (B,)."""
    S, T, lengths = _check_batch(S, T, lengths)
    alpha = np.empty_like(S)
    alpha[:, 0] = S[:, 0]
    for t in range(1, S.shape[1]):
        step = _lse(alpha[:, t - 1, :, None] + T[None], axis=1) + S[:, t]
        alpha[:, t] = np.where((t < lengths)[:, None], step, alpha[:, t - 1])
    return alpha, _lse(alpha[:, -1], axis=1)


def backward_batch(S, T, lengths=None):
    """Backward variables ``beta`` (B x L x K); zero at and after each last position."""
    S, T, lengths = _check_batch(S, T, lengths)
    beta = np.zeros_like(S)
    for t in range(S.shape[1] - 2, -1, -1):
        step = _lse(T[None] + (S[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
        beta[:, t] = np.where((t < lengths - 1)[:, None], step, 0.0)
    return beta


def path_score_batch(S, T, gold, lengths=None):
    S, T, lengths = _check_batch(S, T, lengths)
    gold = np.asarray(gold, dtype=np.int64)
    bsz, length, _ = S.shape
    mask = np.arange(length)[None, :] < lengths[:, None]
    unary = np.take_along_axis(S, gold[..., None], axis=2)[..., 0]
    score = np.sum(unary * mask, axis=1)
    if length > 1:
        pair = T[gold[:, :-1], gold[:, 1:]]
        score = score + np.sum(pair * mask[:, 1:], axis=1)
    return score


def nll_batch(S, T, gold, lengths=None, with_grad=True):
    """Per-sentence negative log-likelihood and gradients of their sum.

    Returns ``(nll, dS, dT)``; ``dS[b, i, y]`` is the marginal ``p(y_i = y)``
    minus the gold indicator and ``dT`` the expected minus gold transition
    counts.  Padded positions get zero gradient.
    """
    S, T, lengths = _check_batch(S, T, lengths)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != S.shape[:2]:
        raise LengthMismatch(f"gold tags {gold.shape} vs lattice {S.shape[:2]}")
    alpha, log_z = forward_batch(S, T, lengths)
    nll = log_z - path_score_batch(S, T, gold, lengths)
    if not with_grad:
        return nll, None, None
    beta = backward_batch(S, T, lengths)
    bsz, length, k = S.shape
    mask = (np.arange(length)[None, :] < lengths[:, None]).astype(np.float64)
    marg = np.exp(alpha + beta - log_z[:, None, None]) * mask[..., None]
    onehot = np.zeros_like(S)
    np.put_along_axis(onehot, gold[..., None], 1.0, axis=2)
    dS = marg - onehot * mask[..., None]
    dT = np.zeros_like(T)
    if length > 1:
        xi = np.exp(
            alpha[:, :-1, :, None] + T[None, None]
            + (S[:, 1:] + beta[:, 1:])[:, :, None, :]
            - log_z[:, None, None, None]
        )
        dT = np.einsum("ntjk,nt->jk", xi, mask[:, 1:])
        gold_counts = np.zeros_like(T)
        np.add.at(gold_counts, (gold[:, :-1], gold[:, 1:]), mask[:, 1:])
        dT = dT - gold_counts
    return nll, dS, dT


def viterbi_batch(S, T, lengths=None) -> list[tuple[int, ...]]:
    S, T, lengths = _check_batch(S, T, lengths)
    bsz, length, k = S.shape
    delta = S[:, 0].copy()
    back = np.zeros((bsz, length, k), dtype=np.int64)
    for t in range(1, length):
        cand = delta[:, :, None] + T[None]
        # argmax returns the first maximum: ties go to the lowest tag index
        back[:, t] = np.argmax(cand, axis=1)
        step = np.max(cand, axis=1) + S[:, t]
        delta = np.where((t < lengths)[:, None], step, delta)
    paths = []
    for b in range(bsz):
        n = int(lengths[b])
        y = [int(np.argmax(delta[b]))]
        for t in range(n - 1, 0, -1):
            y.append(int(back[b, t, y[-1]]))
        paths.append(tuple(reversed(y)))
    return paths


# ------------------------------------------------------ single lattice API


def log_partition(S, T) -> float:
    S, T = _check(S, T)
    return float(forward_batch(S[None], T)[1][0])


def path_score(S, T, tags: Sequence[int]) -> float:
    S, T = _check(S, T)
    tags = np.asarray(tags, dtype=np.int64)
    if tags.shape != (S.shape[0],):
        raise LengthMismatch(f"{len(tags)} tags for a lattice of length {S.shape[0]}")
    return float(path_score_batch(S[None], T, tags[None])[0])


def nll(S, T, gold: Sequence[int]) -> float:
    S, T = _check(S, T)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (S.shape[0],):
        raise LengthMismatch(f"{len(gold)} gold tags for a lattice of length {S.shape[0]}")
    return float(nll_batch(S[None], T, gold[None], with_grad=False)[0][0])


def nll_gradients(S, T, gold: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`nll` with respect to ``S`` and ``T``."""
    S, T = _check(S, T)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (S.shape[0],):
        raise LengthMismatch(f"{len(gold)} gold tags for a lattice of length {S.shape[0]}")
    _, dS, dT = nll_batch(S[None], T, gold[None])
    return dS[0], dT


def marginals(S, T) -> np.ndarray:
    """``L x K`` posterior tag marginals."""
    S, T = _check(S, T)
    alpha, log_z = forward_batch(S[None], T)
    beta = backward_batch(S[None], T)
    return np.exp(alpha[0] + beta[0] - log_z[0])


def viterbi(S, T) -> tuple[int, ...]:
    """Highest-scoring tag path (lowest tag index wins ties at each backtrack step)."""
    S, T = _check(S, T)
    return viterbi_batch(S[None], T)[0]


def average_lattices(lattices: Sequence[tuple[np.ndarray, np.ndarray]]):
    if not lattices:
        raise ShapeMismatch("ensemble needs at least one lattice")
    checked = [_check(S, T) for S, T in lattices]
    shape = checked[0][0].shape
    if any(S.shape != shape for S, _ in checked):
        raise ShapeMismatch("ensemble lattices differ in length or tag count")
    # sorting first makes the float sum independent of member order
    S = np.mean(np.sort([S for S, _ in checked], axis=0), axis=0)
    T = np.mean(np.sort([T for _, T in checked], axis=0), axis=0)
    return S, T


def ensemble_decode(lattices: Sequence[tuple[np.ndarray, np.ndarray]]) -> tuple[int, ...]:
    """Viterbi over the element-wise means of the members' emissions and transitions."""
    return viterbi(*average_lattices(lattices))
