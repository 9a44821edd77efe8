"""Cosine similarity and the symmetric InfoNCE objective, with gradients.

The InfoNCE softmax is computed with max-subtraction log-sum-exp: at the
default temperature 0.03, cosine logits reach +-33 and a naive softmax of
intermediate sums is not trustworthy.
"""

from __future__ import annotations

import numpy as np

NORM_EPS = 1e-8


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors with norms floored at 1e-8."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = max(float(np.linalg.norm(a)), NORM_EPS)
    nb = max(float(np.linalg.norm(b)), NORM_EPS)
    return float(a @ b / (na * nb))


def unit_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize, returning (unit rows, clamped norms)."""
    norms = np.linalg.norm(x, axis=-1)
    clamped = np.maximum(norms, NORM_EPS)
    return x / clamped[..., None], clamped


def cosine_matrix(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities between rows of q and rows of k."""
    qn, _ = unit_rows(np.asarray(q, dtype=np.float64))
    kn, _ = unit_rows(np.asarray(k, dtype=np.float64))
    return qn @ kn.T


def infonce_from_scores(scores: np.ndarray, tau: float) -> tuple[float, np.ndarray]:
    """Loss and d(loss)/d(scores) for one retrieval direction.

    Row i of ``scores`` holds similarities from query i to all keys, with the
    matching key on the diagonal.
    """
    b = scores.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    logits = scores / tau
    shift = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - shift)
    denom = exp.sum(axis=1)
    lse = np.log(denom) + shift[:, 0]
    loss = float(np.mean(lse - np.diag(logits)))
    probs = exp / denom[:, None]
    dlogits = (probs - np.eye(b)) / b
    return loss, dlogits / tau


def infonce(y_q: np.ndarray, y_k: np.ndarray, tau: float) -> float:
    """One-directional InfoNCE over matched rows of two embedding tables."""
    _check_tables(y_q, y_k)
    loss, _ = infonce_from_scores(cosine_matrix(y_q, y_k), tau)
    return loss


def symmetric_loss(y_q: np.ndarray, y_k: np.ndarray, tau: float) -> float:
    """Sum of both retrieval directions; the two terms are generally unequal
    because each direction draws its negatives from a different table."""
    _check_tables(y_q, y_k)
    scores = cosine_matrix(y_q, y_k)
    l1, _ = infonce_from_scores(scores, tau)
    l2, _ = infonce_from_scores(scores.T, tau)
    return l1 + l2


def symmetric_loss_and_grad(
    y_q: np.ndarray, y_k: np.ndarray, tau: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Symmetric InfoNCE and its gradients w.r.t. both embedding tables."""
    _check_tables(y_q, y_k)
    y_q = np.asarray(y_q, dtype=np.float64)
    y_k = np.asarray(y_k, dtype=np.float64)
    qn, qnorm = unit_rows(y_q)
    kn, knorm = unit_rows(y_k)
    scores = qn @ kn.T
    l1, d1 = infonce_from_scores(scores, tau)
    l2, d2 = infonce_from_scores(scores.T, tau)
    dscores = d1 + d2.T
    # Through the cosine: ds_ij/dq_i = (kn_j - s_ij * qn_i) / |q_i|, with the
    # s-term dropped where the norm sits at the clamp floor.
    qlive = (np.linalg.norm(y_q, axis=1) > NORM_EPS).astype(np.float64)
    klive = (np.linalg.norm(y_k, axis=1) > NORM_EPS).astype(np.float64)
    row_dot = (dscores * scores).sum(axis=1)
    col_dot = (dscores * scores).sum(axis=0)
    dq = (dscores @ kn - (qlive * row_dot)[:, None] * qn) / qnorm[:, None]
    dk = (dscores.T @ qn - (klive * col_dot)[:, None] * kn) / knorm[:, None]
    return l1 + l2, dq, dk


def _check_tables(y_q: np.ndarray, y_k: np.ndarray) -> None:
    if y_q.ndim != 2 or y_k.ndim != 2:
        raise ValueError("embedding tables must be 2-D")
    if y_q.shape != y_k.shape:
        raise ValueError(f"mismatched tables: {y_q.shape} vs {y_k.shape}")
    if y_q.shape[0] < 1:
        raise ValueError("empty batch")
