"""Mixing embedding and softmax-regression scores."""
from __future__ import annotations

import numpy as np

LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(11))


def masked_softmax(scores: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Softmax over the entries selected by ``mask``; the rest get probability 0."""
    scores = np.asarray(scores, dtype=np.float64)
    if mask is None:
        mask = np.ones(scores.shape, dtype=bool)
    out = np.zeros_like(scores)
    if not mask.any():
        return out
    s = scores[mask]
    e = np.exp(s - s.max())
    out[mask] = e / e.sum()
    return out


def mix_probabilities(p_emb, p_sr, lam: float) -> np.ndarray:
    return lam * np.asarray(p_emb) + (1.0 - lam) * np.asarray(p_sr)


def combine_scores(embedding_scores: np.ndarray, sr_scores: np.ndarray, nonzero: np.ndarray,
                   lam: float) -> np.ndarray:
    """``lam * softmax(emb) + (1 - lam) * softmax(sr)`` over one candidate set.

    The softmax-regression distribution only covers candidates whose feature
    vector is non-zero (``nonzero``); the others get probability 0 from it.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return mix_probabilities(masked_softmax(embedding_scores), masked_softmax(sr_scores, nonzero), lam)
