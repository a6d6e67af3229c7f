"""Per-relation softmax regression over path features."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..kg import KnowledgeGraph
from .features import QueryFeatures, query_features, sample_negatives

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SoftmaxConfig:
    learning_rate: float = 0.01
    l2: float = 0.01
    batch_size: int = 100
    n_batches: int = 500
    n_negatives: int = 50
    seed: int = 0


@dataclass
class RelationModel:
    relation: int
    paths: list[tuple[int, ...]]
    theta: np.ndarray
    config: SoftmaxConfig = field(default_factory=SoftmaxConfig)
    feature_starved: bool = False
    history: list = field(default_factory=list, repr=False)

    def scores(self, features: np.ndarray) -> np.ndarray:
        return features @ self.theta

    def to_dict(self) -> dict:
        return {"relation": self.relation, "paths": [list(p) for p in self.paths],
                "config": asdict(self.config), "feature_starved": self.feature_starved}


def batch_loss_grad(theta: np.ndarray, cand: np.ndarray, mask: np.ndarray, l2: float):
    """Mean cross-entropy of the positive (row 0) plus ``l2 * |theta|^2``.

    ``cand`` is ``(B, m, P)`` candidate features per example, padded rows are
    switched off by ``mask`` (``(B, m)`` booleans).
    """
    s = cand @ theta
    s = np.where(mask, s, -np.inf)
    top = s.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(s - top), 0.0)
    z = e.sum(axis=1, keepdims=True)
    B = cand.shape[0]
    loss = float(np.mean(np.log(z[:, 0]) + top[:, 0] - s[:, 0])) + l2 * float(theta @ theta)
    d = e / z
    d[:, 0] -= 1.0
    grad = np.einsum("bm,bmp->p", d, cand) / B + 2.0 * l2 * theta
    return loss, grad


def _batches(rng, n: int, size: int, count: int):
    """Consecutive slices of a stream of fresh permutations of ``range(n)``."""
    stream = np.empty(0, dtype=np.int64)
    for _ in range(count):
        while len(stream) < size:
            stream = np.concatenate([stream, rng.permutation(n)])
        yield stream[:size]
        stream = stream[size:]


def _training_examples(kg: KnowledgeGraph, r: int, feats: dict[int, QueryFeatures]):
    examples = []
    for h, _, t in kg.triples_of(r):
        q = feats[int(h)]
        i = np.searchsorted(q.entities, t)
        if i < len(q.entities) and q.entities[i] == t and len(q.entities) > 1:
            examples.append((int(h), int(t)))
    return examples


def train_relation_model(kg: KnowledgeGraph, r: int, paths, config: SoftmaxConfig = SoftmaxConfig(),
                         features: dict[int, QueryFeatures] | None = None) -> RelationModel:
    """Fit ``theta_r`` by mini-batch SGD on sampled-negative cross-entropy.

    Positives whose feature vector is zero are skipped, as are positives with
    no other non-zero-feature entity to contrast against.  If nothing is left
    the model keeps ``theta = 0`` and is flagged as feature-starved.
    """
    paths = [tuple(int(x) for x in p) for p in paths]
    P = len(paths)
    theta = np.zeros(P)
    model = RelationModel(r, paths, theta, config)
    if P == 0:
        model.feature_starved = True
        return model
    if features is None:
        heads = np.unique(kg.triples_of(r)[:, 0])
        features = dict(zip(heads.tolist(), query_features(kg, heads, paths)))
    examples = _training_examples(kg, r, features)
    if not examples:
        model.feature_starved = True
        logger.info("relation %s: no usable positives, theta stays 0", kg.relation_name(r))
        return model
    # one stream per relation so models do not depend on training order
    rng = np.random.default_rng((config.seed, r))
    m = config.n_negatives + 1
    for idx in _batches(rng, len(examples), config.batch_size, config.n_batches):
        cand = np.zeros((len(idx), m, P))
        mask = np.zeros((len(idx), m), dtype=bool)
        for b, i in enumerate(idx):
            h, t = examples[i]
            q = features[h]
            neg = sample_negatives(q, t, config.n_negatives, rng)
            cand[b, 0] = q.vector(t)
            cand[b, 1:1 + len(neg)] = q.rows(neg)
            mask[b, :1 + len(neg)] = True
        loss, grad = batch_loss_grad(theta, cand, mask, config.l2)
        theta -= config.learning_rate * grad
        model.history.append(loss)
    model.theta = theta
    return model
