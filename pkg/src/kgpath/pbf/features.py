"""Rescaled path-multiplicity features for ``(h, r, ?)`` queries."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grounding import Multiplicities, multiplicities
from ..kg import KnowledgeGraph


@dataclass(frozen=True)
class QueryFeatures:
    """Features of every entity reached by at least one path from ``head``.

    ``matrix[i, j] = mul(head, entities[i], p_j) / max_e mul(head, e, p_j)``;
    entities not listed have the zero vector.
    """

    head: int
    entities: np.ndarray
    matrix: np.ndarray

    def vector(self, e: int) -> np.ndarray:
        i = np.searchsorted(self.entities, e)
        if i < len(self.entities) and self.entities[i] == e:
            return self.matrix[i]
        return np.zeros(self.matrix.shape[1])

    def rows(self, candidates) -> np.ndarray:
        """Feature rows for ``candidates`` (zero rows where nothing fires)."""
        candidates = np.asarray(candidates, dtype=np.int64)
        out = np.zeros((len(candidates), self.matrix.shape[1]))
        if len(self.entities) == 0:
            return out
        i = np.minimum(np.searchsorted(self.entities, candidates), len(self.entities) - 1)
        hit = self.entities[i] == candidates
        out[hit] = self.matrix[i[hit]]
        return out


def features_from_multiplicities(m: Multiplicities, a: int) -> QueryFeatures:
    sl = m.head_slice(a)
    pidx, ents, cnts = m.path_idx[sl], m.entity[sl], m.count[sl]
    entities, inv = np.unique(ents, return_inverse=True)
    mat = np.zeros((len(entities), m.n_paths))
    if len(ents):
        top = np.zeros(m.n_paths)
        np.maximum.at(top, pidx, cnts)
        mat[inv, pidx] = cnts / top[pidx]
    return QueryFeatures(int(m.heads[a]), entities, mat)


def query_features(kg: KnowledgeGraph, heads, paths) -> list[QueryFeatures]:
    m = multiplicities(kg, heads, paths)
    return [features_from_multiplicities(m, a) for a in range(len(m.heads))]


def build_features(kg: KnowledgeGraph, h: int, candidates, paths) -> np.ndarray:
    """``(len(candidates), len(paths))`` matrix of ``mul(h, e, p_i) / M_i``.

    ``M_i`` is the largest multiplicity of ``p_i`` from ``h`` over all
    entities; a path that never fires from ``h`` gives a zero column.
    """
    if len(paths) == 0:
        raise ValueError("at least one path is required")
    return query_features(kg, [h], paths)[0].rows(candidates)


def sample_negatives(features: QueryFeatures, t: int, count: int, rng) -> np.ndarray:
    """Uniform sample without replacement from the non-zero-feature entities other than ``t``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(rng)
    pool = features.entities[features.entities != t]
    if len(pool) <= count:
        return pool.copy()
    return np.sort(rng.choice(pool, size=count, replace=False))
