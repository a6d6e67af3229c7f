"""Path multiplicities and rule-concatenation rankings.

``mul(h, e, p)`` is the number of injective groundings of the relation path
``p`` that start at ``h`` and end at ``e``: walks along the train split that
follow ``p`` label by label and never revisit an entity (endpoints included).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .kg import KnowledgeGraph


@njit
def _walk_counts(h, path, plen, indptr, rel, tail, counts, touched, n_touched):
    verts = np.empty(plen + 1, dtype=np.int64)
    pos = np.empty(plen + 1, dtype=np.int64)
    end = np.empty(plen + 1, dtype=np.int64)
    verts[0] = h
    depth = 0
    lo = indptr[h]
    hi = indptr[h + 1]
    pos[0] = lo + np.searchsorted(rel[lo:hi], path[0], "left")
    end[0] = lo + np.searchsorted(rel[lo:hi], path[0], "right")
    while depth >= 0:
        if pos[depth] >= end[depth]:
            depth -= 1
            continue
        w = tail[pos[depth]]
        pos[depth] += 1
        seen = False
        for j in range(depth + 1):
            if verts[j] == w:
                seen = True
                break
        if seen:
            continue
        if depth + 1 == plen:
            if counts[w] == 0:
                touched[n_touched] = w
                n_touched += 1
            counts[w] += 1
            continue
        depth += 1
        verts[depth] = w
        lo = indptr[w]
        hi = indptr[w + 1]
        pos[depth] = lo + np.searchsorted(rel[lo:hi], path[depth], "left")
        end[depth] = lo + np.searchsorted(rel[lo:hi], path[depth], "right")
    return n_touched


@njit
def multiplicity_batch(heads, paths, plens, indptr, rel, tail, n_entities):
    """COO multiplicities for every (head, path) combination.

    Returns ``(head_idx, path_idx, entity, count)`` with entities in
    ascending order inside each (head, path) block.
    """
    counts = np.zeros(n_entities, dtype=np.int64)
    touched = np.empty(n_entities, dtype=np.int64)
    cap = 1024
    qi = np.empty(cap, dtype=np.int64)
    pi = np.empty(cap, dtype=np.int64)
    ent = np.empty(cap, dtype=np.int64)
    cnt = np.empty(cap, dtype=np.int64)
    n = 0
    for a in range(heads.shape[0]):
        for b in range(paths.shape[0]):
            nt = _walk_counts(heads[a], paths[b], plens[b], indptr, rel, tail, counts, touched, 0)
            if nt == 0:
                continue
            block = np.sort(touched[:nt])
            if n + nt > cap:
                while n + nt > cap:
                    cap *= 2
                qi2 = np.empty(cap, dtype=np.int64)
                pi2 = np.empty(cap, dtype=np.int64)
                ent2 = np.empty(cap, dtype=np.int64)
                cnt2 = np.empty(cap, dtype=np.int64)
                qi2[:n] = qi[:n]
                pi2[:n] = pi[:n]
                ent2[:n] = ent[:n]
                cnt2[:n] = cnt[:n]
                qi, pi, ent, cnt = qi2, pi2, ent2, cnt2
            for x in range(nt):
                w = block[x]
                qi[n] = a
                pi[n] = b
                ent[n] = w
                cnt[n] = counts[w]
                counts[w] = 0
                n += 1
    return qi[:n], pi[:n], ent[:n], cnt[:n]


def _pad_paths(paths) -> tuple[np.ndarray, np.ndarray]:
    paths = [tuple(p) for p in paths]
    if any(len(p) == 0 for p in paths):
        raise ValueError("paths must be non-empty")
    width = max((len(p) for p in paths), default=1)
    arr = np.full((len(paths), width), -1, dtype=np.int64)
    for i, p in enumerate(paths):
        arr[i, :len(p)] = p
    return arr, np.array([len(p) for p in paths], dtype=np.int64)


@dataclass(frozen=True)
class Multiplicities:
    """Sparse ``mul(heads[a], e, paths[b])`` table in COO form."""

    heads: np.ndarray
    n_paths: int
    head_idx: np.ndarray
    path_idx: np.ndarray
    entity: np.ndarray
    count: np.ndarray

    def block(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
        """(entities, counts) for head index ``a`` and path index ``b``."""
        key = self.head_idx * self.n_paths + self.path_idx
        lo = np.searchsorted(key, a * self.n_paths + b, "left")
        hi = np.searchsorted(key, a * self.n_paths + b, "right")
        return self.entity[lo:hi], self.count[lo:hi]

    def head_slice(self, a: int) -> slice:
        lo = np.searchsorted(self.head_idx, a, "left")
        hi = np.searchsorted(self.head_idx, a, "right")
        return slice(lo, hi)


def multiplicities(kg: KnowledgeGraph, heads, paths) -> Multiplicities:
    """Injective-grounding counts from each head along each path."""
    heads = np.asarray(heads, dtype=np.int64).reshape(-1)
    arr, lens = _pad_paths(paths)
    adj = kg.adjacency
    qi, pi, ent, cnt = multiplicity_batch(heads, arr, lens, adj.indptr, adj.rel, adj.tail, kg.n_entities)
    return Multiplicities(heads, len(lens), qi, pi, ent, cnt)


def path_targets(kg: KnowledgeGraph, h: int, path) -> dict[int, int]:
    """``{e: mul(h, e, path)}`` for every entity with at least one grounding."""
    m = multiplicities(kg, [h], [tuple(path)])
    return {int(e): int(c) for e, c in zip(m.entity, m.count)}


def _concat_ranking(blocks) -> np.ndarray:
    ranked: list[int] = []
    seen: set[int] = set()
    for ents, cnts in blocks:
        if len(ents) == 0:
            continue
        order = np.lexsort((ents, -cnts))
        for e in ents[order]:
            e = int(e)
            if e not in seen:
                seen.add(e)
                ranked.append(e)
    return np.asarray(ranked, dtype=np.int64)


def ree_rank_entities(kg: KnowledgeGraph, ranked_rules, h: int) -> np.ndarray:
    """Rank tails for ``(h, r, ?)`` by concatenating per-rule rankings.

    ``ranked_rules`` are the rules for ``r`` in decreasing confidence.  Each
    rule ranks the entities it reaches by multiplicity (ties by id); entities
    are appended at their first appearance, and entities no rule reaches are
    left out.
    """
    bodies = [r.body for r in ranked_rules]
    if not bodies:
        return np.empty(0, dtype=np.int64)
    m = multiplicities(kg, [h], bodies)
    return _concat_ranking(m.block(0, b) for b in range(len(bodies)))


def ree_rankings(kg: KnowledgeGraph, ranked_rules, heads) -> list[np.ndarray]:
    """:func:`ree_rank_entities` for many query heads sharing one rule list."""
    bodies = [r.body for r in ranked_rules]
    heads = np.asarray(heads, dtype=np.int64)
    if not bodies:
        return [np.empty(0, dtype=np.int64) for _ in heads]
    m = multiplicities(kg, heads, bodies)
    out = []
    for a in range(len(heads)):
        sl = m.head_slice(a)
        pidx, ents, cnts = m.path_idx[sl], m.entity[sl], m.count[sl]
        starts = np.searchsorted(pidx, np.arange(len(bodies) + 1))
        out.append(_concat_ranking((ents[starts[b]:starts[b + 1]], cnts[starts[b]:starts[b + 1]])
                                   for b in range(len(bodies))))
    return out
