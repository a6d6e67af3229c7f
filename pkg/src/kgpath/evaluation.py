"""Filtered link-prediction protocol, metrics and scorers."""
from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .akglg.model import AkglgModel
from .grounding import ree_rankings
from .kg import SPLITS, KnowledgeGraph
from .pbf.combine import masked_softmax, mix_probabilities
from .pbf.features import QueryFeatures, query_features
from .pbf.softmax import RelationModel

HITS_AT = (1, 3, 10)


class FilterIndex:
    """Known tails of ``(h, r, ?)`` over train, valid and test (augmented)."""

    def __init__(self, kg: KnowledgeGraph, splits=SPLITS):
        if not kg.augmented:
            raise ValueError("filtering needs an augmented knowledge graph")
        t = np.concatenate([kg.split(s) for s in splits])
        self.n_relations = kg.n_relations
        self.n_entities = kg.n_entities
        keys = t[:, 0] * self.n_relations + t[:, 1]
        order = np.lexsort((t[:, 2], keys))
        self._keys = keys[order]
        self._tails = t[order, 2]

    def known(self, h: int, r: int) -> np.ndarray:
        k = h * self.n_relations + r
        lo = np.searchsorted(self._keys, k, "left")
        hi = np.searchsorted(self._keys, k, "right")
        return self._tails[lo:hi]

    def candidates(self, h: int, r: int, target: int) -> np.ndarray:
        mask = np.ones(self.n_entities, dtype=bool)
        mask[self.known(h, r)] = False
        mask[target] = True
        return mask


def filtered_candidates(kg: KnowledgeGraph, query: tuple[int, int], target: int,
                        filters: FilterIndex | None = None) -> np.ndarray:
    """Entity ids left after removing other known answers of ``query``."""
    filters = filters or FilterIndex(kg)
    return np.flatnonzero(filters.candidates(query[0], query[1], target))


def rank_of(scores: np.ndarray, candidates: np.ndarray | None, target: int) -> int:
    """Filtered rank of ``target``; ties go to the smaller entity id.

    Returns 0 when the target is unranked (score ``-inf``).
    """
    scores = np.asarray(scores)
    st = scores[target]
    if np.isneginf(st) or np.isnan(st):
        return 0
    if candidates is None:
        candidates = np.ones(len(scores), dtype=bool)
    ids = np.arange(len(scores))
    better = candidates & (scores > st)
    tied = candidates & (scores == st) & (ids < target)
    return 1 + int(better.sum()) + int(tied.sum())


def make_queries(kg: KnowledgeGraph, triples: np.ndarray) -> np.ndarray:
    """Two queries per raw triple: ``(h, r, ?)`` and ``(t, r^-1, ?)``.

    Rows are ``(fixed entity, relation, target)``.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if np.any(triples[:, 1] >= kg.n_raw_relations):
        raise ValueError("make_queries expects raw (non-inverse) triples")
    inv = np.stack([triples[:, 2], triples[:, 1] + kg.n_raw_relations, triples[:, 0]], axis=1)
    out = np.empty((2 * len(triples), 3), dtype=np.int64)
    out[0::2] = triples
    out[1::2] = inv
    return out


@dataclass
class RankingReport:
    queries: np.ndarray
    ranks: np.ndarray
    raw_ranks: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_queries(self) -> int:
        return len(self.ranks)

    @property
    def reciprocal_ranks(self) -> np.ndarray:
        rr = np.zeros(len(self.ranks))
        ok = self.ranks > 0
        rr[ok] = 1.0 / self.ranks[ok]
        return rr

    @property
    def mrr(self) -> float:
        return float(np.mean(self.reciprocal_ranks)) if len(self.ranks) else 0.0

    def hits(self, n: int) -> float:
        if not len(self.ranks):
            return 0.0
        return float(np.mean((self.ranks > 0) & (self.ranks <= n)))

    def metrics(self) -> dict:
        out = {"mrr": self.mrr, "n_queries": self.n_queries}
        for n in HITS_AT:
            out[f"hits{n}"] = self.hits(n)
        return out

    def to_json(self, dataset: str, scorer: str, config: dict, seed: int) -> str:
        doc = {"dataset": dataset, "scorer": scorer, **self.metrics(), "config": config, "seed": seed}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def write_tsv(self, path, kg: KnowledgeGraph) -> None:
        """Per-query dump; rank 0 means the target was never ranked."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("entity\trelation\ttarget\trank\n")
            for (h, r, t), k in zip(self.queries, self.ranks):
                fh.write(f"{kg.entities[h]}\t{kg.relation_name(r)}\t{kg.entities[t]}\t{k}\n")


def _score(scorer, h, r, cand):
    fn = getattr(scorer, "score", scorer)
    return fn(h, r, cand)


def evaluate(scorer, triples: np.ndarray, kg: KnowledgeGraph, filters: FilterIndex | None = None,
             raw: bool = False, workers: int = 1) -> RankingReport:
    """Filtered ranks for both queries of every triple in ``triples``.

    ``scorer`` is either an object with ``score(h, r, candidates)`` (and an
    optional ``prepare(queries)``) or a plain callable with that signature,
    returning one score per entity.  With ``workers > 1`` queries are scored
    on a thread pool after ``prepare``; ranks are stored by query index so the
    report does not depend on the schedule.
    """
    filters = filters or FilterIndex(kg)
    queries = make_queries(kg, triples)
    if hasattr(scorer, "prepare"):
        scorer.prepare(queries)
    ranks = np.zeros(len(queries), dtype=np.int64)
    raw_ranks = np.zeros(len(queries), dtype=np.int64) if raw else None

    def run(idx):
        for i in idx:
            h, r, t = queries[i]
            cand = filters.candidates(h, r, t)
            s = _score(scorer, h, r, cand)
            ranks[i] = rank_of(s, cand, t)
            if raw:
                raw_ranks[i] = rank_of(s, None, t)

    chunks = np.array_split(np.arange(len(queries)), max(1, min(workers, len(queries))))
    if workers <= 1:
        run(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, chunks))
    return RankingReport(queries, ranks, raw_ranks)


class EmbeddingScorer:
    def __init__(self, model: AkglgModel):
        self.model = model

    def score(self, h, r, candidates=None):
        return self.model.score_tails([h], [r])[0]


class RuleScorer:
    """Scores from concatenated rule rankings: ``-position``, ``-inf`` if unranked."""

    def __init__(self, kg: KnowledgeGraph, ranked_rules: dict):
        self.kg = kg
        self.ranked = ranked_rules
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    def prepare(self, queries: np.ndarray) -> None:
        for r in np.unique(queries[:, 1]):
            heads = np.unique(queries[queries[:, 1] == r, 0])
            heads = [h for h in heads if (int(h), int(r)) not in self._cache]
            rules = self.ranked.get(int(r))
            if rules is None or not heads:
                continue
            for h, ranking in zip(heads, ree_rankings(self.kg, rules, heads)):
                self._cache[(int(h), int(r))] = ranking

    def ranking(self, h: int, r: int) -> np.ndarray:
        key = (int(h), int(r))
        if key not in self._cache:
            self.prepare(np.array([[h, r, 0]]))
        return self._cache.get(key, np.empty(0, dtype=np.int64))

    def score(self, h, r, candidates=None):
        s = np.full(self.kg.n_entities, -np.inf)
        ranking = self.ranking(h, r)
        s[ranking] = -np.arange(len(ranking), dtype=np.float64)
        return s


class PBFScorer:
    """Embedding and softmax-regression probabilities mixed with weight ``lam``.

    At ``lam == 1`` the raw embedding scores are returned, so the ranking is
    exactly the embedding-only one even where the softmax underflows.
    ``features`` may be shared between scorers whose relation models use the
    same paths.
    """

    def __init__(self, model: AkglgModel, kg: KnowledgeGraph, relation_models: dict[int, RelationModel],
                 lam: float = 0.5, features: dict | None = None):
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        self.model = model
        self.kg = kg
        self.relation_models = relation_models
        self.lam = lam
        self._features: dict[tuple[int, int], QueryFeatures] = {} if features is None else features

    def prepare(self, queries: np.ndarray) -> None:
        for r in np.unique(queries[:, 1]):
            rm = self.relation_models.get(int(r))
            if rm is None or not rm.paths:
                continue
            heads = [h for h in np.unique(queries[queries[:, 1] == r, 0]) if (int(h), int(r)) not in self._features]
            if not heads:
                continue
            for h, q in zip(heads, query_features(self.kg, heads, rm.paths)):
                self._features[(int(h), int(r))] = q

    def sr_scores(self, h: int, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Softmax-regression scores for every entity and the non-zero-feature mask."""
        E = self.kg.n_entities
        s = np.zeros(E)
        nz = np.zeros(E, dtype=bool)
        rm = self.relation_models.get(int(r))
        if rm is None or not rm.paths:
            return s, nz
        key = (int(h), int(r))
        if key not in self._features:
            self.prepare(np.array([[h, r, 0]]))
        q = self._features[key]
        s[q.entities] = rm.scores(q.matrix)
        nz[q.entities] = True
        return s, nz

    def components(self, h, r, candidates):
        """``(p_emb, p_sr)`` over the candidate ids ``flatnonzero(candidates)``."""
        emb = self.model.score_tails([h], [r])[0]
        sr, nz = self.sr_scores(h, r)
        return masked_softmax(emb[candidates]), masked_softmax(sr[candidates], nz[candidates])

    def score(self, h, r, candidates):
        if self.lam == 1.0:
            return self.model.score_tails([h], [r])[0]
        p_emb, p_sr = self.components(h, r, candidates)
        out = np.zeros(self.kg.n_entities)
        out[candidates] = mix_probabilities(p_emb, p_sr, self.lam)
        return out


def evaluate_lambda_grid(scorer: PBFScorer, triples: np.ndarray, kg: KnowledgeGraph, grid,
                         filters: FilterIndex | None = None) -> dict[float, RankingReport]:
    """Reports for every mixing weight in ``grid`` from one pass over the queries."""
    filters = filters or FilterIndex(kg)
    queries = make_queries(kg, triples)
    scorer.prepare(queries)
    grid = list(grid)
    ranks = np.zeros((len(grid), len(queries)), dtype=np.int64)
    for i, (h, r, t) in enumerate(queries):
        cand = filters.candidates(h, r, t)
        ids = np.flatnonzero(cand)
        emb = scorer.model.score_tails([h], [r])[0][cand]
        sr, nz = scorer.sr_scores(h, r)
        p_emb, p_sr = masked_softmax(emb), masked_softmax(sr[cand], nz[cand])
        pos = np.searchsorted(ids, t)
        for j, lam in enumerate(grid):
            s = emb if lam == 1.0 else mix_probabilities(p_emb, p_sr, lam)
            st = s[pos]
            ranks[j, i] = 1 + int(np.sum(s > st)) + int(np.sum(s[:pos] == st))
    return {lam: RankingReport(queries, ranks[j]) for j, lam in enumerate(grid)}


TIE_BREAK_ORDER = ("lam", "max_len", "learning_rate", "l2", "reg")


def select_hyperparameters(grid: dict, objective) -> tuple[dict, list[tuple[dict, float]]]:
    """Grid point maximising ``objective(config)`` (validation MRR).

    Ties prefer smaller mixing weight, then shorter path limit, then smaller
    learning rate (then smaller L2 and regularisation coefficients).
    """
    keys = list(grid)
    results = []
    for values in itertools.product(*(grid[k] for k in keys)):
        cfg = dict(zip(keys, values))
        results.append((cfg, float(objective(cfg))))
    if not results:
        raise ValueError("empty hyperparameter grid")

    def preference(item):
        cfg, score = item
        tie = tuple(-cfg[k] for k in TIE_BREAK_ORDER if k in cfg)
        return (score, tie)

    best = max(results, key=preference)
    return best[0], results
