"""Rule confidence from embeddings (REE) and per-head rule selection."""
from __future__ import annotations

import numpy as np

from ..akglg.model import AkglgModel
from .rules import Rule, RuleSet


def path_embedding(model: AkglgModel, path) -> np.ndarray:
    """``g_{r1} + g_{r2} + ... + g_{rn}`` in the product group."""
    path = list(path)
    if not path:
        raise ValueError("empty path")
    return model.group.fold(model.relation_points[path], axis=0)


def path_attention(model: AkglgModel, path) -> np.ndarray:
    """Unit-norm element-wise geometric mean of the relations' attention vectors.

    A coordinate is zero whenever any relation on the path has zero attention
    there; an all-zero mean stays the zero vector.
    """
    return _geo_attention(model.relation_attention[np.asarray(list(path))][None], np.array([len(path)]))[0]


def _geo_attention(att: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    # att: (N, L, n) padded rows beyond each length are ignored
    N, L, n = att.shape
    valid = np.arange(L)[None, :] < lengths[:, None]
    with np.errstate(divide="ignore"):
        logs = np.where(valid[:, :, None], np.log(att), 0.0)
    mean = logs.sum(axis=1) / lengths[:, None]
    top = mean.max(axis=1, keepdims=True)
    dead = ~np.isfinite(top[:, 0])
    top[dead] = 0.0
    w = np.exp(mean - top)
    norm = np.linalg.norm(w, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return w / norm


def rule_confidence(model: AkglgModel, rule: Rule) -> float:
    """``(w_path * w_head) . d(g_path, g_head)``."""
    g = model.group
    w = path_attention(model, rule.body) * model.relation_attention[rule.head]
    return float(np.dot(w, g.similarity(path_embedding(model, rule.body), model.relation_points[rule.head])))


def score_rules(model: AkglgModel, rules: RuleSet, chunk_size: int = 2048) -> RuleSet:
    """Attach REE confidences to every rule of ``rules``."""
    g = model.group
    out = np.empty(len(rules))
    ra, rp = model.relation_attention, model.relation_points
    for s in range(0, len(rules), chunk_size):
        bodies = rules.bodies[s:s + chunk_size]
        lengths = rules.lengths[s:s + chunk_size]
        heads = rules.heads[s:s + chunk_size]
        safe = np.where(bodies >= 0, bodies, 0)
        acc = rp[safe[:, 0]].copy()
        for j in range(1, bodies.shape[1]):
            live = (j < lengths)[:, None]
            acc = np.where(live, g.op(acc, rp[safe[:, j]]), acc)
        w = _geo_attention(ra[safe], lengths) * ra[heads]
        out[s:s + chunk_size] = np.sum(w * g.similarity(acc, rp[heads]), axis=1)
    return rules.with_confidences(out)


def rank_order(rules: RuleSet) -> np.ndarray:
    """Indices sorted by confidence (desc), then body length, then body ids."""
    keys = [rules.bodies[:, j] for j in reversed(range(rules.max_len))]
    return np.lexsort(keys + [rules.lengths, -rules.confidences])


def select_top_rules(rules: RuleSet, model: AkglgModel | None = None,
                     per_head_limit: int = 1000) -> dict[int, RuleSet]:
    """The ``per_head_limit`` most confident rules for each head relation.

    Rules are scored with ``model`` unless they already carry confidences.
    Inverse relations count as separate heads.
    """
    if per_head_limit < 1:
        raise ValueError("per_head_limit must be at least 1")
    if rules.confidences is None:
        if model is None:
            raise ValueError("rules carry no confidences and no model was given")
        rules = score_rules(model, rules)
    order = rank_order(rules)
    heads = rules.heads[order]
    out = {}
    for h in np.unique(heads):
        idx = order[heads == h][:per_head_limit]
        out[int(h)] = rules.take(idx)
    return out


def concat_ranked(ranked: dict[int, RuleSet]) -> RuleSet:
    """Flatten per-head rankings (heads ascending) into one rule set."""
    parts = [ranked[h] for h in sorted(ranked)]
    if not parts:
        return RuleSet(np.zeros((0, 1), dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))
    width = max(p.max_len for p in parts)
    bodies = np.concatenate([np.pad(p.bodies, ((0, 0), (0, width - p.max_len)), constant_values=-1)
                             for p in parts])
    return RuleSet(bodies, np.concatenate([p.heads for p in parts]),
                   np.concatenate([p.confidences for p in parts]))


def split_by_head(rules: RuleSet) -> dict[int, RuleSet]:
    """Group an already-ranked rule set by head, keeping the incoming order."""
    return {int(h): rules.take(np.flatnonzero(rules.heads == h)) for h in np.unique(rules.heads)}
