"""Attention-weighted embeddings on a product Lie group."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .groups import CIRCLE, LINE, SIGN, GroupInstance


@dataclass(eq=False)
class AkglgModel:
    """Per-entity and per-relation attention vectors and group points.

    Relations are stored in the augmented id space: row ``r`` is used to
    predict tails of ``r`` and row ``inverse(r)`` to predict its heads.
    """

    group: GroupInstance
    entity_attention: np.ndarray
    entity_points: np.ndarray
    relation_attention: np.ndarray
    relation_points: np.ndarray
    entities: tuple[str, ...] = ()
    relations: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.entity_attention.shape != self.entity_points.shape:
            raise ValueError("entity attention/point shapes differ")
        if self.relation_attention.shape != self.relation_points.shape:
            raise ValueError("relation attention/point shapes differ")
        if self.entity_attention.shape[1] != self.relation_attention.shape[1]:
            raise ValueError("entity and relation dimensions differ")

    @property
    def dim(self) -> int:
        return self.entity_attention.shape[1]

    @property
    def n_entities(self) -> int:
        return self.entity_attention.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_attention.shape[0]

    def score_triple(self, h: int, r: int, t: int) -> float:
        """``(w_h * w_r * w_t) . d(g_h + g_r, g_t)``."""
        g = self.group
        w = self.entity_attention[h] * self.relation_attention[r] * self.entity_attention[t]
        sim = g.similarity(g.op(self.entity_points[h], self.relation_points[r]), self.entity_points[t])
        return float(np.dot(w, sim))

    def score_tails(self, heads, relations) -> np.ndarray:
        """Scores of every entity as tail for each query ``(h, r, ?)``.

        Returns an array of shape ``(len(heads), n_entities)``.
        """
        heads = np.atleast_1d(np.asarray(heads))
        relations = np.atleast_1d(np.asarray(relations))
        if self.group.kind == "line":
            return _line_scores(self, heads, relations)
        ent, rel = self.composed()
        q = ent[heads] * rel[relations]
        if self.group.kind == "circle":
            return q.real @ ent.real.T + q.imag @ ent.imag.T
        return q @ ent.T

    def composed(self) -> tuple[np.ndarray, np.ndarray]:
        """``w * g`` for entities and relations (sign and circle groups)."""
        if self.group.kind == "line":
            raise ValueError("the line group has no composed vector form")
        cache = self.__dict__.get("_composed")
        if cache is None:
            cache = (self.entity_attention * self.entity_points,
                     self.relation_attention * self.relation_points)
            self.__dict__["_composed"] = cache
        return cache


def _line_scores(model: AkglgModel, heads, relations) -> np.ndarray:
    W = model.entity_attention[heads] * model.relation_attention[relations]
    q = model.entity_points[heads] + model.relation_points[relations]
    we = model.entity_attention
    ge = model.entity_points
    return -((W * q * q) @ we.T - 2.0 * (W * q) @ (we * ge).T + W @ (we * ge * ge).T)


def _split(c: np.ndarray, group: GroupInstance) -> tuple[np.ndarray, np.ndarray]:
    att = np.abs(c).astype(np.float64)
    pts = group.identity(c.shape)
    nz = att > 0
    pts[nz] = c[nz] / att[nz]
    return att, pts


def decompose(group: GroupInstance, entity_vectors: np.ndarray, relation_vectors: np.ndarray,
              **kwargs) -> AkglgModel:
    """Split composed vectors ``c`` into attention ``|c|`` and point ``c/|c|``.

    A zero coordinate gets attention 0 and the group identity as its point.
    """
    if group.kind not in ("sign", "circle"):
        raise ValueError(f"{group.kind} group has no composed form")
    dtype = np.complex128 if group.kind == "circle" else np.float64
    ea, ep = _split(np.asarray(entity_vectors, dtype=dtype), group)
    ra, rp = _split(np.asarray(relation_vectors, dtype=dtype), group)
    return AkglgModel(group, ea, ep, ra, rp, **kwargs)


def decompose_complex(entity_vectors, relation_vectors, **kwargs) -> AkglgModel:
    """ComplEx vectors -> attention on the torus (circle group)."""
    return decompose(CIRCLE, entity_vectors, relation_vectors, **kwargs)


def compose_complex(model: AkglgModel) -> tuple[np.ndarray, np.ndarray]:
    if model.group.kind != "circle":
        raise ValueError("compose_complex needs a circle-group model")
    return model.composed()


@dataclass
class EquivalenceReport:
    n_checked: int
    max_deviation: float
    worst_triple: tuple[int, int, int] | None
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance

    def __str__(self) -> str:
        status = "ok" if self.passed else "MISMATCH"
        return (f"{status}: {self.n_checked} triples, max |deviation| = {self.max_deviation:.3e}"
                f" (worst triple {self.worst_triple}, tolerance {self.tolerance:g})")


def factored_scores(model: AkglgModel, triples: np.ndarray) -> np.ndarray:
    """DistMult (sign) or ComplEx (circle) scores from the composed vectors."""
    ent, rel = model.composed()
    h, r, t = ent[triples[:, 0]], rel[triples[:, 1]], ent[triples[:, 2]]
    if model.group.kind == "circle":
        return np.real(np.sum(h * r * np.conj(t), axis=1))
    return np.sum(h * r * t, axis=1)


def akglg_scores(model: AkglgModel, triples: np.ndarray) -> np.ndarray:
    """Vectorised form of :meth:`AkglgModel.score_triple`."""
    g = model.group
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]
    w = model.entity_attention[h] * model.relation_attention[r] * model.entity_attention[t]
    sim = g.similarity(g.op(model.entity_points[h], model.relation_points[r]), model.entity_points[t])
    return np.sum(w * sim, axis=1)


def score_equivalence_check(model: AkglgModel, n_samples: int = 1000, seed: int = 0,
                            tolerance: float = 1e-9, triples: np.ndarray | None = None) -> EquivalenceReport:
    """Compare group-form scores with the factored bilinear form on sampled triples."""
    if model.group not in (SIGN, CIRCLE):
        raise ValueError("equivalence check applies to sign and circle groups only")
    if triples is None:
        rng = np.random.default_rng(seed)
        triples = np.stack([rng.integers(0, model.n_entities, n_samples),
                            rng.integers(0, model.n_relations, n_samples),
                            rng.integers(0, model.n_entities, n_samples)], axis=1)
    if len(triples) == 0:
        return EquivalenceReport(0, 0.0, None, tolerance)
    dev = np.abs(akglg_scores(model, triples) - factored_scores(model, triples))
    i = int(np.argmax(dev))
    return EquivalenceReport(len(triples), float(dev[i]), tuple(int(x) for x in triples[i]), tolerance)


__all__ = ["AkglgModel", "decompose", "decompose_complex", "compose_complex",
           "score_equivalence_check", "factored_scores", "akglg_scores", "EquivalenceReport",
           "SIGN", "CIRCLE", "LINE"]
