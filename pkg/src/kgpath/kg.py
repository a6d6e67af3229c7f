"""Knowledge-graph ingestion, inverse augmentation and read-only indexes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
INVERSE_PREFIX = "INV:"


class DatasetError(ValueError):
    """Raised for unreadable or malformed dataset files."""


@dataclass(frozen=True)
class Adjacency:
    """CSR view of a triple array sorted by (head, relation, tail)."""

    indptr: np.ndarray
    rel: np.ndarray
    tail: np.ndarray

    def tails(self, head: int, relation: int) -> np.ndarray:
        lo, hi = self.indptr[head], self.indptr[head + 1]
        rels = self.rel[lo:hi]
        a = np.searchsorted(rels, relation, side="left")
        b = np.searchsorted(rels, relation, side="right")
        return self.tail[lo + a:lo + b]

    def neighbors(self, head: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[head], self.indptr[head + 1]
        return self.rel[lo:hi], self.tail[lo:hi]


def _build_adjacency(triples: np.ndarray, n_entities: int) -> Adjacency:
    order = np.lexsort((triples[:, 2], triples[:, 1], triples[:, 0]))
    t = triples[order]
    counts = np.bincount(t[:, 0], minlength=n_entities)
    indptr = np.zeros(n_entities + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return Adjacency(indptr, np.ascontiguousarray(t[:, 1]), np.ascontiguousarray(t[:, 2]))


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Interned triples for the three benchmark splits.

    Relation ids ``0..R-1`` are the relations read from file.  After
    :func:`augment_inverses` the ids ``R..2R-1`` denote their inverses, so
    ``inverse(r) = r + R`` for a forward relation and ``r - R`` otherwise.
    """

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    augmented: bool = False

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_raw_relations(self) -> int:
        return len(self.relations)

    @property
    def n_relations(self) -> int:
        """Number of relation ids in use (doubles after augmentation)."""
        return 2 * len(self.relations) if self.augmented else len(self.relations)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise KeyError(f"unknown split {name!r}")
        return getattr(self, name)

    def inverse(self, r: int) -> int:
        R = self.n_raw_relations
        if not 0 <= r < 2 * R:
            raise IndexError(f"relation id {r} out of range")
        return r + R if r < R else r - R

    def is_inverse(self, r: int) -> bool:
        return r >= self.n_raw_relations

    def relation_name(self, r: int) -> str:
        R = self.n_raw_relations
        if r < R:
            return self.relations[r]
        return INVERSE_PREFIX + self.relations[r - R]

    def relation_id(self, name: str) -> int:
        if name.startswith(INVERSE_PREFIX):
            return self.relation_index[name[len(INVERSE_PREFIX):]] + self.n_raw_relations
        return self.relation_index[name]

    @cached_property
    def entity_index(self) -> dict[str, int]:
        return {e: i for i, e in enumerate(self.entities)}

    @cached_property
    def relation_index(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.relations)}

    @cached_property
    def adjacency(self) -> Adjacency:
        """head -> (relation, tail) index over the train split."""
        return _build_adjacency(self.train, self.n_entities)

    @cached_property
    def _by_relation(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.train[:, 1], kind="stable")
        counts = np.bincount(self.train[:, 1], minlength=self.n_relations)
        ptr = np.zeros(self.n_relations + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        return self.train[order], ptr

    def triples_of(self, r: int) -> np.ndarray:
        """Train triples whose relation is ``r``."""
        t, ptr = self._by_relation
        return t[ptr[r]:ptr[r + 1]]

    def has_triple(self, h: int, r: int, t: int) -> bool:
        tails = self.adjacency.tails(h, r)
        i = np.searchsorted(tails, t)
        return bool(i < len(tails) and tails[i] == t)

    def raw_split(self, name: str) -> np.ndarray:
        """A split without the inverse triples added by augmentation."""
        t = self.split(name)
        return t[t[:, 1] < self.n_raw_relations] if self.augmented else t

    def name_triples(self, triples: np.ndarray) -> list[tuple[str, str, str]]:
        return [(self.entities[h], self.relation_name(r), self.entities[t]) for h, r, t in triples]


def _read_split(path: Path, entity_index: dict, relation_index: dict,
                entities: list, relations: list) -> np.ndarray:
    rows = []
    seen = set()
    n_dup = 0
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DatasetError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            h, r, t = parts
            if r.startswith(INVERSE_PREFIX):
                raise DatasetError(f"{path}:{lineno}: relation names may not start with {INVERSE_PREFIX!r}")
            if (h, r, t) in seen:
                n_dup += 1
                continue
            seen.add((h, r, t))
            ids = []
            for name, index, names in ((h, entity_index, entities), (r, relation_index, relations),
                                       (t, entity_index, entities)):
                i = index.get(name)
                if i is None:
                    i = index[name] = len(names)
                    names.append(name)
                ids.append(i)
            rows.append(ids)
    if n_dup:
        logger.warning("%s: dropped %d duplicate line(s)", path, n_dup)
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


def load_dataset(train_path, valid_path, test_path) -> KnowledgeGraph:
    """Parse three ``head<TAB>relation<TAB>tail`` files into an interned graph.

    Ids are assigned by first appearance in train, then valid, then test.  The
    returned graph is not yet augmented with inverse relations.
    """
    entity_index: dict[str, int] = {}
    relation_index: dict[str, int] = {}
    entities: list[str] = []
    relations: list[str] = []
    splits = [_read_split(Path(p), entity_index, relation_index, entities, relations)
              for p in (train_path, valid_path, test_path)]
    if len(splits[0]) == 0:
        raise DatasetError(f"{train_path}: train split is empty")
    return KnowledgeGraph(tuple(entities), tuple(relations), *splits)


def dataset_files(directory) -> tuple[Path, Path, Path]:
    """Locate ``train/valid/test`` files (``.txt`` or ``.tsv``) in a directory."""
    d = Path(directory)
    if not d.is_dir():
        raise DatasetError(f"dataset directory {d} does not exist")
    found = []
    for name in SPLITS:
        for ext in (".txt", ".tsv", ""):
            p = d / f"{name}{ext}"
            if p.is_file():
                found.append(p)
                break
        else:
            raise DatasetError(f"{d}: missing {name}.txt")
    return tuple(found)


def load_dataset_dir(directory) -> KnowledgeGraph:
    return load_dataset(*dataset_files(directory))


def save_dataset(kg: KnowledgeGraph, directory) -> None:
    """Write the raw (non-inverse) triples back out as TSV files."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in SPLITS:
        with open(d / f"{name}.txt", "w", encoding="utf-8") as fh:
            for h, r, t in kg.raw_split(name):
                fh.write(f"{kg.entities[h]}\t{kg.relations[r]}\t{kg.entities[t]}\n")


def augment_inverses(kg: KnowledgeGraph) -> KnowledgeGraph:
    """Add ``(t, r^-1, h)`` for every ``(h, r, t)`` in every split."""
    if kg.augmented:
        raise ValueError("knowledge graph is already augmented with inverse relations")
    R = kg.n_raw_relations
    out = {}
    for name in SPLITS:
        t = kg.split(name)
        inv = np.stack([t[:, 2], t[:, 1] + R, t[:, 0]], axis=1)
        out[name] = np.concatenate([t, inv]).astype(np.int64)
    return replace(kg, augmented=True, **out)


@dataclass(frozen=True, eq=False)
class SimpleGraph:
    """Undirected entity graph with relation labels per directed edge slot.

    ``nbrs[indptr[a]:indptr[a+1]]`` are the sorted neighbours of ``a``; slot
    ``s`` in that range carries ``labels[label_ptr[s]:label_ptr[s+1]]``, the
    relation ids ``r`` with ``(a, r, nbrs[s])`` in the augmented train split.
    """

    n_nodes: int
    indptr: np.ndarray
    nbrs: np.ndarray
    label_ptr: np.ndarray
    labels: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.nbrs) // 2

    def neighbors(self, a: int) -> np.ndarray:
        return self.nbrs[self.indptr[a]:self.indptr[a + 1]]

    def slot(self, a: int, b: int) -> int:
        lo, hi = self.indptr[a], self.indptr[a + 1]
        i = lo + np.searchsorted(self.nbrs[lo:hi], b)
        if i >= hi or self.nbrs[i] != b:
            return -1
        return int(i)

    def edge_labels(self, a: int, b: int) -> np.ndarray:
        s = self.slot(a, b)
        if s < 0:
            return self.labels[:0]
        return self.labels[self.label_ptr[s]:self.label_ptr[s + 1]]

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for a in range(self.n_nodes):
            for b in self.neighbors(a):
                if a < b:
                    out.append((a, int(b)))
        return out


def to_simple_graph(kg: KnowledgeGraph) -> SimpleGraph:
    """Collapse the augmented train split to a simple undirected graph."""
    if not kg.augmented:
        raise ValueError("to_simple_graph needs an augmented knowledge graph")
    t = kg.train[kg.train[:, 0] != kg.train[:, 2]]
    order = np.lexsort((t[:, 1], t[:, 2], t[:, 0]))
    t = t[order]
    n = kg.n_entities
    keys = t[:, 0] * n + t[:, 2]
    new_slot = np.ones(len(keys), dtype=bool)
    new_slot[1:] = keys[1:] != keys[:-1]
    starts = np.flatnonzero(new_slot)
    label_ptr = np.append(starts, len(keys)).astype(np.int64)
    heads = t[starts, 0]
    nbrs = np.ascontiguousarray(t[starts, 2])
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=n), out=indptr[1:])
    return SimpleGraph(n, indptr, nbrs, label_ptr, np.ascontiguousarray(t[:, 1]))
