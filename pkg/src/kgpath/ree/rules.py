"""Rule containers and the rule TSV format."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..kg import KnowledgeGraph

TSV_HEADER = "head_relation\tbody\tconfidence"


@dataclass(frozen=True)
class Rule:
    """``body[0], ..., body[-1] => head``; equality ignores the confidence."""

    body: tuple[int, ...]
    head: int
    confidence: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.body) < 1:
            raise ValueError("a rule body needs at least one relation")

    def inverse_form(self, n_raw_relations: int) -> "Rule":
        """The same path read backwards, predicting heads of ``head``."""
        R = n_raw_relations

        def inv(r):
            return r + R if r < R else r - R

        return Rule(tuple(inv(r) for r in reversed(self.body)), inv(self.head), self.confidence)


class RuleSet:
    """A column-oriented collection of rules.

    ``bodies`` is ``(N, max_len)`` padded with ``-1``; ``heads`` has length N.
    """

    def __init__(self, bodies: np.ndarray, heads: np.ndarray, confidences: np.ndarray | None = None,
                 stats: dict | None = None):
        bodies = np.asarray(bodies, dtype=np.int64)
        if bodies.ndim != 2:
            raise ValueError("bodies must be a 2-d array")
        self.bodies = bodies
        self.heads = np.asarray(heads, dtype=np.int64)
        self.lengths = np.sum(bodies >= 0, axis=1).astype(np.int64)
        self.confidences = None if confidences is None else np.asarray(confidences, dtype=np.float64)
        self.stats = dict(stats or {})

    @classmethod
    def from_rules(cls, rules, max_len: int | None = None) -> "RuleSet":
        rules = list(rules)
        if max_len is None:
            max_len = max((len(r.body) for r in rules), default=1)
        bodies = np.full((len(rules), max_len), -1, dtype=np.int64)
        for i, r in enumerate(rules):
            bodies[i, :len(r.body)] = r.body
        heads = np.array([r.head for r in rules], dtype=np.int64)
        conf = None
        if rules and all(r.confidence is not None for r in rules):
            conf = np.array([r.confidence for r in rules])
        return cls(bodies, heads, conf)

    @property
    def max_len(self) -> int:
        return self.bodies.shape[1]

    def __len__(self) -> int:
        return len(self.heads)

    def body(self, i: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.bodies[i, :self.lengths[i]])

    def __getitem__(self, i: int) -> Rule:
        c = None if self.confidences is None else float(self.confidences[i])
        return Rule(self.body(i), int(self.heads[i]), c)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def to_set(self) -> set[Rule]:
        return set(self)

    def take(self, idx) -> "RuleSet":
        idx = np.asarray(idx)
        conf = None if self.confidences is None else self.confidences[idx]
        return RuleSet(self.bodies[idx], self.heads[idx], conf, self.stats)

    def with_confidences(self, confidences: np.ndarray) -> "RuleSet":
        if len(confidences) != len(self):
            raise ValueError("one confidence per rule expected")
        return RuleSet(self.bodies, self.heads, confidences, self.stats)

    def for_head(self, head: int) -> "RuleSet":
        return self.take(np.flatnonzero(self.heads == head))

    def max_body(self, length: int) -> "RuleSet":
        """Rules with body length at most ``length``."""
        return self.take(np.flatnonzero(self.lengths <= length))

    def __repr__(self) -> str:
        return f"RuleSet({len(self)} rules, max body length {self.max_len})"


def format_body(kg: KnowledgeGraph, body) -> str:
    return ",".join(kg.relation_name(int(r)) for r in body)


def write_rules_tsv(rules: RuleSet, kg: KnowledgeGraph, path) -> None:
    """Write rules sorted by head id, then confidence (descending).

    Rules must already be in their per-head ranked order or carry
    confidences; ties keep the incoming order.
    """
    conf = rules.confidences if rules.confidences is not None else np.zeros(len(rules))
    order = np.lexsort((np.arange(len(rules)), -conf, rules.heads))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TSV_HEADER + "\n")
        for i in order:
            fh.write(f"{kg.relation_name(int(rules.heads[i]))}\t{format_body(kg, rules.body(i))}\t"
                     f"{format(float(conf[i]), '.17g')}\n")


def read_rules_tsv(path, kg: KnowledgeGraph) -> RuleSet:
    rules = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\r\n")
        if first != TSV_HEADER:
            raise ValueError(f"{path}: missing header {TSV_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            head, body, conf = parts
            try:
                rule = Rule(tuple(kg.relation_id(b) for b in body.split(",")), kg.relation_id(head),
                            float(conf))
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: unknown relation {exc.args[0]!r}") from None
            rules.append(rule)
    return RuleSet.from_rules(rules)
