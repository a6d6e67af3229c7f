"""Candidate-rule extraction from injective groundings.

Every grounded rule with a body of length ``n`` is a closed walk through
``n + 1`` distinct entities, i.e. a cycle of the simple entity graph (a single
edge carrying two labels when ``n = 1``).  Cycles are found once each by
anchoring them at their smallest entity and joining two short paths that
meet at a common vertex; each cycle is then expanded into all labelled
rules it grounds.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .._jit import njit
from ..kg import KnowledgeGraph, SimpleGraph, to_simple_graph
from .rules import RuleSet

logger = logging.getLogger(__name__)

DEFAULT_EXPANSION_CAP = 4096
_DEDUP_EVERY = 1 << 22


@dataclass(frozen=True)
class MiningConfig:
    max_len: int = 3
    expansion_cap: int = DEFAULT_EXPANSION_CAP
    workers: int = 1

    def __post_init__(self):
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")
        if self.expansion_cap < 1:
            raise ValueError("expansion_cap must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def half_len(self) -> int:
        """Longest path joined into a cycle: ceil((max_len + 1) / 2)."""
        return (self.max_len + 2) // 2


@njit
def _slot(indptr, nbrs, a, b):
    lo = indptr[a]
    hi = indptr[a + 1]
    i = lo + np.searchsorted(nbrs[lo:hi], b)
    if i < hi and nbrs[i] == b:
        return i
    return -1


@njit
def _grow2d(buf, n):
    if n < buf.shape[0]:
        return buf
    out = np.full((2 * buf.shape[0], buf.shape[1]), -1, dtype=buf.dtype)
    out[:n] = buf[:n]
    return out


@njit
def _grow1d(buf, n):
    if n < buf.shape[0]:
        return buf
    out = np.empty(2 * buf.shape[0], dtype=buf.dtype)
    out[:n] = buf[:n]
    return out


@njit
def _anchor_paths(e, indptr, nbrs, k):
    """Simple paths from ``e`` of 1..k edges whose other vertices all exceed ``e``."""
    paths = np.full((16, k + 1), -1, dtype=np.int64)
    lens = np.empty(16, dtype=np.int64)
    n = 0
    stack_v = np.empty(k + 1, dtype=np.int64)
    stack_pos = np.empty(k + 1, dtype=np.int64)
    depth = 0
    stack_v[0] = e
    stack_pos[0] = indptr[e]
    while depth >= 0:
        v = stack_v[depth]
        pos = stack_pos[depth]
        if depth == k or pos >= indptr[v + 1]:
            depth -= 1
            continue
        stack_pos[depth] = pos + 1
        w = nbrs[pos]
        if w <= e:
            continue
        dup = False
        for j in range(1, depth + 1):
            if stack_v[j] == w:
                dup = True
                break
        if dup:
            continue
        depth += 1
        stack_v[depth] = w
        stack_pos[depth] = indptr[w]
        paths = _grow2d(paths, n)
        if n >= lens.shape[0]:
            lens = _grow1d(lens, n)
        for j in range(depth + 1):
            paths[n, j] = stack_v[j]
        for j in range(depth + 1, k + 1):
            paths[n, j] = -1
        lens[n] = depth
        n += 1
    return paths[:n], lens[:n]


@njit
def anchor_cycles(e, indptr, nbrs, max_len):
    """All cycles of 2..max_len+1 edges whose smallest vertex is ``e``.

    A 2-edge cycle is a single simple-graph edge ``[e, b]`` (two parallel
    triples).  Longer cycles ``[e, v1, ..., v_{m-1}]`` are reported once, in
    the orientation with ``v1 < v_{m-1}``.
    """
    width = max_len + 1
    cycles = np.full((16, width), -1, dtype=np.int64)
    clen = np.empty(16, dtype=np.int64)
    nc = 0
    for s in range(indptr[e], indptr[e + 1]):
        b = nbrs[s]
        if b > e:
            cycles = _grow2d(cycles, nc)
            clen = _grow1d(clen, nc)
            cycles[nc, 0] = e
            cycles[nc, 1] = b
            clen[nc] = 2
            nc += 1
    if max_len >= 2:
        k = (max_len + 2) // 2
        paths, lens = _anchor_paths(e, indptr, nbrs, k)
        ends = np.empty(lens.shape[0], dtype=np.int64)
        for i in range(lens.shape[0]):
            ends[i] = paths[i, lens[i]]
        order = np.argsort(ends, kind="mergesort")
        g0 = 0
        npaths = order.shape[0]
        while g0 < npaths:
            g1 = g0
            while g1 < npaths and ends[order[g1]] == ends[order[g0]]:
                g1 += 1
            for a in range(g0, g1):
                i = order[a]
                l1 = lens[i]
                for b in range(g0, g1):
                    j = order[b]
                    l2 = lens[j]
                    m = l1 + l2
                    if i == j or l1 - l2 < 0 or l1 - l2 > 1 or m < 3 or m > max_len + 1:
                        continue
                    if paths[i, 1] >= paths[j, 1]:
                        continue
                    clash = False
                    for x in range(1, l1):
                        for y in range(1, l2):
                            if paths[i, x] == paths[j, y]:
                                clash = True
                    if clash:
                        continue
                    cycles = _grow2d(cycles, nc)
                    clen = _grow1d(clen, nc)
                    for x in range(l1 + 1):
                        cycles[nc, x] = paths[i, x]
                    for y in range(1, l2):
                        cycles[nc, l1 + y] = paths[j, l2 - y]
                    for x in range(m, width):
                        cycles[nc, x] = -1
                    clen[nc] = m
                    nc += 1
            g0 = g1
    return cycles[:nc], clen[:nc]


@njit
def _option_slots(cyc, m, i, forward, indptr, nbrs, body_slots):
    """Head slot and body slots when the head edge is cycle edge ``i``."""
    u = cyc[i]
    w = cyc[(i + 1) % m]
    if forward:
        # head w -> u, body walks w, c[i+2], ..., u
        head = _slot(indptr, nbrs, w, u)
        for j in range(m - 1):
            body_slots[j] = _slot(indptr, nbrs, cyc[(i + 1 + j) % m], cyc[(i + 2 + j) % m])
    else:
        # head u -> w, body walks u, c[i-1], ..., w
        head = _slot(indptr, nbrs, u, w)
        for j in range(m - 1):
            body_slots[j] = _slot(indptr, nbrs, cyc[(i - j) % m], cyc[(i - j - 1) % m])
    return head


@njit
def _expansion_size(cyc, m, indptr, nbrs, lptr):
    body_slots = np.empty(max(m - 1, 1), dtype=np.int64)
    total = 0
    n_heads = m if m > 2 else 1
    for i in range(n_heads):
        for fwd in range(2):
            hs = _option_slots(cyc, m, i, fwd == 1, indptr, nbrs, body_slots)
            nh = lptr[hs + 1] - lptr[hs]
            if m == 2:
                total += nh * (nh - 1)
            else:
                c = nh
                for j in range(m - 1):
                    c *= lptr[body_slots[j] + 1] - lptr[body_slots[j]]
                total += c
    return total


@njit
def _expand_cycle(cyc, m, indptr, nbrs, lptr, labels, base, out, n_out):
    body_slots = np.empty(max(m - 1, 1), dtype=np.int64)
    idx = np.zeros(max(m - 1, 1), dtype=np.int64)
    n_heads = m if m > 2 else 1
    for i in range(n_heads):
        for fwd in range(2):
            hs = _option_slots(cyc, m, i, fwd == 1, indptr, nbrs, body_slots)
            for j in range(m - 1):
                idx[j] = 0
            done = False
            while not done:
                body_code = 0
                mult = 1
                for j in range(m - 1):
                    body_code += (labels[lptr[body_slots[j]] + idx[j]] + 1) * mult
                    mult *= base
                for hp in range(lptr[hs], lptr[hs + 1]):
                    head = labels[hp]
                    if m == 2 and labels[lptr[body_slots[0]] + idx[0]] == head:
                        continue
                    out = _grow1d(out, n_out)
                    out[n_out] = head + base * body_code
                    n_out += 1
                # odometer over body labels
                j = 0
                while True:
                    if j == m - 1:
                        done = True
                        break
                    idx[j] += 1
                    if idx[j] < lptr[body_slots[j] + 1] - lptr[body_slots[j]]:
                        break
                    idx[j] = 0
                    j += 1
    return out, n_out


@njit
def mine_anchors(anchors, indptr, nbrs, lptr, labels, max_len, cap, base, dedup_every):
    """Encoded rules grounded by cycles anchored at ``anchors``.

    Returns ``(codes, n_cycles, n_skipped)``; codes are unique and sorted.
    """
    out = np.empty(1024, dtype=np.int64)
    n_out = 0
    n_cycles = 0
    n_skipped = 0
    for a in range(anchors.shape[0]):
        cycles, clen = anchor_cycles(anchors[a], indptr, nbrs, max_len)
        for c in range(clen.shape[0]):
            m = clen[c]
            n_cycles += 1
            if _expansion_size(cycles[c], m, indptr, nbrs, lptr) > cap:
                n_skipped += 1
                continue
            out, n_out = _expand_cycle(cycles[c], m, indptr, nbrs, lptr, labels, base, out, n_out)
        if n_out > dedup_every:
            u = np.unique(out[:n_out])
            n_out = u.shape[0]
            out[:n_out] = u
    return np.unique(out[:n_out]), n_cycles, n_skipped


def _code_base(n_relations: int, max_len: int) -> int:
    base = n_relations + 1
    if base ** (max_len + 1) >= 2 ** 62:
        raise ValueError(f"rules of length {max_len} over {n_relations} relations exceed the 64-bit rule code")
    return base


def decode_rules(codes: np.ndarray, base: int, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of the kernel's rule code: ``head + base * sum((body_j + 1) * base**j)``."""
    codes = np.asarray(codes, dtype=np.int64)
    heads = codes % base
    rest = codes // base
    bodies = np.full((len(codes), max_len), -1, dtype=np.int64)
    for j in range(max_len):
        bodies[:, j] = rest % base - 1
        rest //= base
    return bodies, heads


def encode_rules(bodies: np.ndarray, heads: np.ndarray, base: int) -> np.ndarray:
    code = np.zeros(len(heads), dtype=np.int64)
    mult = 1
    for j in range(bodies.shape[1]):
        code += (bodies[:, j] + 1) * mult
        mult *= base
    return heads + base * code


def _chunks(n: int, size: int) -> list[np.ndarray]:
    return [np.arange(s, min(s + size, n), dtype=np.int64) for s in range(0, n, size)]


def mine_candidate_rules(kg: KnowledgeGraph, cfg: MiningConfig = MiningConfig(),
                         graph: SimpleGraph | None = None, chunk_size: int = 256) -> RuleSet:
    """Every rule ``p => r`` with ``|p| <= cfg.max_len`` that has an injective grounding.

    Only the train split is used.  Anchors are processed in chunks on
    ``cfg.workers`` threads; the result does not depend on the schedule.
    ``stats`` on the returned set reports the number of entity cycles and of
    cycles skipped because their expansion exceeded ``cfg.expansion_cap``.
    """
    sg = graph if graph is not None else to_simple_graph(kg)
    base = _code_base(kg.n_relations, cfg.max_len)
    chunks = _chunks(sg.n_nodes, chunk_size)

    def work(anchors):
        return mine_anchors(anchors, sg.indptr, sg.nbrs, sg.label_ptr, sg.labels,
                            cfg.max_len, cfg.expansion_cap, base, _DEDUP_EVERY)

    if cfg.workers == 1:
        results = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, chunks))
    codes = np.unique(np.concatenate([r[0] for r in results] or [np.empty(0, np.int64)]))
    n_cycles = int(sum(r[1] for r in results))
    n_skipped = int(sum(r[2] for r in results))
    if n_skipped:
        logger.warning("skipped %d of %d cycles whose expansion exceeded %d rules",
                       n_skipped, n_cycles, cfg.expansion_cap)
    bodies, heads = decode_rules(codes, base, cfg.max_len)
    return RuleSet(bodies, heads, stats={"n_cycles": n_cycles, "n_skipped": n_skipped})


def enumerate_cycles(graph: SimpleGraph, max_len: int) -> list[tuple[int, ...]]:
    """Entity cycles with 2..max_len+1 edges, each reported once."""
    out = []
    for e in range(graph.n_nodes):
        cycles, lens = anchor_cycles(np.int64(e), graph.indptr, graph.nbrs, max_len)
        out.extend(tuple(int(v) for v in cycles[i, :lens[i]]) for i in range(len(lens)))
    return out
