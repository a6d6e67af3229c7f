import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgpath.akglg import CIRCLE, LINE, SIGN, AkglgModel
from kgpath.ree import (Rule, RuleSet, concat_ranked, path_attention, path_embedding, read_rules_tsv,
                        rule_confidence, score_rules, select_top_rules, split_by_head, write_rules_tsv)
from kgpath.ree.confidence import rank_order
from kgtools import make_kg


def rel_model(group, att, pts):
    att = np.asarray(att, dtype=float)
    pts = np.asarray(pts, dtype=group.dtype)
    return AkglgModel(group, np.ones((1, att.shape[1])), group.identity((1, att.shape[1])), att, pts)


def random_model(group, rng, R=6, n=5, zero_frac=0.0):
    att = rng.uniform(0, 2, (R, n))
    att[rng.random((R, n)) < zero_frac] = 0.0
    if group is CIRCLE:
        pts = np.exp(1j * rng.uniform(-np.pi, np.pi, (R, n)))
    elif group is SIGN:
        pts = rng.choice([-1.0, 1.0], (R, n))
    else:
        pts = rng.normal(size=(R, n))
    return rel_model(group, att, pts)


def oracle_confidence(model, body, head):
    """Direct transcription with plain Python products and powers."""
    n = model.dim
    w = []
    for i in range(n):
        prod = 1.0
        for r in body:
            prod *= model.relation_attention[r, i]
        w.append(prod ** (1.0 / len(body)))
    norm = math.sqrt(sum(x * x for x in w))
    w = [x / norm for x in w] if norm > 0 else [0.0] * n
    total = 0.0
    for i in range(n):
        g = model.relation_points[body[0], i]
        for r in body[1:]:
            g = g + model.relation_points[r, i] if model.group is LINE else g * model.relation_points[r, i]
        gh = model.relation_points[head, i]
        if model.group is CIRCLE:
            d = (g * np.conj(gh)).real
        elif model.group is SIGN:
            d = 1.0 if g == gh else -1.0
        else:
            d = -(g - gh) ** 2
        total += w[i] * model.relation_attention[head, i] * d
    return total


def test_single_relation_path_embedding_is_the_point(rng):
    m = random_model(CIRCLE, rng)
    assert np.array_equal(path_embedding(m, [3]), m.relation_points[3])


def test_line_path_embedding_adds():
    m = rel_model(LINE, [[1.0], [1.0]], [[0.2], [0.3]])
    assert path_embedding(m, [0, 1])[0] == pytest.approx(0.5)


def test_circle_path_embedding_matches_fold(rng):
    m = random_model(CIRCLE, rng)
    want = m.relation_points[1] * m.relation_points[4] * m.relation_points[1]
    assert np.max(np.abs(path_embedding(m, [1, 4, 1]) - want)) < 1e-12


def test_path_attention_examples():
    m = rel_model(LINE, [[4.0, 0.0], [1.0, 1.0]], np.zeros((2, 2)))
    assert np.allclose(path_attention(m, [0, 1]), [1.0, 0.0])
    assert np.allclose(path_attention(m, [1]), [1 / math.sqrt(2)] * 2)
    assert path_attention(m, [0, 1])[1] == 0.0


def test_all_zero_path_attention_stays_zero():
    m = rel_model(LINE, [[1.0, 0.0], [0.0, 3.0]], np.zeros((2, 2)))
    assert np.array_equal(path_attention(m, [0, 1]), [0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), length=st.integers(1, 3))
def test_path_attention_norm_is_zero_or_one(seed, length):
    rng = np.random.default_rng(seed)
    m = random_model(SIGN, rng, zero_frac=0.4)
    p = rng.integers(0, m.n_relations, length)
    w = path_attention(m, p)
    assert min(abs(np.linalg.norm(w)), abs(np.linalg.norm(w) - 1)) < 1e-12
    assert np.all(w[np.any(m.relation_attention[p] == 0, axis=0)] == 0)


def test_self_rule_confidence_is_sqrt_two():
    m = rel_model(CIRCLE, [[1.0, 1.0]], [[1j, -1.0]])
    assert rule_confidence(m, Rule((0,), 0)) == pytest.approx(math.sqrt(2))


def test_zero_head_attention_annihilates(rng):
    m = random_model(CIRCLE, rng)
    m.relation_attention[2] = 0
    assert rule_confidence(m, Rule((0, 1), 2)) == 0.0


@pytest.mark.parametrize("group", [SIGN, CIRCLE, LINE], ids=lambda g: g.kind)
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_confidence_matches_oracle_and_vectorised_form(group, seed):
    rng = np.random.default_rng(seed)
    m = random_model(group, rng, zero_frac=0.2)
    rules = [Rule(tuple(int(x) for x in rng.integers(0, 6, int(rng.integers(1, 4)))), int(rng.integers(6)))
             for _ in range(12)]
    scored = score_rules(m, RuleSet.from_rules(rules), chunk_size=5)
    for i, r in enumerate(rules):
        want = oracle_confidence(m, r.body, r.head)
        assert abs(rule_confidence(m, r) - want) < 1e-12
        assert abs(scored.confidences[i] - want) < 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_self_rule_is_most_confident(seed):
    rng = np.random.default_rng(seed)
    att = rng.uniform(0.1, 2, (1, 4))
    pts = np.exp(1j * rng.uniform(-np.pi, np.pi, (2, 4)))
    m = rel_model(CIRCLE, np.vstack([att, att]), pts)
    assert rule_confidence(m, Rule((0,), 0)) >= rule_confidence(m, Rule((0,), 1)) - 1e-12


def ruleset(rows):
    return RuleSet.from_rules([Rule(b, h, c) for b, h, c in rows])


def test_select_top_rules_sorts_and_limits():
    rs = ruleset([((1,), 0, 2.0), ((2,), 0, 1.0), ((3,), 0, 3.0), ((1,), 5, 0.5)])
    top = select_top_rules(rs, per_head_limit=2)
    assert [r.body for r in top[0]] == [(3,), (1,)]
    assert [r.confidence for r in top[0]] == [3.0, 2.0]
    assert len(top[5]) == 1


def test_select_top_rules_undersupply_and_ties():
    rs = ruleset([((i % 4,), 1, float(i)) for i in range(17)])
    assert len(select_top_rules(rs, per_head_limit=1000)[1]) == 17
    tied = ruleset([((2, 0), 1, 1.0), ((3,), 1, 1.0), ((1, 5), 1, 1.0), ((1, 4), 1, 1.0)])
    order = [r.body for r in select_top_rules(tied, per_head_limit=10)[1]]
    assert order == [(3,), (1, 4), (1, 5), (2, 0)]


def test_select_top_rules_needs_scores_or_model():
    rs = RuleSet.from_rules([Rule((1,), 0)])
    with pytest.raises(ValueError):
        select_top_rules(rs)
    with pytest.raises(ValueError):
        select_top_rules(ruleset([((1,), 0, 1.0)]), per_head_limit=0)


def test_rules_tsv_round_trip(tmp_path):
    kg = make_kg([("a", "p", "b"), ("b", "q", "c")])
    rs = ruleset([((0, 1), 2, 0.1 + 0.2), ((3,), 0, -1.5), ((1,), 2, 7.25), ((2, 1, 0), 2, 7.25)])
    ranked = concat_ranked(select_top_rules(rs))
    write_rules_tsv(ranked, kg, tmp_path / "r.tsv")
    lines = (tmp_path / "r.tsv").read_text().splitlines()
    assert lines[0] == "head_relation\tbody\tconfidence"
    assert lines[1] == "p\tINV:q\t-1.5"
    assert lines[2] == "INV:p\tq\t7.25"
    back = read_rules_tsv(tmp_path / "r.tsv", kg)
    assert back.to_set() == ranked.to_set()
    assert np.array_equal(back.confidences, ranked.confidences)
    again = split_by_head(back)
    assert [r.body for r in again[2]] == [(1,), (2, 1, 0), (0, 1)]
    assert [back.heads[i] for i in rank_order(back)][:2] == [2, 2]


def test_rules_tsv_rejects_unknown_relation(tmp_path):
    kg = make_kg([("a", "p", "b")])
    (tmp_path / "r.tsv").write_text("head_relation\tbody\tconfidence\np\tzzz\t1.0\n")
    with pytest.raises(ValueError, match=":2"):
        read_rules_tsv(tmp_path / "r.tsv", kg)
