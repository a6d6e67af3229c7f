import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgpath.kg import (DatasetError, KnowledgeGraph, augment_inverses, dataset_files, load_dataset,
                       load_dataset_dir, save_dataset, to_simple_graph)
from kgtools import make_kg, random_kg, write_dataset


def test_two_lines_give_three_entities(tmp_path):
    d = write_dataset(tmp_path, [("a", "r", "b"), ("b", "r", "c")])
    kg = load_dataset_dir(d)
    assert (kg.n_entities, kg.n_raw_relations, len(kg.train)) == (3, 1, 2)
    assert not kg.augmented


def test_ids_follow_first_appearance_across_splits(tmp_path):
    d = write_dataset(tmp_path, [("b", "s", "a")], valid=[("c", "t", "a")], test=[("a", "s", "d")])
    kg = load_dataset_dir(d)
    assert kg.entities == ("b", "a", "c", "d")
    assert kg.relations == ("s", "t")
    assert kg.test.tolist() == [[1, 0, 3]]


def test_malformed_line_reports_line_number(tmp_path):
    d = write_dataset(tmp_path, [("a", "r", "b")])
    with open(d / "train.txt", "a") as fh:
        fh.write("a\tr\n")
    with pytest.raises(DatasetError, match=r"train.txt:2"):
        load_dataset_dir(d)


def test_empty_train_is_rejected(tmp_path):
    d = write_dataset(tmp_path, [], valid=[("a", "r", "b")])
    with pytest.raises(DatasetError, match="empty"):
        load_dataset_dir(d)


def test_missing_directory(tmp_path):
    with pytest.raises(DatasetError):
        dataset_files(tmp_path / "nope")


def test_duplicates_dropped_with_warning(tmp_path, caplog):
    d = write_dataset(tmp_path, [("a", "r", "b"), ("a", "r", "b"), ("b", "r", "a")])
    with caplog.at_level(logging.WARNING):
        kg = load_dataset_dir(d)
    assert len(kg.train) == 2
    assert "duplicate" in caplog.text.lower()


def test_inverse_prefix_in_file_is_rejected(tmp_path):
    d = write_dataset(tmp_path, [("a", "INV:r", "b")])
    with pytest.raises(DatasetError):
        load_dataset_dir(d)


def test_single_triple_augmentation():
    kg = make_kg([("a", "r", "b")])
    assert sorted(kg.name_triples(kg.train)) == [("a", "r", "b"), ("b", "INV:r", "a")]
    assert kg.n_relations == 2 and kg.n_raw_relations == 1


def test_empty_graph_augments_to_empty():
    empty = np.zeros((0, 3), dtype=np.int64)
    kg = augment_inverses(KnowledgeGraph((), (), empty, empty, empty))
    assert kg.augmented and len(kg.train) == 0 and kg.n_relations == 0


def test_double_augmentation_fails():
    with pytest.raises(ValueError):
        augment_inverses(make_kg([("a", "r", "b")]))


def test_relation_names_and_inverse():
    kg = make_kg([("a", "r", "b"), ("b", "s", "c")])
    for r in range(kg.n_relations):
        assert kg.inverse(kg.inverse(r)) == r
        assert kg.relation_id(kg.relation_name(r)) == r
    assert kg.relation_name(kg.inverse(0)) == "INV:r"
    assert kg.is_inverse(3) and not kg.is_inverse(1)


def test_round_trip_through_files(tmp_path, rng):
    kg = random_kg(rng, 12, 3, 40, augment=False)
    save_dataset(kg, tmp_path)
    back = load_dataset(*dataset_files(tmp_path))
    assert back.entities == kg.entities and back.relations == kg.relations
    for s in ("train", "valid", "test"):
        assert set(map(tuple, back.split(s).tolist())) == set(map(tuple, kg.split(s).tolist()))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_augmented_store_is_closed_under_inversion(seed):
    kg = random_kg(np.random.default_rng(seed), 10, 3, 25)
    rows = set(map(tuple, kg.train.tolist()))
    assert len(rows) == len(kg.train)
    for h, r, t in rows:
        assert (t, kg.inverse(r), h) in rows
        assert kg.has_triple(h, r, t)
        assert t in kg.adjacency.tails(h, r)
    assert len(kg.train) == 2 * len(kg.raw_split("train"))


def test_simple_graph_collapses_parallel_edges():
    kg = make_kg([("a", "r1", "b"), ("a", "r2", "b")])
    g = to_simple_graph(kg)
    assert g.n_edges == 1 and g.edges() == [(0, 1)]
    assert g.edge_labels(0, 1).tolist() == [0, 1]
    assert g.edge_labels(1, 0).tolist() == [2, 3]


def test_simple_graph_path_and_no_self_loops():
    kg = make_kg([("a", "r", "b"), ("b", "s", "c"), ("c", "s", "c")])
    g = to_simple_graph(kg)
    assert g.edges() == [(0, 1), (1, 2)]
    assert g.slot(2, 2) == -1


def test_simple_graph_requires_augmentation():
    with pytest.raises(ValueError):
        to_simple_graph(make_kg([("a", "r", "b")], augment=False))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_simple_graph_edges_match_pair_scan(seed):
    kg = random_kg(np.random.default_rng(seed), 20, 4, 40)
    g = to_simple_graph(kg)
    pairs = {(min(h, t), max(h, t)) for h, _, t in kg.train.tolist() if h != t}
    assert set(g.edges()) == pairs
    for a, b in pairs:
        want = sorted({r for h, r, t in kg.train.tolist() if (h, t) == (a, b)})
        assert g.edge_labels(a, b).tolist() == want
