import json
import shutil

import numpy as np
import pytest

from kgpath.akglg import load_model, save_model
from kgpath.cli import main
from kgpath.config import ConfigError, build_config, read_config_file
from kgpath.kg import augment_inverses, load_dataset_dir
from kgpath.ree import read_rules_tsv
from kgtools import write_dataset

FAST = ["--dim", "8", "--epochs", "10", "--batch-size", "64", "--reg", "0.01"]
PBF_FAST = ["--sr-batches", "20", "--learning-rate", "0.1", "--l2", "0.01", "--negatives", "10"]


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def pipeline(family_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    base = ["--dataset", family_dir, "--out", out]
    assert run("train-embeddings", *base, *FAST) == 0
    assert run("mine-rules", *base, "--max-path-len", "1,2", "--rules-per-relation", "5") == 0
    assert run("train-pbf", *base, "--max-path-len", "1,2", *PBF_FAST) == 0
    for scorer in ("embedding", "ree", "pbf"):
        assert run("evaluate", *base, "--scorer", scorer, "--max-path-len", "1,2") == 0
    return family_dir, out


def test_missing_dataset_exits_2(tmp_path, capsys):
    assert run("train-embeddings", "--dataset", tmp_path / "nope", "--out", tmp_path / "o") == 2
    assert "does not exist" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert run("frobnicate") == 2
    assert run("evaluate", "--group", "torus") == 2
    assert run("evaluate", "--out", "x") == 2
    assert "--dataset is required" in capsys.readouterr().err


def test_outputs_exist(pipeline):
    _, out = pipeline
    for name in ("model.akglg", "train_log.tsv", "rules.tsv", "rules.len1.tsv", "rules.meta.json",
                 "pbf/summary.json", "metrics_embedding.json", "metrics_ree.json", "metrics_pbf.json"):
        assert (out / name).is_file(), name
    log = (out / "train_log.tsv").read_text().splitlines()
    assert log[0] == "reg\tepoch\tloss" and len(log) == 11


def test_model_reloads_and_reruns_are_byte_identical(pipeline, tmp_path):
    data, out = pipeline
    base = ["--dataset", data, "--out", tmp_path]
    assert run("train-embeddings", *base, *FAST) == 0
    assert (tmp_path / "model.akglg").read_bytes() == (out / "model.akglg").read_bytes()
    assert run("mine-rules", *base, "--max-path-len", "1,2", "--rules-per-relation", "5", "--workers", "8") == 0
    assert (tmp_path / "rules.tsv").read_text() == (out / "rules.tsv").read_text()
    assert run("train-pbf", *base, "--max-path-len", "1,2", *PBF_FAST) == 0
    for f in sorted((out / "pbf").iterdir()):
        assert (tmp_path / "pbf" / f.name).read_bytes() == f.read_bytes()
    assert run("evaluate", *base, "--scorer", "pbf") == 0
    assert (tmp_path / "metrics_pbf.json").read_text() == (out / "metrics_pbf.json").read_text()
    m = load_model(out / "model.akglg")
    assert m.meta["train_config"]["dim"] == 8


def test_rule_limit_and_content(pipeline):
    data, out = pipeline
    kg = augment_inverses(load_dataset_dir(data))
    rules = read_rules_tsv(out / "rules.tsv", kg)
    assert np.max(np.bincount(rules.heads)) <= 5
    assert rules.max_len == 2
    assert read_rules_tsv(out / "rules.len1.tsv", kg).max_len == 1
    meta = json.loads((out / "rules.meta.json").read_text())
    assert meta["rules_per_relation"] == 5 and meta["n_skipped"] == 0


def test_triangle_rules_file(tmp_path):
    data = write_dataset(tmp_path / "tri", [("a", "r1", "b"), ("b", "r2", "c"), ("a", "r", "c")])
    base = ["--dataset", data, "--out", tmp_path / "o"]
    assert run("train-embeddings", *base, "--dim", "2", "--epochs", "1", "--reg", "0.01") == 0
    assert run("mine-rules", *base, "--max-path-len", "2") == 0
    text = (tmp_path / "o" / "rules.tsv").read_text()
    assert "\nr\tr1,r2\t" in text
    assert "\nINV:r\tINV:r2,INV:r1\t" in text


def test_pbf_summary_and_lambda_one(pipeline, tmp_path):
    data, out = pipeline
    summary = json.loads((out / "pbf" / "summary.json").read_text())
    assert set(summary["selected"]) == {"lam", "max_len", "learning_rate", "l2"}
    assert isinstance(summary["feature_starved"], list)
    assert summary["embedding_valid_mrr"] is not None
    emb = json.loads((out / "metrics_embedding.json").read_text())
    shutil.copytree(out, tmp_path / "copy")
    assert run("evaluate", "--dataset", data, "--out", tmp_path / "copy", "--scorer", "pbf", "--lambda", "1") == 0
    pbf = json.loads((tmp_path / "copy" / "metrics_pbf.json").read_text())
    for k in ("mrr", "hits1", "hits3", "hits10", "n_queries"):
        assert pbf[k] == emb[k]
    assert pbf["config"]["lam"] == 1.0


def test_feature_starved_relations_are_listed(tmp_path):
    rows = [("a", "p", "b"), ("b", "q", "c"), ("a", "s", "c"), ("x", "t", "y")]
    data = write_dataset(tmp_path / "d", rows, valid=[("a", "s", "c")], test=[("a", "s", "c")])
    base = ["--dataset", data, "--out", tmp_path / "o"]
    assert run("train-embeddings", *base, "--dim", "2", "--epochs", "1", "--reg", "0.01") == 0
    assert run("mine-rules", *base, "--max-path-len", "2") == 0
    assert run("train-pbf", *base, "--max-path-len", "2", *PBF_FAST) == 0
    summary = json.loads((tmp_path / "o" / "pbf" / "summary.json").read_text())
    assert "t" in summary["feature_starved"] and "INV:t" in summary["feature_starved"]


def test_missing_rules_file_exits_2(family_dir, tmp_path, capsys):
    base = ["--dataset", family_dir, "--out", tmp_path]
    assert run("train-embeddings", *base, "--dim", "2", "--epochs", "1", "--reg", "0.01") == 0
    assert run("train-pbf", *base) == 2
    assert "rules.meta.json not found" in capsys.readouterr().err
    assert run("evaluate", *base, "--scorer", "ree") == 2


def test_stale_outputs_are_rejected(pipeline, tmp_path, capsys):
    data, out = pipeline
    shutil.copytree(out, tmp_path / "o")
    base = ["--dataset", data, "--out", tmp_path / "o"]
    assert run("train-embeddings", *base, *FAST[:-1], "0.05") == 0
    assert run("evaluate", *base, "--scorer", "ree") == 2
    assert run("evaluate", *base, "--scorer", "pbf") == 2
    assert "different model" in capsys.readouterr().err
    assert run("evaluate", *base, "--scorer", "embedding") == 0


def test_changed_dataset_is_rejected(pipeline, tmp_path, capsys):
    data, out = pipeline
    other = write_dataset(tmp_path / "d", [("a", "r", "b"), ("b", "r", "c")])
    assert run("mine-rules", "--dataset", other, "--out", out) == 2
    assert "different dataset" in capsys.readouterr().err


def test_tampered_rules_file_is_rejected(pipeline, tmp_path):
    data, out = pipeline
    shutil.copytree(out, tmp_path / "o")
    with open(tmp_path / "o" / "rules.tsv", "a") as fh:
        fh.write("parent\tparent\t0.0\n")
    assert run("evaluate", "--dataset", data, "--out", tmp_path / "o", "--scorer", "ree", "--max-path-len", "2") == 2


def test_non_finite_model_exits_3(pipeline, tmp_path, capsys):
    data, out = pipeline
    shutil.copytree(out, tmp_path / "o")
    m = load_model(tmp_path / "o" / "model.akglg")
    m.entity_attention[0, 0] = np.nan
    save_model(m, tmp_path / "o" / "model.akglg")
    assert run("evaluate", "--dataset", data, "--out", tmp_path / "o") == 3
    assert "numeric" in capsys.readouterr().err


def test_per_query_dump(pipeline, tmp_path):
    data, out = pipeline
    shutil.copytree(out, tmp_path / "o")
    assert run("evaluate", "--dataset", data, "--out", tmp_path / "o", "--scorer", "ree", "--per-query") == 0
    lines = (tmp_path / "o" / "metrics_ree.queries.tsv").read_text().splitlines()
    doc = json.loads((tmp_path / "o" / "metrics_ree.json").read_text())
    assert len(lines) - 1 == doc["n_queries"] == 30
    ranks = np.array([int(l.split("\t")[3]) for l in lines[1:]])
    assert float(np.mean(np.where(ranks > 0, 1.0 / np.maximum(ranks, 1), 0.0))) == doc["mrr"]


def test_config_file(pipeline, tmp_path):
    data, out = pipeline
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# toy run\ndataset = {data}\nout = {tmp_path / 'o'}\ndim = 8\nepochs = 10\n"
                   "batch-size = 64\nreg = 0.01\n")
    assert run("train-embeddings", "--config", cfg) == 0
    assert (tmp_path / "o" / "model.akglg").read_bytes() == (out / "model.akglg").read_bytes()
    assert run("train-embeddings", "--config", cfg, "--dim", "4") == 0
    assert load_model(tmp_path / "o" / "model.akglg").dim == 4
    cfg.write_text("colour = blue\n")
    assert run("train-embeddings", "--config", cfg) == 2


def test_config_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("lambda = 0, 0.5 ,1\nmax-path-len=1,3\nseed = 4  # trailing comment\n")
    cfg = build_config(read_config_file(p), {"seed": None, "dim": "16"})
    assert cfg.lam == (0.0, 0.5, 1.0) and cfg.max_path_len == (1, 3)
    assert cfg.seed == 4 and cfg.dim == 16
    assert cfg.given("lam") and not cfg.given("reg")
    for bad in ({"lam": "2"}, {"dim": "0"}, {"dim": "x"}, {"max_path_len": "0"}, {"reg": ""}):
        with pytest.raises(ConfigError):
            build_config({}, bad)
    p.write_text("just words\n")
    with pytest.raises(ConfigError, match=":1"):
        read_config_file(p)
