"""Command-line entry points: ``kgpath <stage> --dataset DIR --out DIR ...``.

Stages read and write one run directory::

    train-embeddings  model.akglg, train_log.tsv
    mine-rules        rules.tsv (and rules.len<L>.tsv for shorter limits), rules.meta.json
    train-pbf         pbf/relation_<id>.srm, pbf/summary.json
    evaluate          metrics_<scorer>.json, optionally metrics_<scorer>.queries.tsv

Each stage records digests of its inputs and refuses to run on top of
outputs that were produced from a different dataset or upstream artifact.
Exit codes: 0 success, 2 usage or input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .akglg import TrainConfig, file_digest, get_group, load_model, save_model, train
from .config import RunConfig, build_config, read_config_file
from .evaluation import (EmbeddingScorer, FilterIndex, PBFScorer, RuleScorer, evaluate,
                         evaluate_lambda_grid, select_hyperparameters)
from .kg import augment_inverses, dataset_files, load_dataset
from .pbf import SoftmaxConfig, load_relation_models, query_features, save_relation_model, train_relation_model
from .ree import (MiningConfig, concat_ranked, mine_candidate_rules, read_rules_tsv, score_rules,
                  select_top_rules, split_by_head, write_rules_tsv)

logger = logging.getLogger("kgpath")

MODEL_FILE = "model.akglg"
RULES_META = "rules.meta.json"
PBF_DIR = "pbf"
SCORERS = ("embedding", "ree", "pbf")


class InputError(Exception):
    """Missing, unreadable or stale inputs (exit code 2)."""


class NumericError(Exception):
    """Non-finite results (exit code 3)."""


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _json_load(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"{path} not found; run the earlier stage first") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def dataset_digest(directory) -> str:
    h = hashlib.sha256()
    for p in dataset_files(directory):
        h.update(p.name.encode() + b"\0")
        h.update(p.read_bytes())
    return h.hexdigest()


def _load_kg(cfg: RunConfig):
    if not cfg.dataset:
        raise InputError("--dataset is required")
    kg = augment_inverses(load_dataset(*dataset_files(cfg.dataset)))
    return kg, dataset_digest(cfg.dataset)


def _out_dir(cfg: RunConfig, create: bool = False) -> Path:
    if not cfg.out:
        raise InputError("--out is required")
    out = Path(cfg.out)
    if create:
        out.mkdir(parents=True, exist_ok=True)
    elif not out.is_dir():
        raise InputError(f"output directory {out} does not exist; run train-embeddings first")
    return out


def _load_checked_model(out: Path, digest: str):
    path = out / MODEL_FILE
    if not path.is_file():
        raise InputError(f"{path} not found; run train-embeddings first")
    try:
        model = load_model(path)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if model.meta.get("dataset_digest") != digest:
        raise InputError(f"{path} was trained on a different dataset; rerun train-embeddings")
    for a in (model.entity_attention, model.entity_points, model.relation_attention, model.relation_points):
        if not np.all(np.isfinite(a)):
            raise NumericError(f"{path} holds non-finite parameters")
    return model, file_digest(path)


def _rules_meta(out: Path, digest: str, model_sha: str) -> dict:
    meta = _json_load(out / RULES_META)
    if meta.get("dataset_digest") != digest or meta.get("model_sha256") != model_sha:
        raise InputError(f"{out / RULES_META} belongs to a different model or dataset; rerun mine-rules")
    return meta


def _rules_file(out: Path, meta: dict, max_len: int) -> tuple[Path, str]:
    entry = meta["files"].get(str(max_len))
    if entry is None:
        have = ",".join(sorted(meta["files"]))
        raise InputError(f"no rules mined for path limit {max_len} (have {have}); rerun mine-rules")
    path = out / entry["file"]
    if not path.is_file():
        raise InputError(f"{path} not found; rerun mine-rules")
    sha = file_digest(path)
    if sha != entry["sha256"]:
        raise InputError(f"{path} does not match {RULES_META}; rerun mine-rules")
    return path, sha


def _limits(cfg: RunConfig, meta: dict) -> list[int]:
    """Path limits to consider: the requested ones, else all that were mined."""
    return sorted(set(cfg.max_path_len)) if cfg.given("max_path_len") else list(meta["max_path_len"])


def _check_mrr(value: float, what: str) -> float:
    if not np.isfinite(value):
        raise NumericError(f"non-finite {what}")
    return value


# ---------------------------------------------------------------- stages

def cmd_train_embeddings(cfg: RunConfig) -> int:
    kg, digest = _load_kg(cfg)
    out = _out_dir(cfg, create=True)
    group = get_group(cfg.group)
    valid = kg.raw_split("valid")
    filters = FilterIndex(kg) if len(cfg.reg) > 1 else None
    log_rows, results = [], []
    best = None
    for reg in cfg.reg:
        tc = TrainConfig(dim=cfg.dim, reg=reg, learning_rate=cfg.learning_rate_embedding,
                         epochs=cfg.epochs, batch_size=cfg.batch_size, init_scale=cfg.init_scale,
                         seed=cfg.seed)
        model = train(kg, group, tc)
        log_rows += [(reg, e, loss) for e, loss in enumerate(model.history)]
        if filters is None:
            best = (model, None)
            continue
        mrr = _check_mrr(evaluate(EmbeddingScorer(model), valid, kg, filters, workers=cfg.workers).mrr,
                         "validation MRR")
        logger.info("reg %g: validation MRR %.4f", reg, mrr)
        results.append({"reg": reg, "valid_mrr": mrr})
        # keep only the current winner in memory; ties go to the smaller coefficient
        if best is None or (mrr, -reg) > (best[1], -best[0].meta["train_config"]["reg"]):
            best = (model, mrr)
    model = best[0]
    model.meta = {**model.meta, "dataset_digest": digest, "reg_selection": results}
    save_model(model, out / MODEL_FILE)
    with open(out / "train_log.tsv", "w", encoding="utf-8") as fh:
        fh.write("reg\tepoch\tloss\n")
        for reg, e, loss in log_rows:
            fh.write(f"{reg!r}\t{e}\t{loss!r}\n")
    logger.info("wrote %s (reg %g)", out / MODEL_FILE, model.meta["train_config"]["reg"])
    return 0


def cmd_mine_rules(cfg: RunConfig) -> int:
    kg, digest = _load_kg(cfg)
    out = _out_dir(cfg)
    model, model_sha = _load_checked_model(out, digest)
    limits = sorted(set(cfg.max_path_len))
    mc = MiningConfig(max_len=limits[-1], expansion_cap=cfg.expansion_cap, workers=cfg.workers)
    candidates = mine_candidate_rules(kg, mc)
    scored = score_rules(model, candidates)
    if len(scored) and not np.all(np.isfinite(scored.confidences)):
        raise NumericError("non-finite rule confidence")
    files = {}
    for L in limits:
        top = concat_ranked(select_top_rules(scored.max_body(L), per_head_limit=cfg.rules_per_relation))
        name = "rules.tsv" if L == limits[-1] else f"rules.len{L}.tsv"
        write_rules_tsv(top, kg, out / name)
        files[str(L)] = {"file": name, "sha256": file_digest(out / name), "n_rules": len(top)}
    meta = {"dataset_digest": digest, "model_sha256": model_sha, "max_path_len": limits,
            "rules_per_relation": cfg.rules_per_relation, "expansion_cap": cfg.expansion_cap,
            "n_candidates": len(candidates), **candidates.stats, "files": files}
    _json_dump(meta, out / RULES_META)
    logger.info("mined %d candidate rules from %d cycles (%d skipped)", len(candidates),
                candidates.stats["n_cycles"], candidates.stats["n_skipped"])
    return 0


def _top_paths(rules_path: Path, kg, per_relation: int) -> dict[int, list[tuple[int, ...]]]:
    ranked = split_by_head(read_rules_tsv(rules_path, kg))
    out = {}
    for r in range(kg.n_relations):
        rs = ranked.get(r)
        out[r] = [] if rs is None else [rs.body(i) for i in range(min(per_relation, len(rs)))]
    return out


def _train_features(kg, paths: dict) -> dict[int, dict]:
    feats = {}
    for r, p in paths.items():
        if not p:
            continue
        heads = np.unique(kg.triples_of(r)[:, 0])
        feats[r] = dict(zip(heads.tolist(), query_features(kg, heads, p)))
    return feats


def cmd_train_pbf(cfg: RunConfig) -> int:
    kg, digest = _load_kg(cfg)
    out = _out_dir(cfg)
    model, model_sha = _load_checked_model(out, digest)
    meta = _rules_meta(out, digest, model_sha)
    limits = _limits(cfg, meta)
    rule_files = {L: _rules_file(out, meta, L) for L in limits}
    valid = kg.raw_split("valid")
    filters = FilterIndex(kg)
    table, trained = {}, {}
    for L in limits:
        paths = _top_paths(rule_files[L][0], kg, cfg.paths_per_relation)
        train_feats = _train_features(kg, paths)
        valid_cache: dict = {}
        for lr in cfg.learning_rate:
            for l2 in cfg.l2:
                sc = SoftmaxConfig(learning_rate=lr, l2=l2, batch_size=cfg.sr_batch_size,
                                   n_batches=cfg.sr_batches, n_negatives=cfg.negatives, seed=cfg.seed)
                models = {r: train_relation_model(kg, r, paths[r], sc, features=train_feats.get(r))
                          for r in range(kg.n_relations)}
                for m in models.values():
                    if not np.all(np.isfinite(m.theta)):
                        raise NumericError(f"softmax regression for {kg.relation_name(m.relation)} diverged")
                scorer = PBFScorer(model, kg, models, features=valid_cache)
                reports = evaluate_lambda_grid(scorer, valid, kg, cfg.lam, filters)
                for lam, rep in reports.items():
                    table[(L, lr, l2, lam)] = _check_mrr(rep.mrr, "validation MRR")
                trained[(L, lr, l2)] = models
                logger.info("L=%d lr=%g l2=%g: best validation MRR %.4f", L, lr, l2,
                            max(r.mrr for r in reports.values()))
    grid = {"lam": cfg.lam, "max_len": limits, "learning_rate": cfg.learning_rate, "l2": cfg.l2}
    best, _ = select_hyperparameters(
        grid, lambda c: table[(c["max_len"], c["learning_rate"], c["l2"], c["lam"])])
    models = trained[(best["max_len"], best["learning_rate"], best["l2"])]
    pdir = out / PBF_DIR
    pdir.mkdir(exist_ok=True)
    for old in pdir.glob("relation_*.srm"):
        old.unlink()
    for r in sorted(models):
        save_relation_model(models[r], kg, pdir)
    starved = [kg.relation_name(r) for r in sorted(models) if models[r].feature_starved]
    summary = {
        "dataset_digest": digest, "model_sha256": model_sha,
        "rules_sha256": rule_files[best["max_len"]][1], "rules_file": rule_files[best["max_len"]][0].name,
        "selected": best,
        "valid_mrr": table[(best["max_len"], best["learning_rate"], best["l2"], best["lam"])],
        "embedding_valid_mrr": (table[(limits[0], cfg.learning_rate[0], cfg.l2[0], 1.0)]
                                if 1.0 in cfg.lam else None),
        "validation": [{"max_len": L, "learning_rate": lr, "l2": l2, "lam": lam, "mrr": v}
                       for (L, lr, l2, lam), v in sorted(table.items())],
        "paths_per_relation": cfg.paths_per_relation, "feature_starved": starved,
        "n_relations": len(models),
    }
    _json_dump(summary, pdir / "summary.json")
    if starved:
        logger.warning("%d relation(s) have no usable training features", len(starved))
    return 0


def _ree_scorer(cfg, kg, out, digest, model_sha, filters):
    meta = _rules_meta(out, digest, model_sha)
    limits = _limits(cfg, meta)
    scorers = {L: RuleScorer(kg, split_by_head(read_rules_tsv(_rules_file(out, meta, L)[0], kg)))
               for L in limits}
    info = {"rules_per_relation": meta["rules_per_relation"]}
    if len(limits) == 1:
        return scorers[limits[0]], {**info, "max_path_len": limits[0]}
    valid = kg.raw_split("valid")
    mrr = {L: _check_mrr(evaluate(s, valid, kg, filters, workers=cfg.workers).mrr, "validation MRR")
           for L, s in scorers.items()}
    best, _ = select_hyperparameters({"max_len": limits}, lambda c: mrr[c["max_len"]])
    L = best["max_len"]
    return scorers[L], {**info, "max_path_len": L, "valid_mrr": {str(k): v for k, v in mrr.items()}}


def _pbf_scorer(cfg, kg, out, digest, model, model_sha, filters):
    summary = _json_load(out / PBF_DIR / "summary.json")
    if summary.get("dataset_digest") != digest or summary.get("model_sha256") != model_sha:
        raise InputError("pbf/summary.json belongs to a different model or dataset; rerun train-pbf")
    rules_path = out / summary["rules_file"]
    if not rules_path.is_file() or file_digest(rules_path) != summary["rules_sha256"]:
        raise InputError(f"{rules_path} changed since train-pbf; rerun train-pbf")
    models = load_relation_models(out / PBF_DIR, kg)
    if len(models) != summary["n_relations"]:
        raise InputError(f"{out / PBF_DIR}: expected {summary['n_relations']} relation models, found {len(models)}")
    info = {k: summary["selected"][k] for k in ("max_len", "learning_rate", "l2")}
    if not cfg.given("lam"):
        lam = summary["selected"]["lam"]
    elif len(cfg.lam) == 1:
        lam = cfg.lam[0]
    else:
        reports = evaluate_lambda_grid(PBFScorer(model, kg, models), kg.raw_split("valid"), kg, cfg.lam, filters)
        best, _ = select_hyperparameters({"lam": cfg.lam}, lambda c: reports[c["lam"]].mrr)
        lam = best["lam"]
    return PBFScorer(model, kg, models, lam=lam), {**info, "lam": lam}


def cmd_evaluate(cfg: RunConfig) -> int:
    if cfg.scorer not in SCORERS:
        raise InputError(f"unknown scorer {cfg.scorer!r}")
    if cfg.split not in ("valid", "test"):
        raise InputError("--split must be valid or test")
    kg, digest = _load_kg(cfg)
    out = _out_dir(cfg)
    model, model_sha = _load_checked_model(out, digest)
    filters = FilterIndex(kg)
    if cfg.scorer == "embedding":
        scorer, info = EmbeddingScorer(model), {}
    elif cfg.scorer == "ree":
        scorer, info = _ree_scorer(cfg, kg, out, digest, model_sha, filters)
    else:
        scorer, info = _pbf_scorer(cfg, kg, out, digest, model, model_sha, filters)
    report = evaluate(scorer, kg.raw_split(cfg.split), kg, filters, workers=cfg.workers)
    _check_mrr(report.mrr, "MRR")
    config = {"group": model.group.kind, "dim": model.dim, "split": cfg.split,
              "reg": model.meta["train_config"]["reg"], "model_sha256": model_sha, **info}
    name = Path(cfg.dataset).resolve().name
    (out / f"metrics_{cfg.scorer}.json").write_text(report.to_json(name, cfg.scorer, config, cfg.seed),
                                                   encoding="utf-8")
    if cfg.per_query:
        report.write_tsv(out / f"metrics_{cfg.scorer}.queries.tsv", kg)
    m = report.metrics()
    print(f"{cfg.scorer} {cfg.split}: MRR {m['mrr']:.4f}  H@1 {m['hits1']:.4f}  "
          f"H@3 {m['hits3']:.4f}  H@10 {m['hits10']:.4f}  ({m['n_queries']} queries)")
    return 0


COMMANDS = {
    "train-embeddings": cmd_train_embeddings,
    "mine-rules": cmd_mine_rules,
    "train-pbf": cmd_train_pbf,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="flat key = value config file; flags override it")
    a("--dataset", help="directory with train/valid/test triple files")
    a("--out", help="run directory shared by all stages")
    a("--seed", type=int)
    a("--workers", type=int, help="threads for mining and evaluation")
    a("--group", choices=("sign", "circle", "line"))
    a("--dim", type=int)
    a("--epochs", type=int)
    a("--batch-size", type=int)
    a("--embedding-lr", dest="learning_rate_embedding", type=float)
    a("--init-scale", type=float)
    a("--reg", help="comma list of regularisation coefficients")
    a("--max-path-len", help="comma list of path-length limits")
    a("--rules-per-relation", type=int)
    a("--expansion-cap", type=int)
    a("--paths-per-relation", type=int)
    a("--learning-rate", help="comma list of softmax-regression learning rates")
    a("--l2", help="comma list of L2 coefficients")
    a("--sr-batch-size", type=int)
    a("--sr-batches", type=int)
    a("--negatives", type=int)
    a("--lambda", dest="lam", help="comma list of mixing weights")
    a("--scorer", choices=SCORERS)
    a("--split", choices=("valid", "test"))
    a("--per-query", action="store_const", const="true", help="also write a per-query rank TSV")
    a("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="kgpath", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    values = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = build_config(read_config_file(args.config) if args.config else {}, values)
        return COMMANDS[args.command](cfg)
    except (ValueError, InputError, OSError) as exc:
        print(f"kgpath: error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError) as exc:
        print(f"kgpath: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
