"""Relation-model files.

One file per relation, ``<model_dir>/relation_<id>.srm``: a single UTF-8 JSON
line (relation name, path list as relation names, config, flags, path
count) followed by the path weights as little-endian float64.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..kg import KnowledgeGraph
from .softmax import RelationModel, SoftmaxConfig


def model_path(directory, relation: int) -> Path:
    return Path(directory) / f"relation_{relation:05d}.srm"


def save_relation_model(model: RelationModel, kg: KnowledgeGraph, directory) -> Path:
    header = {"relation": kg.relation_name(model.relation),
              "paths": [[kg.relation_name(r) for r in p] for p in model.paths],
              "config": model.to_dict()["config"], "feature_starved": model.feature_starved,
              "n_paths": len(model.paths)}
    path = model_path(directory, model.relation)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(model.theta, dtype="<f8").tobytes())
    return path


def load_relation_model(path, kg: KnowledgeGraph) -> RelationModel:
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    header = json.loads(data[:nl])
    theta = np.frombuffer(data[nl + 1:], dtype="<f8").copy()
    if len(theta) != header["n_paths"]:
        raise ValueError(f"{path}: expected {header['n_paths']} weights, found {len(theta)}")
    paths = [tuple(kg.relation_id(r) for r in p) for p in header["paths"]]
    return RelationModel(kg.relation_id(header["relation"]), paths, theta,
                         SoftmaxConfig(**header["config"]), header["feature_starved"])


def load_relation_models(directory, kg: KnowledgeGraph) -> dict[int, RelationModel]:
    models = {}
    for p in sorted(Path(directory).glob("relation_*.srm")):
        m = load_relation_model(p, kg)
        models[m.relation] = m
    return models
