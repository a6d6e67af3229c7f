"""Binary model file.

Layout (all integers and floats little-endian)::

    bytes 0-7     magic b"AKGLGv1\\n"
    uint32        length H of the JSON header
    H bytes       UTF-8 JSON: group, dim, n_entities, n_relations, meta
    float64[E*n]  entity attention, row-major
    points[E*n]   entity points: float64, or complex128 (re, im pairs) for circle
    float64[R*n]  relation attention (R counts inverse relations)
    points[R*n]   relation points
    uint32        length M of the id-map JSON
    M bytes       UTF-8 JSON {"entities": [...], "relations": [...]}

JSON is written with sorted keys so identical models give identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .groups import get_group
from .model import AkglgModel

MAGIC = b"AKGLGv1\n"


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_model(model: AkglgModel, path) -> None:
    complex_points = model.group.kind == "circle"
    pdt = "<c16" if complex_points else "<f8"
    header = _dumps({"group": model.group.kind, "dim": model.dim, "n_entities": model.n_entities,
                     "n_relations": model.n_relations, "meta": model.meta})
    idmap = _dumps({"entities": list(model.entities), "relations": list(model.relations)})
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(model.entity_attention, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.entity_points, dtype=pdt).tobytes())
        fh.write(np.ascontiguousarray(model.relation_attention, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.relation_points, dtype=pdt).tobytes())
        fh.write(struct.pack("<I", len(idmap)))
        fh.write(idmap)


def load_model(path) -> AkglgModel:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not an AKGLG model file")
    pos = 8

    def take(n):
        nonlocal pos
        chunk = data[pos:pos + n]
        if len(chunk) != n:
            raise ValueError(f"{path}: truncated model file")
        pos += n
        return chunk

    (hlen,) = struct.unpack("<I", take(4))
    header = json.loads(take(hlen))
    group = get_group(header["group"])
    n, E, R = header["dim"], header["n_entities"], header["n_relations"]
    pdt = np.dtype("<c16") if group.kind == "circle" else np.dtype("<f8")

    def array(rows, dt):
        return np.frombuffer(take(rows * n * dt.itemsize), dtype=dt).reshape(rows, n).copy()

    ea = array(E, np.dtype("<f8"))
    ep = array(E, pdt)
    ra = array(R, np.dtype("<f8"))
    rp = array(R, pdt)
    (mlen,) = struct.unpack("<I", take(4))
    idmap = json.loads(take(mlen))
    return AkglgModel(group, ea, ep, ra, rp, tuple(idmap["entities"]), tuple(idmap["relations"]),
                      meta=header["meta"])


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
