"""Run configuration.

Config files are flat ``key = value`` text; ``#`` starts a comment and grid
values are comma lists.  Keys are the long CLI flag names with dashes or
underscores, e.g.::

    dataset = data/WN18RR
    out = runs/wn18rr
    group = circle
    dim = 500
    reg = 0.001, 0.01, 0.05
    max_path_len = 1, 2, 3
    lambda = 0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def _floats(v):
    return tuple(float(x) for x in v)


def _ints(v):
    return tuple(int(x) for x in v)


@dataclass
class RunConfig:
    dataset: str | None = None
    out: str | None = None
    seed: int = 0
    workers: int = 1
    group: str = "circle"
    dim: int = 100
    epochs: int = 25
    batch_size: int = 1000
    learning_rate_embedding: float = 0.1
    init_scale: float = 1e-3
    reg: tuple = (0.001, 0.01, 0.05)
    max_path_len: tuple = (1, 2, 3)
    rules_per_relation: int = 1000
    expansion_cap: int = 4096
    paths_per_relation: int = 100
    learning_rate: tuple = (0.1, 0.01, 0.001)
    l2: tuple = (0.1, 0.01, 0.001)
    sr_batch_size: int = 100
    sr_batches: int = 500
    negatives: int = 50
    lam: tuple = tuple(round(0.1 * i, 1) for i in range(11))
    scorer: str = "embedding"
    split: str = "test"
    per_query: bool = False
    extra: dict = field(default_factory=dict)

    def given(self, key: str) -> bool:
        """True if ``key`` was set by a config file or flag rather than defaulted."""
        return key in self.extra.get("given", ())

    def hyper(self) -> dict:
        """Settings that shape stage outputs (recorded in sidecar files)."""
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name not in ("dataset", "out", "extra", "per_query", "workers")}


_CONVERT = {
    "seed": int, "workers": int, "dim": int, "epochs": int, "batch_size": int,
    "learning_rate_embedding": float, "init_scale": float, "rules_per_relation": int,
    "expansion_cap": int, "paths_per_relation": int, "sr_batch_size": int, "sr_batches": int,
    "negatives": int, "reg": _floats, "max_path_len": _ints, "learning_rate": _floats, "l2": _floats,
    "lam": _floats,
}
_GRIDS = {"reg", "max_path_len", "learning_rate", "l2", "lam"}
_ALIASES = {"lambda": "lam"}


def normalize_key(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    return _ALIASES.get(key, key)


def coerce(key: str, value):
    """Convert a raw string (or list of strings) for ``key``."""
    if key in _GRIDS:
        items = value if isinstance(value, (list, tuple)) else str(value).split(",")
        items = [str(x).strip() for x in items if str(x).strip()]
        if not items:
            raise ConfigError(f"{key}: empty list")
        return _CONVERT[key](items)
    if key == "per_query":
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    conv = _CONVERT.get(key, str)
    try:
        return conv(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None


def read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[normalize_key(k)] = v.strip()
    return out


def build_config(file_values: dict, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)} - {"extra"}
    for source in (file_values, overrides):
        for k, v in source.items():
            if v is None:
                continue
            k = normalize_key(k)
            if k not in known:
                raise ConfigError(f"unknown configuration key {k!r}")
            setattr(cfg, k, coerce(k, v))
            cfg.extra.setdefault("given", set()).add(k)
    for k in ("dim", "epochs", "batch_size", "workers", "rules_per_relation", "paths_per_relation",
              "sr_batch_size", "sr_batches", "negatives", "expansion_cap"):
        if getattr(cfg, k) < 1:
            raise ConfigError(f"{k} must be positive")
    if cfg.group not in ("sign", "circle", "line"):
        raise ConfigError(f"unknown group {cfg.group!r}")
    if cfg.scorer not in ("embedding", "ree", "pbf"):
        raise ConfigError(f"unknown scorer {cfg.scorer!r}")
    if any(not 0 <= x <= 1 for x in cfg.lam):
        raise ConfigError("lambda values must lie in [0, 1]")
    if any(x < 1 for x in cfg.max_path_len):
        raise ConfigError("max_path_len values must be at least 1")
    return cfg
