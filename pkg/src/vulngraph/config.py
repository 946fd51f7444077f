"""Pipeline configuration: one JSON document with a ``version`` field."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

from .gat.model import ModelConfig
from .gat.train import TrainConfig

CONFIG_VERSION = 1
SEED_ENV = "VULNGRAPH_SEED"


@dataclass
class WalkConfig:
    length: int = 20
    walks_per_node: int = 10
    edge_set: str = "all"  # "all" or "metapath"
    attribution: str = "source"  # "source" or "root"

    def __post_init__(self):
        if self.length < 2 or self.walks_per_node < 1:
            raise ValueError("walk length must be >= 2 and walks_per_node >= 1")
        if self.edge_set not in ("all", "metapath"):
            raise ValueError("walk.edge_set must be 'all' or 'metapath'")
        if self.attribution not in ("source", "root"):
            raise ValueError("walk.attribution must be 'source' or 'root'")


@dataclass
class EmbeddingConfig:
    semantic_dim: int = 512
    structural_dim: int = 512
    window: int = 5
    semantic_epochs: int = 80
    structural_epochs: int = 120
    negatives: int = 15
    min_count: int = 1
    batch_size: int = 256
    lr_start: float = 0.025
    lr_end: float = 0.0001

    def __post_init__(self):
        for name in ("semantic_dim", "structural_dim", "window", "negatives", "min_count", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"embedding.{name} must be >= 1")
        if self.semantic_epochs < 0 or self.structural_epochs < 0:
            raise ValueError("embedding epochs must be >= 0")


@dataclass
class FilterConfig:
    max_nodes: int = 500

    def __post_init__(self):
        if self.max_nodes < 1:
            raise ValueError("filter.max_nodes must be >= 1")


@dataclass
class ProtocolConfig:
    n_runs: int = 30
    base_seed: int = 0
    reuse_embeddings: bool = False

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("protocol.n_runs must be >= 1")


@dataclass
class ExplainConfig:
    k: int = 5
    target: str = "probability"  # or "loss"
    normalize: str = "none"  # or "minmax"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("explain.k must be >= 1")
        if self.target not in ("probability", "loss"):
            raise ValueError("explain.target must be 'probability' or 'loss'")
        if self.normalize not in ("none", "minmax"):
            raise ValueError("explain.normalize must be 'none' or 'minmax'")


@dataclass
class PathsConfig:
    work_dir: str = "vulngraph-out"


SECTIONS = {
    "model": ModelConfig,
    "train": TrainConfig,
    "walk": WalkConfig,
    "embedding": EmbeddingConfig,
    "filter": FilterConfig,
    "protocol": ProtocolConfig,
    "explain": ExplainConfig,
    "paths": PathsConfig,
}


@dataclass
class PipelineConfig:
    version: int = CONFIG_VERSION
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    walk: WalkConfig = field(default_factory=WalkConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    explain: ExplainConfig = field(default_factory=ExplainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def __post_init__(self):
        fused = self.embedding.semantic_dim + self.embedding.structural_dim
        if self.model.in_dim != fused:
            raise ValueError(
                f"model.in_dim={self.model.in_dim} must equal "
                f"embedding.semantic_dim + embedding.structural_dim = {fused}"
            )

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - {"version", *SECTIONS}
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        version = data.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {version}")
        sections = {}
        for name, klass in SECTIONS.items():
            raw = dict(data.get(name, {}))
            allowed = {f.name for f in fields(klass)}
            bad = set(raw) - allowed
            if bad:
                raise ValueError(f"unknown keys in '{name}': {', '.join(sorted(bad))}")
            if name == "model" and "in_dim" not in raw:
                emb = data.get("embedding", {})
                raw["in_dim"] = emb.get("semantic_dim", 512) + emb.get("structural_dim", 512)
            sections[name] = klass(**raw)
        return cls(version=version, **sections)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, overrides: dict[str, object]) -> "PipelineConfig":
        """Apply dotted ``section.key`` overrides and re-validate."""
        data = self.to_dict()
        for dotted, value in overrides.items():
            section, _, key = dotted.partition(".")
            if section not in SECTIONS or key not in {f.name for f in fields(SECTIONS[section])}:
                raise ValueError(f"unknown config key {dotted!r}")
            data[section][key] = value
        if "model.in_dim" not in overrides:
            emb = data["embedding"]
            data["model"]["in_dim"] = emb["semantic_dim"] + emb["structural_dim"]
        return PipelineConfig.from_dict(data)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    data = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    cfg = PipelineConfig.from_dict(data)
    env_seed = os.environ.get(SEED_ENV)
    overrides = dict(overrides or {})
    if env_seed is not None and "protocol.base_seed" not in overrides:
        overrides["protocol.base_seed"] = int(env_seed)
    return cfg.with_overrides(overrides) if overrides else cfg


def config_keys() -> list[str]:
    """Every dotted configuration key with its default."""
    out = ["version"]
    defaults = PipelineConfig()
    for name, klass in SECTIONS.items():
        section = getattr(defaults, name)
        for f in fields(klass):
            out.append(f"{name}.{f.name}={getattr(section, f.name)!r}")
    return out
