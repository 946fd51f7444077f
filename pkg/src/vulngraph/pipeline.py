"""Glue from graphs to model inputs: walks, both embedding channels, fusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import EmbeddingConfig, WalkConfig
from .cpg import Cpg
from .embedding import (
    EmbeddingTable, NodeFeatures, SgnsConfig, build_features, semantic_tokens, train_sgns,
)
from .gat.model import GraphInput
from .walks import ALL_EDGES, METAPATH_EDGES, Walk, generate_walks, graph_rng

MODALITIES = ("both", "semantic", "structural")


def allowed_edges(walk_cfg: WalkConfig):
    return METAPATH_EDGES if walk_cfg.edge_set == "metapath" else ALL_EDGES


def graph_walks(graphs: Sequence[Cpg], walk_cfg: WalkConfig, seed: int) -> list[list[Walk]]:
    allowed = allowed_edges(walk_cfg)
    return [
        generate_walks(g, None, walk_cfg.length, walk_cfg.walks_per_node, allowed, graph_rng(seed, i))
        for i, g in enumerate(graphs)
    ]


@dataclass
class FeatureModel:
    semantic: EmbeddingTable
    structural: EmbeddingTable
    walk: WalkConfig

    @property
    def in_dim(self) -> int:
        return self.semantic.dim + self.structural.dim


def fit_feature_model(
    graphs: Sequence[Cpg],
    walk_cfg: WalkConfig,
    emb_cfg: EmbeddingConfig,
    seed: int,
    walks: Sequence[Sequence[Walk]] | None = None,
) -> FeatureModel:
    """Train both skip-gram tables on ``graphs`` (the training split)."""
    if walks is None:
        walks = graph_walks(graphs, walk_cfg, seed)
    sem_corpus = [semantic_tokens(n) for g in graphs for n in g.nodes]
    struct_corpus = [[t.render() for t in w.tokens] for ws in walks for w in ws]
    if not struct_corpus:
        # graphs without any walkable structure still need a (trivial) table
        struct_corpus = [["<none>"]]
    common = dict(
        window=emb_cfg.window, negatives=emb_cfg.negatives, min_count=emb_cfg.min_count,
        batch_size=emb_cfg.batch_size, lr_start=emb_cfg.lr_start, lr_end=emb_cfg.lr_end,
    )
    sem = train_sgns(sem_corpus, SgnsConfig(dim=emb_cfg.semantic_dim, epochs=emb_cfg.semantic_epochs,
                                            seed=seed, **common))
    strc = train_sgns(struct_corpus, SgnsConfig(dim=emb_cfg.structural_dim, epochs=emb_cfg.structural_epochs,
                                                seed=seed + 1, **common))
    return FeatureModel(sem, strc, walk_cfg)


def to_graph_input(g: Cpg, features: np.ndarray) -> GraphInput:
    src, dst, codes = g.edge_arrays()
    return GraphInput.from_lists(features, src, dst, codes)


def mask_modality(feats: NodeFeatures, modality: str) -> np.ndarray:
    """Fused matrix with the excluded channel zeroed (width unchanged)."""
    if modality not in MODALITIES:
        raise ValueError(f"unknown modality {modality!r}")
    sem, strc = feats.semantic, feats.structural
    if modality == "structural":
        sem = np.zeros_like(sem)
    elif modality == "semantic":
        strc = np.zeros_like(strc)
    return np.concatenate([sem, strc], axis=1)


def featurize(
    graphs: Sequence[Cpg],
    fm: FeatureModel,
    seed: int,
    modality: str = "both",
    walks: Sequence[Sequence[Walk]] | None = None,
) -> list[GraphInput]:
    if walks is None:
        walks = graph_walks(graphs, fm.walk, seed)
    out = []
    for g, ws in zip(graphs, walks):
        feats = build_features(g, ws, fm.semantic, fm.structural, fm.walk.attribution)
        out.append(to_graph_input(g, mask_modality(feats, modality)))
    return out


def graph_key(index: int, g: Cpg) -> str:
    return f"{index}:{g.function_name}"
