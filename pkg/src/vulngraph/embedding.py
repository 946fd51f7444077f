"""Skip-gram negative-sampling embeddings and per-node feature fusion."""

from __future__ import annotations

import logging
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._scatter import scatter_add
from .cpg import Cpg, CpgNode
from .walks import Walk

log = logging.getLogger(__name__)

NUM = "NUM"

_CODE_TOKEN = re.compile(
    r"""
    (?P<num>0[xX][0-9a-fA-F]+[uUlL]*|(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?[uUlLfF]*)
    | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op><<=|>>=|->|\+\+|--|<<|>>|<=|>=|==|!=|&&|\|\||[-+*/%&|^]=|\S)
    """,
    re.VERBOSE,
)


def semantic_tokens(node: CpgNode) -> list[str]:
    """Node type followed by the code tokens; numeric literals collapse to NUM."""
    out = [node.node_type]
    for m in _CODE_TOKEN.finditer(node.code):
        out.append(NUM if m.lastgroup == "num" else m.group())
    return out


@dataclass
class Vocabulary:
    itos: list[str]
    counts: dict[str, int]
    min_count: int = 1
    stoi: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter(tok for sent in corpus for tok in sent)
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary(kept, {t: counts[t] for t in kept}, min_count)


@dataclass
class SgnsConfig:
    dim: int = 512
    window: int = 5
    epochs: int = 80
    negatives: int = 15
    lr_start: float = 0.025
    lr_end: float = 0.0001
    min_count: int = 1
    batch_size: int = 256
    seed: int = 0


@dataclass
class EmbeddingTable:
    vocab: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def lookup(self, token: str) -> np.ndarray:
        i = self.vocab.stoi.get(token)
        if i is None:
            return np.zeros(self.dim)
        return self.input_vectors[i]


def sgns_pair_loss(v_center, u_context, u_negatives) -> float:
    """Negated skip-gram objective for one (center, context, negatives) triple."""
    pos = u_context @ v_center
    neg = u_negatives @ v_center
    return float(np.logaddexp(0.0, -pos) + np.logaddexp(0.0, neg).sum())


def sgns_pair_grads(v_center, u_context, u_negatives):
    """Gradients of :func:`sgns_pair_loss` w.r.t. center, context and negatives."""
    sig_pos = 1.0 / (1.0 + np.exp(-(u_context @ v_center)))
    sig_neg = 1.0 / (1.0 + np.exp(-(u_negatives @ v_center)))
    g_center = -(1.0 - sig_pos) * u_context + sig_neg @ u_negatives
    g_context = -(1.0 - sig_pos) * v_center
    g_neg = sig_neg[:, None] * v_center[None, :]
    return g_center, g_context, g_neg


def context_pairs(sentences: Sequence[Sequence[int]], window: int) -> np.ndarray:
    pairs = []
    for sent in sentences:
        n = len(sent)
        for i in range(n):
            lo, hi = max(0, i - window), min(n, i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    pairs.append((sent[i], sent[j]))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def train_sgns(corpus: Sequence[Sequence[str]], config: SgnsConfig | None = None) -> EmbeddingTable:
    """Skip-gram with negative sampling, trained with plain SGD over shuffled
    mini-batches of (center, context) pairs.

    Updates to a row touched several times in one batch are summed, as a
    sequential pass would do at small learning rates.

    The learning rate decays linearly from ``lr_start`` to ``lr_end`` across all
    updates. Negatives come from the unigram distribution raised to 0.75.
    """
    cfg = config or SgnsConfig()
    if cfg.dim < 1:
        raise ValueError("dim must be >= 1")
    vocab = build_vocab(corpus, cfg.min_count)
    rng = np.random.default_rng(cfg.seed)
    V, D = len(vocab), cfg.dim
    w_in = rng.uniform(-0.5 / D, 0.5 / D, size=(V, D))
    w_out = np.zeros((V, D))
    table = EmbeddingTable(vocab, w_in, w_out)

    sentences = [[vocab.stoi[t] for t in s if t in vocab.stoi] for s in corpus]
    pairs = context_pairs(sentences, cfg.window)
    if len(pairs) == 0:
        return table

    freq = np.array([vocab.counts[t] for t in vocab.itos], dtype=np.float64) ** 0.75
    cdf = np.cumsum(freq / freq.sum())
    cdf[-1] = 1.0

    bs = cfg.batch_size
    n_batches = -(-len(pairs) // bs)
    total = max(1, cfg.epochs * n_batches)
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for b in range(n_batches):
            lr = cfg.lr_start - (cfg.lr_start - cfg.lr_end) * step / total
            step += 1
            batch = pairs[order[b * bs : (b + 1) * bs]]
            centers, contexts = batch[:, 0], batch[:, 1]
            negs = np.searchsorted(cdf, rng.random((len(batch), cfg.negatives)), side="right")
            negs = np.minimum(negs, V - 1)

            v = w_in[centers]  # (B, D)
            u_pos = w_out[contexts]  # (B, D)
            u_neg = w_out[negs]  # (B, K, D)
            pos_score = np.einsum("bd,bd->b", u_pos, v)
            neg_score = np.einsum("bkd,bd->bk", u_neg, v)
            epoch_loss += float(
                np.logaddexp(0.0, -pos_score).sum() + np.logaddexp(0.0, neg_score).sum()
            )
            g_pos = -1.0 / (1.0 + np.exp(pos_score))  # d loss / d pos_score
            g_neg = 1.0 / (1.0 + np.exp(-neg_score))  # d loss / d neg_score
            grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            grad_pos = g_pos[:, None] * v
            grad_neg = g_neg[:, :, None] * v[:, None, :]
            scatter_add(w_in, centers, -lr * grad_v)
            scatter_add(w_out, np.concatenate([contexts, negs.reshape(-1)]),
                        -lr * np.concatenate([grad_pos, grad_neg.reshape(-1, D)]))
        table.loss_history.append(epoch_loss / len(pairs))
    if not np.all(np.isfinite(w_in)):
        raise FloatingPointError("SGNS training diverged")
    return table


def node_channel_embedding(tokens: Iterable[str], table: EmbeddingTable) -> np.ndarray:
    """Mean of the in-vocabulary token vectors; zero vector if none match."""
    rows = [table.vocab.stoi[t] for t in tokens if t in table.vocab.stoi]
    if not rows:
        return np.zeros(table.dim)
    return table.input_vectors[rows].mean(axis=0)


@dataclass
class NodeFeatures:
    semantic: np.ndarray
    structural: np.ndarray

    @property
    def fused(self) -> np.ndarray:
        return np.concatenate([self.semantic, self.structural], axis=1)


def structural_tokens_by_node(g: Cpg, walks: Sequence[Walk], attribution: str = "source") -> dict[int, list[str]]:
    out: dict[int, list[str]] = {n.id: [] for n in g.nodes}
    for w in walks:
        for tok, src in zip(w.tokens, w.step_sources):
            key = src if attribution == "source" else w.root
            out[key].append(tok.render())
    return out


def build_features(
    g: Cpg,
    walks: Sequence[Walk],
    sem_table: EmbeddingTable,
    struct_table: EmbeddingTable,
    attribution: str = "source",
    expected_dim: int | None = None,
) -> NodeFeatures:
    if attribution not in ("source", "root"):
        raise ValueError(f"unknown attribution {attribution!r}")
    fused_dim = sem_table.dim + struct_table.dim
    if expected_dim is not None and expected_dim != fused_dim:
        raise ValueError(f"fused feature dim {fused_dim} does not match model in_dim {expected_dim}")
    by_node = structural_tokens_by_node(g, walks, attribution)
    sem = np.stack([node_channel_embedding(semantic_tokens(n), sem_table) for n in g.nodes])
    strc = np.stack([node_channel_embedding(by_node[n.id], struct_table) for n in g.nodes])
    return NodeFeatures(sem, strc)


# ---------------------------------------------------------------------------
# file formats


def save_embeddings(path, table: EmbeddingTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vocab)} {table.dim}\n")
        for tok, vec in zip(table.vocab.itos, table.input_vectors):
            fh.write(tok + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def load_embeddings(path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        n, dim = (int(x) for x in fh.readline().split())
        itos, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"{path}: bad row width for token {parts[0]!r}")
            itos.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(itos) != n:
        raise ValueError(f"{path}: header promises {n} rows, found {len(itos)}")
    vecs = np.asarray(rows, dtype=np.float64).reshape(n, dim)
    # counts are not stored; rank order stands in for them
    vocab = Vocabulary(itos, {t: n - i for i, t in enumerate(itos)})
    return EmbeddingTable(vocab, vecs, np.zeros_like(vecs))


FEATURE_MAGIC = b"VGFEAT\x00\x00"
FEATURE_VERSION = 1


def save_feature_cache(path, features: dict[str, np.ndarray]) -> None:
    """Binary cache: magic, version, count, then (key, rows, cols, float32 data)."""
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", FEATURE_VERSION, len(features)))
        for key, mat in features.items():
            kb = key.encode("utf-8")
            mat = np.ascontiguousarray(mat, dtype="<f4")
            fh.write(struct.pack("<I", len(kb)) + kb)
            fh.write(struct.pack("<II", *mat.shape))
            fh.write(mat.tobytes(order="C"))


def load_feature_cache(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(len(FEATURE_MAGIC)) != FEATURE_MAGIC:
            raise ValueError(f"{path}: not a feature cache")
        version, count = struct.unpack("<II", fh.read(8))
        if version != FEATURE_VERSION:
            raise ValueError(f"{path}: unsupported feature cache version {version}")
        out = {}
        for _ in range(count):
            (klen,) = struct.unpack("<I", fh.read(4))
            key = fh.read(klen).decode("utf-8")
            rows, cols = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(rows * cols * 4), dtype="<f4").reshape(rows, cols)
            out[key] = data.astype(np.float64)
    return out
