"""Edge-aware two-layer GATv2 classifier with an explicit reverse pass.

Conventions: node matrices are row-major (one row per node), weights map rows
by right multiplication (``H @ W``). An edge ``(j -> i)`` carries a message from
its source ``j`` to its destination ``i``; attention normalises over the edges
entering ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._scatter import scatter_add
from ..cpg import NUM_EDGE_TYPES


class NonFiniteError(FloatingPointError):
    pass


@dataclass
class ModelConfig:
    in_dim: int = 1024
    hidden_dim: int = 256
    out_dim: int | None = None  # second layer width; defaults to hidden_dim
    edge_dim: int = 32
    mlp_hidden: int = 128
    pool_dim: int | None = None  # defaults to the second layer width
    num_edge_types: int = NUM_EDGE_TYPES
    dropout_rate: float = 0.5
    leaky_slope: float = 0.2
    use_edge_types: bool = True
    add_self_loops: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("in_dim", "hidden_dim", "edge_dim", "mlp_hidden", "num_edge_types"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.out_dim is not None and self.out_dim < 1:
            raise ValueError("out_dim must be >= 1")
        if self.pool_dim is not None and self.pool_dim < 1:
            raise ValueError("pool_dim must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def layer2_dim(self) -> int:
        return self.out_dim or self.hidden_dim

    @property
    def pooling_dim(self) -> int:
        return self.pool_dim or self.layer2_dim


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every learnable tensor in declaration order."""
    d0, d1, d2 = cfg.in_dim, cfg.hidden_dim, cfg.layer2_dim
    shapes: dict[str, tuple[int, ...]] = {}
    for layer, (din, dout) in (("l1", (d0, d1)), ("l2", (d1, d2))):
        shapes[f"{layer}.Wq"] = (din, dout)
        shapes[f"{layer}.Wk"] = (din, dout)
        shapes[f"{layer}.Wv"] = (din, dout)
        shapes[f"{layer}.We"] = (cfg.edge_dim, dout)
        shapes[f"{layer}.a"] = (3 * dout,)
    shapes["edge_table"] = (cfg.num_edge_types, cfg.edge_dim)
    if d1 != d2:
        shapes["P"] = (d1, d2)
    shapes["pool.Wg"] = (d2, cfg.pooling_dim)
    shapes["pool.w"] = (cfg.pooling_dim,)
    shapes["head.W1"] = (d2, cfg.mlp_hidden)
    shapes["head.b1"] = (cfg.mlp_hidden,)
    shapes["head.W2"] = (cfg.mlp_hidden, 2)
    shapes["head.b2"] = (2,)
    return shapes


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def __getitem__(self, name):
        return self.tensors[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def check_finite(self) -> None:
        for k, v in self.tensors.items():
            if not np.all(np.isfinite(v)):
                raise NonFiniteError(f"parameter {k} has non-finite entries")


def init_params(cfg: ModelConfig, rng: np.random.Generator | None = None) -> ModelParams:
    rng = rng or np.random.default_rng(cfg.seed)
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if name == "edge_table":
            tensors[name] = rng.standard_normal(shape)
        elif name.startswith("head.b"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = shape[0]
            fan_out = shape[1] if len(shape) > 1 else 1
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
    return ModelParams(cfg, tensors)


@dataclass
class GraphInput:
    x: np.ndarray  # (N, in_dim)
    src: np.ndarray  # (E,)
    dst: np.ndarray  # (E,)
    etype: np.ndarray  # (E,) codes 1..13

    @classmethod
    def from_lists(cls, x, src, dst, etype) -> "GraphInput":
        return cls(
            np.asarray(x, dtype=np.float64),
            np.asarray(src, dtype=np.int64).reshape(-1),
            np.asarray(dst, dtype=np.int64).reshape(-1),
            np.asarray(etype, dtype=np.int64).reshape(-1),
        )

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]


# ---------------------------------------------------------------------------
# activations


def _leaky(u, slope):
    return np.where(u > 0, u, slope * u)


def _elu(m):
    return np.where(m > 0, m, np.expm1(np.minimum(m, 0.0)))


def _softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def segment_softmax(scores: np.ndarray, seg: np.ndarray, n: int) -> np.ndarray:
    """Softmax of ``scores`` within groups sharing the same ``seg`` id."""
    if scores.size == 0:
        return scores.copy()
    mx = np.full(n, -np.inf)
    np.maximum.at(mx, seg, scores)
    ex = np.exp(scores - mx[seg])
    den = np.bincount(seg, weights=ex, minlength=n)
    return ex / den[seg]


# ---------------------------------------------------------------------------
# forward


@dataclass
class LayerCache:
    h_in: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    U: np.ndarray
    phi: np.ndarray
    score: np.ndarray
    alpha: np.ndarray
    M: np.ndarray
    h_out: np.ndarray


@dataclass
class ForwardTrace:
    h0: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h_out: np.ndarray
    alpha: list[np.ndarray]  # per layer, one weight per (augmented) edge
    beta: np.ndarray
    z: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    # reverse-pass bookkeeping
    src: np.ndarray
    dst: np.ndarray
    codes: np.ndarray
    edge_emb: np.ndarray
    layers: list[LayerCache] = field(default_factory=list)
    pool_T: np.ndarray | None = None
    mlp_pre: np.ndarray | None = None
    mlp_h: np.ndarray | None = None
    dropout_mask: np.ndarray | None = None
    num_real_edges: int = 0

    @property
    def predicted_class(self) -> int:
        return int(np.argmax(self.probs))


def edge_embeddings(params: ModelParams, codes: np.ndarray) -> np.ndarray:
    """Per-edge type vectors; code 0 (self loops) and disabled types give zeros."""
    cfg = params.config
    out = np.zeros((len(codes), cfg.edge_dim))
    if cfg.use_edge_types:
        real = codes > 0
        out[real] = params["edge_table"][codes[real] - 1]
    return out


def _layer_forward(h, src, dst, emb, params, layer, n) -> LayerCache:
    slope = params.config.leaky_slope
    Wq, Wk, Wv = params[f"{layer}.Wq"], params[f"{layer}.Wk"], params[f"{layer}.Wv"]
    We, a = params[f"{layer}.We"], params[f"{layer}.a"]
    Q, K, V = h @ Wq, h @ Wk, h @ Wv
    U = np.concatenate([Q[dst], K[src], emb @ We], axis=1)
    phi = _leaky(U, slope)
    score = phi @ a
    alpha = segment_softmax(score, dst, n)
    M = np.zeros((n, V.shape[1]))
    scatter_add(M, dst, alpha[:, None] * V[src])
    h_next = _elu(M)
    if not np.all(np.isfinite(h_next)):
        bad = np.argwhere(~np.isfinite(score)).ravel()
        where = f" (edge {int(bad[0])})" if bad.size else ""
        raise NonFiniteError(f"non-finite activation in layer {layer}{where}")
    return LayerCache(h, Q, K, V, U, phi, score, alpha, M, h_next)


def forward(
    params: ModelParams,
    graph: GraphInput,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout_mask: np.ndarray | None = None,
    edge_emb: np.ndarray | None = None,
) -> ForwardTrace:
    """Run the classifier on one graph.

    ``dropout_mask`` fixes the (already rescaled) dropout mask in train mode;
    otherwise one is drawn from ``rng``. ``edge_emb`` overrides the per-edge
    type vectors of the real edges, which is how their gradients are probed.
    """
    cfg = params.config
    x = np.asarray(graph.x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("graph has no nodes")
    if x.shape[1] != cfg.in_dim:
        raise ValueError(f"feature dim {x.shape[1]} does not match model in_dim {cfg.in_dim}")
    codes = graph.etype
    if codes.size and (codes.min() < 1 or codes.max() > cfg.num_edge_types):
        raise ValueError("edge type codes must lie in 1..num_edge_types")
    src, dst = graph.src, graph.dst
    num_real = len(src)
    emb = edge_embeddings(params, codes) if edge_emb is None else np.asarray(edge_emb, dtype=np.float64)
    if cfg.add_self_loops:
        loops = np.arange(n)
        src = np.concatenate([src, loops])
        dst = np.concatenate([dst, loops])
        codes = np.concatenate([codes, np.zeros(n, dtype=np.int64)])
        emb = np.concatenate([emb, np.zeros((n, cfg.edge_dim))])

    c1 = _layer_forward(x, src, dst, emb, params, "l1", n)
    c2 = _layer_forward(c1.h_out, src, dst, emb, params, "l2", n)
    resid = c1.h_out @ params["P"] if "P" in params.tensors else c1.h_out
    h_out = c2.h_out + resid

    T = np.tanh(h_out @ params["pool.Wg"])
    beta = _softmax(T @ params["pool.w"])
    z = beta @ h_out

    pre = z @ params["head.W1"] + params["head.b1"]
    hm = np.maximum(pre, 0.0)
    if mode == "train":
        if dropout_mask is None:
            rng = rng or np.random.default_rng()
            keep = 1.0 - cfg.dropout_rate
            dropout_mask = (rng.random(hm.shape) < keep) / keep
    elif mode == "eval":
        dropout_mask = np.ones_like(hm)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    logits = (hm * dropout_mask) @ params["head.W2"] + params["head.b2"]
    probs = _softmax(logits)
    if not np.all(np.isfinite(probs)):
        raise NonFiniteError("non-finite class probabilities")

    return ForwardTrace(
        h0=x, h1=c1.h_out, h2=c2.h_out, h_out=h_out, alpha=[c1.alpha, c2.alpha],
        beta=beta, z=z, logits=logits, probs=probs, src=src, dst=dst, codes=codes,
        edge_emb=emb, layers=[c1, c2], pool_T=T, mlp_pre=pre, mlp_h=hm,
        dropout_mask=dropout_mask, num_real_edges=num_real,
    )


# ---------------------------------------------------------------------------
# reverse pass


@dataclass
class Gradients:
    params: dict[str, np.ndarray]
    inputs: np.ndarray  # d/dx, one row per node
    edges: np.ndarray  # d/de_ij, one row per real edge


def _layer_backward(d_hnext, cache: LayerCache, src, dst, emb, params, layer, n, grads):
    slope = params.config.leaky_slope
    Wq, Wk, Wv = params[f"{layer}.Wq"], params[f"{layer}.Wk"], params[f"{layer}.Wv"]
    We, a = params[f"{layer}.We"], params[f"{layer}.a"]
    d = Wq.shape[1]
    M = cache.M
    dM = d_hnext * np.where(M > 0, 1.0, np.exp(np.minimum(M, 0.0)))
    alpha = cache.alpha
    dM_dst = dM[dst]
    d_alpha = np.einsum("ed,ed->e", dM_dst, cache.V[src])
    dV = np.zeros_like(cache.V)
    scatter_add(dV, src, alpha[:, None] * dM_dst)
    weighted = np.bincount(dst, weights=alpha * d_alpha, minlength=n)
    d_score = alpha * (d_alpha - weighted[dst])
    grads[f"{layer}.a"] = cache.phi.T @ d_score
    dU = np.outer(d_score, a) * np.where(cache.U > 0, 1.0, slope)
    dQe, dKe, dEE = dU[:, :d], dU[:, d : 2 * d], dU[:, 2 * d :]
    dQ = np.zeros_like(cache.Q)
    scatter_add(dQ, dst, dQe)
    dK = np.zeros_like(cache.K)
    scatter_add(dK, src, dKe)
    h = cache.h_in
    grads[f"{layer}.Wq"] = h.T @ dQ
    grads[f"{layer}.Wk"] = h.T @ dK
    grads[f"{layer}.Wv"] = h.T @ dV
    grads[f"{layer}.We"] = emb.T @ dEE
    dh = dQ @ Wq.T + dK @ Wk.T + dV @ Wv.T
    d_emb = dEE @ We.T
    return dh, d_emb


def backward(params: ModelParams, trace: ForwardTrace, d_probs: np.ndarray) -> Gradients:
    """Propagate ``d_probs`` (gradient of a scalar w.r.t. the class probabilities)
    back to every parameter, the node inputs and the per-edge type vectors."""
    cfg = params.config
    n = trace.h0.shape[0]
    g: dict[str, np.ndarray] = {}
    p = trace.probs
    d_logits = p * (d_probs - p @ d_probs)

    hd = trace.mlp_h * trace.dropout_mask
    g["head.W2"] = np.outer(hd, d_logits)
    g["head.b2"] = d_logits.copy()
    d_hm = (params["head.W2"] @ d_logits) * trace.dropout_mask
    d_pre = d_hm * (trace.mlp_pre > 0)
    g["head.W1"] = np.outer(trace.z, d_pre)
    g["head.b1"] = d_pre
    dz = params["head.W1"] @ d_pre

    beta, h_out, T = trace.beta, trace.h_out, trace.pool_T
    d_hout = np.outer(beta, dz)
    d_beta = h_out @ dz
    d_g = beta * (d_beta - beta @ d_beta)
    g["pool.w"] = T.T @ d_g
    d_pool_pre = np.outer(d_g, params["pool.w"]) * (1.0 - T * T)
    g["pool.Wg"] = h_out.T @ d_pool_pre
    d_hout = d_hout + d_pool_pre @ params["pool.Wg"].T

    if "P" in params.tensors:
        g["P"] = trace.h1.T @ d_hout
        d_h1 = d_hout @ params["P"].T
    else:
        d_h1 = d_hout.copy()

    src, dst, emb = trace.src, trace.dst, trace.edge_emb
    c1, c2 = trace.layers
    dh1_from2, d_emb2 = _layer_backward(d_hout, c2, src, dst, emb, params, "l2", n, g)
    d_h1 = d_h1 + dh1_from2
    dx, d_emb1 = _layer_backward(d_h1, c1, src, dst, emb, params, "l1", n, g)
    d_emb = d_emb1 + d_emb2

    d_table = np.zeros_like(params["edge_table"])
    if cfg.use_edge_types:
        real = trace.codes > 0
        scatter_add(d_table, trace.codes[real] - 1, d_emb[real])
    g["edge_table"] = d_table

    ordered = {k: g[k] for k in params.tensors}
    return Gradients(ordered, dx, d_emb[: trace.num_real_edges])
