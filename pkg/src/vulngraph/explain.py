"""Post hoc node and edge relevance for a single prediction."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .cpg import Cpg
from .gat.losses import weighted_ce
from .gat.model import ForwardTrace, Gradients, GraphInput, ModelParams, backward, forward

DEFAULT_K = 5


@dataclass(frozen=True)
class NodeScore:
    node_id: int
    score: float
    grad: float
    attention: float
    node_type: str = ""
    code: str = ""


@dataclass(frozen=True)
class EdgeScore:
    edge_index: int
    src: int
    dst: int
    edge_type: str
    score: float
    grad: float
    emb_norm: float
    src_type: str = ""
    src_code: str = ""
    dst_type: str = ""
    dst_code: str = ""


@dataclass(frozen=True)
class Explanation:
    predicted_class: int
    probabilities: tuple[float, float]
    node_scores: tuple[NodeScore, ...]
    edge_scores: tuple[EdgeScore, ...]
    k: int


def _minmax(v: np.ndarray) -> np.ndarray:
    span = v.max() - v.min() if v.size else 0.0
    return (v - v.min()) / span if span > 0 else np.zeros_like(v)


def node_relevance(trace: ForwardTrace, grads: Gradients, normalize: str | None = None):
    """(gradient norm, pooling weight, mean of the two) per node row."""
    r_grad = np.linalg.norm(grads.inputs, axis=1)
    attention = trace.beta.copy()
    if normalize == "minmax":
        return r_grad, attention, 0.5 * (_minmax(r_grad) + _minmax(attention))
    return r_grad, attention, 0.5 * (r_grad + attention)


def edge_relevance(trace: ForwardTrace, grads: Gradients, normalize: str | None = None):
    """(gradient norm, embedding norm, mean of the two) per real edge."""
    s_grad = np.linalg.norm(grads.edges, axis=1)
    s_emb = np.linalg.norm(trace.edge_emb[: trace.num_real_edges], axis=1)
    if normalize == "minmax":
        return s_grad, s_emb, 0.5 * (_minmax(s_grad) + _minmax(s_emb))
    return s_grad, s_emb, 0.5 * (s_grad + s_emb)


def target_gradient(trace: ForwardTrace, target: str = "probability", label: int | None = None,
                    class_weights=(1.0, 1.0)) -> np.ndarray:
    """d(target)/d(probs): the predicted-class probability, or the weighted CE loss."""
    c = trace.predicted_class
    if target == "probability":
        d = np.zeros(2)
        d[c] = 1.0
        return d
    if target == "loss":
        _, d = weighted_ce(trace.probs, c if label is None else label, class_weights)
        return d
    raise ValueError(f"unknown gradient target {target!r}")


def explain(
    params: ModelParams,
    graph: GraphInput,
    g: Cpg | None = None,
    k: int = DEFAULT_K,
    target: str = "probability",
    normalize: str | None = None,
) -> Explanation:
    """Score every node and edge, rank them, and keep the top ``k`` of each."""
    if k < 1:
        raise ValueError("k must be >= 1")
    trace = forward(params, graph, "eval")
    grads = backward(params, trace, target_gradient(trace, target))
    r_grad, att, r = node_relevance(trace, grads, normalize)
    s_grad, s_emb, s = edge_relevance(trace, grads, normalize)

    nodes = g.nodes if g is not None else None
    edges = g.edges if g is not None else None
    node_scores = []
    for i in range(graph.num_nodes):
        nid = nodes[i].id if nodes is not None else i
        ntype = nodes[i].node_type if nodes is not None else ""
        code = nodes[i].code if nodes is not None else ""
        node_scores.append(NodeScore(nid, float(r[i]), float(r_grad[i]), float(att[i]), ntype, code))
    edge_scores = []
    for e in range(len(graph.src)):
        si, di = int(graph.src[e]), int(graph.dst[e])
        if g is not None:
            sn, dn = nodes[si], nodes[di]
            edge_scores.append(EdgeScore(
                e, sn.id, dn.id, edges[e].etype.name, float(s[e]), float(s_grad[e]), float(s_emb[e]),
                sn.node_type, sn.code, dn.node_type, dn.code,
            ))
        else:
            edge_scores.append(EdgeScore(e, si, di, str(int(graph.etype[e])), float(s[e]),
                                         float(s_grad[e]), float(s_emb[e])))
    node_scores.sort(key=lambda ns: (-ns.score, ns.node_id))
    edge_scores.sort(key=lambda es: (-es.score, es.edge_index))
    full = Explanation(trace.predicted_class, (float(trace.probs[0]), float(trace.probs[1])),
                       tuple(node_scores), tuple(edge_scores), k)
    return top_k(full, k)


def top_k(expl: Explanation, k: int) -> Explanation:
    if k < 1:
        raise ValueError("k must be >= 1")
    return replace(expl, node_scores=expl.node_scores[:k], edge_scores=expl.edge_scores[:k], k=k)


# ---------------------------------------------------------------------------
# rendering


def _check_refs(expl: Explanation, g: Cpg) -> None:
    ids = {n.id for n in g.nodes}
    for ns in expl.node_scores:
        if ns.node_id not in ids:
            raise ValueError(f"explanation references unknown node {ns.node_id}")
    for es in expl.edge_scores:
        if es.src not in ids or es.dst not in ids or es.edge_index >= len(g.edges):
            raise ValueError(f"explanation references unknown edge {es.edge_index}")


def to_json(expl: Explanation, g: Cpg, provenance: dict | None = None) -> dict:
    _check_refs(expl, g)
    return {
        "function": g.function_name,
        "predicted_class": expl.predicted_class,
        "predicted_label": "vulnerable" if expl.predicted_class == 1 else "safe",
        "probabilities": list(expl.probabilities),
        "k": expl.k,
        "nodes": [asdict(ns) for ns in expl.node_scores],
        "edges": [asdict(es) for es in expl.edge_scores],
        "provenance": provenance or {},
    }


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def to_dot(expl: Explanation, g: Cpg) -> str:
    _check_refs(expl, g)
    by_id = {n.id: n for n in g.nodes}
    node_score = {ns.node_id: ns.score for ns in expl.node_scores}
    shown = list(node_score)
    for es in expl.edge_scores:
        for nid in (es.src, es.dst):
            if nid not in shown:
                shown.append(nid)
    top = max([*node_score.values(), *(es.score for es in expl.edge_scores), 1e-12])
    lines = [f'digraph "{_dot_escape(g.function_name)}" {{', "  node [shape=box];"]
    for nid in shown:
        n = by_id[nid]
        score = node_score.get(nid)
        label = f"({nid}) {n.node_type}\\n{_dot_escape(n.code[:60])}"
        if score is not None:
            label += f"\\nr={score:.4f}"
            width = 1.0 + 3.0 * score / top
        else:
            width = 1.0
        lines.append(f'  n{nid} [label="{label}", penwidth={width:.2f}];')
    for es in expl.edge_scores:
        width = 1.0 + 3.0 * es.score / top
        lines.append(
            f'  n{es.src} -> n{es.dst} [label="{es.edge_type} s={es.score:.4f}", penwidth={width:.2f}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def render(expl: Explanation, g: Cpg, fmt: str = "json", provenance: dict | None = None) -> bytes:
    if fmt == "json":
        return (json.dumps(to_json(expl, g, provenance), indent=2) + "\n").encode("utf-8")
    if fmt == "dot":
        return to_dot(expl, g).encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")
