"""Contextual metapath walks over code property graphs."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cpg import Cpg, CpgEdge, EdgeType, ast_depth, ast_parents

TOKEN_RE = re.compile(
    r"[A-Za-z]+:[A-Z_]+:[A-Za-z]+:(fwd|bwd):[+-]?\d+:(return_path|near_entry|none)"
)

# control flow, data flow and AST parent relations
METAPATH_EDGES = frozenset(
    {
        EdgeType.FLOWS_TO, EdgeType.REACHES, EdgeType.DEF, EdgeType.USE,
        EdgeType.CONTROLS, EdgeType.IS_AST_PARENT, EdgeType.DOM,
    }
)
ALL_EDGES = frozenset(EdgeType)

NEAR_ENTRY_HOPS = 2
_NON_ALPHA = re.compile(r"[^A-Za-z]")


@dataclass(frozen=True)
class WalkToken:
    src_type: str
    edge_type: EdgeType
    tgt_type: str
    direction: str
    delta_depth: int
    scope: str

    def render(self) -> str:
        d = f"{self.delta_depth:+d}" if self.delta_depth else "0"
        return f"{self.src_type}:{self.edge_type.name}:{self.tgt_type}:{self.direction}:{d}:{self.scope}"

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class Walk:
    root: int
    direction: str
    tokens: tuple[WalkToken, ...]
    step_sources: tuple[int, ...]

    def render(self) -> str:
        return " ".join(t.render() for t in self.tokens)


def _type_word(node_type: str) -> str:
    # the token grammar only admits letters in type slots
    word = _NON_ALPHA.sub("", node_type)
    return word or "Unknown"


class WalkContext:
    """Per-graph lookup tables shared by neighbour sampling and token formatting."""

    def __init__(self, g: Cpg, depths: dict[int, int] | None = None):
        self.g = g
        self.depths = ast_depth(g) if depths is None else depths
        self.types = {n.id: n.node_type for n in g.nodes}
        self.out_edges: dict[int, list[CpgEdge]] = {n.id: [] for n in g.nodes}
        self.in_edges: dict[int, list[CpgEdge]] = {n.id: [] for n in g.nodes}
        for e in g.edges:
            self.out_edges[e.src].append(e)
            self.in_edges[e.dst].append(e)
        self.scopes = _scope_tags(g)


def _scope_tags(g: Cpg) -> dict[int, str]:
    parents = ast_parents(g)
    children: dict[int, list[int]] = {}
    for child, ps in parents.items():
        for p in ps:
            children.setdefault(p, []).append(child)
    on_return: set[int] = set()
    for n in g.nodes:
        if n.node_type != "ReturnStatement":
            continue
        on_return.add(n.id)
        stack = [n.id]
        while stack:  # descendants
            cur = stack.pop()
            for ch in children.get(cur, ()):
                if ch not in on_return:
                    on_return.add(ch)
                    stack.append(ch)
        stack = [n.id]
        seen = {n.id}
        while stack:  # ancestors
            cur = stack.pop()
            for p in parents.get(cur, ()):
                if p not in seen:
                    seen.add(p)
                    on_return.add(p)
                    stack.append(p)

    dist: dict[int, int] = {}
    if g.entry_node is not None:
        flows: dict[int, list[int]] = {}
        for e in g.edges:
            if e.etype is EdgeType.FLOWS_TO:
                flows.setdefault(e.src, []).append(e.dst)
        dist[g.entry_node] = 0
        queue = deque([g.entry_node])
        while queue:
            cur = queue.popleft()
            if dist[cur] >= NEAR_ENTRY_HOPS:
                continue
            for nxt in flows.get(cur, ()):
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)

    tags = {}
    for n in g.nodes:
        if n.id in on_return:
            tags[n.id] = "return_path"
        elif n.id in dist:
            tags[n.id] = "near_entry"
        else:
            tags[n.id] = "none"
    return tags


def scope_tag(g: Cpg, depths, node: int) -> str:
    """``return_path`` for return statements and their AST kin, ``near_entry``
    within two FLOWS_TO hops of the entry, else ``none``."""
    return _scope_tags(g)[node]


def random_neighbour(
    ctx: WalkContext, node: int, direction: str, allowed, rng: np.random.Generator
) -> tuple[int, CpgEdge] | None:
    edges = ctx.out_edges[node] if direction == "fwd" else ctx.in_edges[node]
    candidates = [e for e in edges if e.etype in allowed]
    if not candidates:
        return None
    e = candidates[int(rng.integers(len(candidates)))]
    return (e.dst if direction == "fwd" else e.src), e


def format_token(ctx: WalkContext, c: int, n: int, edge: EdgeType, direction: str) -> WalkToken:
    return WalkToken(
        _type_word(ctx.types[c]),
        edge,
        _type_word(ctx.types[n]),
        direction,
        ctx.depths[n] - ctx.depths[c],
        ctx.scopes[n],
    )


def generate_walks(
    g: Cpg,
    depths: dict[int, int] | None = None,
    L: int = 20,
    R: int = 10,
    allowed: Iterable[EdgeType] = ALL_EDGES,
    rng: np.random.Generator | int | None = 0,
) -> list[Walk]:
    """For every node, R walks in each direction of at most L steps; walks with
    fewer than two tokens are discarded."""
    if L < 2 or R < 1:
        raise ValueError("need L >= 2 and R >= 1")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    allowed = frozenset(allowed)
    ctx = WalkContext(g, depths)
    walks = []
    for v in g.nodes:
        for _ in range(R):
            for direction in ("fwd", "bwd"):
                tokens, sources = [], []
                c = v.id
                while len(tokens) < L:
                    picked = random_neighbour(ctx, c, direction, allowed, rng)
                    if picked is None:
                        break
                    n, edge = picked
                    tokens.append(format_token(ctx, c, n, edge.etype, direction))
                    sources.append(c)
                    c = n
                if len(tokens) >= 2:
                    walks.append(Walk(v.id, direction, tuple(tokens), tuple(sources)))
    return walks


def graph_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per graph so per-graph work can run in any order."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def walk_corpus(
    graphs: Sequence[Cpg], L=20, R=10, allowed=ALL_EDGES, seed: int = 0
) -> list[list[Walk]]:
    return [
        generate_walks(g, None, L, R, allowed, graph_rng(seed, i)) for i, g in enumerate(graphs)
    ]


def write_walks(path, walks_per_graph: Sequence[Sequence[Walk]], L: int, R: int, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#walks v1 L={L} R={R} seed={seed}\n")
        for walks in walks_per_graph:
            for w in walks:
                fh.write(w.render() + "\n")


def read_walks(path) -> tuple[dict[str, str], list[list[str]]]:
    """Return the header fields and the token sentences of a walks file."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#walks v1"):
            raise ValueError(f"{path}: not a v1 walks file")
        meta = dict(part.split("=", 1) for part in header.split()[2:])
        return meta, [line.split() for line in fh if line.strip()]
