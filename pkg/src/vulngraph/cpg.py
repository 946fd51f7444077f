"""Code property graph data model, CPG-JSONL ingestion and dataset filters."""

from __future__ import annotations

import enum
import io
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

log = logging.getLogger(__name__)


class EdgeType(enum.IntEnum):
    CONTROLS = 1
    DECLARES = 2
    DEF = 3
    DOM = 4
    FLOWS_TO = 5
    IS_AST_PARENT = 6
    IS_CLASS_OF = 7
    IS_FILE_OF = 8
    IS_FUNCTION_OF_AST = 9
    IS_FUNCTION_OF_CFG = 10
    POST_DOM = 11
    REACHES = 12
    USE = 13

    @classmethod
    def parse(cls, name: str) -> "EdgeType | None":
        """Return the edge type for ``name`` or None when it is not one of the 13."""
        try:
            return cls[name.upper()]
        except KeyError:
            return None


NUM_EDGE_TYPES = len(EdgeType)


class CpgError(ValueError):
    """Structural problem with a graph (dangling ids, AST cycles)."""


class RecordError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class CpgNode:
    id: int
    node_type: str
    code: str = ""
    is_cfg_node: bool = False


@dataclass(frozen=True)
class CpgEdge:
    src: int
    dst: int
    etype: EdgeType


@dataclass(frozen=True)
class Cpg:
    function_name: str
    nodes: tuple[CpgNode, ...]
    edges: tuple[CpgEdge, ...]
    label: int | None = None
    entry_node: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def index(self) -> dict[int, int]:
        """External node id -> dense row index."""
        return {n.id: i for i, n in enumerate(self.nodes)}

    def node(self, node_id: int) -> CpgNode:
        return self.nodes[self.index()[node_id]]

    def edge_arrays(self) -> tuple[list[int], list[int], list[int]]:
        """Dense (src, dst, type code) lists for message passing."""
        idx = self.index()
        src = [idx[e.src] for e in self.edges]
        dst = [idx[e.dst] for e in self.edges]
        return src, dst, [int(e.etype) for e in self.edges]

    def has_valid_cfg(self) -> bool:
        return self.entry_node is not None and any(
            e.etype is EdgeType.FLOWS_TO for e in self.edges
        )

    def with_label(self, label: int | None) -> "Cpg":
        return Cpg(self.function_name, self.nodes, self.edges, label, self.entry_node)


def make_cpg(function_name, nodes, edges, label=None, entry_node=None) -> Cpg:
    """Build a graph, dropping duplicate (src, dst, type) triples and checking ids."""
    ids = {n.id for n in nodes}
    if len(ids) != len(nodes):
        raise CpgError(f"{function_name}: duplicate node ids")
    seen = set()
    kept = []
    for e in edges:
        if e.src not in ids or e.dst not in ids:
            missing = e.src if e.src not in ids else e.dst
            raise CpgError(f"{function_name}: edge references unknown node id {missing}")
        key = (e.src, e.dst, e.etype)
        if key not in seen:
            seen.add(key)
            kept.append(e)
    if entry_node is not None and entry_node not in ids:
        raise CpgError(f"{function_name}: entry references unknown node id {entry_node}")
    return Cpg(function_name, tuple(nodes), tuple(kept), label, entry_node)


# ---------------------------------------------------------------------------
# CPG-JSONL


@dataclass
class LoadSummary:
    graphs: int = 0
    dropped_edges: int = 0
    record_errors: list[RecordError] = field(default_factory=list)
    rejected: list[RecordError] = field(default_factory=list)


def _record_to_cpg(obj: dict, summary: LoadSummary) -> Cpg:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    label = obj.get("label")
    if label is not None and not isinstance(label, int):
        raise ValueError(f"label must be 0, 1 or null, got {label!r}")
    nodes = []
    for n in obj["nodes"]:
        nodes.append(
            CpgNode(int(n["id"]), str(n["type"]), str(n.get("code", "")), bool(n.get("cfg", False)))
        )
    edges = []
    for e in obj.get("edges", []):
        etype = EdgeType.parse(str(e["type"]))
        if etype is None:
            summary.dropped_edges += 1
            continue
        edges.append(CpgEdge(int(e["src"]), int(e["dst"]), etype))
    entry = obj.get("entry")
    return make_cpg(
        str(obj.get("function", "")),
        nodes,
        edges,
        label=label,
        entry_node=None if entry is None else int(entry),
    )


def parse_cpg_stream(source: IO | Iterable[str] | bytes | str) -> tuple[list[Cpg], LoadSummary]:
    """Parse newline-delimited CPG records.

    Malformed lines and graphs with dangling node references are recorded in the
    summary and skipped; edges with unknown type names are dropped silently and
    counted.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    summary = LoadSummary()
    graphs = []
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            summary.record_errors.append(RecordError(lineno, f"invalid JSON: {exc.msg}"))
            continue
        try:
            g = _record_to_cpg(obj, summary)
        except CpgError as exc:
            summary.rejected.append(RecordError(lineno, str(exc)))
            continue
        except (KeyError, TypeError, ValueError) as exc:
            summary.record_errors.append(RecordError(lineno, f"malformed record: {exc}"))
            continue
        graphs.append(g)
    summary.graphs = len(graphs)
    if summary.dropped_edges:
        log.info("dropped %d edges with unknown types", summary.dropped_edges)
    return graphs, summary


def cpg_to_record(g: Cpg) -> dict:
    return {
        "function": g.function_name,
        "label": g.label,
        "entry": g.entry_node,
        "nodes": [
            {"id": n.id, "type": n.node_type, "code": n.code, "cfg": n.is_cfg_node}
            for n in g.nodes
        ],
        "edges": [{"src": e.src, "dst": e.dst, "type": e.etype.name} for e in g.edges],
    }


def serialize(graphs: Iterable[Cpg]) -> str:
    return "".join(json.dumps(cpg_to_record(g), sort_keys=True) + "\n" for g in graphs)


def load_jsonl(path) -> tuple[list[Cpg], LoadSummary]:
    with open(path, encoding="utf-8") as fh:
        return parse_cpg_stream(fh)


def write_jsonl(path, graphs: Iterable[Cpg]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(graphs))


# ---------------------------------------------------------------------------
# filtering, depth, validation


@dataclass
class FilterReport:
    dropped_size: int = 0
    dropped_no_cfg: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_size + self.dropped_no_cfg


def filter_dataset(graphs: Iterable[Cpg], max_nodes: int = 500) -> tuple[list[Cpg], FilterReport]:
    """Drop graphs with more than ``max_nodes`` nodes or without a valid CFG.

    A graph failing both tests is counted under size.
    """
    if max_nodes < 1:
        raise ValueError("max_nodes must be >= 1")
    report = FilterReport()
    kept = []
    for g in graphs:
        if g.num_nodes > max_nodes:
            report.dropped_size += 1
        elif not g.has_valid_cfg():
            report.dropped_no_cfg += 1
        else:
            kept.append(g)
    return kept, report


def _ast_children(g: Cpg) -> dict[int, list[int]]:
    children: dict[int, list[int]] = {}
    for e in g.edges:
        if e.etype is EdgeType.IS_AST_PARENT:
            children.setdefault(e.src, []).append(e.dst)
    return children


def ast_parents(g: Cpg) -> dict[int, list[int]]:
    parents: dict[int, list[int]] = {}
    for e in g.edges:
        if e.etype is EdgeType.IS_AST_PARENT:
            parents.setdefault(e.dst, []).append(e.src)
    return parents


def ast_depth(g: Cpg) -> dict[int, int]:
    """AST depth of every node; roots and nodes outside the AST are at depth 0."""
    children = _ast_children(g)
    parents = ast_parents(g)
    depth = {n.id: 0 for n in g.nodes}
    visited: set[int] = set()
    roots = [n.id for n in g.nodes if n.id in children and n.id not in parents]
    for root in roots:
        queue = deque([root])
        visited.add(root)
        while queue:
            cur = queue.popleft()
            for ch in children.get(cur, ()):
                if ch in visited:
                    raise CpgError(f"{g.function_name}: node {ch} reached twice in AST")
                visited.add(ch)
                depth[ch] = depth[cur] + 1
                queue.append(ch)
    unvisited = [nid for nid in children if nid not in visited]
    if unvisited:
        cycle = _find_cycle(children, unvisited[0])
        raise CpgError(f"{g.function_name}: AST cycle through nodes {cycle}")
    return depth


def _find_cycle(children: dict[int, list[int]], start: int) -> list[int]:
    path, on_path = [], {}
    stack = [(start, iter(children.get(start, ())))]
    path.append(start)
    on_path[start] = 0
    while stack:
        node, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            on_path.pop(path.pop())
            continue
        if nxt in on_path:
            return path[on_path[nxt]:] + [nxt]
        on_path[nxt] = len(path)
        path.append(nxt)
        stack.append((nxt, iter(children.get(nxt, ()))))
    return [start]


@dataclass(frozen=True)
class Violation:
    invariant: str
    ids: tuple[int, ...]
    detail: str = ""


def validate(g: Cpg) -> list[Violation]:
    """Check every graph invariant; an empty list means the graph is well formed."""
    out: list[Violation] = []
    ids = [n.id for n in g.nodes]
    id_set = set(ids)
    if g.label is not None and g.label not in (0, 1):
        out.append(Violation("label-domain", (), f"label={g.label!r}"))
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        out.append(Violation("unique-ids", tuple(dupes)))
    for n in g.nodes:
        if n.id < 0:
            out.append(Violation("node-id-domain", (n.id,)))
        if not n.node_type:
            out.append(Violation("node-type-nonempty", (n.id,)))
    for e in g.edges:
        missing = tuple(x for x in (e.src, e.dst) if x not in id_set)
        if missing:
            out.append(Violation("edge-endpoints", missing, e.etype.name))
    for child, ps in sorted(ast_parents(g).items()):
        if len(set(ps)) > 1:
            out.append(Violation("ast-forest", (child, *sorted(set(ps))), "multiple AST parents"))
    try:
        ast_depth(g)
    except CpgError as exc:
        if "cycle" in str(exc):
            out.append(Violation("ast-acyclic", (), str(exc)))
    if g.entry_node is not None and g.entry_node not in id_set:
        out.append(Violation("entry-exists", (g.entry_node,)))
    return out


def iter_edges_of(g: Cpg, etype: EdgeType) -> Iterator[CpgEdge]:
    return (e for e in g.edges if e.etype is etype)
