"""Lower a parsed function plus its analyses into a :class:`Cpg`."""

from __future__ import annotations

from dataclasses import dataclass

from ..cpg import Cpg, CpgEdge, CpgNode, EdgeType, make_cpg
from .cfg import BasicBlock, build_cfg, dominators
from .dataflow import defs_and_uses, reaching_definitions
from .lexer import lex
from .parser import AstNode, parse_function


@dataclass
class Analyses:
    idom: dict
    ipdom: dict
    defs: dict
    uses: dict
    reaches: set


def analyse(func: AstNode, blocks: list[BasicBlock]) -> Analyses:
    idom, ipdom = dominators(blocks)
    defs, uses = {}, {}
    for b in blocks:
        for s in b.statements:
            defs[s], uses[s] = defs_and_uses(s)
    return Analyses(idom, ipdom, defs, uses, reaching_definitions(blocks, defs, uses))


def _body_statements(stmt: AstNode) -> list[AstNode]:
    if stmt.kind == "CompoundStatement":
        return list(stmt.children)
    return [stmt]


def _controlled(node: AstNode) -> list[tuple[AstNode, list[AstNode]]]:
    """(Condition, directly guarded statements) for a branching statement."""
    if node.kind == "IfStatement":
        cond, *branches = node.children
        guarded = [s for br in branches for s in _body_statements(br)]
        return [(cond, guarded)]
    if node.kind == "WhileStatement":
        return [(node.children[0], _body_statements(node.children[1]))]
    if node.kind == "ForStatement" and node.attrs["cond"] is not None:
        return [(node.attrs["cond"], _body_statements(node.attrs["body"]))]
    return []


def lower_to_cpg(func: AstNode, blocks: list[BasicBlock], analyses: Analyses) -> Cpg:
    nid: dict[int, int] = {}
    nodes: list[CpgNode] = []
    edges: list[CpgEdge] = []
    cfg_members = {id(s) for b in blocks for s in b.statements}

    for ast in func.walk():
        nid[id(ast)] = len(nodes)
        nodes.append(CpgNode(len(nodes), ast.kind, ast.text, id(ast) in cfg_members))
    for ast in func.walk():
        for ch in ast.children:
            edges.append(CpgEdge(nid[id(ast)], nid[id(ch)], EdgeType.IS_AST_PARENT))

    def node_of(ast: AstNode) -> int:
        return nid[id(ast)]

    # statement-level control flow; empty blocks are looked through
    def first_statements(block_id: int, seen=None) -> list[AstNode]:
        seen = set() if seen is None else seen
        if block_id in seen:
            return []
        seen.add(block_id)
        blk = blocks[block_id]
        if blk.statements:
            return [blk.statements[0]]
        out = []
        for s in blk.successors:
            out.extend(first_statements(s, seen))
        return out

    for blk in blocks:
        for a, b in zip(blk.statements, blk.statements[1:]):
            edges.append(CpgEdge(node_of(a), node_of(b), EdgeType.FLOWS_TO))
        if blk.statements:
            last = blk.statements[-1]
            for succ in blk.successors:
                for nxt in first_statements(succ):
                    edges.append(CpgEdge(node_of(last), node_of(nxt), EdgeType.FLOWS_TO))

    entry_stmts = first_statements(0)
    entry = node_of(entry_stmts[0]) if entry_stmts else None

    # dominance lifted from blocks to statements
    def last_stmt_up(block_id, tree):
        while block_id is not None:
            if blocks[block_id].statements:
                return blocks[block_id].statements[-1]
            block_id = tree.get(block_id)
        return None

    def first_stmt_up(block_id, tree):
        while block_id is not None:
            if blocks[block_id].statements:
                return blocks[block_id].statements[0]
            block_id = tree.get(block_id)
        return None

    for blk in blocks:
        stmts = blk.statements
        for k, s in enumerate(stmts):
            dom = stmts[k - 1] if k > 0 else last_stmt_up(analyses.idom.get(blk.id), analyses.idom)
            if dom is not None:
                edges.append(CpgEdge(node_of(dom), node_of(s), EdgeType.DOM))
            if k + 1 < len(stmts):
                pdom = stmts[k + 1]
            elif blk.id in analyses.ipdom:
                pdom = first_stmt_up(analyses.ipdom[blk.id], analyses.ipdom)
            else:
                pdom = None
            if pdom is not None:
                edges.append(CpgEdge(node_of(pdom), node_of(s), EdgeType.POST_DOM))

    for ast in func.walk():
        for cond, guarded in _controlled(ast):
            for s in guarded:
                edges.append(CpgEdge(node_of(cond), node_of(s), EdgeType.CONTROLS))

    # symbols: parameters first, then variables in order of first mention
    symbol_names: list[str] = []

    def symbol(name: str) -> int:
        if name not in symbol_names:
            symbol_names.append(name)
        return len(nodes) + symbol_names.index(name)

    params = [ch for ch in func.children if ch.kind == "Parameter"]
    for p in params:
        edges.append(CpgEdge(node_of(p), symbol(p.attrs["name"]), EdgeType.DECLARES))
    for blk in blocks:
        for s in blk.statements:
            for v in sorted(analyses.defs[s]):
                edges.append(CpgEdge(node_of(s), symbol(v), EdgeType.DEF))
            for v in sorted(analyses.uses[s]):
                edges.append(CpgEdge(node_of(s), symbol(v), EdgeType.USE))
            if s.kind == "IdentifierDeclStatement":
                for v in s.attrs["names"]:
                    edges.append(CpgEdge(node_of(s), symbol(v), EdgeType.DECLARES))
    base = len(nodes)
    for i, name in enumerate(symbol_names):
        nodes.append(CpgNode(base + i, "Symbol", name, False))

    reach_edges = sorted(
        (node_of(d), node_of(u)) for d, u, _ in analyses.reaches
    )
    for d, u in reach_edges:
        edges.append(CpgEdge(d, u, EdgeType.REACHES))

    root = node_of(func)
    body = func.children[-1]
    edges.append(CpgEdge(root, node_of(body), EdgeType.IS_FUNCTION_OF_AST))
    if entry is not None:
        edges.append(CpgEdge(root, entry, EdgeType.IS_FUNCTION_OF_CFG))

    return make_cpg(func.attrs["name"], nodes, edges, label=None, entry_node=entry)


def build_cpg(source: str) -> Cpg:
    """Lex, parse, analyse and lower a single-function C source."""
    func = parse_function(lex(source))
    blocks = build_cfg(func)
    return lower_to_cpg(func, blocks, analyse(func, blocks))
