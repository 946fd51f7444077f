"""Basic-block control flow graphs and (post-)dominator trees."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .parser import AstNode

log = logging.getLogger(__name__)


@dataclass
class BasicBlock:
    id: int
    statements: list = field(default_factory=list)
    successors: list[int] = field(default_factory=list)
    is_exit: bool = False

    def link(self, other: "BasicBlock") -> None:
        if other.id not in self.successors:
            self.successors.append(other.id)


class _CfgBuilder:
    def __init__(self):
        self.blocks: list[BasicBlock] = []
        self.exit = BasicBlock(-1, is_exit=True)
        self.loops: list[tuple[BasicBlock, BasicBlock]] = []  # (continue target, break target)

    def new_block(self) -> BasicBlock:
        b = BasicBlock(len(self.blocks))
        self.blocks.append(b)
        return b

    def visit(self, stmt: AstNode, cur: BasicBlock | None) -> BasicBlock | None:
        """Lower ``stmt`` starting in ``cur``; returns the fall-through block or None."""
        kind = stmt.kind
        if cur is None:
            # code after a jump; kept in a detached block that gets pruned
            cur = self.new_block()
        if kind == "CompoundStatement":
            for ch in stmt.children:
                cur = self.visit(ch, cur)
            return cur
        if kind in ("IdentifierDeclStatement", "ExpressionStatement"):
            cur.statements.append(stmt)
            return cur
        if kind == "ReturnStatement":
            cur.statements.append(stmt)
            cur.link(self.exit)
            return None
        if kind in ("BreakStatement", "ContinueStatement"):
            if not self.loops:
                raise ValueError(f"line {stmt.line}: '{stmt.text}' outside of a loop")
            cur.statements.append(stmt)
            cont, brk = self.loops[-1]
            cur.link(brk if kind == "BreakStatement" else cont)
            return None
        if kind == "IfStatement":
            cond, then = stmt.children[0], stmt.children[1]
            other = stmt.children[2] if len(stmt.children) > 2 else None
            cur.statements.append(cond)
            then_block = self.new_block()
            cur.link(then_block)
            ends = [self.visit(then, then_block)]
            if other is not None:
                else_block = self.new_block()
                cur.link(else_block)
                ends.append(self.visit(other, else_block))
            join = self.new_block()
            if other is None:
                cur.link(join)
            for end in ends:
                if end is not None:
                    end.link(join)
            return join
        if kind == "WhileStatement":
            cond, body = stmt.children
            header = self.new_block()
            cur.link(header)
            header.statements.append(cond)
            after = self.new_block()
            body_block = self.new_block()
            header.link(body_block)
            header.link(after)
            self.loops.append((header, after))
            end = self.visit(body, body_block)
            self.loops.pop()
            if end is not None:
                end.link(header)
            return after
        if kind == "ForStatement":
            init, cond, step = stmt.attrs["init"], stmt.attrs["cond"], stmt.attrs["step"]
            if init is not None:
                cur.statements.append(init)
            header = self.new_block()
            cur.link(header)
            after = self.new_block()
            if cond is not None:
                header.statements.append(cond)
                header.link(after)
            step_block = self.new_block()
            if step is not None:
                step_block.statements.append(step)
            step_block.link(header)
            body_block = self.new_block()
            header.link(body_block)
            self.loops.append((step_block, after))
            end = self.visit(stmt.attrs["body"], body_block)
            self.loops.pop()
            if end is not None:
                end.link(step_block)
            return after
        raise ValueError(f"unsupported statement kind {kind}")


def build_cfg(func: AstNode) -> list[BasicBlock]:
    """Basic blocks for ``func``: entry is block 0, the synthetic exit is the last block.

    Blocks unreachable from the entry are pruned with a warning.
    """
    if func.kind != "FunctionDef":
        raise ValueError("build_cfg expects a FunctionDef")
    b = _CfgBuilder()
    entry = b.new_block()
    body = func.children[-1]
    end = b.visit(body, entry)
    if end is not None:
        end.link(b.exit)
    b.exit.id = len(b.blocks)
    b.blocks.append(b.exit)
    # successors were recorded before exit got its id
    for blk in b.blocks:
        blk.successors = [b.exit.id if s == -1 else s for s in blk.successors]

    reachable = _reachable(b.blocks, 0)
    reachable.add(b.exit.id)
    dropped = [blk for blk in b.blocks if blk.id not in reachable]
    if any(blk.statements for blk in dropped):
        log.warning(
            "%s: pruned %d unreachable statements",
            func.attrs.get("name", "?"),
            sum(len(blk.statements) for blk in dropped),
        )
    kept = [blk for blk in b.blocks if blk.id in reachable]
    remap = {blk.id: i for i, blk in enumerate(kept)}
    for blk in kept:
        blk.id = remap[blk.id]
        blk.successors = [remap[s] for s in blk.successors if s in remap]
    return kept


def _reachable(blocks: Sequence[BasicBlock], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for s in blocks[cur].successors:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


def predecessors(blocks: Sequence[BasicBlock]) -> dict[int, list[int]]:
    preds: dict[int, list[int]] = {b.id: [] for b in blocks}
    for b in blocks:
        for s in b.successors:
            preds[s].append(b.id)
    return preds


def _dominator_sets(nodes: list[Hashable], root, preds: dict) -> dict:
    """Iterative dataflow: Dom(root) = {root}, Dom(n) = {n} | meet of Dom(p)."""
    universe = set(nodes)
    dom = {n: set(universe) for n in nodes}
    dom[root] = {root}
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if n == root:
                continue
            ps = [p for p in preds.get(n, ()) if p in universe]
            new = set.intersection(*(dom[p] for p in ps)) if ps else set()
            new = new | {n}
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


def _immediate(dom: dict) -> dict:
    idom = {}
    for n, ds in dom.items():
        strict = ds - {n}
        # the closest strict dominator is the one with the largest dominator set
        idom[n] = max(strict, key=lambda d: len(dom[d])) if strict else None
    return idom


def dominators(
    blocks: Sequence[BasicBlock], exit_id: int | None = None
) -> tuple[dict[int, int | None], dict[int, int | None]]:
    """Immediate dominators and immediate post-dominators of every block.

    Post-dominators are computed on the reversed CFG rooted at the exit block;
    blocks that cannot reach the exit have no entry in the second map.
    """
    if exit_id is None:
        exit_id = blocks[-1].id
    fwd_nodes = sorted(_reachable(blocks, 0))
    idom = _immediate(_dominator_sets(fwd_nodes, 0, predecessors(blocks)))

    # reversed graph: predecessors in reverse = successors in forward
    rev_succ = predecessors(blocks)
    seen = {exit_id}
    stack = [exit_id]
    while stack:
        cur = stack.pop()
        for p in rev_succ[cur]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    rev_preds = {b.id: list(b.successors) for b in blocks}
    ipdom = _immediate(_dominator_sets(sorted(seen), exit_id, rev_preds))
    return idom, ipdom
