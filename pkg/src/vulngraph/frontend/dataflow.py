"""Def/use extraction and reaching-definitions analysis."""

from __future__ import annotations

from typing import Hashable, Mapping, Sequence

from .cfg import BasicBlock, predecessors
from .parser import AstNode

INCDEC = ("++", "--")


def defs_and_uses(stmt: AstNode) -> tuple[set[str], set[str]]:
    """Variables written and read by one CFG statement, by syntactic scan.

    Only plain identifiers on the left of an assignment (or under ++/--) count
    as definitions; writes through ``*p``, ``a[i]`` or ``p->f`` read every
    identifier involved and define nothing.
    """
    defs: set[str] = set()
    uses: set[str] = set()

    def scan(node: AstNode) -> None:
        kind = node.kind
        if kind == "AssignmentExpression":
            lhs, rhs = node.children
            if lhs.kind == "Identifier":
                defs.add(lhs.attrs["name"])
                if node.attrs.get("op") != "=":
                    uses.add(lhs.attrs["name"])
            else:
                scan(lhs)
            scan(rhs)
        elif kind == "UnaryExpression" and node.attrs.get("op") in INCDEC:
            operand = node.children[0]
            if operand.kind == "Identifier":
                defs.add(operand.attrs["name"])
                uses.add(operand.attrs["name"])
            else:
                scan(operand)
        elif kind == "Identifier":
            if node.attrs.get("role") not in ("callee", "member"):
                uses.add(node.attrs["name"])
        else:
            for ch in node.children:
                scan(ch)

    if stmt.kind == "IdentifierDeclStatement":
        defs.update(stmt.attrs["names"])
        for ch in stmt.children:
            if ch.kind == "AssignmentExpression":
                scan(ch.children[1])
    else:
        scan(stmt)
    return defs, uses


def reaching_definitions(
    blocks: Sequence[BasicBlock],
    defs: Mapping[Hashable, set[str]],
    uses: Mapping[Hashable, set[str]],
) -> set[tuple[Hashable, Hashable, str]]:
    """(definition site, use site, variable) triples for every reaching def.

    Sites are the statement objects held in ``blocks``; ``defs``/``uses`` map a
    statement to the variables it writes/reads. A statement that both reads and
    writes a variable sees the definitions reaching its entry.
    """
    # number every (site, var) definition for bit-vector sets
    all_defs: list[tuple[Hashable, str]] = []
    for b in blocks:
        for s in b.statements:
            for v in sorted(defs.get(s, ())):
                all_defs.append((s, v))
    bit = {d: 1 << i for i, d in enumerate(all_defs)}
    var_mask: dict[str, int] = {}
    for (s, v), m in bit.items():
        var_mask[v] = var_mask.get(v, 0) | m

    gen: dict[int, int] = {}
    kill: dict[int, int] = {}
    for b in blocks:
        g = k = 0
        for s in b.statements:
            for v in defs.get(s, ()):
                g = (g & ~var_mask[v]) | bit[(s, v)]
                k |= var_mask[v]
        gen[b.id] = g
        kill[b.id] = k

    preds = predecessors(blocks)
    IN = {b.id: 0 for b in blocks}
    OUT = {b.id: gen[b.id] for b in blocks}
    changed = True
    while changed:
        changed = False
        for b in blocks:
            new_in = 0
            for p in preds[b.id]:
                new_in |= OUT[p]
            new_out = gen[b.id] | (new_in & ~kill[b.id])
            if new_in != IN[b.id] or new_out != OUT[b.id]:
                IN[b.id], OUT[b.id] = new_in, new_out
                changed = True

    result = set()
    for b in blocks:
        live = IN[b.id]
        for s in b.statements:
            for v in uses.get(s, ()):
                reaching = live & var_mask.get(v, 0)
                for i, d in enumerate(all_defs):
                    if reaching >> i & 1:
                        result.add((d[0], s, v))
            for v in defs.get(s, ()):
                live = (live & ~var_mask[v]) | bit[(s, v)]
    return result
