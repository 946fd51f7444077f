from collections import Counter

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vulngraph.cpg import CpgEdge, CpgNode, EdgeType, ast_depth, make_cpg
from vulngraph.synthetic import STRCPY_EXAMPLE
from vulngraph.frontend import build_cpg
from vulngraph.walks import (
    METAPATH_EDGES, TOKEN_RE, WalkContext, format_token, generate_walks, graph_rng, random_neighbour,
    read_walks, scope_tag, walk_corpus, write_walks,
)

from conftest import chain_graph


def test_isolated_node_has_no_walks():
    g = make_cpg("iso", [CpgNode(0, "Identifier")], [])
    assert generate_walks(g, R=5) == []


def test_path_graph_forward_walks_from_head_have_two_tokens():
    g = chain_graph(3)
    walks = generate_walks(g, L=20, R=50, rng=3)
    fwd_from_a = [w for w in walks if w.root == 0 and w.direction == "fwd"]
    assert len(fwd_from_a) == 50
    assert all(len(w.tokens) == 2 for w in fwd_from_a)
    # b contributes one-token walks in both directions, which are discarded
    assert not [w for w in walks if w.root == 1]


def test_neighbour_choice_is_uniform():
    g = make_cpg("fan", [CpgNode(i, "N") for i in range(3)],
                 [CpgEdge(0, 1, EdgeType.FLOWS_TO), CpgEdge(0, 2, EdgeType.REACHES)], entry_node=0)
    ctx = WalkContext(g)
    rng = np.random.default_rng(0)
    counts = Counter(random_neighbour(ctx, 0, "fwd", frozenset(EdgeType), rng)[0] for _ in range(10_000))
    assert abs(counts[1] / 10_000 - 0.5) <= 0.02


def test_format_token_example():
    nodes = [CpgNode(0, "CompoundStatement"), CpgNode(1, "ExpressionStatement"), CpgNode(2, "Identifier"),
             CpgNode(3, "FunctionDef")]
    edges = [CpgEdge(3, 0, EdgeType.IS_AST_PARENT), CpgEdge(0, 1, EdgeType.IS_AST_PARENT),
             CpgEdge(1, 2, EdgeType.IS_AST_PARENT)]
    g = make_cpg("t", nodes, edges)
    ctx = WalkContext(g)
    assert ctx.depths[1] == 2 and ctx.depths[2] == 3
    fwd = format_token(ctx, 1, 2, EdgeType.IS_AST_PARENT, "fwd")
    assert fwd.render() == "ExpressionStatement:IS_AST_PARENT:Identifier:fwd:+1:none"
    bwd = format_token(ctx, 2, 1, EdgeType.IS_AST_PARENT, "bwd")
    assert bwd.delta_depth == -1 and bwd.render().endswith(":bwd:-1:none")


def test_scope_tags():
    g = build_cpg("int f(int a) { int b; b = a; a = b + 1; b = 2; return a + 1; }")
    depths = ast_depth(g)
    by_code = {n.code: n.id for n in g.nodes}
    ret = next(n.id for n in g.nodes if n.node_type == "ReturnStatement")
    assert scope_tag(g, depths, ret) == "return_path"
    # a descendant of the return statement inherits the tag
    plus = next(n.id for n in g.nodes if n.node_type == "BinaryExpression" and n.code == "a + 1")
    assert scope_tag(g, depths, plus) == "return_path"
    assert scope_tag(g, depths, by_code["b = a;"]) == "near_entry"
    # three FLOWS_TO hops from the entry declaration
    assert scope_tag(g, depths, by_code["b = 2;"]) == "none"


def test_metapath_restriction_can_empty_the_walk_set():
    nodes = [CpgNode(i, "N") for i in range(3)]
    g = make_cpg("ast", nodes, [CpgEdge(0, 1, EdgeType.IS_AST_PARENT), CpgEdge(0, 2, EdgeType.IS_AST_PARENT)])
    assert generate_walks(g, allowed={EdgeType.FLOWS_TO}) == []


def test_walks_respect_allowed_set():
    g = build_cpg(STRCPY_EXAMPLE)
    for w in generate_walks(g, L=6, R=3, allowed=METAPATH_EDGES):
        assert all(t.edge_type in METAPATH_EDGES for t in w.tokens)


def test_per_graph_streams_are_order_independent():
    graphs = [build_cpg(STRCPY_EXAMPLE), chain_graph(4)]
    both = walk_corpus(graphs, L=5, R=2, seed=9)
    alone = generate_walks(graphs[1], None, 5, 2, rng=graph_rng(9, 1))
    assert [w.render() for w in both[1]] == [w.render() for w in alone]


def test_walk_file_roundtrip(tmp_path):
    g = build_cpg(STRCPY_EXAMPLE)
    walks = generate_walks(g, L=5, R=2, rng=1)
    path = tmp_path / "w.txt"
    write_walks(path, [walks], 5, 2, 1)
    meta, sentences = read_walks(path)
    assert meta == {"L": "5", "R": "2", "seed": "1"}
    assert sentences == [w.render().split() for w in walks]
    assert path.read_text().splitlines()[0] == "#walks v1 L=5 R=2 seed=1"


@st.composite
def random_cpgs(draw):
    n = draw(st.integers(1, 12))
    types = draw(st.lists(st.sampled_from(["Identifier", "ReturnStatement", "Condition", "Symbol", "Call-Expr"]),
                          min_size=n, max_size=n))
    nodes = [CpgNode(i, t) for i, t in enumerate(types)]
    # AST edges form a forest over increasing ids
    edges = [CpgEdge(draw(st.integers(0, i - 1)), i, EdgeType.IS_AST_PARENT)
             for i in range(1, n) if draw(st.booleans())]
    others = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1),
                                     st.sampled_from(sorted(set(EdgeType) - {EdgeType.IS_AST_PARENT}))),
                           max_size=3 * n))
    edges += [CpgEdge(a, b, t) for a, b, t in others]
    return make_cpg("g", nodes, edges, entry_node=0)


@settings(max_examples=60, deadline=None)
@given(random_cpgs(), st.integers(2, 8), st.integers(1, 4), st.integers(0, 2**31))
def test_walk_invariants(g, L, R, seed):
    walks = generate_walks(g, L=L, R=R, rng=seed)
    assert len(walks) <= 2 * R * g.num_nodes
    for w in walks:
        assert 2 <= len(w.tokens) <= L
        assert len(w.step_sources) == len(w.tokens)
        for tok in w.tokens:
            assert TOKEN_RE.fullmatch(tok.render())
    again = generate_walks(g, L=L, R=R, rng=seed)
    assert [w.render() for w in again] == [w.render() for w in walks]
