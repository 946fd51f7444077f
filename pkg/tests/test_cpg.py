import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vulngraph.cpg import (
    NUM_EDGE_TYPES, Cpg, CpgEdge, CpgError, CpgNode, EdgeType, ast_depth, cpg_to_record,
    filter_dataset, make_cpg, parse_cpg_stream, serialize, validate,
)

from conftest import chain_graph


def record(**over):
    base = {
        "function": "f",
        "label": 1,
        "entry": 0,
        "nodes": [{"id": 0, "type": "FunctionDef", "code": "f", "cfg": True},
                  {"id": 1, "type": "ReturnStatement", "code": "return 0;", "cfg": True}],
        "edges": [{"src": 0, "dst": 1, "type": "FLOWS_TO"}],
    }
    base.update(over)
    return json.dumps(base)


def test_thirteen_edge_types_with_codes():
    assert NUM_EDGE_TYPES == 13
    assert sorted(int(t) for t in EdgeType) == list(range(1, 14))
    assert EdgeType.parse("reaches") is EdgeType.REACHES
    assert EdgeType.parse("IS_TEMPLATE_OF") is None


def test_unknown_edge_type_dropped_and_counted():
    edges = [{"src": 0, "dst": 1, "type": "FLOWS_TO"}, {"src": 1, "dst": 0, "type": "IS_TEMPLATE_OF"}]
    graphs, summary = parse_cpg_stream(record(edges=edges))
    assert len(graphs) == 1
    assert summary.dropped_edges == 1
    assert [e.etype for e in graphs[0].edges] == [EdgeType.FLOWS_TO]


def test_malformed_line_reported_with_line_number():
    text = record() + "\n{not json\n" + record(function="g") + "\n"
    graphs, summary = parse_cpg_stream(text)
    assert [g.function_name for g in graphs] == ["f", "g"]
    assert [e.line for e in summary.record_errors] == [2]


def test_dangling_edge_rejects_record():
    edges = [{"src": 0, "dst": 7, "type": "FLOWS_TO"}]
    graphs, summary = parse_cpg_stream(record(edges=edges))
    assert graphs == []
    assert len(summary.rejected) == 1 and "7" in str(summary.rejected[0])


def test_duplicate_edges_collapse():
    g = make_cpg("f", [CpgNode(0, "A"), CpgNode(1, "B")],
                 [CpgEdge(0, 1, EdgeType.USE), CpgEdge(0, 1, EdgeType.USE), CpgEdge(0, 1, EdgeType.DEF)])
    assert len(g.edges) == 2


def test_roundtrip_is_byte_stable():
    graphs, _ = parse_cpg_stream(record())
    text = serialize(graphs)
    again, _ = parse_cpg_stream(text)
    assert serialize(again) == text
    assert again == graphs


def test_filter_drops_oversized_and_cfgless():
    big = chain_graph(501)
    edge = chain_graph(500)
    no_cfg = make_cpg("nocfg", [CpgNode(i, "Identifier") for i in range(10)], [])
    kept, report = filter_dataset([big, edge, no_cfg])
    assert kept == [edge]
    assert (report.dropped_size, report.dropped_no_cfg) == (1, 1)


def test_graph_without_entry_has_no_valid_cfg():
    assert not chain_graph(3, entry=False).has_valid_cfg()
    assert chain_graph(3).has_valid_cfg()


def test_ast_depth_two_trees():
    nodes = [CpgNode(i, "N") for i in range(5)]
    edges = [CpgEdge(0, 1, EdgeType.IS_AST_PARENT),
             CpgEdge(2, 3, EdgeType.IS_AST_PARENT), CpgEdge(3, 4, EdgeType.IS_AST_PARENT)]
    depths = ast_depth(make_cpg("t", nodes, edges))
    assert depths == {0: 0, 1: 1, 2: 0, 3: 1, 4: 2}


def test_isolated_node_depth_zero():
    assert ast_depth(make_cpg("t", [CpgNode(0, "N")], [])) == {0: 0}


def test_ast_cycle_raises_and_is_reported():
    nodes = [CpgNode(i, "N") for i in range(3)]
    edges = [CpgEdge(0, 1, EdgeType.IS_AST_PARENT), CpgEdge(1, 2, EdgeType.IS_AST_PARENT),
             CpgEdge(2, 1, EdgeType.IS_AST_PARENT)]
    g = make_cpg("cyc", nodes, edges)
    with pytest.raises(CpgError, match="cycle|twice"):
        ast_depth(g)
    names = {v.invariant for v in validate(g)}
    assert "ast-forest" in names


def test_pure_cycle_without_root():
    nodes = [CpgNode(i, "N") for i in range(2)]
    edges = [CpgEdge(0, 1, EdgeType.IS_AST_PARENT), CpgEdge(1, 0, EdgeType.IS_AST_PARENT)]
    g = make_cpg("cyc", nodes, edges)
    with pytest.raises(CpgError, match="cycle"):
        ast_depth(g)
    assert "ast-acyclic" in {v.invariant for v in validate(g)}


def test_validate_flags_bad_label_and_empty_type():
    g = Cpg("f", (CpgNode(0, ""),), (), label=3)
    names = {v.invariant for v in validate(g)}
    assert {"label-domain", "node-type-nonempty"} <= names


@st.composite
def forests(draw):
    n = draw(st.integers(1, 25))
    parents = [None] + [draw(st.one_of(st.none(), st.integers(0, i - 1))) for i in range(1, n)]
    nodes = [CpgNode(i, "N") for i in range(n)]
    edges = [CpgEdge(p, i, EdgeType.IS_AST_PARENT) for i, p in enumerate(parents) if p is not None]
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1),
                                    st.sampled_from([EdgeType.FLOWS_TO, EdgeType.REACHES])), max_size=10))
    edges += [CpgEdge(a, b, t) for a, b, t in extra]
    return make_cpg("g", nodes, edges, label=draw(st.sampled_from([None, 0, 1])), entry_node=0)


@settings(max_examples=100, deadline=None)
@given(forests())
def test_depth_increments_along_every_ast_edge(g):
    depths = ast_depth(g)
    for e in g.edges:
        if e.etype is EdgeType.IS_AST_PARENT:
            assert depths[e.dst] == depths[e.src] + 1
    assert all(d >= 0 for d in depths.values())
    assert validate(g) == []


@settings(max_examples=100, deadline=None)
@given(forests())
def test_serialize_parse_roundtrip(g):
    graphs, summary = parse_cpg_stream(serialize([g]))
    assert graphs == [g]
    assert summary.dropped_edges == 0
    assert cpg_to_record(graphs[0]) == cpg_to_record(g)
