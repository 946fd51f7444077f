import numpy as np
import pytest

from vulngraph.config import PipelineConfig
from vulngraph.cpg import CpgEdge, CpgNode, EdgeType, make_cpg
from vulngraph.synthetic import synthetic_dataset

SMALL_OVERRIDES = {
    "embedding.semantic_dim": 16,
    "embedding.structural_dim": 16,
    "embedding.semantic_epochs": 10,
    "embedding.structural_epochs": 4,
    "embedding.window": 3,
    "embedding.negatives": 5,
    "walk.length": 8,
    "walk.walks_per_node": 2,
    "model.hidden_dim": 16,
    "model.edge_dim": 8,
    "model.mlp_hidden": 8,
    "train.max_epochs": 15,
}


@pytest.fixture
def small_config() -> PipelineConfig:
    return PipelineConfig().with_overrides(SMALL_OVERRIDES)


@pytest.fixture(scope="session")
def synthetic_graphs():
    return synthetic_dataset(10, 10, seed=0)


def chain_graph(n, etype=EdgeType.FLOWS_TO, node_type="ExpressionStatement", entry=True):
    nodes = [CpgNode(i, node_type, f"s{i}", True) for i in range(n)]
    edges = [CpgEdge(i, i + 1, etype) for i in range(n - 1)]
    return make_cpg(f"chain{n}", nodes, edges, entry_node=0 if entry else None)


def random_graph_input(rng: np.random.Generator, n_nodes: int, in_dim: int, max_edges: int | None = None):
    from vulngraph.gat.model import GraphInput

    n_edges = int(rng.integers(1, max_edges or 2 * n_nodes + 1))
    src = rng.integers(0, n_nodes, n_edges)
    dst = rng.integers(0, n_nodes, n_edges)
    etype = rng.integers(1, 14, n_edges)
    x = rng.standard_normal((n_nodes, in_dim))
    return GraphInput.from_lists(x, src, dst, etype)


def pytest_terminal_summary(terminalreporter):
    from criteria import report_lines

    lines = report_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
