"""Hand-set three-node toy shared by the explainer tests and the acceptance suite."""

import numpy as np

from vulngraph.cpg import CpgEdge, CpgNode, EdgeType, make_cpg
from vulngraph.gat.model import ModelConfig, init_params, param_shapes
from vulngraph.pipeline import to_graph_input

TOY_CFG = ModelConfig(in_dim=3, hidden_dim=2, out_dim=3, edge_dim=2, mlp_hidden=3, pool_dim=2)


def hand_params():
    """Deterministic hand-set values (no RNG), with live ReLU units in the head."""
    params = init_params(TOY_CFG, np.random.default_rng(0))
    for offset, (name, shape) in enumerate(param_shapes(TOY_CFG).items()):
        size = int(np.prod(shape))
        params.tensors[name] = 0.6 * np.sin(0.9 * np.arange(size) + offset).reshape(shape)
    params.tensors["head.b1"] = np.array([0.5, 0.3, 0.4])
    return params


def toy_graph():
    nodes = [CpgNode(0, "CallExpression", "strcpy(buffer, input)", True),
             CpgNode(1, "Identifier", "buffer"), CpgNode(2, "Identifier", "input")]
    edges = [CpgEdge(0, 1, EdgeType.IS_AST_PARENT), CpgEdge(0, 2, EdgeType.IS_AST_PARENT),
             CpgEdge(1, 2, EdgeType.REACHES), CpgEdge(2, 0, EdgeType.USE)]
    g = make_cpg("toy", nodes, edges, entry_node=0)
    x = np.array([[0.5, -1.0, 2.0], [1.5, 0.2, -0.3], [-0.7, 0.9, 0.1]])
    return g, to_graph_input(g, x)
