"""Graph-attention vulnerability detection over code property graphs."""

from .cpg import Cpg, CpgEdge, CpgNode, EdgeType, filter_dataset, load_jsonl, parse_cpg_stream, write_jsonl
from .frontend import build_cpg

__version__ = "0.1.0"

__all__ = [
    "Cpg", "CpgEdge", "CpgNode", "EdgeType", "build_cpg", "filter_dataset",
    "load_jsonl", "parse_cpg_stream", "write_jsonl",
]
