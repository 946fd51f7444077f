"""Small labelled corpus of buffer-copy functions for smoke tests and demos.

Vulnerable samples copy an unchecked argument into a fixed stack buffer with
``strcpy``; safe samples bound the copy with ``strncpy`` and terminate the
buffer explicitly.
"""

from __future__ import annotations

import numpy as np

from .cpg import Cpg
from .frontend import build_cpg

_FUNCS = ["copy_input", "handle_name", "store_arg", "parse_field", "read_token", "set_label"]
_INPUTS = ["input", "src", "name", "arg", "data", "text"]
_BUFS = ["buffer", "buf", "dest", "local", "tmp", "out"]
_COUNTS = ["n", "count", "len", "total", "k", "idx"]

STRCPY_EXAMPLE = """char *copy_input(char *input) {
    char buffer[16];
    strcpy(buffer, input);
    return buffer;
}
"""


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def vulnerable_source(rng: np.random.Generator) -> str:
    fn, inp, buf, cnt = _pick(rng, _FUNCS), _pick(rng, _INPUTS), _pick(rng, _BUFS), _pick(rng, _COUNTS)
    size = int(rng.choice([8, 16, 32, 64]))
    extra = ""
    if rng.random() < 0.5:
        extra = f"    for ({cnt} = 0; {cnt} < {size}; {cnt}++) {{\n        total_{cnt} = total_{cnt} + {cnt};\n    }}\n"
    return (
        f"int {fn}(char *{inp}) {{\n"
        f"    char {buf}[{size}];\n"
        f"    int {cnt} = 0;\n"
        f"    int total_{cnt} = 0;\n"
        f"{extra}"
        f"    strcpy({buf}, {inp});\n"
        f"    return {cnt};\n"
        f"}}\n"
    )


def safe_source(rng: np.random.Generator) -> str:
    fn, inp, buf, cnt = _pick(rng, _FUNCS), _pick(rng, _INPUTS), _pick(rng, _BUFS), _pick(rng, _COUNTS)
    size = int(rng.choice([8, 16, 32, 64]))
    extra = ""
    if rng.random() < 0.5:
        extra = f"    for ({cnt} = 0; {cnt} < {size}; {cnt}++) {{\n        total_{cnt} = total_{cnt} + {cnt};\n    }}\n"
    return (
        f"int {fn}(char *{inp}) {{\n"
        f"    char {buf}[{size}];\n"
        f"    int {cnt} = 0;\n"
        f"    int total_{cnt} = 0;\n"
        f"{extra}"
        f"    if (strlen({inp}) >= {size}) {{\n"
        f"        return -1;\n"
        f"    }}\n"
        f"    strncpy({buf}, {inp}, {size} - 1);\n"
        f"    {buf}[{size} - 1] = 0;\n"
        f"    return {cnt};\n"
        f"}}\n"
    )


def synthetic_dataset(n_vulnerable: int = 10, n_safe: int = 10, seed: int = 0) -> list[Cpg]:
    """Labelled graphs, vulnerable first then safe."""
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(n_vulnerable):
        graphs.append(build_cpg(vulnerable_source(rng)).with_label(1))
    for _ in range(n_safe):
        graphs.append(build_cpg(safe_source(rng)).with_label(0))
    return graphs
