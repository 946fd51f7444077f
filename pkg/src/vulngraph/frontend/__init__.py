"""C-subset front-end producing code property graphs without Joern."""

from .cfg import BasicBlock, build_cfg, dominators
from .dataflow import defs_and_uses, reaching_definitions
from .lexer import CToken, LexError, lex
from .lower import analyse, build_cpg, lower_to_cpg
from .parser import AST_KINDS, AstNode, ParseError, parse_function, parse_source

__all__ = [
    "AST_KINDS", "AstNode", "BasicBlock", "CToken", "LexError", "ParseError",
    "analyse", "build_cfg", "build_cpg", "defs_and_uses", "dominators", "lex",
    "lower_to_cpg", "parse_function", "parse_source", "reaching_definitions",
]
