"""Recursive-descent parser for single C function definitions.

Supported subset: int/char/void (plus common qualifiers, ``struct Name`` and
typedef names used in declarations), pointers and arrays; declarations,
expression statements, if/else, while, for, return, break and continue.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import CToken, lex

AST_KINDS = frozenset(
    {
        "FunctionDef", "Parameter", "CompoundStatement", "IdentifierDeclStatement",
        "ExpressionStatement", "IfStatement", "WhileStatement", "ForStatement",
        "ReturnStatement", "BreakStatement", "ContinueStatement", "Condition",
        "CallExpression", "AssignmentExpression", "BinaryExpression", "UnaryExpression",
        "PtrMemberAccess", "ArrayIndexing", "Identifier", "NumberLiteral",
        "StringLiteral", "Symbol",
    }
)

STATEMENT_KINDS = frozenset(
    {
        "CompoundStatement", "IdentifierDeclStatement", "ExpressionStatement",
        "IfStatement", "WhileStatement", "ForStatement", "ReturnStatement",
        "BreakStatement", "ContinueStatement",
    }
)

TYPE_KEYWORDS = frozenset(
    "void char short int long float double signed unsigned const volatile static "
    "extern register auto struct union enum".split()
)

ASSIGN_OPS = frozenset("= += -= *= /= %= &= |= ^= <<= >>=".split())

BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]
PREFIX_OPS = frozenset("- + ! ~ * & ++ --".split())


class ParseError(ValueError):
    def __init__(self, message: str, token: CToken | None):
        if token is None:
            where = "end of input"
            self.line = self.col = None
        else:
            where = f"{token.line}:{token.col}"
            self.line, self.col = token.line, token.col
        super().__init__(f"{where}: {message}")


@dataclass(eq=False)
class AstNode:
    kind: str
    children: list["AstNode"] = field(default_factory=list)
    text: str = ""
    attrs: dict = field(default_factory=dict)
    line: int = 0

    def walk(self):
        """Pre-order traversal."""
        yield self
        for ch in self.children:
            yield from ch.walk()

    def __repr__(self):
        inner = ", ".join(repr(c) for c in self.children)
        return f"{self.kind}({inner})" if inner else f"{self.kind}<{self.text}>"


def _span_text(tokens: list[CToken]) -> str:
    parts = []
    prev = None
    for tok in tokens:
        if prev is not None and tok.offset > prev.end:
            parts.append(" ")
        parts.append(tok.text)
        prev = tok
    return "".join(parts)


class _Parser:
    def __init__(self, tokens: list[CToken]):
        self.toks = tokens
        self.i = 0

    # -- token helpers
    def peek(self, k: int = 0) -> CToken | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok is not None and tok.text == text and tok.kind in ("operator", "punct", "keyword")

    def advance(self) -> CToken:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", None)
        self.i += 1
        return tok

    def expect(self, text: str) -> CToken:
        tok = self.peek()
        if tok is None or tok.text != text or tok.kind in ("string", "char", "number"):
            found = "end of input" if tok is None else repr(tok.text)
            raise ParseError(f"expected {text!r}, found {found}", tok)
        self.i += 1
        return tok

    def expect_ident(self) -> CToken:
        tok = self.peek()
        if tok is None or tok.kind != "identifier":
            found = "end of input" if tok is None else repr(tok.text)
            raise ParseError(f"expected identifier, found {found}", tok)
        self.i += 1
        return tok

    def node(self, kind, start: int, children=(), **attrs) -> AstNode:
        toks = self.toks[start : self.i]
        return AstNode(
            kind,
            list(children),
            _span_text(toks),
            attrs,
            toks[0].line if toks else 0,
        )

    # -- declarations
    def starts_declaration(self) -> bool:
        tok = self.peek()
        if tok is None:
            return False
        if tok.kind == "keyword" and tok.text in TYPE_KEYWORDS:
            return True
        if tok.kind != "identifier":
            return False
        # typedef-name heuristics: `T x`, `T *x =`, `T *x;`
        nxt = self.peek(1)
        if nxt is not None and nxt.kind == "identifier":
            return True
        j = 1
        while self.at("*", j):
            j += 1
        if j > 1:
            name, after = self.peek(j), self.peek(j + 1)
            return (
                name is not None
                and name.kind == "identifier"
                and after is not None
                and after.text in ("=", ";", ",", "[")
            )
        return False

    def type_specifiers(self) -> str:
        words = []
        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok.kind == "keyword" and tok.text in ("struct", "union", "enum"):
                self.advance()
                words.append(f"{tok.text} {self.expect_ident().text}")
            elif tok.kind == "keyword" and tok.text in TYPE_KEYWORDS:
                self.advance()
                words.append(tok.text)
            elif tok.kind == "identifier" and not words:
                self.advance()
                words.append(tok.text)
            else:
                break
        if not words:
            raise ParseError("expected type specifier", self.peek())
        return " ".join(words)

    def function(self) -> AstNode:
        start = self.i
        ret_type = self.type_specifiers()
        while self.at("*"):
            self.advance()
            ret_type += " *"
        name = self.expect_ident().text
        self.expect("(")
        params = []
        if self.at("void") and self.at(")", 1):
            self.advance()
        elif not self.at(")"):
            while True:
                params.append(self.parameter())
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        body = self.compound()
        if self.peek() is not None:
            raise ParseError(f"expected end of input, found {self.peek().text!r}", self.peek())
        return self.node("FunctionDef", start, [*params, body], name=name, return_type=ret_type)

    def parameter(self) -> AstNode:
        start = self.i
        ptype = self.type_specifiers()
        while self.at("*") or self.at("const"):
            ptype += " " + self.advance().text
        ident = self.expect_ident()
        name_node = AstNode("Identifier", [], ident.text, {"name": ident.text}, ident.line)
        while self.at("["):
            self.advance()
            if not self.at("]"):
                self.expression()
            self.expect("]")
            ptype += "[]"
        return self.node("Parameter", start, [name_node], name=ident.text, type=ptype)

    def declaration(self) -> AstNode:
        start = self.i
        self.type_specifiers()
        children, names = [], []
        while True:
            while self.at("*") or self.at("const"):
                self.advance()
            ident_index = self.i
            ident = self.expect_ident()
            name_node = AstNode("Identifier", [], ident.text, {"name": ident.text}, ident.line)
            while self.at("["):
                self.advance()
                if not self.at("]"):
                    self.expression()
                self.expect("]")
            names.append(ident.text)
            if self.at("="):
                self.advance()
                init = self.assignment()
                node = self.node("AssignmentExpression", ident_index, [name_node, init], op="=")
                children.append(node)
            else:
                children.append(name_node)
            if not self.at(","):
                break
            self.advance()
        self.expect(";")
        return self.node("IdentifierDeclStatement", start, children, names=names)

    # -- statements
    def compound(self) -> AstNode:
        start = self.i
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek() is None:
                raise ParseError("expected '}', found end of input", None)
            stmts.append(self.statement())
        self.expect("}")
        return self.node("CompoundStatement", start, stmts)

    def statement(self) -> AstNode:
        start = self.i
        tok = self.peek()
        if tok is None:
            raise ParseError("expected statement, found end of input", None)
        if self.at("{"):
            return self.compound()
        if self.at(";"):
            self.advance()
            return self.node("CompoundStatement", start)
        if tok.kind == "keyword":
            if tok.text == "if":
                self.advance()
                cond = self.condition()
                then = self.statement()
                children = [cond, then]
                if self.at("else"):
                    self.advance()
                    children.append(self.statement())
                return self.node("IfStatement", start, children)
            if tok.text == "while":
                self.advance()
                cond = self.condition()
                body = self.statement()
                return self.node("WhileStatement", start, [cond, body])
            if tok.text == "for":
                return self.for_statement()
            if tok.text == "return":
                self.advance()
                children = [] if self.at(";") else [self.expression()]
                self.expect(";")
                return self.node("ReturnStatement", start, children)
            if tok.text == "break":
                self.advance()
                self.expect(";")
                return self.node("BreakStatement", start)
            if tok.text == "continue":
                self.advance()
                self.expect(";")
                return self.node("ContinueStatement", start)
            if tok.text in ("else",):
                raise ParseError("'else' without matching 'if'", tok)
        if self.starts_declaration():
            return self.declaration()
        expr = self.expression()
        self.expect(";")
        return self.node("ExpressionStatement", start, [expr])

    def condition(self) -> AstNode:
        self.expect("(")
        start = self.i
        expr = self.expression()
        cond = self.node("Condition", start, [expr])
        self.expect(")")
        return cond

    def for_statement(self) -> AstNode:
        start = self.i
        self.expect("for")
        self.expect("(")
        children = []
        init = cond = step = None
        if self.at(";"):
            self.advance()
        elif self.starts_declaration():
            init = self.declaration()
        else:
            s = self.i
            expr = self.expression()
            self.expect(";")
            init = self.node("ExpressionStatement", s, [expr])
        if not self.at(";"):
            s = self.i
            expr = self.expression()
            cond = self.node("Condition", s, [expr])
        self.expect(";")
        if not self.at(")"):
            step = self.expression()
        self.expect(")")
        body = self.statement()
        for part in (init, cond, step):
            if part is not None:
                children.append(part)
        children.append(body)
        return self.node("ForStatement", start, children, init=init, cond=cond, step=step, body=body)

    # -- expressions
    def expression(self) -> AstNode:
        return self.assignment()

    def assignment(self) -> AstNode:
        start = self.i
        lhs = self.binary(0)
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.text in ASSIGN_OPS:
            self.advance()
            rhs = self.assignment()
            return self.node("AssignmentExpression", start, [lhs, rhs], op=tok.text)
        return lhs

    def binary(self, level: int) -> AstNode:
        if level == len(BINARY_LEVELS):
            return self.unary()
        start = self.i
        left = self.binary(level + 1)
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "operator" or tok.text not in BINARY_LEVELS[level]:
                return left
            self.advance()
            right = self.binary(level + 1)
            left = self.node("BinaryExpression", start, [left, right], op=tok.text)

    def unary(self) -> AstNode:
        start = self.i
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.text in PREFIX_OPS:
            self.advance()
            operand = self.unary()
            return self.node("UnaryExpression", start, [operand], op=tok.text, prefix=True)
        return self.postfix()

    def postfix(self) -> AstNode:
        start = self.i
        expr = self.primary()
        while True:
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.assignment())
                        if not self.at(","):
                            break
                        self.advance()
                self.expect(")")
                if expr.kind == "Identifier":
                    expr.attrs["role"] = "callee"
                expr = self.node("CallExpression", start, [expr, *args], callee=expr.text)
            elif self.at("["):
                self.advance()
                index = self.expression()
                self.expect("]")
                expr = self.node("ArrayIndexing", start, [expr, index])
            elif self.at("->") or self.at("."):
                op = self.advance().text
                member = self.expect_ident()
                member_node = AstNode(
                    "Identifier", [], member.text, {"name": member.text, "role": "member"}, member.line
                )
                expr = self.node("PtrMemberAccess", start, [expr, member_node], op=op)
            elif self.at("++") or self.at("--"):
                op = self.advance().text
                expr = self.node("UnaryExpression", start, [expr], op=op, prefix=False)
            else:
                return expr

    def primary(self) -> AstNode:
        start = self.i
        tok = self.peek()
        if tok is None:
            raise ParseError("expected expression, found end of input", None)
        if tok.kind == "identifier":
            self.advance()
            return self.node("Identifier", start, name=tok.text)
        if tok.kind in ("number", "char"):
            self.advance()
            return self.node("NumberLiteral", start)
        if tok.kind == "string":
            while self.peek() is not None and self.peek().kind == "string":
                self.advance()
            return self.node("StringLiteral", start)
        if self.at("("):
            self.advance()
            expr = self.expression()
            self.expect(")")
            return expr
        raise ParseError(f"expected expression, found {tok.text!r}", tok)


def parse_function(tokens: list[CToken]) -> AstNode:
    """Parse a token stream holding exactly one function definition."""
    return _Parser(tokens).function()


def parse_source(source: str) -> AstNode:
    return parse_function(lex(source))
