"""Tokenizer for the supported C subset."""

from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset(
    """
    auto break char const continue double else enum extern float for if int long
    register return short signed static struct union unsigned void volatile while
    """.split()
)

# longest first so that maximal munch falls out of alternation order
OPERATORS = sorted(
    """
    <<= >>= ... -> ++ -- << >> <= >= == != && || += -= *= /= %= &= |= ^=
    + - * / % < > = ! ~ & | ^ ? : .
    """.split(),
    key=len,
    reverse=True,
)
PUNCT = set("(){}[];,")

_NUMBER = re.compile(
    r"""
    0[xX][0-9a-fA-F]+[uUlL]*
    | (?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?[uUlLfF]*
    """,
    re.VERBOSE,
)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class LexError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class CToken:
    kind: str  # identifier, number, string, char, keyword, operator, punct
    text: str
    line: int
    col: int
    offset: int = 0

    @property
    def end(self) -> int:
        return self.offset + len(self.text)


def lex(source: str) -> list[CToken]:
    tokens: list[CToken] = []
    i, line, line_start = 0, 1, 0
    n = len(source)

    def pos(at: int) -> tuple[int, int]:
        return line, at - line_start + 1

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            line_start = i
            continue
        if ch.isspace():
            i += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j < 0:
                raise LexError("unterminated comment", *pos(i))
            chunk = source[i : j + 2]
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = i + chunk.rfind("\n") + 1
            i = j + 2
            continue
        if ch in "\"'":
            j = i + 1
            while j < n and source[j] != ch:
                if source[j] == "\\":
                    j += 1
                if j < n and source[j] == "\n":
                    break
                j += 1
            if j >= n or source[j] != ch:
                what = "string" if ch == '"' else "character"
                raise LexError(f"unterminated {what} literal", *pos(i))
            kind = "string" if ch == '"' else "char"
            tokens.append(CToken(kind, source[i : j + 1], *pos(i), i))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            tokens.append(CToken("number", m.group(), *pos(i), i))
            i = m.end()
            continue
        m = _IDENT.match(source, i)
        if m:
            word = m.group()
            kind = "keyword" if word in KEYWORDS else "identifier"
            tokens.append(CToken(kind, word, *pos(i), i))
            i = m.end()
            continue
        if ch in PUNCT:
            tokens.append(CToken("punct", ch, *pos(i), i))
            i += 1
            continue
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(CToken("operator", op, *pos(i), i))
                i += len(op)
                break
        else:
            raise LexError(f"unexpected character {ch!r}", *pos(i))
    return tokens
