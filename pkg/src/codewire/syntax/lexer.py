"""Tokenizer for the analyzed Java subset.

Whitespace and comments are dropped; every other character ends up in some
token. Characters the grammar has no use for become ``ERROR`` tokens so the
parser can recover around them instead of the lexer giving up.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class TokenKind(enum.Enum):
    IDENT = "identifier"
    KEYWORD = "keyword"
    INT = "int literal"
    FLOAT = "float literal"
    STRING = "string literal"
    CHAR = "char literal"
    OP = "operator"
    ERROR = "invalid character"
    EOF = "end of file"


KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null var
    record yield
    """.split()
)

# Contextual words that are only keywords in some positions.
SOFT_KEYWORDS = frozenset({"var", "record", "yield"})

_OPERATORS = sorted(
    """
    >>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= &= |= ^= %=
    << ( ) { } [ ] ; , . @ = > < ! ~ ? : + - * / & | ^ %
    """.split(),
    key=len,
    reverse=True,
)
# ">>" and ">>>" are deliberately absent as single tokens: splitting them keeps
# nested generic closers (List<List<String>>) simple. The expression parser
# glues adjacent '>' tokens back into shift operators.
_OPERATORS = [op for op in _OPERATORS if op not in (">>>", ">>")]


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    start: int
    end: int

    def is_op(self, *ops: str) -> bool:
        return self.kind is TokenKind.OP and self.text in ops

    def is_keyword(self, *words: str) -> bool:
        return self.kind is TokenKind.KEYWORD and self.text in words

    def __repr__(self) -> str:
        return f"Token({self.kind.name}, {self.text!r}, {self.start})"


@dataclass(frozen=True)
class LexIssue:
    message: str
    start: int
    end: int


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch in "_$"


def _is_ident_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_$"


def tokenize(text: str) -> tuple[list[Token], list[LexIssue]]:
    tokens: list[Token] = []
    issues: list[LexIssue] = []
    i, n = 0, len(text)

    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("//", i):
            nl = text.find("\n", i)
            i = n if nl < 0 else nl
            continue
        if text.startswith("/*", i):
            close = text.find("*/", i + 2)
            if close < 0:
                issues.append(LexIssue("unterminated block comment", i, n))
                i = n
            else:
                i = close + 2
            continue

        start = i
        if _is_ident_start(ch):
            while i < n and _is_ident_part(text[i]):
                i += 1
            word = text[start:i]
            kind = TokenKind.KEYWORD if word in KEYWORDS and word not in SOFT_KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, word, start, i))
            continue

        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            i, kind = _scan_number(text, i)
            tokens.append(Token(kind, text[start:i], start, i))
            continue

        if text.startswith('"""', i):
            close = text.find('"""', i + 3)
            if close < 0:
                issues.append(LexIssue("unterminated text block", i, n))
                i = n
            else:
                i = close + 3
            tokens.append(Token(TokenKind.STRING, text[start:i], start, i))
            continue

        if ch in "\"'":
            i = _scan_quoted(text, i, ch)
            if i > n or text[i - 1] != ch or i - start < 2:
                i = min(i, n)
                issues.append(LexIssue("unterminated literal", start, i))
            kind = TokenKind.STRING if ch == '"' else TokenKind.CHAR
            tokens.append(Token(kind, text[start:i], start, i))
            continue

        for op in _OPERATORS:
            if text.startswith(op, i):
                i += len(op)
                tokens.append(Token(TokenKind.OP, op, start, i))
                break
        else:
            i += 1
            tokens.append(Token(TokenKind.ERROR, ch, start, i))
            issues.append(LexIssue(f"unexpected character {ch!r}", start, i))

    tokens.append(Token(TokenKind.EOF, "", n, n))
    return tokens, issues


def _scan_number(text: str, i: int) -> tuple[int, TokenKind]:
    n = len(text)
    kind = TokenKind.INT
    if text.startswith(("0x", "0X", "0b", "0B"), i):
        i += 2
        while i < n and (text[i].isalnum() or text[i] == "_"):
            i += 1
        return i, kind
    while i < n and (text[i].isdigit() or text[i] == "_"):
        i += 1
    if i < n and text[i] == "." and (i + 1 >= n or text[i + 1].isdigit() or not _is_ident_start(text[i + 1])):
        kind = TokenKind.FLOAT
        i += 1
        while i < n and (text[i].isdigit() or text[i] == "_"):
            i += 1
    if i < n and text[i] in "eE":
        j = i + 1
        if j < n and text[j] in "+-":
            j += 1
        if j < n and text[j].isdigit():
            kind = TokenKind.FLOAT
            i = j
            while i < n and text[i].isdigit():
                i += 1
    if i < n and text[i] in "fFdD":
        kind = TokenKind.FLOAT
        i += 1
    elif i < n and text[i] in "lL":
        i += 1
    return i, kind


def _scan_quoted(text: str, i: int, quote: str) -> int:
    n = len(text)
    i += 1
    while i < n:
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == quote:
            return i + 1
        if ch == "\n":
            return i
        i += 1
    return n
