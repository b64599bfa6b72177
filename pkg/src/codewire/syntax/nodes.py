"""Positioned syntax tree types."""

from __future__ import annotations

import bisect
import enum
import re
from dataclasses import dataclass, field
from typing import Iterator

PRIMITIVE_TYPES = frozenset(
    {"boolean", "byte", "char", "short", "int", "long", "float", "double", "void"}
)

_GENERIC_ARGS = re.compile(r"<.*>", re.DOTALL)


@dataclass(frozen=True, order=True)
class Span:
    """Half-open ``[start, end)`` character range with 1-based line/column of ``start``."""

    start: int
    end: int
    line: int = field(default=1, compare=False)
    column: int = field(default=1, compare=False)

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"span start {self.start} after end {self.end}")

    def __len__(self) -> int:
        return self.end - self.start

    def contains(self, other: Span) -> bool:
        return self.start <= other.start and other.end <= self.end

    def contains_offset(self, offset: int) -> bool:
        return self.start <= offset < self.end

    def overlaps(self, other: Span) -> bool:
        return self.start < other.end and other.start < self.end

    def to_dict(self) -> dict[str, int]:
        return {"start": self.start, "end": self.end, "line": self.line, "column": self.column}


class LineIndex:
    """Maps character offsets to 1-based line/column pairs."""

    def __init__(self, text: str) -> None:
        self.length = len(text)
        self._starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self._starts.append(i + 1)

    def position(self, offset: int) -> tuple[int, int]:
        line = bisect.bisect_right(self._starts, offset) - 1
        return line + 1, offset - self._starts[line] + 1

    def span(self, start: int, end: int) -> Span:
        if not (0 <= start <= end <= self.length):
            raise ValueError(f"span [{start}, {end}) outside text of length {self.length}")
        line, column = self.position(start)
        return Span(start, end, line, column)


@dataclass(frozen=True)
class TypeRef:
    """A type as written in source. Generic arguments stay raw text.

    ``known`` is decided by the symbol table, never by the parser.
    """

    name: str
    known: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("TypeRef name must be non-empty")

    @property
    def base(self) -> str:
        """Simple name with generic arguments erased, e.g. ``java.util.List<String>`` -> ``List``.

        Array dimensions are kept (``byte[]``); varargs are normalised to arrays.
        """
        raw = _GENERIC_ARGS.sub("", self.name).replace(" ", "")
        raw = raw.replace("...", "[]")
        dims = ""
        while raw.endswith("[]"):
            dims += "[]"
            raw = raw[:-2]
        return raw.rsplit(".", 1)[-1] + dims

    @property
    def element_base(self) -> str:
        return self.base.replace("[]", "")

    def with_known(self, known: bool) -> TypeRef:
        return self if known == self.known else TypeRef(self.name, known)

    def __str__(self) -> str:
        return self.name


class NodeKind(str, enum.Enum):
    COMPILATION_UNIT = "CompilationUnit"
    IMPORT = "Import"
    CLASS_DECL = "ClassDecl"
    FIELD_DECL = "FieldDecl"
    METHOD_DECL = "MethodDecl"
    PARAMETER = "Parameter"
    LOCAL_VAR_DECL = "LocalVarDecl"
    BLOCK = "Block"
    IF = "If"
    FOR = "For"
    WHILE = "While"
    TRY = "Try"
    CATCH = "Catch"
    SWITCH = "Switch"
    RETURN = "Return"
    THROW = "Throw"
    JUMP = "Jump"
    EXPR_STMT = "ExprStmt"
    ASSIGNMENT = "Assignment"
    METHOD_INVOCATION = "MethodInvocation"
    FIELD_ACCESS = "FieldAccess"
    IDENTIFIER = "Identifier"
    LITERAL = "Literal"
    THIS = "This"
    OBJECT_CREATION = "ObjectCreation"
    EXPRESSION = "Expression"
    LAMBDA = "Lambda"
    ERROR_RECOVERY = "ErrorRecovery"

    def __str__(self) -> str:
        return self.value


# Node kinds that open a lexical scope for local declarations.
SCOPE_KINDS = frozenset(
    {
        NodeKind.BLOCK,
        NodeKind.FOR,
        NodeKind.TRY,
        NodeKind.CATCH,
        NodeKind.SWITCH,
        NodeKind.LAMBDA,
    }
)

DECLARATION_KINDS = frozenset(
    {NodeKind.FIELD_DECL, NodeKind.PARAMETER, NodeKind.LOCAL_VAR_DECL}
)


@dataclass(eq=False)
class SyntaxNode:
    """One node of the syntax tree.

    Children are ordered by source position and never overlap. For
    ``MethodInvocation`` and ``FieldAccess`` the receiver, when present, is
    ``children[0]`` and ``has_receiver`` is set; the remaining children of a
    ``MethodInvocation`` are its arguments, one node per argument.
    """

    kind: NodeKind
    span: Span
    children: list[SyntaxNode] = field(default_factory=list)
    name: str | None = None
    type_ref: TypeRef | None = None
    name_span: Span | None = None
    modifiers: frozenset[str] = frozenset()
    has_receiver: bool = False
    parent: SyntaxNode | None = field(default=None, repr=False)

    @property
    def receiver(self) -> SyntaxNode | None:
        return self.children[0] if self.has_receiver else None

    @property
    def arguments(self) -> list[SyntaxNode]:
        if self.kind not in (NodeKind.METHOD_INVOCATION, NodeKind.OBJECT_CREATION):
            return []
        args = self.children[1:] if self.has_receiver else list(self.children)
        return [a for a in args if a.kind is not NodeKind.CLASS_DECL]

    @property
    def body(self) -> SyntaxNode | None:
        for child in reversed(self.children):
            if child.kind is NodeKind.BLOCK:
                return child
        return None

    @property
    def parameters(self) -> list[SyntaxNode]:
        return [c for c in self.children if c.kind is NodeKind.PARAMETER]

    def walk(self) -> Iterator[SyntaxNode]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def ancestors(self) -> Iterator[SyntaxNode]:
        node = self.parent
        while node is not None:
            yield node
            node = node.parent

    def enclosing(self, *kinds: NodeKind) -> SyntaxNode | None:
        for node in self.ancestors():
            if node.kind in kinds:
                return node
        return None

    def shape(self) -> tuple:
        """Structure without positions; used to compare trees across edits."""
        return (
            self.kind.value,
            self.name,
            self.type_ref.name if self.type_ref else None,
            tuple(c.shape() for c in self.children),
        )

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name is not None else ""
        return f"<{self.kind.value}{label} [{self.span.start}:{self.span.end}]>"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: Span
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.span.line}:{self.span.column}: {self.severity}: {self.message}"


@dataclass(eq=False)
class SourceUnit:
    path: str
    text: str
    root: SyntaxNode
    diagnostics: list[Diagnostic] = field(default_factory=list)
    lines: LineIndex | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.lines is None:
            self.lines = LineIndex(self.text)

    def span(self, start: int, end: int) -> Span:
        return self.lines.span(start, end)

    def slice(self, span: Span) -> str:
        return self.text[span.start : span.end]

    def nodes(self, kind: NodeKind | None = None) -> Iterator[SyntaxNode]:
        for node in self.root.walk():
            if kind is None or node.kind is kind:
                yield node

    def classes(self) -> list[SyntaxNode]:
        return list(self.nodes(NodeKind.CLASS_DECL))

    def node_at(self, offset: int, kind: NodeKind) -> SyntaxNode | None:
        """Innermost node of ``kind`` whose span contains ``offset``."""
        found = None
        node = self.root
        while True:
            if node.kind is kind:
                found = node
            for child in node.children:
                if child.span.start <= offset < child.span.end:
                    node = child
                    break
            else:
                return found


def iter_leaf_spans(node: SyntaxNode) -> Iterator[Span]:
    """Yield the gaps of ``node`` not covered by children, interleaved with
    the children's own leaf spans, skipping ``ErrorRecovery`` subtrees.

    Concatenating the text of the yielded spans reproduces the covered text
    minus error-recovery gaps.
    """
    if node.kind is NodeKind.ERROR_RECOVERY:
        return
    cursor = node.span.start
    for child in node.children:
        if child.span.start > cursor:
            yield Span(cursor, child.span.start)
        yield from iter_leaf_spans(child)
        cursor = max(cursor, child.span.end)
    if node.span.end > cursor:
        yield Span(cursor, node.span.end)
