"""Adaptation region handling and detection of unresolved elements."""

from __future__ import annotations

from dataclasses import dataclass, field

from codewire.errors import MarkerError
from codewire.syntax.nodes import NodeKind, SourceUnit, Span, SyntaxNode
from codewire.syntax.symbols import Scope, SymbolTable

START_MARKER = "<start>"
END_MARKER = "<end>"


@dataclass(frozen=True)
class MarkedSource:
    """Source text with the control tokens removed and the region they delimited."""

    text: str
    region_start: int
    region_end: int
    original: str


def extract_region(text: str) -> MarkedSource:
    starts = _find_all(text, START_MARKER)
    ends = _find_all(text, END_MARKER)
    if not starts:
        raise MarkerError(f"missing {START_MARKER} marker")
    if not ends:
        raise MarkerError(f"missing {END_MARKER} marker")
    if len(starts) > 1 or len(ends) > 1:
        raise MarkerError(
            f"expected exactly one {START_MARKER}/{END_MARKER} pair, found {len(starts)} and {len(ends)}"
        )
    start, end = starts[0], ends[0]
    if end < start + len(START_MARKER):
        raise MarkerError(f"{END_MARKER} appears before {START_MARKER}")
    clean = text[:start] + text[start + len(START_MARKER) : end] + text[end + len(END_MARKER) :]
    return MarkedSource(clean, start, end - len(START_MARKER), text)


def _find_all(text: str, needle: str) -> list[int]:
    hits, i = [], text.find(needle)
    while i >= 0:
        hits.append(i)
        i = text.find(needle, i + 1)
    return hits


@dataclass(frozen=True)
class AdaptationRegion:
    unit: SourceUnit
    span: Span
    method: SyntaxNode = field(repr=False)

    @property
    def body(self) -> SyntaxNode:
        return self.method.body

    @property
    def start(self) -> int:
        return self.span.start

    def contains(self, span: Span) -> bool:
        return self.span.contains(span)

    @property
    def text(self) -> str:
        return self.unit.slice(self.span)

    @property
    def enclosing_class(self) -> SyntaxNode | None:
        return self.method.enclosing(NodeKind.CLASS_DECL)


def locate_region(unit: SourceUnit, start: int, end: int) -> AdaptationRegion:
    """Bind a ``[start, end)`` range to the method whose body encloses it."""
    method = unit.node_at(start, NodeKind.METHOD_DECL) if start < len(unit.text) else None
    body = method.body if method is not None else None
    if method is None or body is None or not (body.span.start < start and end < body.span.end):
        raise MarkerError("the marked region must lie inside a method body")
    # A region that starts inside a nested method (anonymous class) still
    # belongs to the innermost method containing both ends.
    if not method.span.contains(Span(start, end)):
        raise MarkerError("the marked region spans more than one method")
    return AdaptationRegion(unit, unit.span(start, end), method)


@dataclass
class UnresolvedElement:
    name: str
    kind: str  # "identifier" or "receiver_expression"
    references: list[Span]
    nodes: list[SyntaxNode] = field(default_factory=list, repr=False, compare=False)
    role_hints: object | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "references": [r.to_dict() for r in self.references],
        }


def is_receiver_position(node: SyntaxNode) -> bool:
    parent = node.parent
    return parent is not None and parent.has_receiver and parent.children[0] is node


def _is_call_receiver(node: SyntaxNode) -> bool:
    return is_receiver_position(node) and node.parent.kind is NodeKind.METHOD_INVOCATION


def _looks_like_class_name(name: str) -> bool:
    return name[:1].isupper() and any(c.islower() for c in name)


def region_identifiers(region: AdaptationRegion) -> list[SyntaxNode]:
    return [
        node
        for node in region.method.walk()
        if node.kind is NodeKind.IDENTIFIER and region.span.contains(node.span)
    ]


def identify_unresolved_elements(region: AdaptationRegion, table: SymbolTable) -> list[UnresolvedElement]:
    groups: dict[str, list[SyntaxNode]] = {}
    for node in region_identifiers(region):
        if table.resolve(node.name, node.span.start) is not None:
            continue
        groups.setdefault(node.name, []).append(node)
    elements = []
    for name, nodes in groups.items():
        if table.is_class_name(name):
            continue  # static access to a known class
        if _looks_like_class_name(name) and all(is_receiver_position(n) for n in nodes):
            continue  # qualifier of an unknown class, e.g. Log.d(...)
        kind = "receiver_expression" if any(_is_call_receiver(n) for n in nodes) else "identifier"
        nodes.sort(key=lambda n: n.span.start)
        elements.append(UnresolvedElement(name, kind, [n.span for n in nodes], nodes))
    elements.sort(key=lambda e: e.references[0].start)
    return elements


def references_of(table: SymbolTable, name: str, scope: Scope) -> list[Span]:
    """Every Identifier ``name`` inside ``scope`` whose resolution lands in ``scope`` or fails."""
    if not name:
        raise ValueError("name must be non-empty")
    spans = []
    for node in scope.node.walk():
        if node.kind is not NodeKind.IDENTIFIER or node.name != name:
            continue
        binding = table.resolve(name, node.span.start)
        if binding is None or binding.scope is scope:
            spans.append(node.span)
    return spans
