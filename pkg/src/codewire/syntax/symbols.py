"""Scopes, bindings, name resolution and the class index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from codewire.syntax.nodes import (
    PRIMITIVE_TYPES,
    SCOPE_KINDS,
    Diagnostic,
    NodeKind,
    SourceUnit,
    Span,
    SyntaxNode,
    TypeRef,
)
from codewire.syntax.stubs import ClassInfo, MethodSig, StubLibrary

_BINDING_KIND = {
    NodeKind.FIELD_DECL: "field",
    NodeKind.PARAMETER: "parameter",
    NodeKind.LOCAL_VAR_DECL: "local",
}
_SCOPE_NODE_KINDS = SCOPE_KINDS | {NodeKind.CLASS_DECL, NodeKind.METHOD_DECL}


@dataclass(eq=False)
class Binding:
    name: str
    kind: str  # "local", "parameter" or "field"
    decl_span: Span
    type_ref: TypeRef
    node: SyntaxNode = field(repr=False)
    scope: Scope = field(repr=False)

    @property
    def static(self) -> bool:
        return "static" in self.node.modifiers


@dataclass(eq=False)
class Scope:
    kind: NodeKind
    node: SyntaxNode = field(repr=False)
    parent: Scope | None = field(default=None, repr=False)
    children: list[Scope] = field(default_factory=list, repr=False)
    bindings: dict[str, Binding] = field(default_factory=dict)
    all_bindings: list[Binding] = field(default_factory=list, repr=False)

    @property
    def span(self) -> Span:
        return self.node.span

    def chain(self) -> Iterator[Scope]:
        scope: Scope | None = self
        while scope is not None:
            yield scope
            scope = scope.parent

    def lookup_here(self, name: str, position: int) -> Binding | None:
        """Binding for ``name`` declared in this very scope and visible at ``position``."""
        found = None
        for binding in self.all_bindings:
            if binding.name != name:
                continue
            if binding.kind == "local" and binding.decl_span.end > position:
                continue
            found = binding  # later declarations win
        return found

    def walk(self) -> Iterator[Scope]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(eq=False)
class SymbolTable:
    unit: SourceUnit
    root: Scope
    class_index: dict[str, ClassInfo]
    imports: set[str] = field(default_factory=set)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    _scopes: dict[int, Scope] = field(default_factory=dict, repr=False)
    _bindings: dict[int, Binding] = field(default_factory=dict, repr=False)

    def scope_of(self, node: SyntaxNode) -> Scope | None:
        return self._scopes.get(id(node))

    def binding_of(self, decl: SyntaxNode) -> Binding | None:
        return self._bindings.get(id(decl))

    def bindings(self) -> Iterator[Binding]:
        for scope in self.root.walk():
            yield from scope.all_bindings

    def scope_at(self, offset: int) -> Scope:
        """Innermost scope whose node span contains ``offset``."""
        scope = self.root
        while True:
            for child in scope.children:
                if child.span.start <= offset < child.span.end:
                    scope = child
                    break
            else:
                return scope

    def resolve(self, name: str, position: int) -> Binding | None:
        for scope in self.scope_at(position).chain():
            binding = scope.lookup_here(name, position)
            if binding is not None:
                return binding
        return None

    def resolve_name(self, ident: SyntaxNode, position: Span | None = None) -> Binding | None:
        if ident.kind is not NodeKind.IDENTIFIER:
            raise ValueError(f"resolve_name expects an Identifier node, got {ident.kind}")
        pos = (position or ident.span).start
        return self.resolve(ident.name or "", pos)

    def visible_bindings(self, position: int) -> list[Binding]:
        """Innermost visible binding for every name at ``position``."""
        seen: dict[str, Binding] = {}
        for scope in self.scope_at(position).chain():
            for name in {b.name for b in scope.all_bindings}:
                if name in seen:
                    continue
                binding = scope.lookup_here(name, position)
                if binding is not None:
                    seen[name] = binding
        return list(seen.values())

    def is_known_type(self, type_ref: TypeRef | str) -> bool:
        base = type_ref.element_base if isinstance(type_ref, TypeRef) else TypeRef(type_ref).element_base
        return base in PRIMITIVE_TYPES or base in self.class_index

    def known(self, type_ref: TypeRef) -> TypeRef:
        return type_ref.with_known(self.is_known_type(type_ref))

    def is_class_name(self, name: str) -> bool:
        return name in self.class_index or name in self.imports

    def class_info(self, name: str) -> ClassInfo | None:
        return self.class_index.get(TypeRef(name).base)


def class_info_from(node: SyntaxNode, source: str) -> ClassInfo:
    info = ClassInfo(node.name or "", source)
    for member in node.children:
        if member.kind is NodeKind.METHOD_DECL:
            params = member.parameters
            ctor = member.type_ref is None
            info.methods.append(
                MethodSig(
                    name=member.name or "",
                    return_type=member.type_ref or TypeRef(info.name),
                    static="static" in member.modifiers,
                    param_types=tuple(p.type_ref or TypeRef("Object") for p in params),
                    param_names=tuple(p.name for p in params),
                    constructor=ctor,
                )
            )
        elif member.kind is NodeKind.FIELD_DECL and member.type_ref is not None:
            info.fields[member.name or ""] = member.type_ref
            if "static" in member.modifiers:
                info.static_fields.add(member.name or "")
    return info


def _declared_classes(unit: SourceUnit) -> Iterable[SyntaxNode]:
    for node in unit.nodes(NodeKind.CLASS_DECL):
        if node.name and not node.name.startswith("<"):
            yield node


def build_class_index(
    unit: SourceUnit, project_files: Iterable[SourceUnit] = (), stubs: StubLibrary | None = None
) -> dict[str, ClassInfo]:
    index: dict[str, ClassInfo] = {}
    for node in _declared_classes(unit):
        index.setdefault(node.name, class_info_from(node, "unit"))
    for other in project_files:
        if other is unit or (other.path == unit.path and unit.path != "<memory>"):
            continue
        for node in _declared_classes(other):
            index.setdefault(node.name, class_info_from(node, "project"))
    if stubs is not None:
        for name, info in stubs.classes.items():
            index.setdefault(name, info)  # stubs never shadow source declarations
    return index


def _infer_var_type(decl: SyntaxNode) -> TypeRef | None:
    if not decl.children:
        return None
    init = decl.children[0]
    if init.kind is NodeKind.OBJECT_CREATION and init.type_ref is not None:
        return init.type_ref
    if init.kind is NodeKind.LITERAL and init.name:
        text = init.name
        if text.startswith('"'):
            return TypeRef("String")
        if text.startswith("'"):
            return TypeRef("char")
        if text in ("true", "false"):
            return TypeRef("boolean")
        if text[:1].isdigit():
            if text[-1] in "lL":
                return TypeRef("long")
            if any(c in text for c in ".eEfFdD") and not text.startswith(("0x", "0X")):
                return TypeRef("float" if text[-1] in "fF" else "double")
            return TypeRef("int")
    return None


def build_symbol_table(
    unit: SourceUnit, project_files: Iterable[SourceUnit] = (), stubs: StubLibrary | None = None
) -> SymbolTable:
    class_index = build_class_index(unit, project_files, stubs)
    imports = set()
    for node in unit.nodes(NodeKind.IMPORT):
        simple = (node.name or "").rsplit(".", 1)[-1]
        if simple and simple != "*" and "static" not in node.modifiers:
            imports.add(simple)
    root = Scope(NodeKind.COMPILATION_UNIT, unit.root)
    table = SymbolTable(unit, root, class_index, imports)
    table._scopes[id(unit.root)] = root

    def visit(node: SyntaxNode, scope: Scope) -> None:
        if node.kind in _SCOPE_NODE_KINDS:
            child = Scope(node.kind, node, scope)
            scope.children.append(child)
            table._scopes[id(node)] = child
            scope = child
        for sub in node.children:
            if sub.kind in _BINDING_KIND and sub.name:
                bind(sub, scope)
            visit(sub, scope)

    def bind(decl: SyntaxNode, scope: Scope) -> None:
        type_ref = decl.type_ref or TypeRef("var")
        if type_ref.name == "var":
            type_ref = _infer_var_type(decl) or type_ref
        binding = Binding(decl.name, _BINDING_KIND[decl.kind], decl.span, table.known(type_ref), decl, scope)
        previous = scope.bindings.get(decl.name)
        if previous is not None:
            table.diagnostics.append(
                Diagnostic(f"duplicate declaration of {decl.name!r} in the same scope", decl.name_span or decl.span,
                           "warning")
            )
        scope.bindings[decl.name] = binding
        scope.all_bindings.append(binding)
        table._bindings[id(decl)] = binding

    visit(unit.root, root)
    return table
