from codewire.syntax.nodes import (
    PRIMITIVE_TYPES,
    Diagnostic,
    NodeKind,
    SourceUnit,
    Span,
    SyntaxNode,
    TypeRef,
    iter_leaf_spans,
)
from codewire.syntax.parser import parse_unit
from codewire.syntax.stubs import ClassInfo, MethodSig, StubLibrary, builtin_stubs, load_stubs, parse_stubs
from codewire.syntax.symbols import Binding, Scope, SymbolTable, build_symbol_table

__all__ = [
    "PRIMITIVE_TYPES",
    "Binding",
    "ClassInfo",
    "Diagnostic",
    "MethodSig",
    "NodeKind",
    "Scope",
    "SourceUnit",
    "Span",
    "StubLibrary",
    "SymbolTable",
    "SyntaxNode",
    "TypeRef",
    "build_symbol_table",
    "builtin_stubs",
    "iter_leaf_spans",
    "load_stubs",
    "parse_stubs",
    "parse_unit",
]
