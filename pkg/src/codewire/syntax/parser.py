"""Error-tolerant recursive-descent parser for a Java-like subset.

Declarations and statements are parsed properly; constructs the analyses
never look at (annotations, generic arguments, ``throws`` clauses, type
parameters) are consumed but not represented. When a statement cannot be
parsed, the parser rewinds to the statement start and skips to the next
statement boundary, emitting an ``ErrorRecovery`` node so the surrounding
scopes stay intact.
"""

from __future__ import annotations

from typing import Callable

from codewire.errors import InputError
from codewire.syntax.lexer import Token, TokenKind, tokenize
from codewire.syntax.nodes import (
    PRIMITIVE_TYPES,
    Diagnostic,
    LineIndex,
    NodeKind,
    SourceUnit,
    Span,
    SyntaxNode,
    TypeRef,
)

CLASS_KEYWORDS = frozenset({"class", "interface", "enum"})
MODIFIERS = frozenset(
    {
        "public", "private", "protected", "static", "final", "abstract", "native",
        "synchronized", "transient", "volatile", "strictfp", "default",
    }
)
ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="})
LITERAL_KEYWORDS = frozenset({"true", "false", "null"})

# Binary operator precedence, loosest first. Assignment and ?: are handled separately.
_BINARY_LEVELS: list[frozenset[str]] = [
    frozenset({"||"}),
    frozenset({"&&"}),
    frozenset({"|"}),
    frozenset({"^"}),
    frozenset({"&"}),
    frozenset({"==", "!="}),
    frozenset({"<", ">", "<=", ">=", "instanceof"}),
    frozenset({"<<", ">>", ">>>"}),
    frozenset({"+", "-"}),
    frozenset({"*", "/", "%"}),
]


class ParseError(Exception):
    def __init__(self, message: str, token: Token) -> None:
        super().__init__(message)
        self.token = token


def parse_unit(text: str | bytes, path: str = "<memory>") -> SourceUnit:
    """Parse ``text`` into a :class:`SourceUnit`. Never raises on malformed code."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"{path}: source is not valid UTF-8: {exc}") from exc
    return _Parser(text, path).parse()


class _Parser:
    def __init__(self, text: str, path: str) -> None:
        self.text = text
        self.path = path
        self.lines = LineIndex(text)
        self.tokens, issues = tokenize(text)
        self.pos = 0
        self.diagnostics: list[Diagnostic] = [
            Diagnostic(issue.message, self.lines.span(issue.start, issue.end)) for issue in issues
        ]

    # -- token helpers -------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        idx = min(self.pos + k, len(self.tokens) - 1)
        return self.tokens[idx]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind is not TokenKind.EOF:
            self.pos += 1
        return tok

    def at_op(self, *ops: str) -> bool:
        return self.peek().is_op(*ops)

    def at_keyword(self, *words: str) -> bool:
        return self.peek().is_keyword(*words)

    def at_eof(self) -> bool:
        return self.peek().kind is TokenKind.EOF

    def expect_op(self, op: str) -> Token:
        tok = self.peek()
        if not tok.is_op(op):
            raise ParseError(f"expected {op!r}, found {tok.text or tok.kind.value!r}", tok)
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind is not TokenKind.IDENT:
            raise ParseError(f"expected identifier, found {tok.text or tok.kind.value!r}", tok)
        return self.advance()

    def span_from(self, start_idx: int) -> Span:
        start = self.tokens[start_idx].start
        end = self.tokens[self.pos - 1].end if self.pos > start_idx else start
        return self.lines.span(start, max(start, end))

    def tok_span(self, tok: Token) -> Span:
        return self.lines.span(tok.start, tok.end)

    def node(self, kind: NodeKind, start_idx: int, children=(), **kw) -> SyntaxNode:
        return SyntaxNode(kind, self.span_from(start_idx), list(children), **kw)

    def error(self, message: str, span: Span) -> None:
        self.diagnostics.append(Diagnostic(message, span))

    def speculate(self, fn: Callable[[], object]) -> object | None:
        """Run ``fn``; on ParseError rewind and return None."""
        saved = self.pos
        n_diag = len(self.diagnostics)
        try:
            return fn()
        except ParseError:
            self.pos = saved
            del self.diagnostics[n_diag:]
            return None

    # -- compilation unit ----------------------------------------------------

    def parse(self) -> SourceUnit:
        children: list[SyntaxNode] = []
        loose_members: list[SyntaxNode] = []
        while not self.at_eof():
            start = self.pos
            try:
                if self.at_keyword("package"):
                    self.skip_past_semicolon()
                elif self.at_keyword("import"):
                    children.append(self.parse_import())
                elif self.at_op(";"):
                    self.advance()
                elif self.looks_like_type_decl():
                    mods = self.parse_modifiers()
                    children.append(self.parse_class(start, mods))
                else:
                    members = self.parse_member("")
                    loose_members.extend(members)
            except ParseError as exc:
                self.pos = start
                children.append(self.recover_member(start, exc))
        if loose_members:
            # A bare method (or a few members) with no class around them.
            first, last = loose_members[0].span, loose_members[-1].span
            synthetic = SyntaxNode(
                NodeKind.CLASS_DECL,
                self.lines.span(first.start, last.end),
                loose_members,
                name="<synthetic>",
                modifiers=frozenset({"synthetic"}),
            )
            children.append(synthetic)
            children.sort(key=lambda n: n.span.start)
        root = SyntaxNode(NodeKind.COMPILATION_UNIT, self.lines.span(0, len(self.text)), children)
        _link_parents(root)
        unit = SourceUnit(self.path, self.text, root, self.diagnostics, self.lines)
        has_errors = any(n.kind is NodeKind.ERROR_RECOVERY for n in root.walk())
        if has_errors and not unit.diagnostics:
            unit.diagnostics.append(Diagnostic("syntax error", root.span))
        return unit

    def skip_past_semicolon(self) -> None:
        while not self.at_eof() and not self.at_op(";"):
            self.advance()
        if self.at_op(";"):
            self.advance()

    def parse_import(self) -> SyntaxNode:
        start = self.pos
        self.advance()
        mods = set()
        if self.at_keyword("static"):
            self.advance()
            mods.add("static")
        parts = [self.expect_ident().text]
        while self.at_op("."):
            self.advance()
            if self.at_op("*"):
                self.advance()
                parts.append("*")
                break
            parts.append(self.expect_ident().text)
        self.expect_op(";")
        return self.node(NodeKind.IMPORT, start, name=".".join(parts), modifiers=frozenset(mods))

    def looks_like_type_decl(self) -> bool:
        k = 0
        while True:
            tok = self.peek(k)
            if tok.is_keyword(*MODIFIERS):
                k += 1
            elif tok.is_op("@") and self.peek(k + 1).kind is TokenKind.IDENT:
                k = self._skip_annotation_lookahead(k)
            elif tok.is_op("@") and self.peek(k + 1).is_keyword("interface"):
                return True
            else:
                break
        tok = self.peek(k)
        if tok.is_keyword(*CLASS_KEYWORDS):
            return True
        return tok.kind is TokenKind.IDENT and tok.text == "record" and self.peek(k + 1).kind is TokenKind.IDENT

    def _skip_annotation_lookahead(self, k: int) -> int:
        k += 2
        while self.peek(k).is_op(".") and self.peek(k + 1).kind is TokenKind.IDENT:
            k += 2
        if self.peek(k).is_op("("):
            depth = 0
            while self.peek(k).kind is not TokenKind.EOF:
                tok = self.peek(k)
                if tok.is_op("("):
                    depth += 1
                elif tok.is_op(")"):
                    depth -= 1
                    if depth == 0:
                        k += 1
                        break
                k += 1
        return k

    # -- modifiers, annotations, types ----------------------------------------

    def parse_modifiers(self) -> frozenset[str]:
        mods: set[str] = set()
        while True:
            tok = self.peek()
            if tok.is_keyword(*MODIFIERS) and not (tok.text == "default" and self.peek(1).is_op(":", "->")):
                mods.add(self.advance().text)
            elif tok.is_op("@") and not self.peek(1).is_keyword("interface"):
                self.skip_annotation()
            elif tok.kind is TokenKind.IDENT and tok.text in ("sealed",) and self.peek(1).kind in (TokenKind.IDENT, TokenKind.KEYWORD):
                mods.add(self.advance().text)
            else:
                return frozenset(mods)

    def skip_annotation(self) -> None:
        self.expect_op("@")
        self.expect_ident()
        while self.at_op(".") and self.peek(1).kind is TokenKind.IDENT:
            self.advance()
            self.advance()
        if self.at_op("("):
            self.skip_balanced("(", ")")

    def skip_balanced(self, open_: str, close: str) -> None:
        self.expect_op(open_)
        depth = 1
        while depth:
            tok = self.peek()
            if tok.kind is TokenKind.EOF:
                raise ParseError(f"unbalanced {open_!r}", tok)
            if tok.is_op(open_):
                depth += 1
            elif tok.is_op(close):
                depth -= 1
            self.advance()

    def skip_type_arguments(self) -> None:
        """Consume ``<...>``; raise if the contents cannot be type arguments."""
        self.expect_op("<")
        depth = 1
        while depth:
            tok = self.peek()
            if tok.is_op("<"):
                depth += 1
            elif tok.is_op(">"):
                depth -= 1
            elif tok.is_op(">>=", ">>>=", ">="):
                raise ParseError("not a type argument list", tok)
            elif not (
                tok.kind is TokenKind.IDENT
                or tok.is_keyword(*PRIMITIVE_TYPES, "extends", "super")
                or tok.is_op(",", ".", "?", "[", "]", "&", "@")
            ):
                raise ParseError("not a type argument list", tok)
            self.advance()

    def parse_type(self, allow_var: bool = True) -> TypeRef:
        start = self.pos
        tok = self.peek()
        if tok.is_keyword(*PRIMITIVE_TYPES):
            self.advance()
        elif tok.kind is TokenKind.IDENT:
            self.advance()
            if self.at_op("<"):
                self.skip_type_arguments()
            while self.at_op(".") and self.peek(1).kind is TokenKind.IDENT:
                self.advance()
                self.advance()
                if self.at_op("<"):
                    self.skip_type_arguments()
        else:
            raise ParseError(f"expected type, found {tok.text or tok.kind.value!r}", tok)
        while self.at_op("[") and self.peek(1).is_op("]"):
            self.advance()
            self.advance()
        if self.at_op("..."):
            self.advance()
        raw = "".join(t.text for t in self.tokens[start : self.pos])
        if not allow_var and raw == "var":
            raise ParseError("'var' is not a type here", tok)
        return TypeRef(raw)

    # -- classes -------------------------------------------------------------

    def parse_class(self, start: int, mods: frozenset[str]) -> SyntaxNode:
        if self.at_op("@"):
            self.advance()
        kw = self.advance()
        keyword = kw.text
        name_tok = self.expect_ident()
        if self.at_op("<"):
            self.skip_type_arguments()
        members: list[SyntaxNode] = []
        if keyword == "record" and self.at_op("("):
            members.extend(self.parse_record_components())
        while not self.at_op("{"):
            if self.at_eof() or self.at_op(";", "}"):
                raise ParseError("expected class body", self.peek())
            self.advance()
        members.extend(self.parse_class_body(name_tok.text, is_enum=keyword == "enum"))
        return self.node(
            NodeKind.CLASS_DECL,
            start,
            members,
            name=name_tok.text,
            name_span=self.tok_span(name_tok),
            modifiers=mods | {keyword},
        )

    def parse_record_components(self) -> list[SyntaxNode]:
        self.expect_op("(")
        fields: list[SyntaxNode] = []
        while not self.at_op(")"):
            start = self.pos
            self.parse_modifiers()
            type_ref = self.parse_type()
            name_tok = self.expect_ident()
            fields.append(
                self.node(NodeKind.FIELD_DECL, start, name=name_tok.text, type_ref=type_ref,
                          name_span=self.tok_span(name_tok), modifiers=frozenset({"private", "final"}))
            )
            if not self.at_op(")"):
                self.expect_op(",")
        self.advance()
        return fields

    def parse_class_body(self, class_name: str, is_enum: bool = False) -> list[SyntaxNode]:
        open_tok = self.expect_op("{")
        members: list[SyntaxNode] = []
        if is_enum:
            members.extend(self.parse_enum_constants(class_name))
        while not self.at_op("}"):
            if self.at_eof():
                self.error("expected '}' to close class body", self.tok_span(open_tok))
                return members
            start = self.pos
            try:
                members.extend(self.parse_member(class_name))
            except ParseError as exc:
                self.pos = start
                members.append(self.recover_member(start, exc))
        self.advance()
        return members

    def parse_enum_constants(self, enum_name: str) -> list[SyntaxNode]:
        constants: list[SyntaxNode] = []
        while self.peek().kind is TokenKind.IDENT or self.at_op("@"):
            start = self.pos
            if self.at_op("@"):
                self.skip_annotation()
                continue
            name_tok = self.advance()
            children = []
            if self.at_op("("):
                children = self.parse_arguments()
            if self.at_op("{"):
                children.append(self.parse_anonymous_body(f"<enum {name_tok.text}>"))
            constants.append(
                self.node(NodeKind.FIELD_DECL, start, children, name=name_tok.text,
                          type_ref=TypeRef(enum_name), name_span=self.tok_span(name_tok),
                          modifiers=frozenset({"public", "static", "final", "enum_constant"}))
            )
            if self.at_op(","):
                self.advance()
            else:
                break
        if self.at_op(";"):
            self.advance()
        return constants

    def parse_member(self, class_name: str) -> list[SyntaxNode]:
        start = self.pos
        if self.at_op(";"):
            self.advance()
            return []
        if self.at_op("{") or (self.at_keyword("static") and self.peek(1).is_op("{")):
            mods = frozenset({"static"}) if self.at_keyword("static") else frozenset()
            if mods:
                self.advance()
            block = self.parse_block()
            block.name = "<initializer>"
            block.modifiers = mods
            block.span = self.span_from(start)
            return [block]
        if self.looks_like_type_decl():
            mods = self.parse_modifiers()
            return [self.parse_class(start, mods)]
        mods = self.parse_modifiers()
        if self.at_op("<"):
            self.skip_type_arguments()
        tok = self.peek()
        if tok.kind is TokenKind.IDENT and self.peek(1).is_op("(") and (tok.text == class_name or not class_name):
            # Constructor. With no enclosing class any `name(` is treated as one,
            # which is only reachable for malformed input.
            if tok.text == class_name:
                name_tok = self.advance()
                return [self.parse_method_rest(start, mods, None, name_tok)]
        type_ref = self.parse_type()
        name_tok = self.expect_ident()
        if self.at_op("("):
            return [self.parse_method_rest(start, mods, type_ref, name_tok)]
        decls = self.parse_declarators(start, type_ref, NodeKind.FIELD_DECL, mods, name_tok)
        self.expect_op(";")
        return decls

    def parse_method_rest(self, start: int, mods, type_ref: TypeRef | None, name_tok: Token) -> SyntaxNode:
        children = self.parse_parameters()
        while self.at_op("[") and self.peek(1).is_op("]"):
            self.advance()
            self.advance()
        if self.at_keyword("throws"):
            self.advance()
            self.parse_type()
            while self.at_op(","):
                self.advance()
                self.parse_type()
        if self.at_keyword("default"):
            # annotation element default value
            self.advance()
            while not self.at_op(";") and not self.at_eof():
                self.advance()
        if self.at_op("{"):
            children.append(self.parse_block())
        else:
            self.expect_op(";")
        return self.node(
            NodeKind.METHOD_DECL, start, children, name=name_tok.text, type_ref=type_ref,
            name_span=self.tok_span(name_tok), modifiers=mods,
        )

    def parse_parameters(self) -> list[SyntaxNode]:
        self.expect_op("(")
        params: list[SyntaxNode] = []
        while not self.at_op(")"):
            params.append(self.parse_parameter())
            if not self.at_op(")"):
                self.expect_op(",")
        self.advance()
        return params

    def parse_parameter(self) -> SyntaxNode:
        start = self.pos
        mods = self.parse_modifiers()
        type_ref = self.parse_type()
        if self.at_keyword("this"):  # receiver parameter
            name_tok = self.advance()
        else:
            name_tok = self.expect_ident()
        while self.at_op("[") and self.peek(1).is_op("]"):
            self.advance()
            self.advance()
            type_ref = TypeRef(type_ref.name + "[]")
        return self.node(NodeKind.PARAMETER, start, name=name_tok.text, type_ref=type_ref,
                         name_span=self.tok_span(name_tok), modifiers=mods)

    def parse_declarators(
        self, start: int, type_ref: TypeRef, kind: NodeKind, mods, name_tok: Token | None = None
    ) -> list[SyntaxNode]:
        """Parse ``a = 1, b[] = {..}``: one declaration node per declarator.

        The first node also covers the modifiers and type; the separating
        commas belong to the parent.
        """
        decls: list[SyntaxNode] = []
        while True:
            if name_tok is None:
                name_tok = self.expect_ident()
            decl_type = type_ref
            while self.at_op("[") and self.peek(1).is_op("]"):
                self.advance()
                self.advance()
                decl_type = TypeRef(decl_type.name + "[]")
            children = []
            if self.at_op("="):
                self.advance()
                children.append(self.parse_variable_initializer())
            decls.append(
                self.node(kind, start, children, name=name_tok.text, type_ref=decl_type,
                          name_span=self.tok_span(name_tok), modifiers=mods)
            )
            if not self.at_op(","):
                return decls
            self.advance()
            start = self.pos
            name_tok = None

    def parse_variable_initializer(self) -> SyntaxNode:
        if self.at_op("{"):
            return self.parse_array_initializer()
        return self.parse_expression()

    def parse_array_initializer(self) -> SyntaxNode:
        start = self.pos
        self.expect_op("{")
        elements = []
        while not self.at_op("}"):
            elements.append(self.parse_variable_initializer())
            if not self.at_op("}"):
                self.expect_op(",")
        self.advance()
        return self.node(NodeKind.EXPRESSION, start, elements, name="{}")

    def parse_anonymous_body(self, label: str) -> SyntaxNode:
        start = self.pos
        members = self.parse_class_body(label)
        return self.node(NodeKind.CLASS_DECL, start, members, name=label, modifiers=frozenset({"anonymous"}))

    # -- recovery --------------------------------------------------------------

    def recover_member(self, start: int, exc: ParseError) -> SyntaxNode:
        """Skip to ``;`` or past a balanced ``{...}`` at class-body level."""
        depth = 0
        while not self.at_eof():
            tok = self.peek()
            if tok.is_op("{"):
                depth += 1
            elif tok.is_op("}"):
                if depth == 0:
                    break
                depth -= 1
                if depth == 0:
                    self.advance()
                    break
            elif tok.is_op(";") and depth == 0:
                self.advance()
                break
            self.advance()
        if self.pos == start:
            self.advance()
        return self.error_node(start, exc)

    def recover_statement(self, start: int, exc: ParseError) -> SyntaxNode:
        if not self.can_start_statement(start):
            # Junk in front of a statement: drop tokens until something that
            # can begin a statement, keeping the statement that follows.
            while not self.at_eof() and not self.at_op(";", "}") and not self.can_start_statement(self.pos):
                self.advance()
            if self.at_op(";"):
                self.advance()
        else:
            depth = 0
            while not self.at_eof():
                tok = self.peek()
                if tok.is_op("{"):
                    depth += 1
                elif tok.is_op("}"):
                    if depth == 0:
                        break
                    depth -= 1
                    if depth == 0:
                        self.advance()
                        break
                elif tok.is_op(";") and depth == 0:
                    self.advance()
                    break
                self.advance()
        if self.pos == start:
            self.advance()
        return self.error_node(start, exc)

    def error_node(self, start: int, exc: ParseError) -> SyntaxNode:
        node = self.node(NodeKind.ERROR_RECOVERY, start)
        self.error(str(exc), node.span)
        return node

    def can_start_statement(self, idx: int) -> bool:
        tok = self.tokens[idx]
        nxt = self.tokens[min(idx + 1, len(self.tokens) - 1)]
        if tok.kind in (TokenKind.IDENT, TokenKind.INT, TokenKind.FLOAT, TokenKind.STRING, TokenKind.CHAR):
            return True
        if tok.kind is TokenKind.KEYWORD:
            return tok.text not in {
                "else", "catch", "finally", "case", "default", "extends", "implements",
                "instanceof", "throws", "import", "package",
            }
        if tok.kind is TokenKind.OP:
            if tok.text == "@":
                return nxt.kind is TokenKind.IDENT
            return tok.text in {"(", "{", ";", "++", "--", "-", "+", "!", "~"}
        return False

    # -- statements --------------------------------------------------------------

    def parse_block(self) -> SyntaxNode:
        start = self.pos
        open_tok = self.expect_op("{")
        children = self.parse_statements_until(lambda: self.at_op("}"))
        if self.at_op("}"):
            self.advance()
        else:
            self.error("expected '}' to close block", self.tok_span(open_tok))
        return self.node(NodeKind.BLOCK, start, children)

    def parse_statements_until(self, stop: Callable[[], bool]) -> list[SyntaxNode]:
        children: list[SyntaxNode] = []
        while not self.at_eof() and not stop():
            start = self.pos
            try:
                children.extend(self.parse_statement())
            except ParseError as exc:
                self.pos = start
                children.append(self.recover_statement(start, exc))
        return children

    def parse_statement(self) -> list[SyntaxNode]:
        tok = self.peek()
        start = self.pos
        if tok.is_op("{"):
            return [self.parse_block()]
        if tok.is_op(";"):
            self.advance()
            return []
        if tok.kind is TokenKind.KEYWORD:
            handler = _STATEMENT_KEYWORDS.get(tok.text)
            if handler is not None:
                return handler(self)
            if tok.text in CLASS_KEYWORDS or tok.text in MODIFIERS:
                return self.parse_declaration_statement()
        if tok.is_op("@"):
            return self.parse_declaration_statement()
        if tok.kind is TokenKind.IDENT:
            if self.peek(1).is_op(":"):
                self.advance()
                self.advance()
                return self.parse_statement()
            if tok.text == "yield" and not self.peek(1).is_op("=", "(", ".", "[", "++", "--"):
                self.advance()
                value = self.parse_expression()
                self.expect_op(";")
                return [self.node(NodeKind.EXPR_STMT, start, [value], name="yield")]
            if self.looks_like_type_decl():
                return self.parse_declaration_statement()
        decls = self.speculate(self.try_local_declaration)
        if decls is not None:
            return decls
        expr = self.parse_expression()
        self.expect_op(";")
        return [self.node(NodeKind.EXPR_STMT, start, [expr])]

    def try_local_declaration(self) -> list[SyntaxNode]:
        start = self.pos
        type_ref = self.parse_type()
        if self.peek().kind is not TokenKind.IDENT or not self.peek(1).is_op("=", ";", ",", "["):
            raise ParseError("not a declaration", self.peek())
        decls = self.parse_declarators(start, type_ref, NodeKind.LOCAL_VAR_DECL, frozenset())
        self.expect_op(";")
        return decls

    def parse_declaration_statement(self) -> list[SyntaxNode]:
        start = self.pos
        if self.looks_like_type_decl():
            mods = self.parse_modifiers()
            return [self.parse_class(start, mods)]
        mods = self.parse_modifiers()
        type_ref = self.parse_type()
        decls = self.parse_declarators(start, type_ref, NodeKind.LOCAL_VAR_DECL, mods)
        self.expect_op(";")
        return decls

    def parse_paren_expression(self) -> SyntaxNode:
        self.expect_op("(")
        expr = self.parse_expression()
        self.expect_op(")")
        return expr

    def parse_if(self) -> list[SyntaxNode]:
        start = self.pos
        self.advance()
        children = [self.parse_paren_expression()]
        children.extend(self.parse_statement())
        if self.at_keyword("else"):
            self.advance()
            children.extend(self.parse_statement())
        return [self.node(NodeKind.IF, start, children)]

    def parse_while(self) -> list[SyntaxNode]:
        start = self.pos
        self.advance()
        children = [self.parse_paren_expression()]
        children.extend(self.parse_statement())
        return [self.node(NodeKind.WHILE, start, children)]

    def parse_do(self) -> list[SyntaxNode]:
        start = self.pos
        self.advance()
        children = self.parse_statement()
        if not self.at_keyword("while"):
            raise ParseError("expected 'while' after do body", self.peek())
        self.advance()
        children.append(self.parse_paren_expression())
        self.expect_op(";")
        return [self.node(NodeKind.WHILE, start, children, name="do")]

    def parse_for(self) -> list[SyntaxNode]:
        start = self.pos
        self.advance()
        self.expect_op("(")
        foreach = self.speculate(self.try_foreach_header)
        if foreach is not None:
            children = list(foreach)
            self.expect_op(")")
            children.extend(self.parse_statement())
            return [self.node(NodeKind.FOR, start, children, name="foreach")]
        children: list[SyntaxNode] = []
        if not self.at_op(";"):
            decls = self.speculate(self.try_for_init_declaration)
            if decls is not None:
                children.extend(decls)
            else:
                children.extend(self.parse_expression_list())
        self.expect_op(";")
        if not self.at_op(";"):
            children.append(self.parse_expression())
        self.expect_op(";")
        if not self.at_op(")"):
            children.extend(self.parse_expression_list())
        self.expect_op(")")
        children.extend(self.parse_statement())
        return [self.node(NodeKind.FOR, start, children)]

    def try_foreach_header(self) -> list[SyntaxNode]:
        start = self.pos
        mods = self.parse_modifiers()
        type_ref = self.parse_type()
        name_tok = self.expect_ident()
        decl = self.node(NodeKind.LOCAL_VAR_DECL, start, name=name_tok.text, type_ref=type_ref,
                         name_span=self.tok_span(name_tok), modifiers=mods)
        self.expect_op(":")
        return [decl, self.parse_expression()]

    def try_for_init_declaration(self) -> list[SyntaxNode]:
        start = self.pos
        mods = self.parse_modifiers()
        type_ref = self.parse_type()
        if self.peek().kind is not TokenKind.IDENT:
            raise ParseError("not a declaration", self.peek())
        decls = self.parse_declarators(start, type_ref, NodeKind.LOCAL_VAR_DECL, mods)
        if not self.at_op(";"):
            raise ParseError("not a declaration", self.peek())
        return decls

    def parse_expression_list(self) -> list[SyntaxNode]:
        exprs = [self.parse_expression()]
        while self.at_op(","):
            self.advance()
            exprs.append(self.parse_expression())
        return exprs

    def parse_try(self) -> list[SyntaxNode]:
        start = self.pos
        self.advance()
        children: list[SyntaxNode] = []
        if self.at_op("("):
            self.advance()
            while not self.at_op(")"):
                res_start = self.pos
                decl = self.speculate(self.try_resource_declaration)
                if decl is not None:
                    children.append(decl)
                else:
                    children.append(self.parse_expression())
                if self.at_op(";"):
                    self.advance()
                elif not self.at_op(")"):
                    raise ParseError("expected ';' or ')' in resource list", self.peek())
                if self.pos == res_start:
                    raise ParseError("bad resource", self.peek())
            self.advance()
        children.append(self.parse_block())
        while self.at_keyword("catch"):
            catch_start = self.pos
            self.advance()
            self.expect_op("(")
            param_start = self.pos
            mods = self.parse_modifiers()
            types = [self.parse_type().name]
            while self.at_op("|"):
                self.advance()
                types.append(self.parse_type().name)
            name_tok = self.expect_ident()
            param = self.node(NodeKind.PARAMETER, param_start, name=name_tok.text,
                              type_ref=TypeRef("|".join(types)), name_span=self.tok_span(name_tok),
                              modifiers=mods)
            self.expect_op(")")
            body = self.parse_block()
            children.append(self.node(NodeKind.CATCH, catch_start, [param, body]))
        if self.at_keyword("finally"):
            self.advance()
            block = self.parse_block()
            block.name = "finally"
            children.append(block)
        return [self.node(NodeKind.TRY, start, children)]

    def try_resource_declaration(self) -> SyntaxNode:
        start = self.pos
        mods = self.parse_modifiers()
        type_ref = self.parse_type()
        name_tok = self.expect_ident()
        self.expect_op("=")
        init = self.parse_expression()
        return self.node(NodeKind.LOCAL_VAR_DECL, start, [init], name=name_tok.text, type_ref=type_ref,
                         name_span=self.tok_span(name_tok), modifiers=mods)

    def parse_switch(self) -> SyntaxNode:
        start = self.pos
        self.advance()
        children = [self.parse_paren_expression()]
        self.expect_op("{")
        while not self.at_op("}"):
            if self.at_eof():
                raise ParseError("unterminated switch", self.peek())
            if self.at_keyword("case"):
                self.advance()
                children.extend(self.parse_case_labels())
            elif self.at_keyword("default"):
                self.advance()
            else:
                raise ParseError("expected 'case' or 'default'", self.peek())
            if self.at_op("->"):
                self.advance()
                if self.at_op("{"):
                    children.append(self.parse_block())
                elif self.at_keyword("throw"):
                    children.extend(self.parse_throw())
                else:
                    expr_start = self.pos
                    expr = self.parse_expression()
                    self.expect_op(";")
                    children.append(self.node(NodeKind.EXPR_STMT, expr_start, [expr]))
            else:
                self.expect_op(":")
                children.extend(
                    self.parse_statements_until(lambda: self.at_op("}") or self.at_keyword("case", "default"))
                )
        self.advance()
        return self.node(NodeKind.SWITCH, start, children)

    def parse_case_labels(self) -> list[SyntaxNode]:
        labels = []
        while True:
            tok = self.peek()
            if tok.kind is TokenKind.IDENT and self.peek(1).is_op(":", "->", ","):
                # Enum constant label; resolved against the selector type, not the scope.
                self.advance()
                labels.append(SyntaxNode(NodeKind.LITERAL, self.tok_span(tok), name=tok.text))
            else:
                labels.append(self.parse_ternary())
            if not self.at_op(","):
                return labels
            self.advance()

    def parse_switch_statement(self) -> list[SyntaxNode]:
        return [self.parse_switch()]

    def parse_return(self) -> list[SyntaxNode]:
        start = self.pos
        self.advance()
        children = [] if self.at_op(";") else [self.parse_expression()]
        self.expect_op(";")
        return [self.node(NodeKind.RETURN, start, children)]

    def parse_throw(self) -> list[SyntaxNode]:
        start = self.pos
        self.advance()
        children = [self.parse_expression()]
        self.expect_op(";")
        return [self.node(NodeKind.THROW, start, children)]

    def parse_jump(self) -> list[SyntaxNode]:
        start = self.pos
        kw = self.advance().text
        if self.peek().kind is TokenKind.IDENT:
            self.advance()
        self.expect_op(";")
        return [self.node(NodeKind.JUMP, start, name=kw)]

    def parse_synchronized(self) -> list[SyntaxNode]:
        if not self.peek(1).is_op("("):
            return self.parse_declaration_statement()
        start = self.pos
        self.advance()
        lock = self.parse_paren_expression()
        body = self.parse_block()
        return [self.node(NodeKind.BLOCK, start, [lock, body], name="synchronized")]

    def parse_assert(self) -> list[SyntaxNode]:
        start = self.pos
        self.advance()
        children = [self.parse_expression()]
        if self.at_op(":"):
            self.advance()
            children.append(self.parse_expression())
        self.expect_op(";")
        return [self.node(NodeKind.EXPR_STMT, start, children, name="assert")]

    # -- expressions ---------------------------------------------------------------

    def parse_expression(self) -> SyntaxNode:
        left = self.parse_ternary()
        tok = self.peek()
        op = self.match_assign_op()
        if op is not None:
            value = self.parse_expression()
            return SyntaxNode(NodeKind.ASSIGNMENT, self.lines.span(left.span.start, value.span.end),
                              [left, value], name=op)
        del tok
        return left

    def match_assign_op(self) -> str | None:
        tok = self.peek()
        if tok.kind is not TokenKind.OP:
            return None
        if tok.text in ASSIGN_OPS:
            self.advance()
            return tok.text
        # '>' '>' '=' style shift-assign split by the lexer
        if tok.text == ">" and self.peek(1).is_op(">=") and self.peek(1).start == tok.end:
            self.advance()
            self.advance()
            return ">>="
        return None

    def parse_ternary(self) -> SyntaxNode:
        cond = self.parse_binary(0)
        if not self.at_op("?"):
            return cond
        self.advance()
        then = self.parse_ternary_branch()
        self.expect_op(":")
        other = self.parse_ternary_branch()
        return SyntaxNode(NodeKind.EXPRESSION, self.lines.span(cond.span.start, other.span.end),
                          [cond, then, other], name="?:")

    def parse_ternary_branch(self) -> SyntaxNode:
        if self.looks_like_lambda():
            return self.parse_lambda()
        return self.parse_ternary()

    def match_binary_op(self, ops: frozenset[str]) -> str | None:
        tok = self.peek()
        if tok.is_keyword("instanceof") and "instanceof" in ops:
            return "instanceof"
        if tok.kind is not TokenKind.OP:
            return None
        if tok.text == ">":
            # glue '>' '>' ['>'] into shift operators
            n = 1
            while n < 3 and self.peek(n).is_op(">") and self.peek(n).start == self.peek(n - 1).end:
                n += 1
            if n > 1 and self.peek(n).is_op("=", ">=") and self.peek(n).start == self.peek(n - 1).end:
                return None  # shift-assign, handled by the assignment level
            text = ">" * n
            return text if text in ops else None
        return tok.text if tok.text in ops else None

    def parse_binary(self, level: int) -> SyntaxNode:
        if level >= len(_BINARY_LEVELS):
            return self.parse_unary()
        ops = _BINARY_LEVELS[level]
        left = self.parse_binary(level + 1)
        while True:
            op = self.match_binary_op(ops)
            if op is None:
                return left
            if op == "instanceof":
                self.advance()
                if self.at_keyword("final"):
                    self.advance()
                type_start = self.pos
                type_ref = self.parse_type()
                children = [left]
                if self.peek().kind is TokenKind.IDENT:
                    name_tok = self.advance()
                    children.append(
                        self.node(NodeKind.LOCAL_VAR_DECL, type_start, name=name_tok.text, type_ref=type_ref,
                                  name_span=self.tok_span(name_tok))
                    )
                left = SyntaxNode(NodeKind.EXPRESSION, self.lines.span(left.span.start, self.tokens[self.pos - 1].end),
                                  children, name="instanceof", type_ref=type_ref)
                continue
            for _ in range(len(op) if set(op) == {">"} else 1):
                self.advance()
            right = self.parse_binary(level + 1)
            left = SyntaxNode(NodeKind.EXPRESSION, self.lines.span(left.span.start, right.span.end),
                              [left, right], name=op)

    def parse_unary(self) -> SyntaxNode:
        tok = self.peek()
        start = self.pos
        if tok.is_op("!", "~", "+", "-", "++", "--"):
            self.advance()
            operand = self.parse_unary()
            return SyntaxNode(NodeKind.EXPRESSION, self.lines.span(tok.start, operand.span.end),
                              [operand], name=tok.text)
        if tok.is_op("("):
            if self.looks_like_lambda():
                return self.parse_lambda()
            cast = self.speculate(self.try_cast)
            if cast is not None:
                return cast
        if tok.kind is TokenKind.IDENT and self.peek(1).is_op("->"):
            return self.parse_lambda()
        del start
        return self.parse_postfix(self.parse_primary())

    def try_cast(self) -> SyntaxNode:
        start = self.pos
        self.expect_op("(")
        type_ref = self.parse_type(allow_var=False)
        while self.at_op("&"):
            self.advance()
            self.parse_type()
        self.expect_op(")")
        nxt = self.peek()
        primitive = type_ref.element_base in PRIMITIVE_TYPES
        operand_start = nxt.kind in (
            TokenKind.IDENT, TokenKind.INT, TokenKind.FLOAT, TokenKind.STRING, TokenKind.CHAR,
        ) or nxt.is_keyword("this", "super", "new", "true", "false", "null", "switch") or nxt.is_op("(", "!", "~")
        if primitive:
            operand_start = operand_start or nxt.is_op("+", "-", "++", "--")
        if not operand_start:
            raise ParseError("not a cast", nxt)
        operand = self.parse_unary()
        return SyntaxNode(NodeKind.EXPRESSION, self.lines.span(self.tokens[start].start, operand.span.end),
                          [operand], name="cast", type_ref=type_ref)

    def looks_like_lambda(self) -> bool:
        tok = self.peek()
        if tok.kind is TokenKind.IDENT:
            return self.peek(1).is_op("->")
        if not tok.is_op("("):
            return False
        depth, k = 0, 0
        while True:
            t = self.peek(k)
            if t.kind is TokenKind.EOF:
                return False
            if t.is_op("("):
                depth += 1
            elif t.is_op(")"):
                depth -= 1
                if depth == 0:
                    return self.peek(k + 1).is_op("->")
            elif t.is_op(";", "{", "}"):
                return False
            k += 1

    def parse_lambda(self) -> SyntaxNode:
        start = self.pos
        params: list[SyntaxNode] = []
        if self.peek().kind is TokenKind.IDENT:
            tok = self.advance()
            params.append(SyntaxNode(NodeKind.PARAMETER, self.tok_span(tok), name=tok.text,
                                     type_ref=TypeRef("var"), name_span=self.tok_span(tok)))
        else:
            self.expect_op("(")
            while not self.at_op(")"):
                if self.peek().kind is TokenKind.IDENT and self.peek(1).is_op(",", ")"):
                    tok = self.advance()
                    params.append(SyntaxNode(NodeKind.PARAMETER, self.tok_span(tok), name=tok.text,
                                             type_ref=TypeRef("var"), name_span=self.tok_span(tok)))
                else:
                    params.append(self.parse_parameter())
                if not self.at_op(")"):
                    self.expect_op(",")
            self.advance()
        self.expect_op("->")
        body = self.parse_block() if self.at_op("{") else self.parse_expression()
        return self.node(NodeKind.LAMBDA, start, params + [body])

    def parse_primary(self) -> SyntaxNode:
        tok = self.peek()
        start = self.pos
        if tok.kind in (TokenKind.INT, TokenKind.FLOAT, TokenKind.STRING, TokenKind.CHAR) or tok.is_keyword(
            *LITERAL_KEYWORDS
        ):
            self.advance()
            return SyntaxNode(NodeKind.LITERAL, self.tok_span(tok), name=tok.text)
        if tok.is_keyword("this", "super"):
            self.advance()
            if self.at_op("("):
                args = self.parse_arguments()
                return self.node(NodeKind.METHOD_INVOCATION, start, args, name=tok.text,
                                 name_span=self.tok_span(tok))
            return SyntaxNode(NodeKind.THIS, self.tok_span(tok), name=tok.text)
        if tok.kind is TokenKind.IDENT:
            self.advance()
            if self.at_op("("):
                args = self.parse_arguments()
                return self.node(NodeKind.METHOD_INVOCATION, start, args, name=tok.text,
                                 name_span=self.tok_span(tok))
            if self.at_op("[") and self.peek(1).is_op("]"):
                # array type in a class literal or method reference: String[].class
                while self.at_op("[") and self.peek(1).is_op("]"):
                    self.advance()
                    self.advance()
                return self.node(NodeKind.LITERAL, start, name=tok.text + "[]")
            return SyntaxNode(NodeKind.IDENTIFIER, self.tok_span(tok), name=tok.text,
                              name_span=self.tok_span(tok))
        if tok.is_op("("):
            self.advance()
            inner = self.parse_expression()
            self.expect_op(")")
            return inner
        if tok.is_keyword("new"):
            return self.parse_creation()
        if tok.is_keyword("switch"):
            return self.parse_switch()
        if tok.is_keyword(*PRIMITIVE_TYPES):
            type_ref = self.parse_type()
            return self.node(NodeKind.LITERAL, start, name=type_ref.name, type_ref=type_ref)
        raise ParseError(f"expected expression, found {tok.text or tok.kind.value!r}", tok)

    def parse_creation(self) -> SyntaxNode:
        start = self.pos
        self.advance()
        if self.at_op("<"):
            self.skip_type_arguments()
        type_start = self.pos
        tok = self.peek()
        if tok.is_keyword(*PRIMITIVE_TYPES):
            self.advance()
        else:
            self.expect_ident()
            if self.at_op("<"):
                self.skip_type_arguments()
            while self.at_op(".") and self.peek(1).kind is TokenKind.IDENT:
                self.advance()
                self.advance()
                if self.at_op("<"):
                    self.skip_type_arguments()
        type_name = "".join(t.text for t in self.tokens[type_start : self.pos])
        if self.at_op("["):
            children: list[SyntaxNode] = []
            dims = 0
            while self.at_op("["):
                self.advance()
                if not self.at_op("]"):
                    children.append(self.parse_expression())
                self.expect_op("]")
                dims += 1
            if self.at_op("{"):
                children.append(self.parse_array_initializer())
            return self.node(NodeKind.OBJECT_CREATION, start, children, name=TypeRef(type_name).base,
                             type_ref=TypeRef(type_name + "[]" * dims))
        args = self.parse_arguments()
        if self.at_op("{"):
            args.append(self.parse_anonymous_body(f"<anonymous {TypeRef(type_name).base}>"))
        return self.node(NodeKind.OBJECT_CREATION, start, args, name=TypeRef(type_name).base,
                         type_ref=TypeRef(type_name))

    def parse_arguments(self) -> list[SyntaxNode]:
        self.expect_op("(")
        args: list[SyntaxNode] = []
        while not self.at_op(")"):
            if self.looks_like_lambda():
                args.append(self.parse_lambda())
            else:
                args.append(self.parse_expression())
            if not self.at_op(")"):
                self.expect_op(",")
        self.advance()
        return args

    def parse_postfix(self, expr: SyntaxNode) -> SyntaxNode:
        while True:
            tok = self.peek()
            if tok.is_op("."):
                self.advance()
                if self.at_op("<"):
                    self.skip_type_arguments()
                name_tok = self.peek()
                if name_tok.kind is TokenKind.IDENT or name_tok.is_keyword("class", "this", "super", "new"):
                    self.advance()
                else:
                    raise ParseError("expected member name after '.'", name_tok)
                if name_tok.text == "new":
                    # qualified inner-class creation: outer.new Inner()
                    self.pos -= 1
                    creation = self.parse_creation()
                    creation.children.insert(0, expr)
                    creation.has_receiver = True
                    creation.span = self.lines.span(expr.span.start, creation.span.end)
                    expr = creation
                    continue
                if self.at_op("("):
                    args = self.parse_arguments()
                    end = self.tokens[self.pos - 1].end
                    expr = SyntaxNode(NodeKind.METHOD_INVOCATION, self.lines.span(expr.span.start, end),
                                      [expr, *args], name=name_tok.text, name_span=self.tok_span(name_tok),
                                      has_receiver=True)
                else:
                    expr = SyntaxNode(NodeKind.FIELD_ACCESS, self.lines.span(expr.span.start, name_tok.end),
                                      [expr], name=name_tok.text, name_span=self.tok_span(name_tok),
                                      has_receiver=True)
            elif tok.is_op("["):
                self.advance()
                index = self.parse_expression()
                close = self.expect_op("]")
                expr = SyntaxNode(NodeKind.EXPRESSION, self.lines.span(expr.span.start, close.end),
                                  [expr, index], name="[]")
            elif tok.is_op("++", "--"):
                self.advance()
                expr = SyntaxNode(NodeKind.EXPRESSION, self.lines.span(expr.span.start, tok.end),
                                  [expr], name="post" + tok.text)
            elif tok.is_op("::"):
                self.advance()
                name_tok = self.peek()
                if name_tok.kind is TokenKind.IDENT or name_tok.is_keyword("new"):
                    self.advance()
                else:
                    raise ParseError("expected method reference name", name_tok)
                expr = SyntaxNode(NodeKind.EXPRESSION, self.lines.span(expr.span.start, name_tok.end),
                                  [expr], name="::" + name_tok.text)
            else:
                return expr


_STATEMENT_KEYWORDS: dict[str, Callable[[_Parser], list[SyntaxNode]]] = {
    "if": _Parser.parse_if,
    "while": _Parser.parse_while,
    "do": _Parser.parse_do,
    "for": _Parser.parse_for,
    "try": _Parser.parse_try,
    "switch": _Parser.parse_switch_statement,
    "return": _Parser.parse_return,
    "throw": _Parser.parse_throw,
    "break": _Parser.parse_jump,
    "continue": _Parser.parse_jump,
    "synchronized": _Parser.parse_synchronized,
    "assert": _Parser.parse_assert,
}


def _link_parents(root: SyntaxNode) -> None:
    for node in root.walk():
        for child in node.children:
            child.parent = node
