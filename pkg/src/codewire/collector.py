"""Context-gathering tools: candidates, role hints, filters and rankings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from codewire.errors import UnknownClassError
from codewire.locator import AdaptationRegion, UnresolvedElement, is_receiver_position
from codewire.syntax.nodes import NodeKind, SourceUnit, Span, SyntaxNode, TypeRef
from codewire.syntax.stubs import ClassInfo, MethodSig
from codewire.syntax.symbols import Binding, SymbolTable

KIND_ORDER = {"local": 0, "parameter": 1, "field": 2, "member_call": 3}


@dataclass(frozen=True)
class Candidate:
    name: str
    kind: str  # "local", "parameter", "field" or "member_call"
    type_ref: TypeRef
    decl_span: Span | None
    usage_count: int = 0
    distance_to_region: int = 0
    owner: str | None = None
    member: MethodSig | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "kind": self.kind,
            "type": self.type_ref.name,
            "type_known": self.type_ref.known,
            "usage_count": self.usage_count,
            "distance": self.distance_to_region,
        }
        if self.owner is not None:
            data["owner"] = self.owner
        return data


@dataclass(frozen=True)
class RoleHint:
    is_argument: bool = False
    expected_type: TypeRef | None = None
    formal_parameter_name: str | None = None
    callee: str | None = None
    is_receiver: bool = False
    invoked_member: str | None = None
    invoked_members: tuple[str, ...] = ()
    member_arities: tuple[int, ...] = ()

    def argument_dict(self) -> dict:
        return {
            "is_argument": self.is_argument,
            "expected_type": self.expected_type.name if self.expected_type else None,
            "formal_parameter_name": self.formal_parameter_name,
            "callee": self.callee,
        }

    def receiver_dict(self) -> dict:
        return {
            "is_receiver": self.is_receiver,
            "invoked_member": self.invoked_member,
            "invoked_members": list(self.invoked_members),
        }


@dataclass(frozen=True)
class SimilarityScore:
    candidate: Candidate
    levenshtein: int
    normalized: float

    def to_dict(self) -> dict:
        return {"name": self.candidate.name, "levenshtein": self.levenshtein, "normalized": round(self.normalized, 4)}


# -- edit distance ---------------------------------------------------------------


def levenshtein(a: str, b: str, fold_case: bool = True) -> int:
    """Edit distance with unit costs, two-row dynamic programme."""
    if fold_case:
        a, b = a.casefold(), b.casefold()
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def normalized_levenshtein(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    return levenshtein(a, b) / longest if longest else 0.0


# -- visible context -------------------------------------------------------------


def context_excluded_spans(region: AdaptationRegion, include_region: bool = False) -> list[Span]:
    """Spans hidden from analyses: method code after the region, and the region
    itself unless ``include_region``."""
    start = region.span.end if include_region else region.span.start
    return [Span(start, max(start, region.body.span.end))]


def in_context(span: Span, region: AdaptationRegion, include_region: bool = False) -> bool:
    return not any(hidden.overlaps(span) for hidden in context_excluded_spans(region, include_region))


def context_nodes(region: AdaptationRegion, kind: NodeKind) -> Iterator[SyntaxNode]:
    for node in region.unit.nodes(kind):
        if in_context(node.span, region):
            yield node


def _this_field_binding(node: SyntaxNode, table: SymbolTable) -> Binding | None:
    """Binding of the field named by ``this.f``."""
    recv = node.receiver
    if recv is None or recv.kind is not NodeKind.THIS or recv.name != "this":
        return None
    cls = node.enclosing(NodeKind.CLASS_DECL)
    scope = table.scope_of(cls) if cls is not None else None
    if scope is None:
        return None
    binding = scope.bindings.get(node.name or "")
    return binding if binding is not None and binding.kind == "field" else None


def usage_count(binding: Binding, region: AdaptationRegion, table: SymbolTable) -> int:
    """References to ``binding`` anywhere in the unit except method code after
    the region. References made by the pasted code itself count."""
    count = 0
    for node in region.unit.root.walk():
        if node.kind is NodeKind.IDENTIFIER and node.name == binding.name:
            if in_context(node.span, region, True) and table.resolve(node.name, node.span.start) is binding:
                count += 1
        elif node.kind is NodeKind.FIELD_ACCESS and node.name == binding.name and binding.kind == "field":
            if in_context(node.span, region, True) and _this_field_binding(node, table) is binding:
                count += 1
    return count


def candidate_from(binding: Binding, region: AdaptationRegion, table: SymbolTable) -> Candidate:
    return Candidate(
        name=binding.name,
        kind=binding.kind,
        type_ref=binding.type_ref,
        decl_span=binding.decl_span,
        usage_count=usage_count(binding, region, table),
        distance_to_region=abs(region.span.start - binding.decl_span.start),
    )


def _sort_key(c: Candidate) -> tuple:
    return (KIND_ORDER[c.kind], c.distance_to_region, c.name)


def visible_context_bindings(region: AdaptationRegion, table: SymbolTable) -> list[Binding]:
    static_method = "static" in region.method.modifiers
    result = []
    for binding in table.visible_bindings(region.span.start):
        if binding.kind == "local" and not binding.decl_span.end <= region.span.start:
            continue
        if static_method and binding.kind == "field" and not binding.static:
            continue
        result.append(binding)
    return result


def get_available_variables(region: AdaptationRegion, table: SymbolTable) -> list[Candidate]:
    cands = [candidate_from(b, region, table) for b in visible_context_bindings(region, table)]
    return sorted(cands, key=_sort_key)


def get_unused_variables(region: AdaptationRegion, table: SymbolTable) -> list[Candidate]:
    return [c for c in get_available_variables(region, table) if c.usage_count == 0]


# -- expression typing and callee lookup -------------------------------------


def expression_type(node: SyntaxNode, table: SymbolTable) -> TypeRef | None:
    """Best-effort static type of an expression; None when unknown."""
    kind = node.kind
    if kind is NodeKind.IDENTIFIER:
        binding = table.resolve(node.name or "", node.span.start)
        return binding.type_ref if binding is not None else None
    if kind is NodeKind.LITERAL:
        text = node.name or ""
        if text.startswith('"'):
            return table.known(TypeRef("String"))
        if text in ("true", "false"):
            return TypeRef("boolean", True)
        if text.startswith("'"):
            return TypeRef("char", True)
        if text[:1].isdigit() or text[:1] == ".":
            if text[-1] in "lL":
                return TypeRef("long", True)
            if not text.startswith(("0x", "0X")) and any(c in text for c in ".eEfFdD"):
                return TypeRef("float" if text[-1] in "fF" else "double", True)
            return TypeRef("int", True)
        return None
    if kind is NodeKind.OBJECT_CREATION and node.type_ref is not None:
        return table.known(node.type_ref)
    if kind is NodeKind.THIS:
        cls = node.enclosing(NodeKind.CLASS_DECL)
        return table.known(TypeRef(cls.name)) if cls is not None and cls.name else None
    if kind is NodeKind.EXPRESSION and node.name == "cast" and node.type_ref is not None:
        return table.known(node.type_ref)
    if kind is NodeKind.FIELD_ACCESS:
        owner = _owner_type(node, table)
        info = table.class_info(owner.base) if owner is not None else None
        if info is not None and node.name in info.fields:
            return table.known(info.fields[node.name])
        return None
    if kind is NodeKind.METHOD_INVOCATION:
        sig = resolve_callee(node, table)
        return table.known(sig[1].return_type) if sig is not None else None
    return None


def _owner_type(node: SyntaxNode, table: SymbolTable) -> TypeRef | None:
    recv = node.receiver
    if recv is None:
        return None
    if recv.kind is NodeKind.IDENTIFIER:
        binding = table.resolve(recv.name or "", recv.span.start)
        if binding is not None:
            return binding.type_ref
        if table.is_class_name(recv.name or ""):
            return TypeRef(recv.name, recv.name in table.class_index)
        return None
    return expression_type(recv, table)


def _pick_overload(sigs: list[MethodSig], call: SyntaxNode, table: SymbolTable) -> MethodSig | None:
    if not sigs:
        return None
    if len(sigs) == 1:
        return sigs[0]
    args = call.arguments
    best, best_score = sigs[0], -1
    for sig in sigs:
        score = 0
        for arg, param in zip(args, sig.param_types):
            arg_type = expression_type(arg, table)
            if arg_type is not None and arg_type.known:
                if arg_type.base == param.base:
                    score += 1
                elif table.is_known_type(param):
                    score -= 10  # a known mismatch rules the overload out
        if score > best_score:
            best, best_score = sig, score
    return best


def resolve_callee(call: SyntaxNode, table: SymbolTable) -> tuple[str, MethodSig] | None:
    """Owner class name and signature of a call, or None when it cannot be determined."""
    arity = len(call.arguments)
    if call.kind is NodeKind.OBJECT_CREATION:
        info = table.class_info(call.type_ref.base) if call.type_ref is not None else None
        if info is None:
            return None
        sig = _pick_overload(info.constructors(arity), call, table)
        return (info.name, sig) if sig is not None else None
    name = call.name or ""
    owners: list[ClassInfo] = []
    if call.has_receiver:
        owner_type = _owner_type(call, table)
        if owner_type is not None:
            info = table.class_info(owner_type.base)
            if info is not None:
                owners.append(info)
            else:
                return None  # receiver type known to be opaque
    else:
        for cls in [call.enclosing(NodeKind.CLASS_DECL), *_outer_classes(call)]:
            if cls is not None and cls.name:
                info = table.class_info(cls.name)
                if info is not None:
                    owners.append(info)
    for info in owners:
        sig = _pick_overload(info.methods_named(name, arity), call, table)
        if sig is not None:
            return info.name, sig
    if call.has_receiver and not owners:
        # Receiver type undeterminable: accept a signature only when it is unique project-wide.
        matches = [(info.name, m) for info in table.class_index.values() for m in info.methods_named(name, arity)]
        distinct = {(m.return_type.base, tuple(t.base for t in m.param_types)) for _, m in matches}
        if matches and len(distinct) == 1:
            return matches[0]
    return None


def _outer_classes(node: SyntaxNode) -> Iterator[SyntaxNode]:
    cls = node.enclosing(NodeKind.CLASS_DECL)
    while cls is not None:
        cls = cls.enclosing(NodeKind.CLASS_DECL)
        if cls is not None:
            yield cls


def _reference_nodes(element: UnresolvedElement, unit: SourceUnit) -> list[SyntaxNode]:
    if element.nodes:
        return element.nodes
    return [n for n in (unit.node_at(s.start, NodeKind.IDENTIFIER) for s in element.references) if n is not None]


def _argument_site(node: SyntaxNode) -> tuple[SyntaxNode, int, bool] | None:
    """Innermost call having ``node`` inside one of its arguments.

    Returns ``(call, argument index, direct)``; ``direct`` is False when the
    reference is part of a larger argument expression. Being a receiver on
    the way up means the reference is not itself passed anywhere.
    """
    child = node
    direct = True
    for parent in node.ancestors():
        if parent.kind in (NodeKind.METHOD_INVOCATION, NodeKind.OBJECT_CREATION):
            if parent.has_receiver and parent.children[0] is child:
                return None
            args = parent.arguments
            for idx, arg in enumerate(args):
                if arg is child:
                    return parent, idx, direct
            return None
        if parent.kind is NodeKind.FIELD_ACCESS:
            return None
        if parent.kind is NodeKind.EXPRESSION and parent.name == "cast":
            child = parent
            continue
        if parent.kind in (NodeKind.EXPRESSION, NodeKind.LAMBDA):
            direct = False
            child = parent
            continue
        return None
    return None


def _render_callee(owner: str, sig: MethodSig) -> str:
    return f"{owner}.{sig.name}"


def is_argument(element: UnresolvedElement, region: AdaptationRegion, table: SymbolTable) -> RoleHint:
    fallback: RoleHint | None = None
    for node in _reference_nodes(element, region.unit):
        site = _argument_site(node)
        if site is None:
            continue
        call, idx, direct = site
        resolved = resolve_callee(call, table)
        if resolved is None or not direct:
            callee = _render_callee(*resolved) if resolved else call.name
            fallback = fallback or RoleHint(is_argument=True, callee=callee)
            continue
        owner, sig = resolved
        if not sig.param_types:
            continue
        pidx = min(idx, sig.arity - 1)
        expected = sig.param_types[pidx]
        if expected.name.endswith("...") and idx >= sig.arity - 1:
            expected = TypeRef(expected.name[:-3])
        return RoleHint(
            is_argument=True,
            expected_type=table.known(TypeRef(expected.name.replace("...", "[]"))),
            formal_parameter_name=sig.param_names[pidx] if pidx < len(sig.param_names) else None,
            callee=_render_callee(owner, sig),
        )
    return fallback or RoleHint()


def is_receiver(element: UnresolvedElement, region: AdaptationRegion) -> RoleHint:
    members: list[str] = []
    arities: list[int] = []
    for node in _reference_nodes(element, region.unit):
        parent = node.parent
        if is_receiver_position(node) and parent.kind is NodeKind.METHOD_INVOCATION:
            if parent.name not in members:
                members.append(parent.name)
                arities.append(len(parent.arguments))
    if not members:
        return RoleHint()
    return RoleHint(is_receiver=True, invoked_member=members[0], invoked_members=tuple(members),
                    member_arities=tuple(arities))


def retrieve_identical_function_call(
    member: str,
    unit: SourceUnit,
    region: AdaptationRegion,
    table: SymbolTable,
    arity: int | None = None,
) -> list[Candidate]:
    visible = {id(b) for b in visible_context_bindings(region, table)}
    found: list[Candidate] = []
    seen: set[str] = set()
    for call in unit.nodes(NodeKind.METHOD_INVOCATION):
        if call.name != member or not call.has_receiver or not in_context(call.span, region):
            continue
        if arity is not None and len(call.arguments) != arity:
            continue
        recv = call.receiver
        if recv.kind is NodeKind.IDENTIFIER:
            binding = table.resolve(recv.name or "", recv.span.start)
        elif recv.kind is NodeKind.FIELD_ACCESS:
            binding = _this_field_binding(recv, table)
        else:
            binding = None
        if binding is None or id(binding) not in visible or binding.name in seen:
            continue
        seen.add(binding.name)
        found.append(candidate_from(binding, region, table))
    return found


# -- filters and rankings --------------------------------------------------------


def types_compatible(candidate: TypeRef, expected: TypeRef) -> bool:
    """Name equality, with opaque types on either side presumed compatible.

    An ``Object`` slot accepts anything (boxing included) but never strictly.
    """
    if not candidate.known or not expected.known or expected.base == "Object":
        return True
    return candidate.base == expected.base


def strictly_compatible(candidate: TypeRef, expected: TypeRef | None) -> bool:
    return expected is not None and candidate.known and expected.known and candidate.base == expected.base


def reserve_type_compatible_ones(candidates: Iterable[Candidate], expected: TypeRef) -> list[Candidate]:
    if not expected.name:
        raise ValueError("expected type must be non-empty")
    return [c for c in candidates if types_compatible(c.type_ref, expected)]


def sort_by_literal_similarity(candidates: Iterable[Candidate], target: str) -> list[SimilarityScore]:
    scores = [
        SimilarityScore(c, levenshtein(c.name, target), normalized_levenshtein(c.name, target))
        for c in candidates
    ]
    scores.sort(key=lambda s: (s.levenshtein, s.candidate.distance_to_region, s.candidate.name))
    return scores


def get_method_names(
    class_name: str,
    expected: TypeRef,
    table: SymbolTable,
    region: AdaptationRegion | None = None,
) -> list[Candidate]:
    """Zero-argument members of ``class_name`` returning ``expected``, rendered as call expressions."""
    info = table.class_info(class_name)
    if info is None:
        raise UnknownClassError(class_name)
    receivers: list[Binding] = []
    if region is not None:
        receivers = [
            b for b in visible_context_bindings(region, table) if b.type_ref.base == info.name
        ]
    found: list[Candidate] = []
    for sig in info.methods:
        if sig.constructor or sig.arity or sig.return_type.base != expected.base:
            continue
        ret = table.known(sig.return_type)
        if sig.static:
            found.append(Candidate(f"{info.name}.{sig.name}()", "member_call", ret, None, owner=info.name, member=sig))
        else:
            for recv in receivers:
                found.append(
                    Candidate(f"{recv.name}.{sig.name}()", "member_call", ret, None, owner=info.name, member=sig,
                              distance_to_region=abs(region.span.start - recv.decl_span.start))
                )
    return found
