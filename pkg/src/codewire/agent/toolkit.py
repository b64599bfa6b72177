"""Tool registry and the facts the tools accumulate during a session."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable

from codewire import collector
from codewire.collector import Candidate, RoleHint, SimilarityScore
from codewire.errors import UnknownClassError, UnknownToolError
from codewire.locator import AdaptationRegion, UnresolvedElement, identify_unresolved_elements
from codewire.syntax.nodes import PRIMITIVE_TYPES, TypeRef
from codewire.syntax.symbols import SymbolTable
from codewire.agent.prompt import ToolSpec

log = logging.getLogger(__name__)

INITIAL = "Initial"
INSUFFICIENT = "InsufficientContext"
SUFFICIENT = "SufficientContext"

TOOLS: dict[str, ToolSpec] = {
    spec.name: spec
    for spec in [
        ToolSpec("identify_unresolved_elements", "List the names in the pasted code that do not resolve.",
                 states=frozenset({INITIAL})),
        ToolSpec("get_available_variables",
                 "Locals declared before the pasted code, method parameters and class fields.",
                 states=frozenset({INITIAL})),
        ToolSpec("get_unused_variables", "Available variables that nothing references yet.",
                 states=frozenset({INITIAL})),
        ToolSpec("is_argument", "Whether the element is passed to a call, and the formal parameter type if known.",
                 required=("element",), states=frozenset({INITIAL})),
        ToolSpec("is_receiver", "Whether methods are invoked on the element, and which ones.",
                 required=("element",), states=frozenset({INITIAL})),
        ToolSpec("retrieve_identical_function_call",
                 "Variables elsewhere in the file that receive a call to the same member as the element.",
                 required=("element",), optional=("member",), states=frozenset({INSUFFICIENT})),
        ToolSpec("reserve_type_compatible_ones",
                 "Keep only the element's candidates whose type matches the expected type.",
                 required=("element",), optional=("expected_type",), states=frozenset({INSUFFICIENT})),
        ToolSpec("sort_by_literal_similarity",
                 "Rank the element's candidates by edit distance between names.",
                 required=("target",), states=frozenset({INSUFFICIENT})),
        ToolSpec("get_method_names",
                 "Zero-argument members of a class (named in the facts) that return the expected type.",
                 required=("class_name",), optional=("expected_type", "element"),
                 states=frozenset({INSUFFICIENT})),
        ToolSpec("execute_completion", "Stop gathering and complete the code with the collected facts.",
                 states=frozenset({INSUFFICIENT, SUFFICIENT})),
    ]
}

INITIAL_TOOLS = tuple(n for n, s in TOOLS.items() if INITIAL in s.states)


def tools_for(state: str) -> list[ToolSpec]:
    return [spec for spec in TOOLS.values() if state in spec.states]


@dataclass(frozen=True)
class Observation:
    ok: bool
    text: str
    data: Any = None
    mentions: tuple[str, ...] = ()


@dataclass
class ElementFacts:
    element: UnresolvedElement
    argument: RoleHint | None = None
    receiver: RoleHint | None = None
    pool: dict[str, Candidate] = field(default_factory=dict)
    reserved: list[str] | None = None
    identical: set[str] = field(default_factory=set)
    similarity: dict[str, SimilarityScore] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.element.name

    @property
    def expected_type(self) -> TypeRef | None:
        return self.argument.expected_type if self.argument is not None else None

    @property
    def is_receiver(self) -> bool:
        return self.receiver is not None and self.receiver.is_receiver

    def add(self, cand: Candidate) -> None:
        self.pool.setdefault(cand.name, cand)

    def candidates(self) -> list[Candidate]:
        """Current pool, narrowed by a type filter when one was applied."""
        if self.reserved is None:
            return list(self.pool.values())
        return [self.pool[n] for n in self.reserved if n in self.pool]

    def has_strict_candidate(self) -> bool:
        exp = self.expected_type
        return any(collector.strictly_compatible(c.type_ref, exp) for c in self.candidates())


def _dump(value: Any) -> str:
    return json.dumps(value, separators=(", ", ": "))


class Toolkit:
    def __init__(self, region: AdaptationRegion, table: SymbolTable) -> None:
        self.region = region
        self.table = table
        self.elements: list[UnresolvedElement] = []
        self.facts: dict[str, ElementFacts] = {}
        self.available: list[Candidate] | None = None
        self.unused: set[str] = set()
        self.known_candidates: dict[str, Candidate] = {}
        self._handlers: dict[str, Callable[..., Observation]] = {
            "identify_unresolved_elements": self.identify_unresolved_elements,
            "get_available_variables": self.get_available_variables,
            "get_unused_variables": self.get_unused_variables,
            "is_argument": self.is_argument,
            "is_receiver": self.is_receiver,
            "retrieve_identical_function_call": self.retrieve_identical_function_call,
            "reserve_type_compatible_ones": self.reserve_type_compatible_ones,
            "sort_by_literal_similarity": self.sort_by_literal_similarity,
            "get_method_names": self.get_method_names,
        }

    # -- dispatch -----------------------------------------------------------------

    def validate(self, action: str, args: dict) -> None:
        spec = TOOLS.get(action)
        if spec is None:
            raise UnknownToolError(f"unknown tool {action!r}; available: {', '.join(TOOLS)}")
        missing = [p for p in spec.required if p not in args]
        extra = [p for p in args if p not in spec.required and p not in spec.optional]
        if missing or extra:
            raise ValueError(
                f"bad arguments for {action}: missing {missing or 'none'}, unexpected {extra or 'none'}"
            )
        for key, value in args.items():
            if not isinstance(value, str):
                raise ValueError(f"argument {key!r} of {action} must be a string")

    def dispatch(self, action: str, args: dict) -> Observation:
        """Validate and run one tool. Tool failures become error observations."""
        try:
            self.validate(action, args)
        except UnknownToolError as exc:
            return Observation(False, f"UnknownToolError: {exc}")
        except ValueError as exc:
            return Observation(False, f"InvalidArguments: {exc}")
        handler = self._handlers.get(action)
        if handler is None:
            return Observation(False, f"{action} is handled by the session, not the toolkit")
        try:
            return handler(**args)
        except UnknownClassError as exc:
            return Observation(False, f"UnknownClassError: {exc}. Do not extend the search to this class.")
        except Exception as exc:  # isolation: a broken tool must not kill the session
            log.exception("tool %s failed", action)
            return Observation(False, f"ToolError: {type(exc).__name__}: {exc}")

    def _facts(self, element: str) -> ElementFacts:
        facts = self.facts.get(element)
        if facts is None:
            raise ValueError(f"{element!r} is not an unresolved element; known: {sorted(self.facts)}")
        return facts

    def _remember(self, cands: list[Candidate]) -> None:
        for c in cands:
            self.known_candidates.setdefault(c.name, c)

    # -- initial-state tools ------------------------------------------------------

    def identify_unresolved_elements(self) -> Observation:
        self.elements = identify_unresolved_elements(self.region, self.table)
        for el in self.elements:
            self.facts.setdefault(el.name, ElementFacts(el))
        data = [{"name": e.name, "kind": e.kind, "references": len(e.references)} for e in self.elements]
        return Observation(True, _dump(data), data)

    def get_available_variables(self) -> Observation:
        self.available = collector.get_available_variables(self.region, self.table)
        self._remember(self.available)
        for facts in self.facts.values():
            for c in self.available:
                facts.add(c)
        data = [c.to_dict() for c in self.available]
        return Observation(True, _dump(data), data, tuple(c.name for c in self.available))

    def get_unused_variables(self) -> Observation:
        unused = collector.get_unused_variables(self.region, self.table)
        self._remember(unused)
        self.unused = {c.name for c in unused}
        data = [c.name for c in unused]
        return Observation(True, _dump(data), data, tuple(data))

    def is_argument(self, element: str) -> Observation:
        facts = self._facts(element)
        facts.argument = collector.is_argument(facts.element, self.region, self.table)
        data = facts.argument.argument_dict()
        return Observation(True, _dump(data), data)

    def is_receiver(self, element: str) -> Observation:
        facts = self._facts(element)
        facts.receiver = collector.is_receiver(facts.element, self.region)
        data = facts.receiver.receiver_dict()
        return Observation(True, _dump(data), data)

    # -- insufficient-context tools -------------------------------------------------

    def retrieve_identical_function_call(self, element: str, member: str | None = None) -> Observation:
        facts = self._facts(element)
        if facts.receiver is None:
            facts.receiver = collector.is_receiver(facts.element, self.region)
        hint = facts.receiver
        if member is not None:
            arities = [a for m, a in zip(hint.invoked_members, hint.member_arities) if m == member]
            wanted = [(member, arities[0] if arities else None)]
        else:
            wanted = list(zip(hint.invoked_members, hint.member_arities))
        if not wanted:
            return Observation(True, _dump({"element": element, "matches": [], "note": "no member is invoked on it"}),
                               [])
        found: list[Candidate] = []
        per_member = {}
        for name, arity in wanted:
            cands = collector.retrieve_identical_function_call(name, self.region.unit, self.region, self.table, arity)
            per_member[name] = [c.name for c in cands]
            found.extend(c for c in cands if c.name not in {f.name for f in found})
        self._remember(found)
        for c in found:
            facts.add(c)
            facts.identical.add(c.name)
        data = {"element": element, "matches": per_member}
        return Observation(True, _dump(data), data, tuple(c.name for c in found))

    def reserve_type_compatible_ones(self, element: str, expected_type: str | None = None) -> Observation:
        facts = self._facts(element)
        expected = self.table.known(TypeRef(expected_type)) if expected_type else facts.expected_type
        if expected is None:
            return Observation(False, f"no expected type is known for {element!r}; call is_argument or pass expected_type")
        kept = collector.reserve_type_compatible_ones(facts.candidates(), expected)
        facts.reserved = [c.name for c in kept]
        data = {"element": element, "expected_type": expected.name, "compatible": facts.reserved}
        return Observation(True, _dump(data), data, tuple(facts.reserved))

    def sort_by_literal_similarity(self, target: str) -> Observation:
        facts = self.facts.get(target)
        pool = facts.candidates() if facts is not None else list(self.known_candidates.values())
        scores = collector.sort_by_literal_similarity(pool, target)
        if facts is not None:
            facts.similarity = {s.candidate.name: s for s in scores}
        data = [s.to_dict() for s in scores]
        return Observation(True, _dump(data), data, tuple(s.candidate.name for s in scores))

    def fact_classes(self) -> set[str]:
        """Class names mentioned by gathered facts: expected types and candidate types."""
        names = set()
        for facts in self.facts.values():
            if facts.expected_type is not None:
                names.add(facts.expected_type.element_base)
            for c in facts.candidates():
                names.add(c.type_ref.element_base)
        for c in self.known_candidates.values():
            names.add(c.type_ref.element_base)
        return {n for n in names if n not in PRIMITIVE_TYPES}

    def get_method_names(
        self, class_name: str, expected_type: str | None = None, element: str | None = None
    ) -> Observation:
        targets = [self._facts(element)] if element is not None else list(self.facts.values())
        if expected_type is not None:
            expected = self.table.known(TypeRef(expected_type))
        else:
            types = {f.expected_type.name: f.expected_type for f in targets if f.expected_type is not None}
            if len(types) != 1:
                return Observation(False, "pass expected_type: it cannot be inferred from the facts")
            expected = next(iter(types.values()))
        base = TypeRef(class_name).base
        if base not in self.fact_classes():
            return Observation(
                False, f"{class_name!r} does not appear in the gathered facts; search is limited to those classes"
            )
        found = collector.get_method_names(base, expected, self.table, self.region)
        self._remember(found)
        for facts in targets:
            if element is not None or (facts.expected_type is not None and facts.expected_type.base == expected.base):
                for c in found:
                    facts.add(c)
                if facts.reserved is not None:
                    facts.reserved.extend(c.name for c in found if c.name not in facts.reserved)
        data = {"class": base, "expected_type": expected.name, "members": [c.name for c in found]}
        return Observation(True, _dump(data), data, tuple(c.name for c in found))
