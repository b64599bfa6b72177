"""Planning and applying the text edits for a recommendation."""

from __future__ import annotations

import difflib
import hashlib
from dataclasses import dataclass, field

from codewire.completer import Recommendation
from codewire.errors import InternalError, StaleEditError
from codewire.syntax.nodes import SourceUnit, Span
from codewire.syntax.symbols import SymbolTable


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Edit:
    span: Span
    replacement: str


@dataclass(frozen=True)
class EditScript:
    edits: tuple[Edit, ...]
    base_hash: str
    warnings: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.edits)


@dataclass(frozen=True)
class EditResult:
    text: str
    diff: str


def plan_edits(unit: SourceUnit, rec: Recommendation, table: SymbolTable | None = None) -> EditScript:
    """One replacement per reference of every mapped element, sorted descending by start."""
    edits: list[Edit] = []
    warnings: list[str] = []
    for pair in rec.pairs:
        for span in pair.element.references:
            edits.append(Edit(span, pair.chosen.name))
        if pair.chosen.kind == "member_call" and pair.chosen.owner and table is not None:
            info = table.class_index.get(pair.chosen.owner)
            declared_here = info is not None and info.source == "unit"
            if not declared_here and pair.chosen.owner not in table.imports and (info is None or info.source != "builtin"):
                warnings.append(f"{pair.chosen.name} may need an import for class {pair.chosen.owner}")
    edits.sort(key=lambda e: e.span.start, reverse=True)
    for later, earlier in zip(edits, edits[1:]):
        if earlier.span.end > later.span.start:
            raise InternalError(f"overlapping edit spans {earlier.span} and {later.span}")
    return EditScript(tuple(edits), text_hash(unit.text), tuple(warnings))


def apply_edits(unit: SourceUnit | str, script: EditScript, path: str | None = None) -> EditResult:
    text = unit if isinstance(unit, str) else unit.text
    name = path or (unit.path if isinstance(unit, SourceUnit) else "source")
    if text_hash(text) != script.base_hash:
        raise StaleEditError(f"{name} changed since the edits were planned")
    new = text
    for edit in script.edits:  # descending offsets keep earlier spans valid
        new = new[: edit.span.start] + edit.replacement + new[edit.span.end :]
    diff = "".join(
        difflib.unified_diff(
            text.splitlines(keepends=True), new.splitlines(keepends=True), f"a/{name}", f"b/{name}", n=3
        )
    )
    return EditResult(new, diff)
