"""End-to-end wiring of one marked source file."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from codewire.agent.session import AgentSession, SessionConfig, init_session, run, run_deterministic
from codewire.completer import Recommendation
from codewire.edits import EditScript, apply_edits, plan_edits
from codewire.errors import InputError
from codewire.llm import ChatModel
from codewire.locator import AdaptationRegion, MarkedSource, extract_region, identify_unresolved_elements, locate_region
from codewire.syntax.nodes import SourceUnit
from codewire.syntax.parser import parse_unit
from codewire.syntax.stubs import StubLibrary, builtin_stubs, load_stubs
from codewire.syntax.symbols import SymbolTable, build_symbol_table

log = logging.getLogger(__name__)

MODES = ("agent", "deterministic", "naive")


@dataclass
class Prepared:
    path: str
    marked: MarkedSource
    unit: SourceUnit
    table: SymbolTable
    region: AdaptationRegion
    project: list[SourceUnit] = field(default_factory=list)


def read_source(path: str | Path) -> str:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not valid UTF-8: {exc}") from exc


def load_project(root: str | Path | None, exclude: Iterable[str | Path] = ()) -> list[SourceUnit]:
    """Parse every ``*.java`` file below ``root``."""
    if root is None:
        return []
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"project directory {root} does not exist")
    skip = {Path(p).resolve() for p in exclude}
    units = []
    for file in sorted(root.rglob("*.java")):
        if file.resolve() in skip:
            continue
        text = read_source(file).replace("<start>", "").replace("<end>", "")
        units.append(parse_unit(text, str(file)))
    return units


def combined_stubs(paths: Sequence[str | Path] = (), builtin: bool = True) -> StubLibrary:
    """User stub files (earlier files win) layered over the builtin library."""
    lib = StubLibrary()
    for path in paths:
        lib = lib.merge(load_stubs(path))
    if builtin:
        lib = lib.merge(builtin_stubs())
    return lib


def prepare(
    text: str,
    path: str = "<memory>",
    project: Sequence[SourceUnit] = (),
    stubs: StubLibrary | None = None,
) -> Prepared:
    """Strip the markers, parse, build the symbol table and bind the region."""
    marked = extract_region(text)
    unit = parse_unit(marked.text, path)
    table = build_symbol_table(unit, project, stubs if stubs is not None else builtin_stubs())
    region = locate_region(unit, marked.region_start, marked.region_end)
    return Prepared(path, marked, unit, table, region, list(project))


@dataclass
class WireOptions:
    mode: str = "deterministic"
    session: SessionConfig = field(default_factory=SessionConfig)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")


@dataclass
class WireResult:
    prepared: Prepared
    session: AgentSession
    recommendation: Recommendation
    script: EditScript
    new_text: str
    diff: str
    remaining: list[str]  # mapped names still unresolved after the edit
    wall_ms: float

    @property
    def warnings(self) -> list[str]:
        return list(self.script.warnings)

    def to_dict(self) -> dict:
        return {
            "path": self.prepared.path,
            "recommendation": self.recommendation.to_dict(),
            "warnings": self.warnings,
            "remaining_unresolved": self.remaining,
            "diff": self.diff,
            "iterations_used": self.session.budget.iterations_used,
            "tokens_in": self.session.ledger.tokens_in,
            "tokens_out": self.session.ledger.tokens_out,
            "model_ms": self.session.ledger.ms,
        }


def relocate(new_text: str, prepared: Prepared, script: EditScript) -> list[str]:
    """Names still unresolved in the region after edits, re-located by offset shift."""
    shift = sum(len(e.replacement) - len(e.span) for e in script.edits if e.span.start < prepared.region.span.start)
    grow = sum(len(e.replacement) - len(e.span) for e in script.edits if prepared.region.span.contains(e.span))
    start = prepared.region.span.start + shift
    end = prepared.region.span.end + shift + grow
    unit = parse_unit(new_text, prepared.path)
    table = build_symbol_table(unit, prepared.project, _stubs_of(prepared.table))
    region = locate_region(unit, start, end)
    return [e.name for e in identify_unresolved_elements(region, table)]


def _stubs_of(table: SymbolTable) -> StubLibrary:
    return StubLibrary({n: i for n, i in table.class_index.items() if i.source in ("stubs", "builtin")})


def wire(
    prepared: Prepared,
    options: WireOptions | None = None,
    model: ChatModel | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> WireResult:
    options = options or WireOptions()
    started = time.perf_counter()
    session = init_session(prepared.region, prepared.table, options.session, sleep)
    if options.mode == "agent":
        if model is None:
            raise InputError("agent mode needs a chat model")
        rec = run(session, model)
    elif options.mode == "deterministic":
        rec = run_deterministic(session)
    else:
        raise InputError("naive mode runs through the evaluation harness, not the wiring pipeline")
    script = plan_edits(prepared.unit, rec, prepared.table)
    result = apply_edits(prepared.unit, script)
    mapped = set(rec.mapping)
    remaining = [n for n in relocate(result.text, prepared, script) if n in mapped] if script.edits else []
    wall = (time.perf_counter() - started) * 1000
    return WireResult(prepared, session, rec, script, result.text, result.diff, remaining, wall)
