"""Turning gathered facts into an injective element-to-candidate mapping."""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from codewire import collector
from codewire.agent.actions import repair_json_object
from codewire.agent.prompt import COMPLETION_FORMAT, PromptDocument
from codewire.agent.toolkit import SUFFICIENT, ElementFacts, tools_for
from codewire.collector import Candidate
from codewire.errors import CodewireError, TransportError
from codewire.llm import ChatModel, call_with_retries
from codewire.locator import UnresolvedElement
from codewire.syntax.nodes import PRIMITIVE_TYPES

if TYPE_CHECKING:
    from codewire.agent.session import AgentSession
    from codewire.syntax.symbols import SymbolTable

log = logging.getLogger(__name__)

PLACEHOLDER = "<Infill>"


@dataclass(frozen=True)
class Weights:
    similarity: float = 0.5
    unused: float = 0.2
    identical_call: float = 0.2
    proximity: float = 0.1


@dataclass
class Pair:
    element: UnresolvedElement
    chosen: Candidate
    confidence: float
    supporting_facts: list[str] = field(default_factory=list)
    source: str = "deterministic"  # or "model"

    def to_dict(self) -> dict:
        return {
            "unresolved": self.element.name,
            "chosen": self.chosen.name,
            "kind": self.chosen.kind,
            "confidence": round(self.confidence, 6),
            "supporting_facts": list(self.supporting_facts),
            "source": self.source,
        }


@dataclass
class Recommendation:
    pairs: list[Pair]
    elements: list[UnresolvedElement]
    degraded: bool = False

    @property
    def complete(self) -> bool:
        mapped = {p.element.name for p in self.pairs}
        return all(e.name in mapped for e in self.elements)

    @property
    def mapping(self) -> dict[str, str]:
        return {p.element.name: p.chosen.name for p in self.pairs}

    def to_dict(self) -> dict:
        return {
            "pairs": [p.to_dict() for p in self.pairs],
            "complete": self.complete,
            "degraded": self.degraded,
            "unresolved": [e.name for e in self.elements],
        }


# -- assignment ----------------------------------------------------------------

Option = tuple[str, float]  # (candidate name, confidence)


def greedy_assignment(options: Sequence[Sequence[Option]]) -> list[int | None]:
    """Confidence-descending greedy: each element gets an option index or None.

    Ties go to the earlier element, then the earlier option.
    """
    flat = sorted(
        ((conf, e, k) for e, opts in enumerate(options) for k, (_, conf) in enumerate(opts)),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    chosen: list[int | None] = [None] * len(options)
    taken: set[str] = set()
    for _, e, k in flat:
        name = options[e][k][0]
        if chosen[e] is None and name not in taken:
            chosen[e] = k
            taken.add(name)
    return chosen


def _total(options, chosen) -> float:
    return sum(options[e][k][1] for e, k in enumerate(chosen) if k is not None)


def assign_injective(options: Sequence[Sequence[Option]]) -> list[int | None]:
    """Injective assignment of elements to candidate names.

    Starts from the greedy answer and switches to the optimum of the
    assignment problem only when that is strictly better, so greedy tie
    breaks survive whenever they cost nothing.
    """
    greedy = greedy_assignment(options)
    names = sorted({name for opts in options for name, _ in opts})
    if not names or not options:
        return greedy
    col = {n: i for i, n in enumerate(names)}
    missing = -1e9
    # one extra "unassigned" column per element so no element is forced onto a poor option
    matrix = np.full((len(options), len(names) + len(options)), missing)
    for e in range(len(options)):
        matrix[e, len(names) + e] = 0.0
    best_k: dict[tuple[int, int], int] = {}
    for e, opts in enumerate(options):
        for k, (name, conf) in enumerate(opts):
            j = col[name]
            if conf > matrix[e, j]:
                matrix[e, j] = conf
                best_k[(e, j)] = k
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    optimal: list[int | None] = [None] * len(options)
    for r, c in zip(rows, cols):
        if c < len(names) and matrix[r, c] > missing / 2:
            optimal[r] = best_k[(r, c)]
    if _total(options, optimal) > _total(options, greedy) + 1e-9:
        return _fill(options, optimal)
    return greedy


def _fill(options: Sequence[Sequence[Option]], chosen: list[int | None]) -> list[int | None]:
    """Give still-unassigned elements their best option nobody else holds."""
    taken = {options[e][k][0] for e, k in enumerate(chosen) if k is not None}
    for e, k in enumerate(chosen):
        if k is not None:
            continue
        for kk, (name, _) in enumerate(options[e]):
            if name not in taken:
                chosen[e] = kk
                taken.add(name)
                break
    return chosen


# -- deterministic scoring -------------------------------------------------------


@dataclass(frozen=True)
class ScoredCandidate:
    candidate: Candidate
    score: float
    levenshtein: int


def _lacks_members(cand: Candidate, members: Sequence[str], table: SymbolTable) -> bool:
    info = table.class_info(cand.type_ref.base) if cand.type_ref.known else None
    return info is not None and any(not info.methods_named(m) for m in members)


def candidate_stratum(facts: ElementFacts, table: SymbolTable | None = None) -> list[Candidate]:
    """Candidates eligible for an element, most trustworthy type tier first."""
    pool = facts.candidates() or list(facts.pool.values())
    if facts.is_receiver:
        # primitives and arrays have no members to invoke
        pool = [c for c in pool if c.type_ref.base not in PRIMITIVE_TYPES and not c.type_ref.base.endswith("[]")]
        members = facts.receiver.invoked_members
        if table is not None and members:
            capable = [c for c in pool if not _lacks_members(c, members, table)]
            pool = capable or pool
    expected = facts.expected_type
    if expected is None or not expected.known:
        return pool
    strict = [c for c in pool if collector.strictly_compatible(c.type_ref, expected)]
    if strict:
        return strict
    return [c for c in pool if collector.types_compatible(c.type_ref, expected)]


def score_candidates(
    facts: ElementFacts, unused: set[str], weights: Weights, table: SymbolTable | None = None
) -> list[ScoredCandidate]:
    cands = candidate_stratum(facts, table)
    d_max = max((c.distance_to_region for c in cands if c.kind != "member_call"), default=0)
    scored = []
    for c in cands:
        lev = collector.levenshtein(c.name, facts.name)
        sim = 1 - collector.normalized_levenshtein(c.name, facts.name)
        prox = 0.0 if c.kind == "member_call" else 1 - c.distance_to_region / (d_max + 1)
        score = (
            weights.similarity * sim
            + weights.unused * (c.name in unused and c.kind != "member_call")
            + weights.identical_call * (c.name in facts.identical)
            + weights.proximity * prox
        )
        scored.append(ScoredCandidate(c, score, lev))
    scored.sort(key=lambda s: (-s.score, s.levenshtein, s.candidate.distance_to_region, s.candidate.name))
    return scored


def _build(session: AgentSession, elements, options, choice, sources, degraded) -> Recommendation:
    pairs = []
    for e, k in enumerate(choice):
        if k is None:
            continue
        name, conf = options[e][k]
        cand = session.toolkit.known_candidates[name]
        pairs.append(Pair(elements[e], cand, conf, session.facts_mentioning(name), sources[e][k]))
    return Recommendation(pairs, list(session.elements), degraded)


def deterministic_complete(session: AgentSession, weights: Weights = Weights(), degraded: bool = False) -> Recommendation:
    toolkit = session.toolkit
    elements = list(session.elements)
    options: list[list[Option]] = []
    sources: list[list[str]] = []
    for el in elements:
        scored = score_candidates(toolkit.facts[el.name], toolkit.unused, weights, toolkit.table)
        options.append([(s.candidate.name, s.score) for s in scored])
        sources.append(["deterministic"] * len(scored))
    choice = assign_injective(options)
    return _build(session, elements, options, choice, sources, degraded)


# -- model completion -------------------------------------------------------------


@dataclass(frozen=True)
class InfillPrompt:
    text: str
    placeholder_count: int
    groups: dict[str, list[int]]  # element name -> 1-based placeholder numbers

    def messages(self) -> list[dict]:
        return [{"role": "user", "content": self.text}]


def infill_code(session: AgentSession) -> tuple[str, dict[str, list[int]], int]:
    """Method text up to the region end with every unresolved reference replaced."""
    region = session.region
    text = region.unit.text
    spans = sorted((s, el.name) for el in session.elements for s in el.references)
    groups: dict[str, list[int]] = {el.name: [] for el in session.elements}
    out, cursor = [], region.method.span.start
    for number, (span, name) in enumerate(spans, 1):
        out.append(_with_markers(text, cursor, span.start, region))
        out.append(PLACEHOLDER)
        cursor = span.end
        groups[name].append(number)
    out.append(_with_markers(text, cursor, region.span.end, region))
    out.append("<end>")
    return "".join(out), groups, len(spans)


def _with_markers(text: str, start: int, end: int, region) -> str:
    if start <= region.span.start <= end:
        return text[start : region.span.start] + "<start>" + text[region.span.start : end]
    return text[start:end]


def build_infill_prompt(session: AgentSession) -> InfillPrompt:
    code, groups, count = infill_code(session)
    doc = PromptDocument(code, SUFFICIENT, tools_for(SUFFICIENT), list(session.prompt.gathered), COMPLETION_FORMAT)
    listing = "\n".join(
        f"- group {name!r}: placeholders {', '.join(map(str, nums))}" for name, nums in groups.items()
    )
    text = doc.render() + (
        f"\n\n## Placeholders\nThe code contains {count} {PLACEHOLDER} placeholders. "
        f"Placeholders in one group stand for the same unresolved element:\n{listing}"
    )
    return InfillPrompt(text, count, groups)


def normalize_name(name: str) -> str:
    return "".join(name.split())


def parse_completion_reply(text: str) -> dict[str, str]:
    """``{unresolved: chosen}`` from a completion reply; accepts a pair list or a flat object."""
    data = repair_json_object(text)
    pairs = data.get("pairs", data.get("mapping"))
    result: dict[str, str] = {}
    if isinstance(pairs, list):
        for item in pairs:
            if isinstance(item, dict) and isinstance(item.get("unresolved"), str) and isinstance(item.get("chosen"), str):
                result.setdefault(item["unresolved"].strip(), normalize_name(item["chosen"]))
    elif isinstance(pairs, dict):
        data = pairs
    if not result:
        for k, v in data.items():
            if isinstance(k, str) and isinstance(v, str) and k not in ("thought", "action"):
                result[k.strip()] = normalize_name(v)
    return result


def collect_votes(
    model: ChatModel,
    messages: list[dict],
    votes: int,
    temperature: float,
    max_concurrency: int = 4,
    sleep: Callable[[float], None] | None = None,
) -> list:
    """Issue ``votes`` identical requests; returns exchanges in request order."""
    def one(_i: int):
        kwargs = {"sleep": sleep} if sleep is not None else {}
        return call_with_retries(lambda: model.complete(messages, temperature=temperature), **kwargs)

    workers = max(1, min(votes, max_concurrency))
    if workers == 1:
        return [one(i) for i in range(votes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(votes)))


def majority(values: list[str], rank: dict[str, int]) -> list[tuple[str, int]]:
    """Options with their vote counts, most votes first; ties by ``rank`` then name."""
    counts = Counter(values)
    return sorted(counts.items(), key=lambda kv: (-kv[1], rank.get(kv[0], len(rank)), kv[0]))


def execute_completion(
    session: AgentSession,
    model: ChatModel,
    votes: int = 5,
    temperature: float = 0.0,
    weights: Weights = Weights(),
    max_concurrency: int = 4,
    sleep: Callable[[float], None] | None = None,
) -> Recommendation:
    toolkit = session.toolkit
    elements = list(session.elements)
    if not elements:
        return Recommendation([], [], session.degraded)
    infill = build_infill_prompt(session)
    messages = infill.messages()
    try:
        exchanges = collect_votes(model, messages, votes, temperature, max_concurrency, sleep)
    except TransportError as exc:
        log.warning("completion failed (%s); using the deterministic completer", exc)
        session.degraded = True
        session.record_event("completion_fallback", {"error": str(exc)})
        return deterministic_complete(session, weights, degraded=True)

    for i, ex in enumerate(exchanges):
        session.record_exchange(ex, "completion", extra={"vote": i, "placeholders": infill.placeholder_count})
    replies: list[dict[str, str]] = []
    for ex in exchanges:
        try:
            replies.append(parse_completion_reply(ex.text))
        except CodewireError:
            replies.append({})

    options: list[list[Option]] = []
    sources: list[list[str]] = []
    n = len(exchanges)
    vote_log = {}
    for el in elements:
        scored = score_candidates(toolkit.facts[el.name], toolkit.unused, weights, toolkit.table)
        rank = {s.candidate.name: i for i, s in enumerate(scored)}
        ballots = [r[el.name] for r in replies if el.name in r]
        tally = majority(ballots, rank)
        vote_log[el.name] = tally
        opts: list[Option] = []
        srcs: list[str] = []
        for name, count in tally:
            if name in toolkit.known_candidates:  # out-of-vocabulary answers are dropped
                opts.append((name, 0.5 + 0.5 * count / n))
                srcs.append("model")
        seen = {o[0] for o in opts}
        for s in scored:
            if s.candidate.name not in seen:
                opts.append((s.candidate.name, 0.5 * s.score))
                srcs.append("deterministic")
        options.append(opts)
        sources.append(srcs)
    choice = assign_injective(options)
    rec = _build(session, elements, options, choice, sources, session.degraded)
    session.record_event("votes", {k: [[n_, c] for n_, c in v] for k, v in vote_log.items()})
    return rec

