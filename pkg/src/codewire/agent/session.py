"""Agent session: state machine, tool memory, budget and the pilot loop."""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from codewire.agent.actions import parse_action
from codewire.agent.prompt import PromptDocument, digest, format_fact
from codewire.agent.toolkit import (
    INITIAL,
    INSUFFICIENT,
    SUFFICIENT,
    TOOLS,
    Observation,
    Toolkit,
    tools_for,
)
from codewire.completer import Recommendation, Weights, deterministic_complete, execute_completion
from codewire.errors import InternalError, MalformedActionError, TransportError
from codewire.llm import ChatExchange, ChatModel, Ledger, call_with_retries
from codewire.locator import AdaptationRegion, UnresolvedElement
from codewire.syntax.symbols import SymbolTable

log = logging.getLogger(__name__)


class AgentState(str, enum.Enum):
    INITIAL = INITIAL
    INSUFFICIENT = INSUFFICIENT
    SUFFICIENT = SUFFICIENT


TRANSITIONS = {
    AgentState.INITIAL: {AgentState.INSUFFICIENT, AgentState.SUFFICIENT},
    AgentState.INSUFFICIENT: {AgentState.INSUFFICIENT, AgentState.SUFFICIENT},
    AgentState.SUFFICIENT: {AgentState.SUFFICIENT},
}


@dataclass
class Budget:
    max_iterations: int = 2
    iterations_used: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    @property
    def exhausted(self) -> bool:
        return self.iterations_used >= self.max_iterations

    def consume(self) -> None:
        if self.exhausted:
            raise InternalError("iteration budget exceeded")
        self.iterations_used += 1


@dataclass
class SessionConfig:
    max_iterations: int = 2
    votes: int = 5
    temperature: float = 0.0
    weights: Weights = field(default_factory=Weights)
    malformed_retries: int = 2
    transport_attempts: int = 3
    backoff: float = 0.5
    max_concurrency: int = 4


@dataclass
class ToolInvocation:
    thought: str
    action: str
    action_input: dict
    observation: str
    ok: bool
    state: AgentState
    replayed: bool = False
    executed: bool = False
    fact_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "thought": self.thought,
            "action": self.action,
            "action_input": self.action_input,
            "observation": self.observation,
            "ok": self.ok,
            "state": self.state.value,
            "replayed": self.replayed,
            "fact_id": self.fact_id,
        }


def memory_key(action: str, action_input: dict) -> tuple[str, str]:
    return action, json.dumps(action_input, sort_keys=True)


class AgentSession:
    def __init__(
        self,
        region: AdaptationRegion,
        table: SymbolTable,
        config: SessionConfig | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.region = region
        self.table = table
        self.config = config or SessionConfig()
        self.sleep = sleep
        self.toolkit = Toolkit(region, table)
        self.state = AgentState.INITIAL
        self.prompt = PromptDocument(self._code_view(), INITIAL, tools_for(INITIAL))
        self.budget = Budget(self.config.max_iterations)
        self.memory: dict[tuple[str, str], ToolInvocation] = {}
        self.invocations: list[ToolInvocation] = []
        self.ledger = Ledger()
        self.trace: list[dict] = []
        self.degraded = False
        self.completion_requested = False
        self.forced = False
        self.malformed_streak = 0
        self.state_log: list[AgentState] = [self.state]
        self._mentions: dict[str, list[str]] = {}
        self._fact_count = 0

    @property
    def elements(self) -> list[UnresolvedElement]:
        return self.toolkit.elements

    @property
    def available_tools(self) -> list[str]:
        return [t.name for t in tools_for(self.state.value)]

    def _code_view(self) -> str:
        text = self.region.unit.text
        method, span = self.region.method, self.region.span
        return text[method.span.start : span.start] + "<start>" + text[span.start : span.end] + "<end>"

    def set_state(self, new: AgentState) -> None:
        if new not in TRANSITIONS[self.state]:
            raise InternalError(f"illegal transition {self.state.value} -> {new.value}")
        self.state = new
        self.state_log.append(new)
        self.prompt.state = new.value
        self.prompt.tools = tools_for(new.value)

    def facts_mentioning(self, name: str) -> list[str]:
        return list(self._mentions.get(name, ()))

    def record_exchange(self, ex: ChatExchange, purpose: str, extra: dict | None = None) -> None:
        self.ledger.record(ex, purpose)
        record = {
            "type": "exchange",
            "purpose": purpose,
            "prompt_hash": digest(_messages_text(ex.messages)),
            "messages": list(ex.messages),
            "reply": ex.text,
            "tokens_in": ex.tokens_in,
            "tokens_out": ex.tokens_out,
            "ms": ex.latency_ms,
            "estimated": ex.estimated,
        }
        if extra:
            record.update(extra)
        self.trace.append(record)

    def record_event(self, kind: str, data: Any) -> None:
        self.trace.append({"type": kind, "data": data})

    def _record_fact(self, inv: ToolInvocation, mentions: tuple[str, ...], note: str) -> None:
        self._fact_count += 1
        inv.fact_id = f"F{self._fact_count}"
        self.prompt.append(format_fact(inv.fact_id, inv.thought, inv.action, inv.action_input, inv.observation, note))
        for name in mentions:
            self._mentions.setdefault(name, []).append(inv.fact_id)


def _messages_text(messages) -> str:
    return "\n".join(str(m.get("content", "")) for m in messages)


def execute_action(session: AgentSession, thought: str, action: str, action_input: dict, note: str = "") -> ToolInvocation:
    """Dispatch one action in the current state, honouring tool memory."""
    state = session.state
    key = memory_key(action, action_input)
    mentions: tuple[str, ...] = ()
    replayed = executed = False
    if action == "execute_completion":
        if state is AgentState.INITIAL:
            obs = Observation(False, "execute_completion is not available before initialisation finishes")
        else:
            session.completion_requested = True
            obs = Observation(True, "completion requested")
    elif action not in TOOLS:
        obs = session.toolkit.dispatch(action, action_input)
    elif key in session.memory:
        prior = session.memory[key]
        obs = Observation(prior.ok, prior.observation)
        replayed = True
        note = (note + " replayed from memory").strip()
    elif action not in session.available_tools:
        obs = Observation(False, f"{action} is not available in state {state.value}; available: "
                                 f"{', '.join(session.available_tools)}")
    else:
        obs = session.toolkit.dispatch(action, action_input)
        mentions = obs.mentions
        executed = True
    inv = ToolInvocation(thought, action, dict(action_input), obs.text, obs.ok, state, replayed, executed)
    if executed:
        session.memory[key] = inv
    session._record_fact(inv, mentions, note)
    session.invocations.append(inv)
    return inv


def sufficiency_holds(session: AgentSession) -> bool:
    """Every element already has a candidate whose type provably matches."""
    facts = session.toolkit.facts
    return bool(facts) and all(f.has_strict_candidate() for f in facts.values())


def transition(session: AgentSession) -> AgentState:
    if session.state is AgentState.SUFFICIENT:
        return session.state
    if session.completion_requested or session.forced or session.budget.exhausted or sufficiency_holds(session):
        session.set_state(AgentState.SUFFICIENT)
    else:
        session.set_state(AgentState.INSUFFICIENT)
    return session.state


def init_session(
    region: AdaptationRegion,
    table: SymbolTable,
    config: SessionConfig | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> AgentSession:
    """Run the locator and the initial collectors; no model is involved."""
    session = AgentSession(region, table, config, sleep)
    execute_action(session, "", "identify_unresolved_elements", {}, "automatic")
    if not session.elements:
        session.set_state(AgentState.SUFFICIENT)
        session.record_event("init", {"elements": [], "state": session.state.value})
        return session
    execute_action(session, "", "get_available_variables", {}, "automatic")
    execute_action(session, "", "get_unused_variables", {}, "automatic")
    for el in session.elements:
        execute_action(session, "", "is_argument", {"element": el.name}, "automatic")
        execute_action(session, "", "is_receiver", {"element": el.name}, "automatic")
    transition(session)
    session.record_event(
        "init",
        {"elements": [e.name for e in session.elements], "state": session.state.value,
         "facts": len(session.prompt.gathered)},
    )
    return session


def step(session: AgentSession, model_output: str) -> ToolInvocation:
    """Parse one model reply and execute it. Raises MalformedActionError."""
    if session.state is AgentState.SUFFICIENT:
        raise InternalError("session is already in SufficientContext")
    parsed = parse_action(model_output)
    return execute_action(session, parsed.thought, parsed.action, parsed.action_input)


def gather_rule_based(session: AgentSession) -> None:
    """Fixed gathering plan used when no model decides: identical calls for
    receivers, type filtering (widening to member calls when nothing fits),
    then similarity ranking."""
    if session.state is not AgentState.INSUFFICIENT:
        return
    toolkit = session.toolkit
    start = len(session.invocations)
    for el in session.elements:
        facts = toolkit.facts[el.name]
        if facts.is_receiver:
            execute_action(session, "", "retrieve_identical_function_call", {"element": el.name}, "rule")
        expected = facts.expected_type
        if expected is not None and expected.known:
            execute_action(session, "", "reserve_type_compatible_ones", {"element": el.name}, "rule")
            cls = expected.element_base
            if not facts.has_strict_candidate() and cls in toolkit.fact_classes() and table_has(session, cls):
                execute_action(session, "", "get_method_names", {"class_name": cls, "element": el.name}, "rule")
        execute_action(session, "", "sort_by_literal_similarity", {"target": el.name}, "rule")
    for inv in session.invocations[start:]:
        session.trace.append({"type": "rule", **_step_fields(inv)})


def table_has(session: AgentSession, cls: str) -> bool:
    return session.table.class_info(cls) is not None


def _step_fields(inv: ToolInvocation) -> dict:
    return {
        "state": inv.state.value,
        "thought": inv.thought,
        "action": inv.action,
        "action_input": inv.action_input,
        "ok": inv.ok,
        "replayed": inv.replayed,
        "fact_id": inv.fact_id,
        "observation_digest": digest(inv.observation),
        "observation": inv.observation[:300],
    }


def _finish(session: AgentSession, rec: Recommendation, mode: str) -> Recommendation:
    session.trace.append(
        {
            "type": "completion",
            "mode": mode,
            "pairs": [p.to_dict() for p in rec.pairs],
            "complete": rec.complete,
            "degraded": rec.degraded,
            "iterations_used": session.budget.iterations_used,
            "tokens_in": session.ledger.tokens_in,
            "tokens_out": session.ledger.tokens_out,
            "ms": session.ledger.ms,
            "model_calls": session.ledger.calls,
        }
    )
    return rec


def run_deterministic(session: AgentSession) -> Recommendation:
    if not session.elements:
        return _finish(session, Recommendation([], []), "deterministic")
    gather_rule_based(session)
    rec = deterministic_complete(session, session.config.weights, degraded=session.degraded)
    return _finish(session, rec, "deterministic")


def run(session: AgentSession, model: ChatModel) -> Recommendation:
    """Drive the decide-act loop until the context is sufficient, then complete."""
    cfg = session.config
    if not session.elements:
        return _finish(session, Recommendation([], []), "agent")
    while session.state is not AgentState.SUFFICIENT:
        if session.budget.exhausted:
            transition(session)
            break
        messages = session.prompt.messages()
        prompt_hash = digest(messages[0]["content"])
        state_at_dispatch = session.state
        session.budget.consume()
        try:
            ex = call_with_retries(
                lambda: model.complete(messages, temperature=cfg.temperature),
                attempts=cfg.transport_attempts,
                base_delay=cfg.backoff,
                sleep=session.sleep,
            )
        except TransportError as exc:
            log.warning("model unavailable (%s); falling back to the deterministic completer", exc)
            session.degraded = True
            session.record_event("transport_failure", {"error": str(exc), "attempts": exc.attempts})
            rec = run_deterministic_after_failure(session)
            return _finish(session, rec, "agent")
        session.record_exchange(ex, "decision")
        record = {
            "type": "step",
            "state": state_at_dispatch.value,
            "prompt_hash": prompt_hash,
            "tokens_in": ex.tokens_in,
            "tokens_out": ex.tokens_out,
            "ms": ex.latency_ms,
            "reply": ex.text,
        }
        try:
            inv = step(session, ex.text)
        except MalformedActionError as exc:
            session.malformed_streak += 1
            record.update(thought="", action=None, action_input={}, ok=False, error=str(exc),
                          observation_digest=digest(str(exc)))
            session.trace.append(record)
            if session.malformed_streak > cfg.malformed_retries:
                session.forced = True
            transition(session)
            continue
        session.malformed_streak = 0
        record.update(_step_fields(inv))
        session.trace.append(record)
        transition(session)
    rec = execute_completion(
        session, model, cfg.votes, cfg.temperature, cfg.weights, cfg.max_concurrency, session.sleep
    )
    return _finish(session, rec, "agent")


def run_deterministic_after_failure(session: AgentSession) -> Recommendation:
    gather_rule_based(session)
    return deterministic_complete(session, session.config.weights, degraded=True)
