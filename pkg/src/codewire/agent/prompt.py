"""The dynamic prompt: fixed sections plus state, tools and gathered facts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

ROLE = (
    "You are a code integration assistant. A developer pasted a snippet into an existing "
    "Java method, and some names in the snippet do not resolve in their new home. "
    "You decide, on your own, which existing variables or expressions those names should refer to."
)

GOALS = (
    "Map every unresolved element to one existing context element (a local variable, parameter, "
    "field or a member call expression), using a different context element for each unresolved "
    "element. Collect facts with the tools first; call execute_completion when the facts are enough."
)

GUIDELINES: tuple[str, ...] = (
    "You only get a few steps, so every tool call should add something you do not know yet.",
    "A replacement has to fit where the unresolved element is used; prefer candidates whose type "
    "matches the type the element needs.",
    "Ask only for the facts you need and move to completion as soon as each element has a convincing candidate.",
    "When nothing in the current class fits, try members of other classes that already appear in the gathered facts.",
)

STATE_DESCRIPTIONS = {
    "Initial": "No facts have been collected yet.",
    "InsufficientContext": (
        "The facts collected so far do not yet settle every unresolved element. "
        "Use the tools below to narrow the candidates, or request completion if you are confident."
    ),
    "SufficientContext": "Enough facts have been collected. Complete the code now.",
}

OUTPUT_FORMAT = (
    "Reply with exactly one JSON object and nothing else:\n"
    '{"thought": "<your reasoning>", "action": "<tool name>", "action_input": {<arguments>}}'
)

COMPLETION_FORMAT = (
    "Reply with exactly one JSON object and nothing else:\n"
    '{"pairs": [{"unresolved": "<unresolved name>", "chosen": "<context element>"}]}\n'
    "Give one pair per placeholder group. Every chosen element must be an existing context element "
    "from the gathered information, and no two groups may share one."
)


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    required: tuple[str, ...] = ()
    optional: tuple[str, ...] = ()
    states: frozenset[str] = frozenset()

    def render(self) -> str:
        params = [f"{p}" for p in self.required] + [f"{p}?" for p in self.optional]
        return f"- {self.name}({', '.join(params)}): {self.description}"


@dataclass
class PromptDocument:
    code: str
    state: str = "Initial"
    tools: Sequence[ToolSpec] = ()
    gathered: list[str] = field(default_factory=list)
    output_format: str = OUTPUT_FORMAT

    def append(self, entry: str) -> None:
        self.gathered.append(entry)

    def sections(self) -> list[tuple[str, str]]:
        guidelines = "\n".join(f"{i}. {g}" for i, g in enumerate(GUIDELINES, 1))
        state = f"{self.state}: {STATE_DESCRIPTIONS[self.state]}\n\nCode under adaptation:\n```java\n{self.code}\n```"
        tools = "\n".join(t.render() for t in self.tools) or "(none)"
        gathered = "\n\n".join(self.gathered) or "(nothing yet)"
        return [
            ("Role", ROLE),
            ("Goals", GOALS),
            ("Guidelines", guidelines),
            ("State Description", state),
            ("Available Tools", tools),
            ("Gathered Information", gathered),
            ("Output Format", self.output_format),
        ]

    def render(self) -> str:
        return "\n\n".join(f"## {title}\n{body}" for title, body in self.sections())

    def messages(self) -> list[dict]:
        return [{"role": "user", "content": self.render()}]


def digest(text: str, length: int = 16) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:length]


def format_fact(fact_id: str, thought: str, action: str, action_input: dict, observation: str, note: str = "") -> str:
    args = json.dumps(action_input, sort_keys=True)
    lines = [f"[{fact_id}]{' ' + note if note else ''}"]
    if thought:
        lines.append(f"Thought: {thought}")
    lines.append(f"Action: {action} {args}")
    lines.append(f"Observation: {observation}")
    return "\n".join(lines)
