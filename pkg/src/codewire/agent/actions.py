"""Parsing and repair of model replies."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from codewire.errors import MalformedActionError

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n?(.*?)```", re.DOTALL)
_TRAILING_COMMA = re.compile(r",(\s*[}\]])")


@dataclass(frozen=True)
class ParsedAction:
    thought: str
    action: str
    action_input: dict = field(default_factory=dict)


def first_balanced_object(text: str) -> str | None:
    """The first ``{...}`` in ``text`` with braces balanced outside string literals."""
    start = text.find("{")
    while start >= 0:
        depth, in_str, escape = 0, False, False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        start = text.find("{", start + 1)
    return None


def _attempts(raw: str):
    text = raw.strip()
    yield text
    fenced = _FENCE.search(text)
    if fenced:
        text = fenced.group(1).strip()
        yield text
    obj = first_balanced_object(text)
    if obj is not None:
        yield obj
        yield _TRAILING_COMMA.sub(r"\1", obj)
    yield _TRAILING_COMMA.sub(r"\1", text)


def repair_json_object(raw: str) -> dict:
    """Decode a JSON object from a model reply, applying the repair rules in order."""
    for candidate in _attempts(raw):
        try:
            value = json.loads(candidate)
        except ValueError:
            continue
        if isinstance(value, dict):
            return value
    raise MalformedActionError("reply does not contain a JSON object", raw)


def parse_action(raw: str) -> ParsedAction:
    data = repair_json_object(raw)
    action = data.get("action")
    if not isinstance(action, str) or not action.strip():
        raise MalformedActionError("reply has no 'action' field", raw)
    thought = data.get("thought", "")
    if not isinstance(thought, str):
        thought = json.dumps(thought)
    action_input = data.get("action_input", {})
    if action_input is None:
        action_input = {}
    if isinstance(action_input, str):
        try:
            action_input = json.loads(action_input) if action_input.strip() else {}
        except ValueError as exc:
            raise MalformedActionError("action_input is not an object", raw) from exc
    if not isinstance(action_input, dict):
        raise MalformedActionError("action_input is not an object", raw)
    return ParsedAction(thought, action.strip(), action_input)
