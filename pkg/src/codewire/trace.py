"""JSONL trace files and the human-readable rendering used by ``codewire explain``."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from codewire.errors import InputError


def write_trace(path: str | Path, records: Iterable[dict], header: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"type": "session", **header}, sort_keys=True) + "\n")
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, default=str) + "\n")
    return path


def read_trace(path: str | Path) -> list[dict]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read trace {path}: {exc}") from exc
    records = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except ValueError as exc:
            raise InputError(f"{path}:{n} is not valid JSON: {exc}") from exc
    return records


def trace_totals(records: Iterable[dict]) -> dict:
    """Token and time totals summed over the model exchanges in a trace."""
    totals = {"tokens_in": 0, "tokens_out": 0, "ms": 0.0, "model_calls": 0}
    for r in records:
        if r.get("type") == "exchange":
            totals["tokens_in"] += r.get("tokens_in", 0)
            totals["tokens_out"] += r.get("tokens_out", 0)
            totals["ms"] += r.get("ms", 0.0)
            totals["model_calls"] += 1
    return totals


def _oneline(text: str, limit: int = 160) -> str:
    flat = " ".join(str(text).split())
    return flat if len(flat) <= limit else flat[: limit - 3] + "..."


def explain(records: list[dict]) -> str:
    out: list[str] = []
    steps = 0
    for r in records:
        kind = r.get("type")
        if kind == "session":
            out.append(f"Session for {r.get('path', '?')} in {r.get('mode', '?')} mode")
        elif kind == "init":
            data = r.get("data", {})
            names = ", ".join(data.get("elements", [])) or "none"
            out.append(f"Unresolved elements: {names}")
            out.append(f"State after initialisation: {data.get('state')}")
        elif kind in ("step", "rule"):
            steps += 1
            label = "Model step" if kind == "step" else "Rule step"
            head = f"{label} {steps} [{r.get('state')}]"
            if kind == "step":
                head += f" prompt {r.get('prompt_hash')} tokens {r.get('tokens_in')}/{r.get('tokens_out')} {r.get('ms', 0):.0f}ms"
            out.append(head)
            if r.get("thought"):
                out.append(f"  thought: {_oneline(r['thought'])}")
            if r.get("action") is None:
                out.append(f"  malformed reply: {_oneline(r.get('error', ''))}")
                continue
            out.append(f"  action: {r['action']} {json.dumps(r.get('action_input', {}), sort_keys=True)}")
            status = "ok" if r.get("ok") else "failed"
            if r.get("replayed"):
                status += ", replayed"
            out.append(f"  observation {r.get('observation_digest')} ({status}): {_oneline(r.get('observation', ''))}")
        elif kind == "transport_failure":
            data = r.get("data", {})
            n = data.get("attempts")
            out.append(f"Model unavailable after {n} attempt{'' if n == 1 else 's'}: {data.get('error')}; deterministic fallback")
        elif kind == "completion_fallback":
            out.append(f"Completion votes failed: {r.get('data', {}).get('error')}; deterministic fallback")
        elif kind == "votes":
            for name, options in sorted(r.get("data", {}).items()):
                rendered = ", ".join(f"{n} ({c:.2f})" for n, c in options) or "none"
                out.append(f"  votes for {name}: {rendered}")
        elif kind == "completion":
            flags = []
            flags.append("complete" if r.get("complete") else "partial")
            if r.get("degraded"):
                flags.append("degraded")
            out.append(f"Completion ({r.get('mode')}, {', '.join(flags)}), {r.get('iterations_used')} iterations used")
            for p in r.get("pairs", []):
                out.append(f"  {p['unresolved']} -> {p['chosen']} (confidence {p['confidence']:.2f})")
    totals = trace_totals(records)
    out.append(
        f"Totals: model calls {totals['model_calls']}, tokens in {totals['tokens_in']}, "
        f"tokens out {totals['tokens_out']}, model time {totals['ms']:.1f}ms"
    )
    return "\n".join(out) + "\n"
