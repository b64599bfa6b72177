"""``codewire`` command line: ``wire``, ``eval`` and ``explain``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from codewire.agent.session import SessionConfig
from codewire.completer import Weights
from codewire.errors import CodewireError, ConfigError, InputError
from codewire.evaluation import emit_report, evaluate, load_corpus
from codewire.llm import HttpChatModel, ModelConfig
from codewire.pipeline import MODES, WireOptions, combined_stubs, load_project, prepare, read_source, wire
from codewire.trace import explain, read_trace, write_trace

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


@dataclass
class CliConfig:
    mode: str = "deterministic"
    model: str = "gpt-4o-mini"
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str = "CODEWIRE_API_KEY"
    temperature: float = 0.0
    votes: int = 5
    max_iter: int = 2
    max_tokens: int = 1024
    timeout: float = 60.0
    max_concurrency: int = 4
    stubs: list[str] = field(default_factory=list)
    project: str | None = None
    trace: str | None = None
    in_place: bool = False
    json: bool = False
    w_similarity: float = 0.5
    w_unused: float = 0.2
    w_identical: float = 0.2
    w_proximity: float = 0.1

    def session_config(self) -> SessionConfig:
        weights = Weights(self.w_similarity, self.w_unused, self.w_identical, self.w_proximity)
        return SessionConfig(
            max_iterations=self.max_iter, votes=self.votes, temperature=self.temperature,
            weights=weights, max_concurrency=self.max_concurrency,
        )

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            endpoint=self.endpoint, model=self.model, api_key_env=self.api_key_env,
            temperature=self.temperature, max_tokens=self.max_tokens, timeout=self.timeout,
            votes=self.votes, max_concurrency=self.max_concurrency,
        )


_FIELDS = {f.name: f for f in fields(CliConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, raw: str) -> Any:
    default = getattr(CliConfig(), key)
    if key in ("project", "trace"):
        return raw or None
    if isinstance(default, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, list):
        return [p.strip() for p in raw.split(",") if p.strip()]
    try:
        return type(default)(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path: str | Path) -> dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def resolve_config(cli: dict[str, Any], file_values: dict[str, Any] | None = None) -> CliConfig:
    """Command line beats the config file, which beats built-in defaults.

    ``None`` in ``cli`` means the flag was not given.
    """
    merged = dict(file_values or {})
    merged.update({k: v for k, v in cli.items() if k in _FIELDS and v is not None})
    cfg = CliConfig(**merged)
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.max_iter < 1:
        raise ConfigError("max_iter must be >= 1")
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors share the generic error exit code
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.add_argument("--api-key-env", dest="api_key_env")
    p.add_argument("--temperature", type=float)
    p.add_argument("--votes", type=int)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--max-concurrency", dest="max_concurrency", type=int)
    p.add_argument("--stubs", action="append", help="stub library file (repeatable)")
    p.add_argument("--json", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="codewire", description="Wire pasted Java code to its surrounding context.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    w = sub.add_parser("wire", help="wire the marked region of one file")
    w.add_argument("target")
    w.add_argument("--project", help="directory of other project sources")
    w.add_argument("--trace", help="write a JSONL session trace here")
    w.add_argument("--in-place", dest="in_place", action=argparse.BooleanOptionalAction, default=None)
    _common(w)

    e = sub.add_parser("eval", help="evaluate a corpus")
    e.add_argument("root")
    e.add_argument("--out", default="codewire-report", help="directory for report.json and report.csv")
    _common(e)

    x = sub.add_parser("explain", help="narrate a session trace")
    x.add_argument("trace_file")
    return parser


def _config_from(args: argparse.Namespace) -> CliConfig:
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    return resolve_config(vars(args), file_values)


def _model_for(cfg: CliConfig) -> HttpChatModel | None:
    if cfg.mode == "deterministic":
        return None
    mc = cfg.model_config()
    mc.api_key()  # fail early with a ConfigError
    return HttpChatModel(mc)


def cmd_wire(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    cfg = _config_from(args)
    if cfg.mode == "naive":
        raise InputError("naive mode is only available for eval")
    target = Path(args.target)
    text = read_source(target)
    project = load_project(cfg.project, exclude=[target]) if cfg.project else []
    prepared = prepare(text, str(target), project, combined_stubs(cfg.stubs))
    model = _model_for(cfg)
    try:
        result = wire(prepared, WireOptions(cfg.mode, cfg.session_config()), model)
    finally:
        if model is not None:
            model.close()
    if cfg.trace:
        write_trace(cfg.trace, result.session.trace, {"path": str(target), "mode": cfg.mode})
    if cfg.in_place and result.script.edits:
        target.write_text(result.new_text, encoding="utf-8")
    if cfg.json:
        out.write(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
    else:
        out.write(result.diff)
        for warning in result.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        for name in result.remaining:
            print(f"warning: {name} is still unresolved after wiring", file=sys.stderr)
    return EXIT_OK if result.recommendation.complete else EXIT_PARTIAL


def cmd_eval(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    cfg = _config_from(args)
    corpus = load_corpus(args.root)
    for r in corpus.rejects:
        print(f"rejected case {r.case_id or '?'} (line {r.line}): {r.reason}", file=sys.stderr)
    model = _model_for(cfg)
    try:
        report = evaluate(
            corpus, cfg.mode, model, cfg.session_config(), [Path(s) for s in cfg.stubs],
            workers=cfg.max_concurrency if model is not None else 1,
        )
    finally:
        if model is not None:
            model.close()
    out_dir = Path(args.out)
    emit_report(report, out_dir / "report.json", "json")
    emit_report(report, out_dir / "report.csv", "csv")
    if cfg.json:
        out.write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    out.write(report.summary() + "\n")
    return EXIT_OK


def cmd_explain(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    out.write(explain(read_trace(args.trace_file)))
    return EXIT_OK


COMMANDS = {"wire": cmd_wire, "eval": cmd_eval, "explain": cmd_explain}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CodewireError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
