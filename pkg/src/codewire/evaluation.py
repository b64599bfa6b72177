"""Corpus loading, exact-match metrics and report export."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from codewire.agent.actions import repair_json_object
from codewire.agent.session import SessionConfig
from codewire.completer import normalize_name
from codewire.errors import CodewireError, InputError
from codewire.llm import ChatModel, Ledger, call_with_retries
from codewire.locator import extract_region
from codewire.pipeline import Prepared, WireOptions, combined_stubs, prepare, read_source, wire
from codewire.syntax.parser import parse_unit

log = logging.getLogger(__name__)

CSV_FIELDS = (
    "id", "total", "rec", "em", "tokens_in", "tokens_out", "total_tokens", "ms",
    "model_calls", "degraded", "estimated", "error",
)


@dataclass(frozen=True)
class GroundTruthPair:
    unresolved: str
    expected: str


@dataclass
class CorpusCase:
    id: str
    root: Path
    files: list[Path]
    target: Path
    ground_truth: list[GroundTruthPair]
    stubs: list[Path] = field(default_factory=list)


@dataclass(frozen=True)
class Reject:
    line: int
    case_id: str | None
    reason: str


@dataclass
class Corpus:
    cases: list[CorpusCase]
    rejects: list[Reject]

    def __iter__(self):
        return iter(self.cases)

    def __len__(self) -> int:
        return len(self.cases)


def _validate_case(raw: object, root: Path, shared_stubs: list[Path]) -> CorpusCase:
    if not isinstance(raw, dict):
        raise InputError("case is not a JSON object")
    case_id = raw.get("id")
    if not isinstance(case_id, str) or not case_id:
        raise InputError("missing or empty 'id'")
    files = raw.get("files", [])
    target = raw.get("target")
    if not isinstance(files, list) or not all(isinstance(f, str) for f in files):
        raise InputError("'files' must be a list of paths")
    if not isinstance(target, str) or not target:
        raise InputError("missing 'target'")
    gt = raw.get("ground_truth")
    if not isinstance(gt, list) or not gt:
        raise InputError("'ground_truth' must be a non-empty list")
    pairs = []
    for item in gt:
        if not isinstance(item, dict) or not all(isinstance(item.get(k), str) and item.get(k) for k in ("unresolved", "expected")):
            raise InputError("each ground_truth entry needs non-empty 'unresolved' and 'expected'")
        pairs.append(GroundTruthPair(item["unresolved"], item["expected"]))
    lefts = [p.unresolved for p in pairs]
    rights = [p.expected for p in pairs]
    if len(set(lefts)) != len(lefts) or len(set(rights)) != len(rights):
        raise InputError("ground truth is not injective: duplicate unresolved or expected names")
    stubs = raw.get("stubs", [])
    if not isinstance(stubs, list) or not all(isinstance(s, str) for s in stubs):
        raise InputError("'stubs' must be a list of paths")
    paths = [root / f for f in files]
    target_path = root / target
    if target_path not in paths:
        paths.append(target_path)
    for p in paths + [root / s for s in stubs]:
        if not p.is_file():
            raise InputError(f"referenced file {p.relative_to(root)} does not exist")
    extract_region(read_source(target_path))  # raises MarkerError
    return CorpusCase(case_id, root, paths, target_path, pairs, shared_stubs + [root / s for s in stubs])


def load_corpus(root: str | Path) -> Corpus:
    root = Path(root)
    index = root / "cases.jsonl"
    try:
        lines = index.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read corpus index {index}: {exc}") from exc
    shared = [root / "stubs.txt"] if (root / "stubs.txt").is_file() else []
    cases, rejects, seen = [], [], set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        case_id = None
        try:
            raw = json.loads(line)
            case_id = raw.get("id") if isinstance(raw, dict) else None
            case = _validate_case(raw, root, shared)
            if case.id in seen:
                raise InputError(f"duplicate case id {case.id!r}")
        except ValueError as exc:
            rejects.append(Reject(lineno, case_id, f"invalid JSON: {exc}"))
            continue
        except CodewireError as exc:
            rejects.append(Reject(lineno, case_id, f"{type(exc).__name__}: {exc}"))
            continue
        seen.add(case.id)
        cases.append(case)
    return Corpus(cases, rejects)


# -- metrics ---------------------------------------------------------------------


def em_precision(em: int, rec: int) -> float | None:
    """Exact matches over recommendations; undefined without recommendations."""
    return em / rec if rec else None


def em_recall(em: int, total: int) -> float | None:
    """Exact matches over all unresolved elements."""
    return em / total if total else None


def as_percent(value: float | None) -> str:
    return "n/a" if value is None else f"{100 * value:.1f}%"


def score_pairs(mapping: dict[str, str], ground_truth: Sequence[GroundTruthPair]) -> tuple[int, int, int]:
    """``(rec, em, total)`` counted per ground-truth pair."""
    rec = em = 0
    for pair in ground_truth:
        chosen = mapping.get(pair.unresolved)
        if chosen:
            rec += 1
            if chosen == pair.expected:
                em += 1
    return rec, em, len(ground_truth)


@dataclass
class CaseResult:
    id: str
    total: int
    rec: int = 0
    em: int = 0
    tokens_in: int = 0
    tokens_out: int = 0
    ms: float = 0.0
    model_calls: int = 0
    degraded: bool = False
    estimated: bool = False
    error: str | None = None
    mapping: dict[str, str] = field(default_factory=dict)
    expected: dict[str, str] = field(default_factory=dict)

    @property
    def total_tokens(self) -> int:
        return self.tokens_in + self.tokens_out

    def row(self) -> dict:
        return {
            "id": self.id, "total": self.total, "rec": self.rec, "em": self.em,
            "tokens_in": self.tokens_in, "tokens_out": self.tokens_out, "total_tokens": self.total_tokens,
            "ms": self.ms, "model_calls": self.model_calls, "degraded": self.degraded,
            "estimated": self.estimated, "error": self.error or "",
        }

    def to_dict(self) -> dict:
        data = self.row()
        data["error"] = self.error
        data["mapping"] = dict(self.mapping)
        data["expected"] = dict(self.expected)
        return data


@dataclass
class MetricsReport:
    mode: str
    cases: list[CaseResult] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)

    @property
    def total_cases(self) -> int:
        return len(self.cases)

    @property
    def total(self) -> int:
        return sum(c.total for c in self.cases)

    @property
    def recommendations(self) -> int:
        return sum(c.rec for c in self.cases)

    @property
    def exact_matches(self) -> int:
        return sum(c.em for c in self.cases)

    @property
    def precision(self) -> float | None:
        return em_precision(self.exact_matches, self.recommendations)

    @property
    def recall(self) -> float | None:
        return em_recall(self.exact_matches, self.total)

    def aggregates(self) -> dict:
        return aggregate_rows([c.row() for c in self.cases])

    def summary(self) -> str:
        return (
            f"EM={self.exact_matches} Rec={self.recommendations} Total={self.total} "
            f"P={as_percent(self.precision)} R={as_percent(self.recall)}"
        )

    def to_dict(self) -> dict:
        data = {"mode": self.mode, **self.aggregates()}
        data["cases"] = [c.to_dict() for c in self.cases]
        data["rejects"] = [{"line": r.line, "id": r.case_id, "reason": r.reason} for r in self.rejects]
        return data


def aggregate_rows(rows: Sequence[dict]) -> dict:
    """Report-level numbers from per-case rows; shared by the JSON report and CSV re-reading."""
    em = sum(int(r["em"]) for r in rows)
    rec = sum(int(r["rec"]) for r in rows)
    total = sum(int(r["total"]) for r in rows)
    return {
        "total_cases": len(rows),
        "total": total,
        "recommendations": rec,
        "exact_matches": em,
        "em_precision": em_precision(em, rec),
        "em_recall": em_recall(em, total),
        "tokens_in": sum(int(r["tokens_in"]) for r in rows),
        "tokens_out": sum(int(r["tokens_out"]) for r in rows),
        "total_tokens": sum(int(r["total_tokens"]) for r in rows),
        "ms": sum(float(r["ms"]) for r in rows),
        "degraded_cases": sum(1 for r in rows if str(r["degraded"]) in ("True", "true", "1")),
    }


# -- running -----------------------------------------------------------------------

NAIVE_INSTRUCTION = (
    "The Java class below contains a pasted snippet between <start> and <end>. Some names in the "
    "snippet do not resolve. Replace each of them with an existing variable, parameter, field or "
    "member call expression from the class, using a different one for each name.\n"
    'Reply with JSON only: {"pairs": [{"unresolved": "<name>", "chosen": "<replacement>"}]}\n\n'
)


def _pairs_from_reply(text: str) -> dict[str, str]:
    from codewire.completer import parse_completion_reply

    try:
        return parse_completion_reply(text)
    except CodewireError:
        return {}


def run_naive(case: CorpusCase, model: ChatModel, votes: int, temperature: float,
              sleep: Callable[[float], None] | None = None) -> tuple[dict[str, str], Ledger]:
    """Whole class plus markers in, pairs out; majority per name, no validation."""
    text = read_source(case.target)
    messages = [{"role": "user", "content": NAIVE_INSTRUCTION + text}]
    ledger = Ledger()
    ballots: dict[str, list[str]] = {}
    kwargs = {"sleep": sleep} if sleep is not None else {}
    for _ in range(votes):
        ex = call_with_retries(lambda: model.complete(messages, temperature=temperature), **kwargs)
        ledger.record(ex, "naive")
        for name, chosen in _pairs_from_reply(ex.text).items():
            ballots.setdefault(name, []).append(normalize_name(chosen))
    mapping = {}
    for name, values in ballots.items():
        counts = Counter(values)
        mapping[name] = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
    return mapping, ledger


def prepare_case(case: CorpusCase, extra_stubs: Sequence[Path] = ()) -> Prepared:
    """Parse a case's target against its sibling files and stub libraries."""
    stubs = combined_stubs(list(case.stubs) + list(extra_stubs))
    project = [parse_unit(read_source(f), str(f)) for f in case.files if f != case.target]
    return prepare(read_source(case.target), str(case.target.relative_to(case.root)), project, stubs)


def run_case(
    case: CorpusCase,
    mode: str,
    model: ChatModel | None = None,
    config: SessionConfig | None = None,
    extra_stubs: Sequence[Path] = (),
    sleep: Callable[[float], None] | None = None,
) -> CaseResult:
    config = config or SessionConfig()
    result = CaseResult(case.id, len(case.ground_truth), expected={p.unresolved: p.expected for p in case.ground_truth})
    try:
        if mode == "naive":
            if model is None:
                raise InputError("naive mode needs a chat model")
            mapping, ledger = run_naive(case, model, config.votes, config.temperature, sleep)
            degraded = False
        else:
            prepared = prepare_case(case, extra_stubs)
            kwargs = {"sleep": sleep} if sleep is not None else {}
            wired = wire(prepared, WireOptions(mode, config), model, **kwargs)
            mapping, ledger, degraded = wired.recommendation.mapping, wired.session.ledger, wired.recommendation.degraded
    except Exception as exc:  # a failing case never aborts the sweep
        log.warning("case %s failed: %s", case.id, exc)
        result.error = f"{type(exc).__name__}: {exc}"
        return result
    result.mapping = mapping
    result.rec, result.em, result.total = score_pairs(mapping, case.ground_truth)
    result.tokens_in, result.tokens_out = ledger.tokens_in, ledger.tokens_out
    result.ms = ledger.ms
    result.model_calls = ledger.calls
    result.estimated = ledger.estimated
    result.degraded = degraded
    return result


def evaluate(
    cases: Sequence[CorpusCase] | Corpus,
    mode: str = "deterministic",
    model: ChatModel | None = None,
    config: SessionConfig | None = None,
    extra_stubs: Sequence[Path] = (),
    workers: int = 1,
    sleep: Callable[[float], None] | None = None,
) -> MetricsReport:
    rejects = list(cases.rejects) if isinstance(cases, Corpus) else []
    case_list = list(cases)
    if mode == "deterministic" or workers <= 1:
        results = [run_case(c, mode, model, config, extra_stubs, sleep) for c in case_list]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: run_case(c, mode, model, config, extra_stubs, sleep), case_list))
    return MetricsReport(mode, results, rejects)


# -- export --------------------------------------------------------------------------


def emit_report(report: MetricsReport, path: str | Path, fmt: str = "json") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    elif fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for case in report.cases:
                writer.writerow(case.row())
    else:
        raise InputError(f"unknown report format {fmt!r}")
    return path


def aggregates_from_csv(path: str | Path) -> dict:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return aggregate_rows(list(csv.DictReader(fh)))
