from __future__ import annotations

import json
import shutil

import pytest

from codewire.errors import InputError
from codewire.evaluation import (
    GroundTruthPair,
    MetricsReport,
    aggregates_from_csv,
    as_percent,
    em_precision,
    em_recall,
    emit_report,
    evaluate,
    load_corpus,
    score_pairs,
)
from codewire.llm import ScriptedModel

from conftest import CORPUS


@pytest.mark.parametrize(
    "em, rec, total, p, r",
    [(199, 217, 221, 91.7, 90.0), (79, 189, 221, 41.8, 35.7)],
)
def test_metric_arithmetic(em, rec, total, p, r):
    assert abs(100 * em_precision(em, rec) - p) <= 0.05
    assert abs(100 * em_recall(em, total) - r) <= 0.05


def test_zero_matches():
    assert em_precision(0, 5) == 0.0 and em_recall(0, 5) == 0.0
    assert em_precision(0, 0) is None and em_recall(0, 0) is None
    assert as_percent(None) == "n/a"


def test_score_pairs_counts_at_pair_granularity():
    gt = [GroundTruthPair("a", "x"), GroundTruthPair("b", "y"), GroundTruthPair("c", "z")]
    assert score_pairs({"a": "x", "b": "wrong"}, gt) == (2, 1, 3)
    assert score_pairs({}, gt) == (0, 0, 3)


def test_fixture_corpus_loads_cleanly():
    corpus = load_corpus(CORPUS)
    assert len(corpus) >= 20 and corpus.rejects == []


def write_case(root, case_id, java, gt, name="A.java"):
    (root / name).write_text(java)
    return json.dumps({"id": case_id, "files": [name], "target": name,
                       "ground_truth": [{"unresolved": u, "expected": e} for u, e in gt]})


GOOD = "class A { int mCount; void m() { <start>go(count);<end> } void go(int v) { } }"


def test_rejects_are_per_case(tmp_path):
    lines = [
        write_case(tmp_path, "ok", GOOD, [("count", "mCount")]),
        write_case(tmp_path, "no-end", GOOD.replace("<end>", ""), [("count", "mCount")], "B.java"),
        write_case(tmp_path, "dup", GOOD, [("count", "mCount"), ("other", "mCount")], "C.java"),
        '{"id": "missing-file", "files": ["Nope.java"], "target": "Nope.java", "ground_truth": [{"unresolved": "a", "expected": "b"}]}',
        "not json",
        write_case(tmp_path, "ok", GOOD, [("count", "mCount")], "D.java"),
    ]
    (tmp_path / "cases.jsonl").write_text("\n".join(lines) + "\n")
    corpus = load_corpus(tmp_path)
    assert [c.id for c in corpus.cases] == ["ok"]
    reasons = {r.case_id: r.reason for r in corpus.rejects}
    assert "MarkerError" in reasons["no-end"]
    assert "injective" in reasons["dup"]
    assert "does not exist" in reasons["missing-file"]
    assert "duplicate case id" in reasons["ok"]
    assert any("invalid JSON" in r.reason for r in corpus.rejects)


def test_unreadable_root(tmp_path):
    with pytest.raises(InputError):
        load_corpus(tmp_path / "absent")


def test_deterministic_corpus_is_perfect_and_reproducible(tmp_path):
    corpus = load_corpus(CORPUS)
    a = evaluate(corpus, "deterministic")
    b = evaluate(corpus, "deterministic")
    assert a.exact_matches == a.recommendations == a.total
    emit_report(a, tmp_path / "a.json")
    emit_report(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_engine_failure_is_no_recommendation(tmp_path):
    shutil.copytree(CORPUS / "c01", tmp_path / "c01")
    (tmp_path / "cases.jsonl").write_text((CORPUS / "cases.jsonl").read_text().splitlines()[0] + "\n")
    corpus = load_corpus(tmp_path)
    (tmp_path / "c01" / "Greeter.java").write_bytes(b"\xff\xfe")  # breaks after validation
    report = evaluate(corpus, "deterministic")
    [case] = report.cases
    assert case.error and case.rec == 0 and case.total == 1
    assert report.precision is None and report.recall == 0.0


def test_incomplete_recommendation_hurts_recall_only(tmp_path):
    java = "class A { int mCount; void go(int a, boolean b) { } void m() { <start>go(count, flag);<end> } }"
    line = write_case(tmp_path, "partial", java, [("count", "mCount"), ("flag", "mFlag")])
    (tmp_path / "cases.jsonl").write_text(line + "\n")
    report = evaluate(load_corpus(tmp_path), "deterministic")
    assert report.precision == 1.0
    assert report.recall == 0.5


def test_naive_mode_uses_whole_class_and_majority(tmp_path):
    line = write_case(tmp_path, "n", GOOD, [("count", "mCount")])
    (tmp_path / "cases.jsonl").write_text(line + "\n")
    replies = [json.dumps({"pairs": [{"unresolved": "count", "chosen": c}]})
               for c in ["mCount", "x", "mCount", "mCount", "y"]]
    model = ScriptedModel(replies)
    report = evaluate(load_corpus(tmp_path), "naive", model)
    assert report.exact_matches == 1
    prompt = model.calls[0].messages[0]["content"]
    assert "<start>go(count);<end>" in prompt and "class A" in prompt
    assert report.cases[0].model_calls == 5 and report.cases[0].tokens_in > 0


def test_agent_mode_counts_tokens(tmp_path):
    line = write_case(tmp_path, "a", GOOD, [("count", "mCount")])
    (tmp_path / "cases.jsonl").write_text(line + "\n")
    answer = json.dumps({"pairs": [{"unresolved": "count", "chosen": "mCount"}]})
    model = ScriptedModel([answer] * 5, latency_ms=2.0)
    report = evaluate(load_corpus(tmp_path), "agent", model)
    [case] = report.cases
    assert case.em == 1
    assert case.ms == pytest.approx(10.0)
    assert case.tokens_in == sum(c.tokens_in for c in model.calls)


def test_empty_report_is_valid_json(tmp_path):
    path = emit_report(MetricsReport("deterministic"), tmp_path / "r.json")
    data = json.loads(path.read_text())
    assert data["total"] == 0 and data["em_precision"] is None and data["cases"] == []


def test_csv_rows_and_reaggregation(tmp_path):
    report = evaluate(load_corpus(CORPUS), "deterministic")
    emit_report(report, tmp_path / "r.json")
    emit_report(report, tmp_path / "r.csv", "csv")
    rows = (tmp_path / "r.csv").read_text().strip().splitlines()
    assert len(rows) - 1 == report.total_cases
    data = json.loads((tmp_path / "r.json").read_text())
    again = aggregates_from_csv(tmp_path / "r.csv")
    assert {k: data[k] for k in again} == again


def test_unknown_report_format(tmp_path):
    with pytest.raises(InputError):
        emit_report(MetricsReport("deterministic"), tmp_path / "r.xml", "xml")
