"""Acceptance suite: one PASS/FAIL line per criterion, shown in the terminal summary."""

from __future__ import annotations

import itertools
import json
import random
import threading

from codewire.agent.session import AgentState, SessionConfig, init_session, memory_key, run, run_deterministic
from codewire.agent.toolkit import TOOLS, tools_for
from codewire.collector import get_available_variables, get_unused_variables, levenshtein
from codewire.completer import Pair, Recommendation, assign_injective, greedy_assignment
from codewire.edits import apply_edits, plan_edits
from codewire.evaluation import (
    aggregates_from_csv,
    em_precision,
    em_recall,
    emit_report,
    evaluate,
    load_corpus,
    prepare_case,
)
from codewire.llm import ChatExchange, ScriptedModel, estimate_tokens
from codewire.locator import identify_unresolved_elements
from codewire.pipeline import WireOptions, prepare, relocate, wire
from codewire.trace import trace_totals

from conftest import CORPUS, check_recommendation, load_sample
from fixture_gen import generate

SAMPLE_NAMES = ["TagGroup", "CommentListActivity", "StreamUtils"]


def decide(action, thought="", **action_input):
    return json.dumps({"thought": thought, "action": action, "action_input": action_input})


def vote(**mapping):
    return json.dumps({"pairs": [{"unresolved": k, "chosen": v} for k, v in mapping.items()]})


def is_completion_prompt(messages) -> bool:
    return "## Placeholders" in messages[0]["content"]


# 1 ----------------------------------------------------------------------------------


def test_criterion_1_metric_arithmetic(criterion):
    with criterion(1, "EM precision/recall arithmetic", bound=1.0):
        for em, rec, total, p, r in [(199, 217, 221, 91.7, 90.0), (79, 189, 221, 41.8, 35.7)]:
            assert abs(100 * em_precision(em, rec) - p) <= 0.05
            assert abs(100 * em_recall(em, total) - r) <= 0.05


# 2 ----------------------------------------------------------------------------------


def test_criterion_2_sample_fixtures(criterion):
    expected = {
        "TagGroup": {"list": "mTags"},
        "CommentListActivity": {"list": "listView", "target": "mCommentListPosition"},
        "StreamUtils": {"encoding": "Charset.defaultCharset()"},
    }
    with criterion(2, "sample fixtures wired and relocated", bound=2.0):
        for name, mapping in expected.items():
            p = load_sample(name)
            result = wire(p)
            assert result.recommendation.mapping == mapping
            check_recommendation(result.recommendation, result.session)
            assert relocate(result.new_text, p, result.script) == []
            if name == "CommentListActivity":
                [el] = [e for e in result.recommendation.elements if e.name == "list"]
                assert len(el.references) == 6
                assert [e.replacement for e in result.script.edits].count("listView") == 6


# 3 ----------------------------------------------------------------------------------


def test_criterion_3_constructed_corpus(criterion):
    with criterion(3, "constructed corpus at 100% precision and recall", bound=5.0):
        corpus = load_corpus(CORPUS)
        assert len(corpus) >= 20 and not corpus.rejects
        report = evaluate(corpus, "deterministic")
        assert report.precision == 1.0 and report.recall == 1.0
        assert all(c.error is None for c in report.cases)


# 4 ----------------------------------------------------------------------------------


def dp_oracle(a: str, b: str) -> int:
    """Full-matrix edit distance over case-folded strings."""
    a, b = a.casefold(), b.casefold()
    m = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        m[i][0] = i
    for j in range(len(b) + 1):
        m[0][j] = j
    for i, j in itertools.product(range(1, len(a) + 1), range(1, len(b) + 1)):
        m[i][j] = min(m[i - 1][j] + 1, m[i][j - 1] + 1, m[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return m[len(a)][len(b)]


def test_criterion_4_levenshtein_oracle(criterion):
    rng = random.Random(4)
    alphabet = "abcdeABCDE_1"

    def word():
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))

    with criterion(4, "Levenshtein DP oracle on 1000 pairs and metric laws"):
        for _ in range(1000):
            a, b, c = word(), word(), word()
            d = levenshtein(a, b)
            assert d == dp_oracle(a, b)
            assert d == levenshtein(b, a)
            assert levenshtein(a, c) <= d + levenshtein(b, c)
            assert (d == 0) == (a.casefold() == b.casefold())
            assert levenshtein(a.upper(), b.lower()) == d


# 5 ----------------------------------------------------------------------------------


def test_criterion_5_scope_and_usage_oracles(criterion):
    with criterion(5, "available and unused variables on 200 generated fixtures"):
        for seed in range(200):
            g = generate(seed)
            p = prepare(g.text)
            avail = get_available_variables(p.region, p.table)
            assert {c.name: c.kind for c in avail} == g.visible
            assert {c.name: c.usage_count for c in avail} == g.usage
            assert {c.name for c in get_unused_variables(p.region, p.table)} == g.unused
            assert not {c.name for c in avail} & g.hidden
            for c in avail:
                if c.kind == "local":
                    assert c.decl_span.end <= p.region.span.start


# 6 ----------------------------------------------------------------------------------

GARBAGE = ["", "I think we should look at the fields.", "{unclosed", '{"thought": "no action"}', "[1, 2]"]


def random_decision(rng: random.Random, elements: list[str], history: list[str]) -> tuple[str, bool | None]:
    """One scripted decision reply and whether it should parse (possibly after repair).

    ``None`` marks a verbatim repeat of an earlier reply.
    """
    roll = rng.random()
    if history and roll < 0.2:
        return rng.choice(history), None
    if roll < 0.35:
        return rng.choice(GARBAGE), False
    tool = rng.choice(sorted(TOOLS) + ["drop_table"])
    el = rng.choice(elements)
    args = {
        "is_argument": {"element": el},
        "is_receiver": {"element": el},
        "retrieve_identical_function_call": {"element": el},
        "reserve_type_compatible_ones": {"element": el},
        "sort_by_literal_similarity": {"target": el},
        "get_method_names": {"class_name": rng.choice(["Charset", "String", "List", "Nowhere"]), "element": el},
        "drop_table": {"everything": "yes"},
    }.get(tool, {})
    raw = decide(tool, f"try {tool}", **args)
    wrap = rng.random()
    if wrap < 0.15:
        raw = f"```json\n{raw}\n```"
    elif wrap < 0.25:
        raw = f"Here is my next move: {raw}"
    elif wrap < 0.3:
        raw = raw[:-1] + ",}"
    return raw, True


def scripted_agent(rng: random.Random, elements: list[str], candidates: list[str]):
    history: list[str] = []
    parseable: dict[str, bool] = {}

    def reply(messages):
        if is_completion_prompt(messages):
            pool = candidates + ["inventedName"]
            return vote(**{e: rng.choice(pool) for e in elements})
        raw, ok = random_decision(rng, elements, history)
        if ok is not None:
            parseable[raw] = ok
        history.append(raw)
        return raw

    return ScriptedModel([reply] * 64), parseable


def check_transcript(s, init_count: int, parseable: dict[str, bool], model: ScriptedModel) -> None:
    limit = s.config.max_iterations
    assert s.ledger.count("decision") <= limit and s.budget.iterations_used <= limit
    assert s.ledger.calls == len(model.calls)

    executed_keys: dict[tuple[str, str], str] = {}
    for inv in s.invocations:
        key = memory_key(inv.action, inv.action_input)
        if inv.executed:
            assert inv.action in [t.name for t in tools_for(inv.state.value)], (inv.action, inv.state)
            assert key not in executed_keys, f"{inv.action} executed twice"
            executed_keys[key] = inv.observation
        if inv.replayed:
            assert executed_keys[key] == inv.observation
    for inv in s.invocations[init_count:]:
        assert inv.state is not AgentState.INITIAL

    streak = longest = 0
    for r in s.trace:
        if r["type"] != "step":
            continue
        if r["reply"] in parseable:
            assert (r["action"] is not None) == parseable[r["reply"]], r["reply"]
        streak = streak + 1 if r["action"] is None else 0
        longest = max(longest, streak)
    assert longest <= s.config.malformed_retries + 1
    if longest > s.config.malformed_retries:
        assert s.forced

    states = s.state_log
    first_sufficient = states.index(AgentState.SUFFICIENT) if AgentState.SUFFICIENT in states else len(states)
    assert all(st is AgentState.SUFFICIENT for st in states[first_sufficient:])


def test_criterion_6_agent_loop_contract(criterion):
    rng = random.Random(6)
    inputs = [load_sample(n) for n in SAMPLE_NAMES]
    with criterion(6, "agent loop contract over 100 randomized scripted transcripts"):
        for t in range(100):
            p = inputs[t % len(inputs)]
            budget = 2 if t % 2 == 0 else rng.randint(1, 5)
            s = init_session(p.region, p.table, SessionConfig(max_iterations=budget, max_concurrency=1), sleep=lambda d: None)
            init_count = len(s.invocations)
            elements = [e.name for e in s.elements]
            model, parseable = scripted_agent(random.Random(t), elements, sorted(s.toolkit.known_candidates))
            rec = run(s, model)
            check_transcript(s, init_count, parseable, model)
            check_recommendation(rec, s)


# 7 ----------------------------------------------------------------------------------


def brute_force_optimum(options) -> float:
    best = 0.0
    for combo in itertools.product(*[[None] + list(range(len(o))) for o in options]):
        names = [options[e][k][0] for e, k in enumerate(combo) if k is not None]
        if len(names) == len(set(names)):
            best = max(best, sum(options[e][k][1] for e, k in enumerate(combo) if k is not None))
    return best


def total(options, choice) -> float:
    return sum(options[e][k][1] for e, k in enumerate(choice) if k is not None)


def random_instance(rng: random.Random):
    pool = [f"c{i}" for i in range(rng.randint(1, 4))]
    options = []
    for _ in range(rng.randint(1, 4)):
        names = rng.sample(pool, rng.randint(0, len(pool)))
        options.append(sorted(((n, rng.random()) for n in names), key=lambda t: -t[1]))
    return options


def test_criterion_7_injectivity_and_assignment(criterion):
    rng = random.Random(7)
    with criterion(7, "injective recommendations and assignment within 0.8 of optimum"):
        for name in SAMPLE_NAMES:
            result = wire(load_sample(name))
            check_recommendation(result.recommendation, result.session)
        for case in load_corpus(CORPUS):
            p = prepare_case(case)
            s = init_session(p.region, p.table)
            check_recommendation(run_deterministic(s), s)
        for seed in range(100):
            p = prepare(generate(seed).text)
            s = init_session(p.region, p.table)
            check_recommendation(run_deterministic(s), s)
        for _ in range(2000):
            options = random_instance(rng)
            best = brute_force_optimum(options)
            choice = assign_injective(options)
            names = [options[e][k][0] for e, k in enumerate(choice) if k is not None]
            assert len(names) == len(set(names))
            assert total(options, choice) >= 0.8 * best - 1e-9
            tops = [o[0][0] for o in options if o]
            if len(tops) == len(set(tops)):
                assert abs(total(options, greedy_assignment(options)) - best) < 1e-9
                assert abs(total(options, choice) - best) < 1e-9


# 8 ----------------------------------------------------------------------------------


def test_criterion_8_self_consistency(criterion):
    with criterion(8, "majority of five votes and bit-identical reruns"):
        p = load_sample("TagGroup")
        replies = [decide("execute_completion"), vote(list="mTags"), vote(list="tags"), vote(list="mTags"),
                   vote(list="mTitle"), vote(list="mTags")]
        result = wire(p, WireOptions("agent", SessionConfig(temperature=0.0)), ScriptedModel(replies))
        assert result.recommendation.mapping == {"list": "mTags"}
        assert result.session.ledger.count("completion") == 5

        outputs = set()
        for _ in range(5):
            p = load_sample("CommentListActivity")
            same = [decide("sort_by_literal_similarity", "rank", target="list"), decide("execute_completion")]
            same += [vote(list="listView", target="mCommentListPosition")] * 5
            r = wire(p, WireOptions("agent", SessionConfig(temperature=0.0)), ScriptedModel(same))
            outputs.add(json.dumps({"rec": r.recommendation.to_dict(), "diff": r.diff, "trace": r.session.trace},
                                   sort_keys=True))
        assert len(outputs) == 1


# 9 ----------------------------------------------------------------------------------


def untouched_outside(old: str, new: str, edits) -> bool:
    shift = cursor = 0
    for e in sorted(edits, key=lambda e: e.span.start):
        if old[cursor:e.span.start] != new[cursor + shift:e.span.start + shift]:
            return False
        shift += len(e.replacement) - len(e.span)
        cursor = e.span.end
    return old[cursor:] == new[cursor + shift:]


def test_criterion_9_edit_safety(criterion):
    with criterion(9, "apply-then-relocate on 200 generated fixtures"):
        for seed in range(200):
            rng = random.Random(seed)
            p = prepare(generate(seed).text)
            elements = identify_unresolved_elements(p.region, p.table)
            pool = get_available_variables(p.region, p.table)
            rng.shuffle(pool)
            k = rng.randint(0, len(elements))
            rec = Recommendation([Pair(el, c, 1.0) for el, c in zip(elements[:k], pool)], elements)
            script = plan_edits(p.unit, rec)
            result = apply_edits(p.unit, script)
            assert untouched_outside(p.unit.text, result.text, script.edits)
            if script.edits:
                remaining = set(relocate(result.text, p, script))
                assert remaining == {e.name for e in elements} - set(rec.mapping)
            empty = apply_edits(p.unit, plan_edits(p.unit, Recommendation([], elements)))
            assert empty.text == p.unit.text and empty.diff == ""


# 10 ---------------------------------------------------------------------------------


class MeteredModel:
    """Answers every decision with ``execute_completion`` and reports uneven token and latency figures."""

    def __init__(self, seed: int) -> None:
        self.rng = random.Random(seed)
        self.lock = threading.Lock()
        self.calls: list[ChatExchange] = []

    def complete(self, messages, *, temperature=None) -> ChatExchange:
        text = vote() if is_completion_prompt(messages) else decide("execute_completion")
        with self.lock:
            ex = ChatExchange(tuple(messages), text, estimate_tokens(messages[0]["content"]) + self.rng.randint(0, 9),
                              self.rng.randint(1, 40), round(self.rng.uniform(0.5, 30.0), 3))
            self.calls.append(ex)
        return ex


def test_criterion_10_bookkeeping(criterion, tmp_path):
    with criterion(10, "ledger sums and CSV re-aggregation"):
        model = MeteredModel(10)
        result = wire(load_sample("CommentListActivity"), WireOptions("agent", SessionConfig()), model)
        ledger = result.session.ledger
        assert ledger.calls == len(model.calls)
        assert ledger.tokens_in == sum(c.tokens_in for c in model.calls)
        assert ledger.tokens_out == sum(c.tokens_out for c in model.calls)
        assert abs(ledger.ms - sum(c.latency_ms for c in model.calls)) < 1e-6
        totals = trace_totals(result.session.trace)
        assert (totals["tokens_in"], totals["tokens_out"]) == (ledger.tokens_in, ledger.tokens_out)

        model = MeteredModel(11)
        report = evaluate(load_corpus(CORPUS), "agent", model)
        cursor = 0
        for case in report.cases:
            mine = model.calls[cursor:cursor + case.model_calls]
            cursor += case.model_calls
            assert case.tokens_in == sum(c.tokens_in for c in mine)
            assert case.tokens_out == sum(c.tokens_out for c in mine)
            assert abs(case.ms - sum(c.latency_ms for c in mine)) < 1e-6
        assert cursor == len(model.calls)

        emit_report(report, tmp_path / "report.json")
        emit_report(report, tmp_path / "report.csv", "csv")
        data = json.loads((tmp_path / "report.json").read_text())
        again = aggregates_from_csv(tmp_path / "report.csv")
        assert again and {k: data[k] for k in again} == again
        assert data["tokens_in"] == sum(c.tokens_in for c in model.calls)
