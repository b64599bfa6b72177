from __future__ import annotations

from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codewire import collector
from codewire.collector import (
    Candidate,
    get_available_variables,
    get_method_names,
    get_unused_variables,
    is_argument,
    is_receiver,
    levenshtein,
    normalized_levenshtein,
    reserve_type_compatible_ones,
    retrieve_identical_function_call,
    sort_by_literal_similarity,
)
from codewire.errors import UnknownClassError
from codewire.locator import identify_unresolved_elements
from codewire.pipeline import combined_stubs, prepare
from codewire.syntax import Span, TypeRef, parse_stubs

from fixture_gen import generate


def recursive_distance(a: str, b: str) -> int:
    """Textbook recursive definition, memoized; independent of the two-row DP."""
    a, b = a.casefold(), b.casefold()

    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def element(p, name):
    return next(e for e in identify_unresolved_elements(p.region, p.table) if e.name == name)


def cand(name, type_name="int", known=True, distance=0):
    return Candidate(name, "local", TypeRef(type_name, known), Span(0, 1), distance_to_region=distance)


# -- availability and usage -----------------------------------------------------


def test_tag_group_fields_available(sample):
    p = sample("TagGroup")
    names = [c.name for c in get_available_variables(p.region, p.table)]
    assert "mTags" in names
    assert names.index("tags") < names.index("mTags")  # parameters before fields


def test_empty_context():
    p = prepare("class A { void m() { <start>go(x);<end> } void go(int v) { } }")
    assert get_available_variables(p.region, p.table) == []


def test_local_after_region_excluded():
    p = prepare("class A { void m() { int before = 1; <start>go(x);<end> int after = 2; } void go(int v) { } }")
    assert [c.name for c in get_available_variables(p.region, p.table)] == ["before"]


def test_sort_order_kind_then_distance():
    p = prepare(
        "class A { int f; void m(int q) { int far = 1; int near = 2; <start>go(x);<end> } void go(int v) { } }"
    )
    assert [c.name for c in get_available_variables(p.region, p.table)] == ["near", "far", "q", "f"]


@pytest.mark.parametrize(
    "body, unused",
    [
        ("int a = 0;", {"a"}),
        ("int a = 0; go(a);", set()),
        ("int b = 0; b = 5;", set()),  # write-only still counts as a reference
    ],
)
def test_unused_variables(body, unused):
    p = prepare("class A { void m() { " + body + " <start>go(x);<end> } void go(int v) { } }")
    assert {c.name for c in get_unused_variables(p.region, p.table)} == unused


def test_usage_after_region_does_not_count():
    p = prepare("class A { void m() { int a = 0; <start>go(x);<end> go(a); } void go(int v) { } }")
    assert [c.name for c in get_unused_variables(p.region, p.table)] == ["a"]


def test_static_method_hides_instance_fields():
    p = prepare("class A { int inst; static int shared; static void m() { <start>go(x);<end> } static void go(int v) { } }")
    assert [c.name for c in get_available_variables(p.region, p.table)] == ["shared"]


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_available_and_unused_match_construction(seed):
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


# -- argument and receiver roles --------------------------------------------------


def test_stream_utils_expected_type(sample):
    p = sample("StreamUtils")
    hint = is_argument(element(p, "encoding"), p.region, p.table)
    assert hint.is_argument
    assert hint.expected_type.name == "Charset" and hint.expected_type.known
    assert hint.formal_parameter_name == "charset"


def test_assignment_only_is_not_argument():
    p = prepare("class A { void m() { int y; <start>y = x;<end> } }")
    assert not is_argument(element(p, "x"), p.region, p.table).is_argument


def test_innermost_call_wins():
    text = "class A { void f(String s) { } String g(int n) { return \"\"; } void m() { <start>f(g(x));<end> } }"
    p = prepare(text)
    hint = is_argument(element(p, "x"), p.region, p.table)
    assert hint.expected_type.name == "int"
    assert hint.formal_parameter_name == "n"


def test_unknown_callee_has_no_expected_type():
    p = prepare("class A { void m() { <start>mystery(x);<end> } }")
    hint = is_argument(element(p, "x"), p.region, p.table)
    assert hint.is_argument and hint.expected_type is None


def test_receiver_members():
    p = prepare("class A { void m() { <start>list.clear(); list.addAll(t);<end> } }")
    hint = is_receiver(element(p, "list"), p.region)
    assert hint.is_receiver
    assert hint.invoked_member == "clear"
    assert hint.invoked_members == ("clear", "addAll")


def test_receiver_single_member_and_argument_only():
    p = prepare("class A { void m(String tag) { <start>list.add(tag); go(other);<end> } void go(int v) { } }")
    assert is_receiver(element(p, "list"), p.region).invoked_member == "add"
    assert not is_receiver(element(p, "other"), p.region).is_receiver


# -- identical calls -------------------------------------------------------------


def test_identical_call_comment_list(sample):
    p = sample("CommentListActivity")
    found = retrieve_identical_function_call("setSelection", p.unit, p.region, p.table)
    assert [c.name for c in found] == ["listView"]
    assert retrieve_identical_function_call("neverCalled", p.unit, p.region, p.table) == []


def test_identical_call_two_receivers_in_source_order():
    text = """
    class A {
        StringBuilder second = new StringBuilder();
        StringBuilder first = new StringBuilder();
        void a() { first.append("x"); }
        void b() { second.append("y"); }
        void m() { <start>sb.append("z");<end> }
    }
    """
    p = prepare(text)
    assert [c.name for c in retrieve_identical_function_call("append", p.unit, p.region, p.table)] == ["first", "second"]


def test_identical_call_matches_arity():
    text = "class A { Foo a; Foo b; void x() { a.put(1); b.put(1, 2); } void m() { <start>f.put(3, 4);<end> } }"
    p = prepare(text)
    assert [c.name for c in retrieve_identical_function_call("put", p.unit, p.region, p.table, 2)] == ["b"]


# -- filters and ranking -------------------------------------------------------


def test_reserve_mixed_types():
    cands = [cand("s", "String"), cand("n", "int"), cand("t", "String")]
    assert [c.name for c in reserve_type_compatible_ones(cands, TypeRef("String", True))] == ["s", "t"]
    assert reserve_type_compatible_ones([], TypeRef("String", True)) == []


def test_reserve_keeps_opaque():
    cands = [cand("a", "Widget", known=False), cand("b", "int")]
    assert [c.name for c in reserve_type_compatible_ones(cands, TypeRef("Charset", True))] == ["a"]


def test_object_slot_accepts_anything_but_not_strictly():
    assert collector.types_compatible(TypeRef("int", True), TypeRef("Object", True))
    assert not collector.strictly_compatible(TypeRef("int", True), TypeRef("Object", True))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["int", "String", "long", "Widget"]), max_size=8), st.sampled_from(["int", "String"]))
def test_reserve_output_is_a_subsequence(types, expected):
    cands = [cand(f"v{i}", t, known=(t != "Widget")) for i, t in enumerate(types)]
    out = reserve_type_compatible_ones(cands, TypeRef(expected, True))
    it = iter(cands)
    assert all(any(c is o for c in it) for o in out)


def test_identical_name_ranks_first():
    scores = sort_by_literal_similarity([cand("other"), cand("target"), cand("tarjet")], "target")
    assert scores[0].candidate.name == "target" and scores[0].levenshtein == 0


def test_tag_group_ranking_follows_oracle(sample):
    p = sample("TagGroup")
    cands = get_available_variables(p.region, p.table)
    got = [(s.candidate.name, s.levenshtein) for s in sort_by_literal_similarity(cands, "list")]
    expected = sorted(((c.name, recursive_distance(c.name, "list")) for c in cands),
                      key=lambda t: (t[1], next(c.distance_to_region for c in cands if c.name == t[0]), t[0]))
    assert got == expected


def test_similarity_ties_break_on_distance_then_name():
    out = sort_by_literal_similarity([cand("bb", distance=5), cand("ab", distance=5), cand("cb", distance=1)], "xb")
    assert [s.candidate.name for s in out] == ["cb", "ab", "bb"]


# -- member calls ------------------------------------------------------------------


def test_get_method_names_static_from_stubs(sample):
    p = sample("StreamUtils")
    found = get_method_names("Charset", TypeRef("Charset", True), p.table, p.region)
    assert "Charset.defaultCharset()" in [c.name for c in found]
    assert all(c.kind == "member_call" and c.owner == "Charset" for c in found)


def test_get_method_names_no_matching_return(sample):
    p = sample("StreamUtils")
    assert get_method_names("Charset", TypeRef("boolean", True), p.table, p.region) == []


def test_get_method_names_instance_requires_receiver():
    lib = combined_stubs([]).merge(parse_stubs("Clock#systemClock()->Clock,static\nClock#fork()->Clock\n", "stubs"))
    p = prepare("class A { void m() { <start>go(c);<end> } void go(Clock c) { } }", stubs=lib)
    names = [c.name for c in get_method_names("Clock", TypeRef("Clock", True), p.table, p.region)]
    assert names == ["Clock.systemClock()"]
    p2 = prepare("class A { Clock mine; void m() { <start>go(c);<end> } void go(Clock c) { } }", stubs=lib)
    names2 = [c.name for c in get_method_names("Clock", TypeRef("Clock", True), p2.table, p2.region)]
    assert names2 == ["Clock.systemClock()", "mine.fork()"]


def test_get_method_names_unknown_class():
    p = prepare("class A { void m() { <start>go(c);<end> } }")
    with pytest.raises(UnknownClassError):
        get_method_names("Nowhere", TypeRef("Nowhere"), p.table, p.region)


def test_collectors_are_deterministic(sample):
    a = sample("CommentListActivity")
    b = sample("CommentListActivity")
    assert [c.to_dict() for c in get_available_variables(a.region, a.table)] == [
        c.to_dict() for c in get_available_variables(b.region, b.table)
    ]


# -- Levenshtein ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "a, b, d",
    [("kitten", "sitting", 3), ("", "", 0), ("", "abc", 3), ("flaw", "lawn", 2), ("mTags", "mtags", 0), ("list", "listView", 4)],
)
def test_levenshtein_examples(a, b, d):
    assert levenshtein(a, b) == d


def test_normalized_bounds():
    assert normalized_levenshtein("", "") == 0.0
    assert normalized_levenshtein("abc", "xyz") == 1.0
    assert normalized_levenshtein("list", "listView") == 0.5


words = st.text(alphabet="abcAB_x1", max_size=12)


@settings(max_examples=300, deadline=None)
@given(words, words)
def test_levenshtein_matches_recursive_oracle(a, b):
    assert levenshtein(a, b) == recursive_distance(a, b)
    assert levenshtein(a, b) == levenshtein(b, a)


@settings(max_examples=200, deadline=None)
@given(words, words, words)
def test_levenshtein_triangle(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)
    assert (levenshtein(a, b) == 0) == (a.casefold() == b.casefold())
