from __future__ import annotations

import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from codewire.pipeline import Prepared, combined_stubs, prepare, read_source

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLES = FIXTURES / "samples"
CORPUS = FIXTURES / "corpus"


def load_sample(name: str) -> Prepared:
    java = SAMPLES / f"{name}.java"
    stubs = SAMPLES / f"{name}.stubs"
    lib = combined_stubs([stubs] if stubs.exists() else [])
    return prepare(read_source(java), java.name, stubs=lib)


def check_recommendation(rec, session) -> None:
    """Injective, and every chosen name was surfaced by some gathered fact."""
    chosen = [p.chosen.name for p in rec.pairs]
    assert len(chosen) == len(set(chosen)), f"not injective: {chosen}"
    assert len({p.element.name for p in rec.pairs}) == len(rec.pairs)
    gathered = "\n".join(session.prompt.gathered)
    for p in rec.pairs:
        assert p.chosen.name in session.toolkit.known_candidates
        assert p.chosen.name in gathered


@pytest.fixture
def sample():
    return load_sample


@pytest.fixture
def no_sleep():
    calls: list[float] = []
    return calls.append


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Time a block as acceptance criterion ``n``; failures and overruns are recorded as FAIL."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})

    @contextmanager
    def timed(n: int, label: str, bound: float | None = None):
        started = time.perf_counter()
        verdict = "FAIL"
        try:
            yield
            elapsed = time.perf_counter() - started
            verdict = "PASS" if bound is None or elapsed < bound else "FAIL"
        finally:
            elapsed = time.perf_counter() - started
            limit = f" (limit {bound:g} s)" if bound is not None else ""
            results[n] = f"{verdict} criterion {n}: {label} in {elapsed:.2f} s{limit}"
            print(results[n])
        assert verdict == "PASS", results[n]

    return timed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
