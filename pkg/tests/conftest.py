"""Shared strategies and helpers."""

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from knotweave.braid import BraidWord  # noqa: E402


@st.composite
def braids(draw, min_strands=2, max_strands=5, max_len=10):
    n = draw(st.integers(min_strands, max_strands))
    gens = st.integers(1, n - 1).flatmap(lambda g: st.sampled_from((g, -g)))
    word = draw(st.lists(gens, max_size=max_len))
    return BraidWord(n, tuple(word))


def random_braid(rng: np.random.Generator, strands: int, length: int) -> BraidWord:
    g = rng.integers(1, strands, size=length) * rng.choice((-1, 1), size=length)
    return BraidWord(strands, tuple(int(x) for x in g))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
