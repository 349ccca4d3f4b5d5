"""Hypothesis strategies shared by the test modules."""

from __future__ import annotations

from hypothesis import strategies as st

from clickstats.engine import CountsTable, MultiplexConfig, enumerate_occupations


@st.composite
def counts_tables(draw, max_N: int = 5, max_K: int = 5, max_count: int = 10**6):
    N = draw(st.integers(2, max_N))
    K = draw(st.integers(1, max_K))
    cfg = MultiplexConfig(N, K)
    occs = enumerate_occupations(cfg)
    chosen = draw(st.lists(st.sampled_from(occs), min_size=1, max_size=len(occs), unique=True))
    counts = {o: draw(st.integers(1, max_count)) for o in chosen}
    return CountsTable(cfg, counts)
