"""Shared fixtures: reference scheme, small corpora, deterministic stores."""

from __future__ import annotations

import numpy as np
import pytest

from heatpred.clustering import HeatLevelScheme, default_level_names
from heatpred.corpus import Event, EventCorpus
from heatpred.embedding import HashedTrigramEmbedder, StoreEntry, VectorStore

from refdata import REF_BOUNDARIES


@pytest.fixture(scope="session")
def ref_scheme() -> HeatLevelScheme:
    return HeatLevelScheme(
        boundaries=list(REF_BOUNDARIES),
        level_names=default_level_names(4),
        level_counts=[54789, 5719, 2000, 328],
    )


@pytest.fixture
def small_embedder() -> HashedTrigramEmbedder:
    return HashedTrigramEmbedder(dim=64, seed=0)


def make_event(i: int, heat: float, level: int | None = None, category: str = "") -> Event:
    return Event(
        id=f"e{i:03d}",
        title=f"Event {i}",
        content=f"Event {i} content about topic {i % 7} and place {i % 5}.",
        category=category,
        heat_index=heat,
        level=level,
    )


@pytest.fixture
def leveled_corpus(ref_scheme) -> EventCorpus:
    """16 events, 4 per level, levels assigned consistently with the scheme."""
    rng = np.random.default_rng(7)
    lows = [0.0] + ref_scheme.boundaries
    highs = ref_scheme.boundaries + [ref_scheme.boundaries[-1] * 2]
    events = []
    i = 0
    for lvl in range(1, 5):
        lo, hi = lows[lvl - 1], highs[lvl - 1]
        for _ in range(4):
            heat = lo + (hi - lo) * (0.2 + 0.6 * float(rng.random()))
            events.append(make_event(i, heat, level=lvl))
            i += 1
    return EventCorpus(events=events, source_meta={})


def store_from_corpus(corpus: EventCorpus, embedder) -> VectorStore:
    store = VectorStore(dim=embedder.dim)
    for ev in corpus.events:
        store.add(
            StoreEntry(
                event_id=ev.id,
                vector=embedder.embed(ev.content),
                heat_index=ev.heat_index,
                level=ev.level,
                content=ev.content,
            )
        )
    return store
