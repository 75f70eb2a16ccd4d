"""Reference-case assembly and frequency-voting baselines.

A case set is what gets pasted into a prompt: either the query's nearest
stored neighbors ("recalled") or a fixed balanced sample of higher-level
events ("simulated"). The voting functions predict a level straight from
recalled cases, no language model involved.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from heatpred.clustering import HeatLevelScheme, assign_level
from heatpred.corpus import Event, EventCorpus
from heatpred.embedding import VectorStore, top_k

DEFAULT_RECALL_K = 10

SIMULATED_LEVELS = (2, 3, 4)
SIMULATED_PER_LEVEL = 3


@dataclass
class Case:
    content: str
    heat_index: float
    level: int


@dataclass
class CaseSet:
    cases: list[Case]
    provenance: str  # "recalled" or "simulated"

    def __post_init__(self):
        if self.provenance not in ("recalled", "simulated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self) -> int:
        return len(self.cases)

    def levels(self) -> list[int]:
        return [c.level for c in self.cases]


@dataclass
class VoteOutcome:
    top_level: int
    top_two: set[int]
    counts: dict[int, int] = field(default_factory=dict)


def recall_similar(
    event: Event,
    store: VectorStore,
    backend,
    k: int = DEFAULT_RECALL_K,
) -> CaseSet:
    """The query's k nearest stored events, query itself excluded.

    Case order preserves neighbor order (best first); fewer than k cases
    only when the store has fewer eligible entries.
    """
    if not event.content:
        raise ValueError(f"event {event.id!r} has empty content")
    query = backend.embed(event.content)
    neighbors = top_k(store, query, k, exclude={event.id})
    cases = []
    for nb in neighbors:
        entry = store.get(nb.event_id)
        cases.append(
            Case(content=entry.content, heat_index=entry.heat_index, level=entry.level)
        )
    return CaseSet(cases=cases, provenance="recalled")


def _vote(cases: CaseSet) -> VoteOutcome:
    if len(cases) == 0:
        raise ValueError("cannot vote on an empty case set")
    counts = Counter(cases.levels())
    # ties break toward the lower level at both ranks
    ranked = sorted(counts, key=lambda lvl: (-counts[lvl], lvl))
    top_two = set(ranked[:2])
    return VoteOutcome(top_level=ranked[0], top_two=top_two, counts=dict(counts))


def vote_majority(cases: CaseSet) -> VoteOutcome:
    """Modal level of the cases; ties go to the lower level."""
    return _vote(cases)


def vote_top_two(cases: CaseSet) -> VoteOutcome:
    """The two most frequent levels (one when only one level appears)."""
    return _vote(cases)


def sample_simulated_cases(
    corpus: EventCorpus,
    scheme: HeatLevelScheme,
    seed: int,
) -> CaseSet:
    """A fixed 9-case reference set: 3 events from each of levels 2, 3, 4.

    Sampling is seeded and depends only on which ids sit at which level,
    not on corpus ordering. Cases come out level-ascending, id-ascending
    within a level.
    """
    by_level: dict[int, list[Event]] = {lvl: [] for lvl in SIMULATED_LEVELS}
    for ev in corpus.events:
        lvl = ev.level if ev.level is not None else assign_level(scheme, ev.heat_index)
        if lvl in by_level:
            by_level[lvl].append(ev)
    rng = np.random.default_rng(seed)
    cases: list[Case] = []
    for lvl in SIMULATED_LEVELS:
        pool = sorted(by_level[lvl], key=lambda e: e.id)
        if len(pool) < SIMULATED_PER_LEVEL:
            raise ValueError(
                f"level {lvl} has only {len(pool)} events, need {SIMULATED_PER_LEVEL}"
            )
        picks = np.sort(rng.choice(len(pool), size=SIMULATED_PER_LEVEL, replace=False))
        for i in picks:
            ev = pool[int(i)]
            cases.append(
                Case(content=ev.content, heat_index=ev.heat_index, level=lvl)
            )
    return CaseSet(cases=cases, provenance="simulated")
