"""Seeded synthetic corpora shaped like the real heat-index data.

The real event corpus is proprietary; every test, demo, and fixture run
uses these generators instead. The skewed four-component heat mixture
keeps the published class proportions (roughly 548:57:20:3 per 628
events) so model selection and stratified sampling face realistic
imbalance, just three orders of magnitude smaller.
"""

from __future__ import annotations

import numpy as np

from heatpred.corpus import DEFAULT_CATEGORIES, Event, EventCorpus

# per-level mixture of the skewed fixture: counts follow the published
# class proportions scaled down 100x; centers/spreads tuned so the
# silhouette scan over 2..8 lands on 4
SKEWED_COUNTS = (548, 57, 20, 3)
SKEWED_CENTERS = (5.0, 20.0, 40.0, 62.0)
SKEWED_SPREADS = (0.6, 1.0, 1.5, 2.0)

_TOPICS = [
    "a factory fire", "a data leak", "a school policy change", "a sports upset",
    "a celebrity statement", "a food safety recall", "a traffic accident",
    "a housing dispute", "a flood warning", "a concert cancellation",
    "a hospital opening", "a wage dispute", "an exam reform", "a metro breakdown",
    "a wildlife sighting", "a bridge closure", "a festival crowd", "a court ruling",
    "a power outage", "a vaccine drive",
]
_PLACES = [
    "in the northern district", "near the old harbor", "across the province",
    "in the city center", "at the industrial park", "along the river",
    "in a rural county", "on the university campus", "at the border town",
    "in the tech quarter",
]
_REACTIONS = [
    "residents demanded answers", "officials promised an inquiry",
    "netizens shared footage widely", "local media ran live coverage",
    "volunteers organized support", "experts urged calm",
    "commuters voiced frustration", "parents called for transparency",
]


def synthetic_heat_samples(
    seed: int = 0,
    counts: tuple[int, ...] = SKEWED_COUNTS,
    centers: tuple[float, ...] = SKEWED_CENTERS,
    spreads: tuple[float, ...] = SKEWED_SPREADS,
) -> np.ndarray:
    """Heat indices drawn from a skewed mixture, component order preserved.

    Values are reflected at zero so every index is strictly positive.
    """
    if not (len(counts) == len(centers) == len(spreads)):
        raise ValueError("counts, centers, and spreads must align")
    rng = np.random.default_rng(seed)
    parts = [
        np.abs(rng.normal(loc=c, scale=s, size=n))
        for n, c, s in zip(counts, centers, spreads)
    ]
    return np.concatenate(parts)


def _sentence(rng: np.random.Generator) -> str:
    topic = _TOPICS[int(rng.integers(len(_TOPICS)))]
    place = _PLACES[int(rng.integers(len(_PLACES)))]
    reaction = _REACTIONS[int(rng.integers(len(_REACTIONS)))]
    return f"Reports describe {topic} {place}; {reaction}."


def synthetic_corpus(
    seed: int = 0,
    counts: tuple[int, ...] = SKEWED_COUNTS,
    centers: tuple[float, ...] = SKEWED_CENTERS,
    spreads: tuple[float, ...] = SKEWED_SPREADS,
) -> EventCorpus:
    """A full synthetic corpus with contents, categories, and heat indices."""
    heats = synthetic_heat_samples(seed, counts, centers, spreads)
    rng = np.random.default_rng(seed + 1)
    events = []
    width = len(str(len(heats)))
    for i, heat in enumerate(heats):
        category = DEFAULT_CATEGORIES[int(rng.integers(len(DEFAULT_CATEGORIES)))]
        body = " ".join(_sentence(rng) for _ in range(2))
        events.append(
            Event(
                id=f"ev{i:0{width}d}",
                title=f"Synthetic event {i}",
                content=f"Synthetic event {i}. {body}",
                category=category,
                heat_index=float(heat),
            )
        )
    return EventCorpus(events=events, source_meta={"synthetic_seed": seed})


def balanced_corpus(
    boundaries: list[float],
    per_level: int = 250,
    seed: int = 0,
) -> EventCorpus:
    """Events spread evenly across every level band of a boundary list.

    Heat indices are drawn uniformly inside each band (the top band gets
    a finite span above its lower bound), giving exactly ``per_level``
    events per level regardless of the scheme's skew.
    """
    if sorted(boundaries) != list(boundaries):
        raise ValueError("boundaries must be ascending")
    rng = np.random.default_rng(seed)
    lows = [0.0] + list(boundaries)
    highs = list(boundaries) + [boundaries[-1] * 2.0]
    events = []
    n_levels = len(lows)
    width = len(str(n_levels * per_level))
    i = 0
    for lvl in range(n_levels):
        lo, hi = lows[lvl], highs[lvl]
        span = hi - lo
        for _ in range(per_level):
            # keep away from the band edges so float noise cannot flip a level
            heat = lo + span * (0.1 + 0.8 * float(rng.random()))
            body = " ".join(_sentence(rng) for _ in range(2))
            events.append(
                Event(
                    id=f"bal{i:0{width}d}",
                    title=f"Balanced event {i}",
                    content=f"Balanced event {i}. {body}",
                    category=DEFAULT_CATEGORIES[i % len(DEFAULT_CATEGORIES)],
                    heat_index=float(heat),
                )
            )
            i += 1
    return EventCorpus(events=events, source_meta={"balanced_seed": seed})


def category_corpus(
    n_per_category: int = 4,
    n_categories: int = 6,
    seed: int = 0,
) -> EventCorpus:
    """A small corpus with guaranteed category multiplicity for triplets."""
    if n_categories > len(DEFAULT_CATEGORIES):
        raise ValueError(f"at most {len(DEFAULT_CATEGORIES)} categories available")
    rng = np.random.default_rng(seed)
    events = []
    i = 0
    for c in range(n_categories):
        for _ in range(n_per_category):
            events.append(
                Event(
                    id=f"cat{i:03d}",
                    title=f"Category event {i}",
                    content=f"Category event {i}. {_sentence(rng)}",
                    category=DEFAULT_CATEGORIES[c],
                    heat_index=float(rng.uniform(1.0, 50.0)),
                )
            )
            i += 1
    return EventCorpus(events=events, source_meta={"category_seed": seed})
