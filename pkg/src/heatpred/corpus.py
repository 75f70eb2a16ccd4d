"""Event corpus handling: loading, cleaning, summarization, triplet construction.

The canonical on-disk format is UTF-8 JSONL, one event per line, with the
fields id/title/content/category/heat_index/level (plus an optional
``summarized`` marker written only when true).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# A 20-label default set; only four labels are fixed by convention
# (transportation, sports, agriculture, healthcare), the rest are generic
# news desks. Override per corpus via the `categories` argument.
DEFAULT_CATEGORIES = [
    "transportation",
    "sports",
    "agriculture",
    "healthcare",
    "education",
    "technology",
    "entertainment",
    "finance",
    "politics",
    "military",
    "law",
    "environment",
    "culture",
    "science",
    "real estate",
    "tourism",
    "food",
    "disaster",
    "international",
    "society",
]

DEFAULT_GARBLED_THRESHOLD = 0.30
DEFAULT_SUMMARY_MAX_LEN = 200
DEFAULT_TRIPLET_CAP = 3000

_COMMON_PUNCT = set(",.!?;:'\"()[]{}<>«»-_—–…/\\%&@#*+=~，。！？；：''""（）《》【】、·")


class CorpusFormatError(ValueError):
    """Raised when an input file violates the event schema."""


class SummarizeError(RuntimeError):
    """Summarization failed for one event; carries the event id."""

    def __init__(self, event_id: str, cause: Exception | None = None):
        super().__init__(f"summarization failed for event {event_id!r}: {cause}")
        self.event_id = event_id
        self.cause = cause


@dataclass
class Event:
    """One public-opinion event.

    ``heat_index`` is the scalar dissemination-heat measurement that all
    level derivation runs on; ``level`` stays None until a level scheme
    has been applied.
    """

    id: str
    title: str
    content: str = ""
    category: str = ""
    heat_index: float = 0.0
    level: int | None = None
    summarized: bool = False


@dataclass
class EventCorpus:
    events: list[Event]
    source_meta: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.events)

    def by_id(self, event_id: str) -> Event:
        for ev in self.events:
            if ev.id == event_id:
                return ev
        raise KeyError(event_id)


@dataclass
class Triplet:
    anchor: str
    positive: str
    negative: str


@dataclass
class TripletSet:
    triplets: list[Triplet]
    per_category_counts: dict[str, int]


def _event_from_record(record: dict, line_no: int, path: str) -> Event:
    for key in ("id", "title", "heat_index"):
        if record.get(key) in (None, ""):
            raise CorpusFormatError(
                f"{path}:{line_no}: record is missing required field {key!r}"
            )
    try:
        heat = float(record["heat_index"])
    except (TypeError, ValueError):
        raise CorpusFormatError(
            f"{path}:{line_no}: heat_index {record['heat_index']!r} is not a number"
        ) from None
    if not np.isfinite(heat) or heat < 0:
        raise CorpusFormatError(
            f"{path}:{line_no}: heat_index must be a finite non-negative number, got {heat!r}"
        )
    level = record.get("level")
    if level not in (None, ""):
        try:
            level = int(level)
        except (TypeError, ValueError):
            raise CorpusFormatError(
                f"{path}:{line_no}: level {record['level']!r} is not an integer"
            ) from None
    else:
        level = None
    return Event(
        id=str(record["id"]),
        title=str(record["title"]),
        content=str(record.get("content") or ""),
        category=str(record.get("category") or ""),
        heat_index=heat,
        level=level,
        summarized=bool(record.get("summarized", False)),
    )


def load_events(path: str | Path, format: str | None = None) -> EventCorpus:
    """Load an event corpus from a JSONL or CSV file.

    Ordering follows the file; ids must be unique. ``format`` defaults to
    the file suffix.
    """
    path = Path(path)
    if format is None:
        suffix = path.suffix.lower()
        if suffix == ".csv":
            format = "csv"
        elif suffix in (".jsonl", ".json", ".ndjson"):
            format = "jsonl"
        else:
            raise ValueError(
                f"cannot infer corpus format from suffix {suffix!r}; "
                "pass format='jsonl' or format='csv'"
            )
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unsupported corpus format {format!r}")

    events: list[Event] = []
    seen: dict[str, int] = {}

    def add(record: dict, line_no: int) -> None:
        ev = _event_from_record(record, line_no, str(path))
        if ev.id in seen:
            raise CorpusFormatError(
                f"{path}: duplicate id {ev.id!r} at line {line_no} "
                f"(first seen at line {seen[ev.id]})"
            )
        seen[ev.id] = line_no
        events.append(ev)

    if format == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusFormatError(
                        f"{path}:{line_no}: malformed JSON: {exc.msg}"
                    ) from None
                if not isinstance(record, dict):
                    raise CorpusFormatError(
                        f"{path}:{line_no}: expected a JSON object"
                    )
                add(record, line_no)
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "id" not in reader.fieldnames:
                raise CorpusFormatError(f"{path}: missing CSV header with an 'id' column")
            for line_no, row in enumerate(reader, start=2):
                add(row, line_no)

    return EventCorpus(events=events, source_meta={"raw": len(events)})


def save_events(corpus: EventCorpus, path: str | Path) -> None:
    """Write the canonical JSONL form; floats keep shortest-round-trip repr."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for ev in corpus.events:
            record: dict = {
                "id": ev.id,
                "title": ev.title,
                "content": ev.content,
                "category": ev.category,
                "heat_index": float(ev.heat_index),
                "level": ev.level,
            }
            if ev.summarized:
                record["summarized"] = True
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def informative_ratio(text: str) -> float:
    """Share of characters that are letters, ideographs, digits, whitespace
    or common punctuation. Everything else counts as noise."""
    if not text:
        return 0.0
    good = sum(
        1
        for ch in text
        if ch.isalpha() or ch.isdigit() or ch.isspace() or ch in _COMMON_PUNCT
    )
    return good / len(text)


def clean_events(
    corpus: EventCorpus,
    garbled_threshold: float = DEFAULT_GARBLED_THRESHOLD,
) -> EventCorpus:
    """Drop unusable events and fill empty content from the title.

    An event with empty content keeps its title as the content description;
    one with neither is dropped. Content whose informative-character ratio
    falls below ``garbled_threshold`` is treated as garbled and dropped.
    Idempotent.
    """
    kept: list[Event] = []
    removed = 0
    for ev in corpus.events:
        content = ev.content.strip()
        title = ev.title.strip()
        if not content:
            if not title:
                removed += 1
                continue
            content = title
        if informative_ratio(content) < garbled_threshold:
            removed += 1
            continue
        if content != ev.content:
            ev = replace(ev, content=content)
        kept.append(ev)
    meta = dict(corpus.source_meta)
    meta["removed"] = meta.get("removed", 0) + removed
    meta["cleaned"] = len(kept)
    return EventCorpus(events=kept, source_meta=meta)


def summarize_event(event: Event, llm, max_len: int = DEFAULT_SUMMARY_MAX_LEN) -> Event:
    """Replace the event content with an LLM summary of at most ``max_len`` chars.

    No-op when the content is already summarized and short enough. ``llm``
    is any chat client exposing ``complete(prompt) -> Completion``.
    """
    if not event.content:
        raise ValueError(f"event {event.id!r} has empty content; clean the corpus first")
    if event.summarized and len(event.content) <= max_len:
        return event
    prompt = (
        f"Condense the following event description into a single concise "
        f"summary of at most {max_len} characters. Reply with the summary only.\n"
        f"{event.content}"
    )
    try:
        completion = llm.complete(prompt)
    except Exception as exc:
        raise SummarizeError(event.id, exc) from exc
    summary = completion.text.strip()[:max_len]
    return replace(event, content=summary, summarized=True)


def summarize_corpus(
    corpus: EventCorpus,
    llm,
    max_len: int = DEFAULT_SUMMARY_MAX_LEN,
    skip_failures: bool = True,
) -> EventCorpus:
    """Summarize every event; failed events are skipped (and counted) or raised."""
    out: list[Event] = []
    failed = 0
    for ev in corpus.events:
        try:
            out.append(summarize_event(ev, llm, max_len=max_len))
        except SummarizeError:
            if not skip_failures:
                raise
            failed += 1
            logger.warning("skipping event %s: summarization failed", ev.id)
    meta = dict(corpus.source_meta)
    meta["summarized"] = len(out)
    if failed:
        meta["summarize_failed"] = meta.get("summarize_failed", 0) + failed
    return EventCorpus(events=out, source_meta=meta)


def build_triplets(
    corpus: EventCorpus,
    cap: int = DEFAULT_TRIPLET_CAP,
    seed: int = 0,
) -> TripletSet:
    """Build (anchor, same-category positive, cross-category negative) triplets.

    One triplet per retained anchor; anchors per category are capped at
    ``cap`` with seeded subsampling. Deterministic for a fixed
    (corpus, cap, seed).
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    rng = np.random.default_rng(seed)
    by_cat: dict[str, list[Event]] = {}
    for ev in corpus.events:
        if ev.category:
            by_cat.setdefault(ev.category, []).append(ev)
    if len(by_cat) < 2:
        raise ValueError(
            "no negatives available: triplet construction needs at least two categories"
        )

    triplets: list[Triplet] = []
    per_category_counts: dict[str, int] = {}
    for cat in sorted(by_cat):
        members = by_cat[cat]
        if len(members) < 2:
            logger.warning(
                "category %r has a single event; skipped as anchor source", cat
            )
            per_category_counts[cat] = 0
            continue
        # negatives keep corpus order for determinism
        neg_pool = [ev for ev in corpus.events if ev.category and ev.category != cat]
        anchors = members
        if len(anchors) > cap:
            idx = np.sort(rng.choice(len(anchors), size=cap, replace=False))
            anchors = [anchors[i] for i in idx]
        for anchor in anchors:
            pos_pool = [m for m in members if m.id != anchor.id]
            positive = pos_pool[int(rng.integers(len(pos_pool)))]
            negative = neg_pool[int(rng.integers(len(neg_pool)))]
            triplets.append(
                Triplet(
                    anchor=anchor.content,
                    positive=positive.content,
                    negative=negative.content,
                )
            )
        per_category_counts[cat] = len(anchors)
    return TripletSet(triplets=triplets, per_category_counts=per_category_counts)


def save_triplets(tset: TripletSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tset.triplets:
            fh.write(
                json.dumps(
                    {"anchor": t.anchor, "positive": t.positive, "negative": t.negative},
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_triplets(path: str | Path) -> list[Triplet]:
    out: list[Triplet] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    Triplet(
                        anchor=rec["anchor"],
                        positive=rec["positive"],
                        negative=rec["negative"],
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise CorpusFormatError(f"{path}:{line_no}: bad triplet record: {exc}") from None
    return out
