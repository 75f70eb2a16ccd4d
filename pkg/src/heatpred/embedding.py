"""Embedding backends and an exact cosine-similarity vector store.

Vectors are plain float64 numpy arrays; a store keeps one entry per event
id and enforces a single dimension. Search is an exhaustive scan (desk
scale), fully deterministic through the (score desc, id asc) tie rule.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np
import requests

from heatpred.corpus import EventCorpus

DEFAULT_DIM = 1024

_STORE_FIELDS = {"id", "vector", "heat_index", "level", "content"}


class EmbeddingError(RuntimeError):
    """Embedding a text failed; message names the event when known."""


class HashedTrigramEmbedder:
    """Deterministic offline embedder: hashed character-trigram counts.

    Each trigram of the text is hashed with a keyed 64-bit blake2b into one
    of ``dim`` buckets; the bucket-count vector is L2-normalized. No
    process-specific state, so embeddings are stable across runs and
    machines. Texts shorter than three characters hash as a single gram.
    """

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self._key = int(seed).to_bytes(8, "little", signed=True)

    def _grams(self, text: str) -> list[str]:
        if len(text) < 3:
            return [text]
        return [text[i : i + 3] for i in range(len(text) - 2)]

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        vec = np.zeros(self.dim)
        for gram in self._grams(text):
            digest = hashlib.blake2b(
                gram.encode("utf-8"), digest_size=8, key=self._key
            ).digest()
            vec[int.from_bytes(digest, "big") % self.dim] += 1.0
        return vec / np.linalg.norm(vec)


class RemoteEmbedder:
    """Client for an HTTP embedding endpoint.

    POSTs ``{"texts": [...]}`` and expects ``{"vectors": [[...], ...]}``.
    The endpoint comes from the argument or HEATPRED_EMBED_ENDPOINT; the
    bearer token, if any, from the environment variable named by
    ``api_key_env``.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        dim: int = DEFAULT_DIM,
        api_key_env: str = "",
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff_seconds: float = 0.5,
    ):
        endpoint = endpoint or os.environ.get("HEATPRED_EMBED_ENDPOINT", "")
        if not endpoint:
            raise ValueError("no embedding endpoint configured")
        self.endpoint = endpoint
        self.dim = dim
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self._session = requests.Session()

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        if any(not t for t in texts):
            raise ValueError("cannot embed empty text")
        headers = {}
        key = os.environ.get(self.api_key_env, "") if self.api_key_env else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._session.post(
                    self.endpoint,
                    json={"texts": texts},
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                vectors = resp.json()["vectors"]
                out = []
                for v in vectors:
                    arr = np.asarray(v, dtype=float)
                    if arr.shape != (self.dim,):
                        raise EmbeddingError(
                            f"endpoint returned a {arr.shape}-shaped vector, expected ({self.dim},)"
                        )
                    out.append(arr)
                return out
            except EmbeddingError:
                raise
            except Exception as exc:
                last_error = exc
                if attempt < self.max_attempts:
                    time.sleep(self.backoff_seconds * 2 ** (attempt - 1))
        raise EmbeddingError(
            f"embedding request failed after {self.max_attempts} attempts: {last_error}"
        ) from last_error

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]


def embed(text: str, backend) -> np.ndarray:
    """Embed one text with the given backend (deterministic per backend)."""
    return backend.embed(text)


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


@dataclass
class StoreEntry:
    event_id: str
    vector: np.ndarray
    heat_index: float
    level: int
    content: str


class Neighbor(NamedTuple):
    event_id: str
    score: float


Neighbors = list  # ordered list[Neighbor], scores non-increasing


class VectorStore:
    """In-memory exact-search store, one entry per event id."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self._entries: list[StoreEntry] = []
        self._by_id: dict[str, StoreEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[StoreEntry]:
        return list(self._entries)

    def get(self, event_id: str) -> StoreEntry:
        return self._by_id[event_id]

    def add(self, entry: StoreEntry) -> None:
        if entry.event_id in self._by_id:
            raise ValueError(f"duplicate entry for event {entry.event_id!r}")
        vec = np.asarray(entry.vector, dtype=float)
        if vec.shape != (self.dim,):
            raise ValueError(
                f"entry {entry.event_id!r} has dimension {vec.shape}, store expects ({self.dim},)"
            )
        if not np.isfinite(vec).all():
            raise ValueError(f"entry {entry.event_id!r} has non-finite components")
        if not vec.any():
            raise ValueError(f"entry {entry.event_id!r} is a zero vector")
        entry = StoreEntry(
            event_id=entry.event_id,
            vector=vec,
            heat_index=float(entry.heat_index),
            level=int(entry.level),
            content=entry.content,
        )
        self._entries.append(entry)
        self._by_id[entry.event_id] = entry


def index_corpus(corpus: EventCorpus, backend) -> VectorStore:
    """Embed every event's content into a fresh store.

    Every event must already carry a level and non-empty content.
    """
    store = VectorStore(dim=backend.dim)
    for ev in corpus.events:
        if ev.level is None:
            raise ValueError(
                f"event {ev.id!r} has no heat level; apply a scheme before indexing"
            )
        if not ev.content:
            raise ValueError(f"event {ev.id!r} has empty content")
        try:
            vec = backend.embed(ev.content)
        except Exception as exc:
            raise EmbeddingError(f"embedding failed for event {ev.id!r}: {exc}") from exc
        store.add(
            StoreEntry(
                event_id=ev.id,
                vector=vec,
                heat_index=ev.heat_index,
                level=ev.level,
                content=ev.content,
            )
        )
    return store


def top_k(
    store: VectorStore,
    query,
    k: int,
    exclude: Iterable[str] = (),
) -> list[Neighbor]:
    """The k entries most cosine-similar to ``query``.

    Excluded ids are skipped; ties break by ascending event id; fewer than
    k results only when the store is exhausted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(store) == 0:
        raise ValueError("store is empty")
    q = np.asarray(query, dtype=float)
    if q.shape != (store.dim,):
        raise ValueError(f"query has shape {q.shape}, store expects ({store.dim},)")
    excluded = set(exclude)
    scored = [
        (cosine_similarity(q, e.vector), e.event_id)
        for e in store._entries
        if e.event_id not in excluded
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [Neighbor(event_id=eid, score=score) for score, eid in scored[:k]]


def save_store(store: VectorStore, path: str | Path) -> None:
    """JSONL persistence, one entry per line, shortest-round-trip floats."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in store._entries:
            fh.write(
                json.dumps(
                    {
                        "id": e.event_id,
                        "vector": [float(x) for x in e.vector],
                        "heat_index": e.heat_index,
                        "level": e.level,
                        "content": e.content,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_store(path: str | Path) -> VectorStore:
    path = Path(path)
    store: VectorStore | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: malformed JSON: {exc.msg}") from None
            missing = _STORE_FIELDS - rec.keys()
            if missing:
                raise ValueError(
                    f"{path}:{line_no}: record is missing fields {sorted(missing)}"
                )
            extra = rec.keys() - _STORE_FIELDS
            if extra:
                warnings.warn(
                    f"{path}:{line_no}: ignoring unknown store fields {sorted(extra)}",
                    stacklevel=2,
                )
            vec = np.asarray(rec["vector"], dtype=float)
            if store is None:
                store = VectorStore(dim=len(vec))
            store.add(
                StoreEntry(
                    event_id=str(rec["id"]),
                    vector=vec,
                    heat_index=float(rec["heat_index"]),
                    level=int(rec["level"]),
                    content=str(rec["content"]),
                )
            )
    if store is None:
        raise ValueError(f"{path}: store file holds no entries")
    return store
