"""Chat-completion clients: live HTTP, deterministic mock, record/replay.

Every backend exposes the same two calls, ``complete`` and
``complete_batch``, so the evaluation harness never knows which one it is
talking to. Mock and replay construct no HTTP transport at all, which is
what makes offline runs trustworthy rather than merely quiet.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import requests

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from heatpred.prompting import OPTION_LETTERS, PromptText

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 256
DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF = 0.5


class TransportError(RuntimeError):
    """All retry attempts against the endpoint failed."""


class ReplayCacheMiss(RuntimeError):
    """The replay cache has no entry for this (model, prompt) pair."""


@dataclass
class ModelConfig:
    name: str
    endpoint: str = ""
    api_key_env: str = ""
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    timeout: float = DEFAULT_TIMEOUT
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    backoff_seconds: float = DEFAULT_BACKOFF

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass
class Completion:
    text: str
    model: str
    latency: float
    backend: str  # "live", "mock", or "replay"
    usage: dict = field(default_factory=dict)


BatchSlot = Union[Completion, Exception]


def prompt_sha(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


def load_model_configs(path: str | Path) -> dict[str, "ModelConfig"]:
    """Read a TOML file with one ``[models.<name>]`` table per model."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    tables = data.get("models", {})
    if not tables:
        raise ValueError(f"{path}: no [models.*] tables found")
    configs = {}
    for name, entry in tables.items():
        configs[name] = ModelConfig(name=name, **entry)
    return configs


class _BatchMixin:
    def complete_batch(
        self, prompts: list[PromptText], parallelism: int = 1
    ) -> list[BatchSlot]:
        """Complete all prompts, results in input order.

        A failing prompt fills its slot with the exception instead of
        aborting the rest; at most ``parallelism`` requests run at once.
        """
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")

        def one(prompt: PromptText) -> BatchSlot:
            try:
                return self.complete(prompt)
            except Exception as exc:
                return exc

        if parallelism == 1 or len(prompts) <= 1:
            return [one(p) for p in prompts]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(one, prompts))


class LiveClient(_BatchMixin):
    """OpenAI-style chat-completions client with bounded retries."""

    backend = "live"

    def __init__(self, config: ModelConfig):
        if not config.endpoint:
            raise ValueError(f"model {config.name!r} has no endpoint configured")
        self.config = config
        self._session = requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env, "")
            if not key:
                raise ValueError(
                    f"environment variable {self.config.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, prompt: PromptText) -> Completion:
        cfg = self.config
        url = cfg.endpoint.rstrip("/") + "/chat/completions"
        body = {
            "model": cfg.name,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        headers = self._headers()
        started = time.perf_counter()
        last_error: Exception | None = None
        for attempt in range(1, cfg.max_attempts + 1):
            try:
                resp = self._session.post(
                    url, json=body, headers=headers, timeout=cfg.timeout
                )
                resp.raise_for_status()
                payload = resp.json()
                text = payload["choices"][0]["message"]["content"]
                return Completion(
                    text=text,
                    model=cfg.name,
                    latency=time.perf_counter() - started,
                    backend=self.backend,
                    usage=payload.get("usage") or {},
                )
            except Exception as exc:
                last_error = exc
                if attempt < cfg.max_attempts:
                    time.sleep(cfg.backoff_seconds * 2 ** (attempt - 1))
        raise TransportError(
            f"model {cfg.name!r}: {cfg.max_attempts} attempts failed: {last_error}"
        ) from last_error


class MockClient(_BatchMixin):
    """Rule-based offline answers.

    Either a fixed option letter for every prompt, or the letter matching
    the true level of the prompt's event via a lookup table.
    """

    backend = "mock"

    def __init__(
        self,
        model: str = "mock",
        letter: str = "A",
        levels: dict[str, int] | None = None,
    ):
        if letter not in OPTION_LETTERS:
            raise ValueError(f"letter must be one of {OPTION_LETTERS!r}")
        self.model = model
        self.letter = letter
        self.levels = levels

    def complete(self, prompt: PromptText) -> Completion:
        letter = self.letter
        if self.levels is not None:
            level = self.levels[prompt.event_id]
            letter = OPTION_LETTERS[level - 1]
        return Completion(
            text=f"Option: {letter}",
            model=self.model,
            latency=0.0,
            backend=self.backend,
        )


class ReplayClient(_BatchMixin):
    """Serve completions recorded earlier; a miss is an error, not a call."""

    backend = "replay"

    def __init__(self, cache_path: str | Path, model: str):
        self.model = model
        self._cache: dict[str, str] = {}
        path = Path(cache_path)
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(
                        f"{path}:{line_no}: malformed cache record: {exc.msg}"
                    ) from None
                if rec.get("model") != model:
                    continue
                self._cache[rec["prompt_sha256"]] = rec["text"]

    def complete(self, prompt: PromptText) -> Completion:
        key = prompt_sha(prompt.text)
        if key not in self._cache:
            raise ReplayCacheMiss(
                f"model {self.model!r}: no cached completion for prompt "
                f"{key[:12]}… (event {prompt.event_id!r})"
            )
        return Completion(
            text=self._cache[key],
            model=self.model,
            latency=0.0,
            backend=self.backend,
        )


class RecordingClient(_BatchMixin):
    """Pass-through to a live client that appends every answer to a cache."""

    backend = "live"

    def __init__(self, inner: LiveClient, cache_path: str | Path):
        self.inner = inner
        self.cache_path = Path(cache_path)
        self._lock = threading.Lock()

    @property
    def model(self) -> str:
        # recorded and replayed runs must report the same model name
        return self.inner.config.name

    def complete(self, prompt: PromptText) -> Completion:
        completion = self.inner.complete(prompt)
        record = json.dumps(
            {
                "model": completion.model,
                "prompt_sha256": prompt_sha(prompt.text),
                "text": completion.text,
            },
            ensure_ascii=False,
        )
        with self._lock:
            with open(self.cache_path, "a", encoding="utf-8") as fh:
                fh.write(record + "\n")
        return completion
