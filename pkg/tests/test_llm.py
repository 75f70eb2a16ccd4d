"""Chat clients: live transport, mock rules, record/replay parity."""

from __future__ import annotations

import json

import pytest

from heatpred.llm import (
    Completion,
    LiveClient,
    MockClient,
    ModelConfig,
    RecordingClient,
    ReplayCacheMiss,
    ReplayClient,
    TransportError,
    load_model_configs,
    prompt_sha,
)
from heatpred.prompting import PromptText
from stubserver import StubChatServer


def _prompt(text: str = "Classify this.", event_id: str = "e001") -> PromptText:
    return PromptText(text=text, kind="no_case", event_id=event_id)


def _config(endpoint: str, **kw) -> ModelConfig:
    defaults = dict(name="test-model", endpoint=endpoint,
                    backoff_seconds=0.0, max_attempts=3)
    defaults.update(kw)
    return ModelConfig(**defaults)


class TestModelConfig:
    def test_defaults(self):
        cfg = ModelConfig(name="m")
        assert cfg.temperature == 0.0
        assert cfg.max_tokens == 256
        assert cfg.max_attempts == 3

    def test_validation(self):
        with pytest.raises(ValueError, match="temperature"):
            ModelConfig(name="m", temperature=-0.1)
        with pytest.raises(ValueError, match="max_attempts"):
            ModelConfig(name="m", max_attempts=0)

    def test_load_from_toml(self, tmp_path):
        path = tmp_path / "models.toml"
        path.write_text(
            '[models.alpha]\nendpoint = "http://a"\ntemperature = 0.5\n'
            '[models.beta]\nendpoint = "http://b"\nmax_tokens = 64\n',
            encoding="utf-8",
        )
        configs = load_model_configs(path)
        assert set(configs) == {"alpha", "beta"}
        assert configs["alpha"].temperature == 0.5
        assert configs["beta"].max_tokens == 64
        assert configs["beta"].name == "beta"

    def test_load_requires_model_tables(self, tmp_path):
        path = tmp_path / "models.toml"
        path.write_text('[other]\nx = 1\n', encoding="utf-8")
        with pytest.raises(ValueError, match=r"no \[models\.\*\] tables"):
            load_model_configs(path)


class TestLiveClient:
    def test_requires_endpoint(self):
        with pytest.raises(ValueError, match="endpoint"):
            LiveClient(ModelConfig(name="m"))

    def test_posts_chat_payload(self):
        with StubChatServer(reply="Option: C") as server:
            client = LiveClient(_config(server.endpoint))
            completion = client.complete(_prompt("What level?"))
        assert completion.text == "Option: C"
        assert completion.model == "test-model"
        assert completion.backend == "live"
        assert completion.usage == {"prompt_tokens": 1, "completion_tokens": 1}
        req = server.requests[0]
        assert req["path"] == "/chat/completions"
        assert req["body"]["model"] == "test-model"
        assert req["body"]["messages"] == [{"role": "user", "content": "What level?"}]
        assert req["body"]["temperature"] == 0.0

    def test_bearer_header_from_env(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-secret")
        with StubChatServer() as server:
            client = LiveClient(_config(server.endpoint, api_key_env="TEST_LLM_KEY"))
            client.complete(_prompt())
        assert server.requests[0]["auth"] == "Bearer sk-secret"

    def test_missing_key_env_fails_before_any_request(self, monkeypatch):
        monkeypatch.delenv("TEST_LLM_KEY", raising=False)
        with StubChatServer() as server:
            client = LiveClient(_config(server.endpoint, api_key_env="TEST_LLM_KEY"))
            with pytest.raises(ValueError, match="TEST_LLM_KEY"):
                client.complete(_prompt())
        assert server.request_count == 0

    def test_retries_transient_failures(self):
        with StubChatServer(reply="ok", fail_times=2) as server:
            client = LiveClient(_config(server.endpoint, max_attempts=3))
            completion = client.complete(_prompt())
        assert completion.text == "ok"
        assert server.request_count == 3

    def test_attempt_budget_is_exact(self):
        with StubChatServer(fail_times=99) as server:
            client = LiveClient(_config(server.endpoint, max_attempts=4))
            with pytest.raises(TransportError, match="4 attempts failed"):
                client.complete(_prompt())
        assert server.request_count == 4

    def test_batch_keeps_order(self):
        with StubChatServer(reply=lambda body: f"echo {body['messages'][0]['content']}") as server:
            client = LiveClient(_config(server.endpoint))
            slots = client.complete_batch(
                [_prompt("one", "e1"), _prompt("two", "e2")], parallelism=2
            )
        assert [s.text for s in slots] == ["echo one", "echo two"]

    def test_batch_error_slot(self):
        with StubChatServer(fail_times=1) as server:
            client = LiveClient(_config(server.endpoint, max_attempts=1))
            slots = client.complete_batch([_prompt("a", "e1"), _prompt("b", "e2")])
        assert isinstance(slots[0], TransportError)
        assert isinstance(slots[1], Completion)

    def test_parallelism_validated(self):
        with StubChatServer() as server:
            client = LiveClient(_config(server.endpoint))
            with pytest.raises(ValueError, match="parallelism"):
                client.complete_batch([_prompt()], parallelism=0)


class TestMockClient:
    def test_fixed_letter(self):
        client = MockClient(letter="C")
        completion = client.complete(_prompt())
        assert completion.text == "Option: C"
        assert completion.backend == "mock"
        assert completion.latency == 0.0

    def test_letter_validated(self):
        with pytest.raises(ValueError, match="letter"):
            MockClient(letter="E")

    def test_levels_lookup(self):
        client = MockClient(levels={"e1": 1, "e2": 4})
        assert client.complete(_prompt(event_id="e1")).text == "Option: A"
        assert client.complete(_prompt(event_id="e2")).text == "Option: D"

    def test_no_http_transport(self):
        client = MockClient()
        assert not hasattr(client, "_session")

    def test_batch(self):
        client = MockClient(letter="B")
        slots = client.complete_batch([_prompt(event_id=f"e{i}") for i in range(5)])
        assert [s.text for s in slots] == ["Option: B"] * 5


class TestReplay:
    def test_record_then_replay_byte_identical(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        cache.touch()
        prompts = [_prompt("first prompt", "e1"), _prompt("second prompt", "e2")]
        with StubChatServer(reply=lambda b: f"ans {b['messages'][0]['content']}") as server:
            recorder = RecordingClient(LiveClient(_config(server.endpoint)), cache)
            live = [recorder.complete(p) for p in prompts]
        replay = ReplayClient(cache, model="test-model")
        for prompt, lc in zip(prompts, live):
            rc = replay.complete(prompt)
            assert rc.text == lc.text
            assert rc.backend == "replay"

    def test_cache_record_shape(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        cache.touch()
        with StubChatServer(reply="hello") as server:
            recorder = RecordingClient(LiveClient(_config(server.endpoint)), cache)
            recorder.complete(_prompt("the prompt"))
        rec = json.loads(cache.read_text(encoding="utf-8"))
        assert rec == {
            "model": "test-model",
            "prompt_sha256": prompt_sha("the prompt"),
            "text": "hello",
        }

    def test_miss_is_an_error_naming_the_event(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        cache.write_text("", encoding="utf-8")
        replay = ReplayClient(cache, model="m")
        with pytest.raises(ReplayCacheMiss, match="event 'e009'"):
            replay.complete(_prompt("never recorded", "e009"))

    def test_cache_is_filtered_by_model(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        key = prompt_sha("shared prompt")
        cache.write_text(
            json.dumps({"model": "a", "prompt_sha256": key, "text": "from a"}) + "\n"
            + json.dumps({"model": "b", "prompt_sha256": key, "text": "from b"}) + "\n",
            encoding="utf-8",
        )
        assert ReplayClient(cache, model="a").complete(_prompt("shared prompt")).text == "from a"
        assert ReplayClient(cache, model="b").complete(_prompt("shared prompt")).text == "from b"

    def test_malformed_cache_line_reports_number(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        cache.write_text("{}\nnot json\n", encoding="utf-8")
        with pytest.raises(ValueError, match=r"cache\.jsonl:2"):
            ReplayClient(cache, model="m")

    def test_no_http_transport(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        cache.write_text("", encoding="utf-8")
        client = ReplayClient(cache, model="m")
        assert not hasattr(client, "_session")

    def test_batch_miss_fills_slot(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        key = prompt_sha("known")
        cache.write_text(
            json.dumps({"model": "m", "prompt_sha256": key, "text": "yes"}) + "\n",
            encoding="utf-8",
        )
        replay = ReplayClient(cache, model="m")
        slots = replay.complete_batch([_prompt("known"), _prompt("unknown")])
        assert slots[0].text == "yes"
        assert isinstance(slots[1], ReplayCacheMiss)


class TestPromptSha:
    def test_stable_and_text_only(self):
        assert prompt_sha("abc") == prompt_sha("abc")
        assert prompt_sha("abc") != prompt_sha("abd")
        assert len(prompt_sha("abc")) == 64
