from __future__ import annotations

import json

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from assaygen.llm import (
    AuthError,
    CallLog,
    ChatRequest,
    Gateway,
    HttpProvider,
    MissingKey,
    MockProvider,
    NoObjectFound,
    ProviderConfig,
    ProviderError,
    RateLimited,
    Timeout,
    TokenBucket,
    TransientError,
    as_bool,
    extract_structured,
    normalize_bool,
)

SUMMARY_KEYS = ("BioAssay_Summary", "Assay_Type", "Summary_of_Observations", "CounterScreen")


# -- request / config validation --------------------------------------------------


def test_request_invariants():
    with pytest.raises(ValueError):
        ChatRequest("")
    with pytest.raises(ValueError):
        ChatRequest("p", temperature=-0.1)
    with pytest.raises(ValueError):
        ChatRequest("p", max_output_tokens=0)
    assert ChatRequest("p").temperature == 1.0 and ChatRequest("p").max_output_tokens == 2048


def test_config_caps_retries_and_rejects_unknown_fields():
    with pytest.raises(ValueError):
        ProviderConfig("m", max_retries=9)
    with pytest.raises(ValueError):
        ProviderConfig.from_dict({"model_id": "m", "colour": "blue"})
    assert ProviderConfig.from_dict({"model_id": "m", "kind": "mock"}).kind == "mock"


# -- HTTP provider through a mocked transport ---------------------------------------


def _http(handler, monkeypatch, **cfg):
    monkeypatch.setenv("TEST_KEY", "sekret")
    config = ProviderConfig("gpt-x", base_url="https://llm.invalid/v1", api_key_env="TEST_KEY", **cfg)
    provider = HttpProvider(config, client=httpx.Client(transport=httpx.MockTransport(handler)))
    return config, provider


def _ok(content="hello"):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_429_then_200_is_one_retry(monkeypatch, tmp_path):
    replies = iter([httpx.Response(429, text="slow down"), _ok()])
    seen = []

    def handler(req):
        seen.append(json.loads(req.content))
        assert req.headers["authorization"] == "Bearer sekret"
        return next(replies)

    config, provider = _http(handler, monkeypatch)
    sleeps = []
    gw = Gateway.from_config(config, provider=provider, call_log=tmp_path / "calls.jsonl", sleep=sleeps.append)
    assert gw.chat("hi") == "hello"
    entry = json.loads((tmp_path / "calls.jsonl").read_text())
    assert entry["retries"] == 1 and entry["attempts"] == 2 and entry["status"] == "ok"
    assert gw.stats.retries == 1 and len(sleeps) == 1
    assert seen[0]["model"] == "gpt-x" and seen[0]["temperature"] == 1.0 and seen[0]["max_tokens"] == 2048
    assert seen[0]["messages"] == [{"role": "user", "content": "hi"}]


def test_missing_key_fails_before_network(monkeypatch):
    calls = []
    config, provider = _http(lambda r: calls.append(r) or _ok(), monkeypatch)
    monkeypatch.delenv("TEST_KEY")
    with pytest.raises(AuthError):
        Gateway.from_config(config, provider=provider).chat("hi")
    assert calls == []


@pytest.mark.parametrize("status, error", [(429, RateLimited), (503, ProviderError)])
def test_exhausted_retries(monkeypatch, status, error):
    n = []
    config, provider = _http(lambda r: n.append(1) or httpx.Response(status), monkeypatch, max_retries=2)
    gw = Gateway.from_config(config, provider=provider, sleep=lambda s: None)
    with pytest.raises(error) as exc:
        gw.chat("hi")
    assert exc.value.status == status
    assert len(n) == 3  # attempts = retries + 1
    assert gw.stats.failures == 1


def test_timeouts_map_to_timeout(monkeypatch):
    def handler(req):
        raise httpx.ReadTimeout("slow", request=req)

    config, provider = _http(handler, monkeypatch, max_retries=1)
    with pytest.raises(Timeout):
        Gateway.from_config(config, provider=provider, sleep=lambda s: None).chat("hi")


def test_client_errors_are_not_retried(monkeypatch):
    n = []
    config, provider = _http(lambda r: n.append(1) or httpx.Response(400, text="bad"), monkeypatch)
    with pytest.raises(ProviderError):
        Gateway.from_config(config, provider=provider, sleep=lambda s: None).chat("hi")
    assert len(n) == 1
    config, provider = _http(lambda r: httpx.Response(401), monkeypatch)
    with pytest.raises(AuthError):
        Gateway.from_config(config, provider=provider).chat("hi")


def test_http_embedding(monkeypatch):
    config, provider = _http(lambda r: httpx.Response(200, json={"data": [{"embedding": [3, 4]}]}), monkeypatch)
    assert Gateway.from_config(config, provider=provider).embed("abc").tolist() == [3.0, 4.0]


class Flaky:
    model_id = "flaky"

    def __init__(self, failures):
        self.failures = failures
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise TransientError(500, "boom", retry_after=0.25)
        return "ok"

    def embed(self, text):
        return [1.0]


@given(st.integers(0, 8), st.integers(0, 10))
def test_retries_never_exceed_cap(max_retries, failures):
    p = Flaky(failures)
    delays = []
    gw = Gateway(p, max_retries=max_retries, sleep=delays.append, backoff_base=0.1, backoff_cap=1.0)
    try:
        gw.chat("x")
        assert failures <= max_retries
    except ProviderError:
        assert failures > max_retries
    assert p.calls == min(failures, max_retries) + 1
    assert gw.stats.retries == p.calls - 1
    assert all(0.25 <= d <= 1.0 for d in delays)  # never below retry-after, never above cap
    assert delays == sorted(delays)


def test_token_bucket_spaces_calls():
    now = [0.0]
    slept = []

    def sleep(s):
        slept.append(s)
        now[0] += s

    bucket = TokenBucket(2.0, capacity=1, clock=lambda: now[0], sleep=sleep)
    for _ in range(5):
        bucket.acquire()
    assert now[0] == pytest.approx(2.0)  # four waits of 0.5 s after the initial token


# -- mock provider ----------------------------------------------------------------


def test_mock_is_deterministic_and_seed_sensitive():
    prompts = [f"Propose molecules for target number {i}." for i in range(100)]
    a, b, c = MockProvider(seed=7), MockProvider(seed=7), MockProvider(seed=8)
    out_a = [a.complete(ChatRequest(p)) for p in prompts]
    assert out_a == [b.complete(ChatRequest(p)) for p in prompts]
    differing = sum(x != c.complete(ChatRequest(p)) for x, p in zip(out_a, prompts))
    assert differing == 100


def test_mock_fixture_lookup():
    p = "anything at all"
    m = MockProvider(fixtures={MockProvider.fixture_key(p): "fixed", MockProvider.fixture_key(p, 3): "third"})
    assert m.complete(ChatRequest(p)) == "fixed"
    assert m.complete(ChatRequest(p, sample_index=3)) == "third"


def test_mock_generation_shape():
    text = MockProvider(seed=1).complete(ChatRequest("generate please"))
    lines = [ln for ln in text.splitlines() if "[BOS]" in ln]
    assert len(lines) == 10
    assert [ln.split(".")[0] for ln in lines] == [str(i) for i in range(1, 11)]
    assert all("[BOS]" in ln and ln.endswith("[EOS]") for ln in lines)


def test_mock_embeddings():
    m = MockProvider(seed=0)
    assert np.array_equal(m.embed("abc"), m.embed("abc"))
    assert not np.array_equal(m.embed("abc"), m.embed("abd"))
    assert abs(np.linalg.norm(m.embed("abc")) - 1.0) < 1e-6
    assert m.embed("abc").shape == (256,)


# -- structured extraction ----------------------------------------------------------


def test_fenced_relevance_block():
    text = 'Reasoning here.\n```json\n{"Relevant": "True"}\n```'
    assert extract_structured(text, ["Relevant"]) == {"Relevant": "True"}


def test_prose_then_summary_object():
    obj = {"BioAssay_Summary": "s", "Assay_Type": "Enzymatic", "Summary_of_Observations": "o", "CounterScreen": False}
    out = extract_structured("Here is the result:\n" + json.dumps(obj), SUMMARY_KEYS)
    assert len(out) == 4 and out["CounterScreen"] == "False"


def test_no_braces():
    with pytest.raises(NoObjectFound):
        extract_structured("no object here")


def test_missing_key():
    with pytest.raises(MissingKey) as exc:
        extract_structured('{"a": 1}', ["a", "b"])
    assert exc.value.name == "b"


@pytest.mark.parametrize("text, expected", [
    ('{"Relevant": true}', "True"),
    ('{"Relevant": "true"}', "True"),
    ("{'x': 1} then {\"Relevant\": \"FALSE\"}", "False"),
    ('{"Relevant": True, }', "True"),
    ('{"Relevant": "True" // sure\n}', "True"),
])
def test_lenient_and_boolean_normalization(text, expected):
    assert extract_structured(text, ["Relevant"])["Relevant"] == expected


def test_non_text_values_become_json_text():
    out = extract_structured('{"n": 3, "l": [1, 2], "z": null}')
    assert out == {"n": "3", "l": "[1, 2]", "z": ""}


def test_bool_helpers():
    assert normalize_bool(" TRUE ") == "True" and normalize_bool("yes") is None
    assert as_bool("false") is False
    with pytest.raises(ValueError):
        as_bool("maybe")


@given(st.text(alphabet=st.sampled_from(list('{}[]":,tTrueFalsN0123 \n/\\abc`')), max_size=200))
def test_extraction_only_raises_declared_errors(text):
    try:
        out = extract_structured(text, ["a"])
    except (NoObjectFound, MissingKey):
        return
    assert isinstance(out, dict) and all(isinstance(v, str) for v in out.values())


def test_call_log_is_jsonl(tmp_path):
    log = CallLog(tmp_path / "sub" / "log.jsonl")
    gw = Gateway(MockProvider(), call_log=log)
    gw.chat(ChatRequest("one", sample_index=4))
    gw.embed("two")
    lines = [json.loads(x) for x in (tmp_path / "sub" / "log.jsonl").read_text().splitlines()]
    assert [e["op"] for e in lines] == ["chat", "embed"]
    assert lines[0]["sample_index"] == 4 and "response" in lines[0]
