"""Chat and embedding access: HTTP providers, a deterministic mock, and a retrying gateway.

The gateway owns the cross-cutting concerns (retries with exponential
backoff, token-bucket rate limiting, a process-wide cap on in-flight calls,
and a JSON-lines call log); providers only translate one request into one
HTTP exchange, or, for the mock, into scripted text.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Protocol

import httpx
import numpy as np

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 1.0
DEFAULT_MAX_OUTPUT_TOKENS = 2048
MAX_RETRIES_CAP = 8


# ---------------------------------------------------------------------------
# requests, configs, errors


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    model_id: str = ""
    # which draw this is for a repeated prompt; lets the mock vary batch outputs
    sample_index: int = 0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings for one model endpoint.

    ``kind`` is ``"openai"`` for any OpenAI-compatible HTTP API or ``"mock"``
    for the offline scripted provider.
    """

    model_id: str
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    request_timeout: float = 60.0
    max_retries: int = 3
    kind: str = "openai"
    requests_per_minute: float | None = None
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self) -> None:
        if not 0 <= self.max_retries <= MAX_RETRIES_CAP:
            raise ValueError(f"max_retries must be in [0, {MAX_RETRIES_CAP}]")
        if self.kind not in ("openai", "mock"):
            raise ValueError(f"unknown provider kind {self.kind!r}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ProviderConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown provider fields: {sorted(unknown)}")
        return cls(**data)


class GatewayError(RuntimeError):
    pass


class AuthError(GatewayError):
    pass


class ProviderError(GatewayError):
    def __init__(self, status: int | None, body: str = ""):
        super().__init__(f"provider error {status}: {body[:200]}")
        self.status = status
        self.body = body


class RateLimited(ProviderError):
    pass


class Timeout(GatewayError):
    pass


class TransientError(GatewayError):
    """Raised by providers for failures worth retrying (HTTP 429/5xx, timeouts)."""

    def __init__(self, status: int | None, body: str = "", retry_after: float | None = None):
        super().__init__(f"transient {status}")
        self.status = status
        self.body = body
        self.retry_after = retry_after


class NoObjectFound(ValueError):
    pass


class MissingKey(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# providers


class Provider(Protocol):
    model_id: str

    def complete(self, request: ChatRequest) -> str: ...

    def embed(self, text: str) -> Sequence[float]: ...


class HttpProvider:
    """OpenAI-compatible ``/chat/completions`` and ``/embeddings`` client."""

    def __init__(self, config: ProviderConfig, client: httpx.Client | None = None):
        self.config = config
        self.model_id = config.model_id
        self._client = client or httpx.Client(timeout=config.request_timeout)

    def _key(self) -> str:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise AuthError(f"environment variable {self.config.api_key_env} is not set")
        return key

    def _post(self, path: str, body: dict[str, Any]) -> dict[str, Any]:
        headers = {"Authorization": f"Bearer {self._key()}"}
        url = self.config.base_url.rstrip("/") + path
        try:
            resp = self._client.post(url, json=body, headers=headers, timeout=self.config.request_timeout)
        except httpx.TimeoutException as exc:
            raise TransientError(None, f"timeout: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientError(None, f"transport: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"{resp.status_code}: {resp.text[:200]}")
        if resp.status_code == 429 or resp.status_code >= 500:
            retry_after = None
            try:
                retry_after = float(resp.headers.get("retry-after", ""))
            except ValueError:
                pass
            raise TransientError(resp.status_code, resp.text, retry_after)
        if resp.status_code >= 400:
            raise ProviderError(resp.status_code, resp.text)
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError(resp.status_code, f"non-JSON body: {resp.text[:200]}") from exc

    def complete(self, request: ChatRequest) -> str:
        data = self._post("/chat/completions", {
            "model": request.model_id or self.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        })
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(200, f"unexpected response shape: {str(data)[:200]}") from exc

    def embed(self, text: str) -> list[float]:
        data = self._post("/embeddings", {"model": self.model_id, "input": text})
        try:
            return [float(x) for x in data["data"][0]["embedding"]]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(200, f"unexpected response shape: {str(data)[:200]}") from exc


_WORD = re.compile(r"[A-Za-z0-9][A-Za-z0-9\-/]*")
_STOP = frozenset(["a", "an", "and", "are", "as", "at", "be", "been", "by", "can", "for", "from", "has", "have", "in", "into", "is", "it", "its", "of", "on", "or", "that", "the", "their", "this", "to", "was", "were", "which", "with", "protein", "proteins", "human", "activity", "involved", "role", "plays", "play", "function", "functions", "also", "such", "other", "may", "within"])
_TABLE_LINE = re.compile(r"^(\S+) (Active|Inactive|Unspecified)\b", re.MULTILINE)
_NUMBERED = re.compile(r"^\s*(\d{1,2})[.):]\s*(?:\[BOS\])?\s*(\S+?)\s*(?:\[EOS\])?\s*$", re.MULTILINE)


def _load_pool() -> list[str]:
    text = resources.files("assaygen").joinpath("data/mock_pool.smi").read_text(encoding="utf-8")
    return [line.split()[0] for line in text.splitlines() if line.strip()]


def _content_words(text: str) -> list[str]:
    seen: dict[str, None] = {}
    for w in _WORD.findall(text):
        lw = w.lower().strip("-/")
        if len(lw) >= 3 and lw not in _STOP and not lw.isdigit():
            seen.setdefault(lw, None)
    return list(seen)


def _section(prompt: str, heading: str, stop: str | None = None) -> str:
    i = prompt.rfind(heading)
    if i < 0:
        return ""
    body = prompt[i + len(heading):]
    if stop is not None and stop in body:
        body = body[:body.index(stop)]
    return body.strip()


class MockProvider:
    """Offline provider: fixture replies keyed by prompt hash, else a scripted reply.

    The scripted fallback recognises the prompt kinds this package sends
    (summary, relevance vote, keyword extraction, optimization, generation)
    and answers in the expected shape.  Everything derives from ``seed``, the
    prompt text and ``sample_index``, so identical calls give identical text.
    """

    def __init__(self, seed: int = 0, fixtures: Mapping[str, str] | str | Path | None = None,
                 dim: int = 256, invalid_rate: float = 0.1, model_id: str = "mock"):
        self.seed = seed
        self.dim = dim
        self.invalid_rate = invalid_rate
        self.model_id = model_id
        if isinstance(fixtures, (str, Path)):
            fixtures = json.loads(Path(fixtures).read_text(encoding="utf-8"))
        self.fixtures: dict[str, str] = dict(fixtures or {})
        self._pool = _load_pool()

    @staticmethod
    def fixture_key(prompt: str, sample_index: int | None = None) -> str:
        h = sha256_text(prompt)
        return h if sample_index is None else f"{h}:{sample_index}"

    def _rng(self, *parts: object) -> random.Random:
        return random.Random("|".join(str(p) for p in (self.seed, *parts)))

    def complete(self, request: ChatRequest) -> str:
        p = request.prompt
        for key in (self.fixture_key(p, request.sample_index), self.fixture_key(p)):
            if key in self.fixtures:
                return self.fixtures[key]
        if '"CounterScreen"' in p:
            return self._summary(p)
        if '"Relevant"' in p:
            return self._relevance(p)
        if p.startswith("Extract the protein/phenotype keywords"):
            return ", ".join(_content_words(p.split("\n\n", 1)[-1])[:6])
        if "optimize the following ten candidate SMILES" in p:
            return self._optimize(p, request.sample_index)
        return self._generate(p, request.sample_index)

    def _summary(self, p: str) -> str:
        payload = _section(p, "BioAssay JSON\n")
        try:
            doc = json.loads(payload)
            text = " ".join(str(doc.get(k, "")) for k in ("title", "description", "comment"))
        except ValueError:
            text = payload
        first = re.split(r"(?<=[.!?])\s", text.strip(), maxsplit=1)[0][:300] or "No description."
        counter = bool(re.search(r"counter[\s-]?screen|off-target|interference", text, re.IGNORECASE))
        reply = {
            "BioAssay_Summary": f"This assay examines: {first}",
            "Assay_Type": "Enzymatic Inhibition" if re.search(r"inhibit|IC50", text, re.IGNORECASE) else "Binding",
            "Summary_of_Observations": "Activity is reported per compound; see the data table.",
            "CounterScreen": "True" if counter else "False",
        }
        return "Here is the extracted information.\n```json\n" + json.dumps(reply, indent=2) + "\n```\n"

    def _relevance(self, p: str) -> str:
        query = set(_content_words(_section(p, "Query Protein\n", "BioAssay JSON")))
        assay = set(_content_words(_section(p, "BioAssay JSON\n")))
        verdict = "True" if query & assay else "False"
        return "```json\n{\n  \"Relevant\": \"" + verdict + "\"\n}\n```"

    def _pick(self, rng: random.Random, context: Sequence[str]) -> str:
        if context and rng.random() < 0.3:
            smi = rng.choice(context)
        else:
            smi = rng.choice(self._pool)
        if rng.random() < self.invalid_rate:
            smi += "1"  # an unclosed ring label: never parses
        return smi

    def _generate(self, p: str, sample_index: int) -> str:
        rng = self._rng(sha256_text(p), sample_index)
        actives = [m.group(1) for m in _TABLE_LINE.finditer(p) if m.group(2) == "Active"]
        lines = ["1. BioAssay Understanding & Analysis",
                 "The supplied assays were read for scaffolds shared by the active compounds.",
                 "", "3. Generated Molecules"]
        lines += [f"{i}. [BOS] {self._pick(rng, actives)} [EOS]" for i in range(1, 11)]
        lines += ["", "4. Justification for Molecular Selection",
                  "Candidates keep the recurring scaffolds of the listed actives."]
        return "\n".join(lines) + "\n"

    def _optimize(self, p: str, sample_index: int) -> str:
        rng = self._rng("opt", sha256_text(p), sample_index)
        block = _section(p, "to reduce their likelihood of interacting with the target.\n",
                         "The output should follow")
        inputs = [m.group(2) for m in _NUMBERED.finditer(block)]
        out = []
        for i, smi in enumerate(inputs[:10], 1):
            new = ("C" + smi) if rng.random() < 0.5 else ("O" + smi)
            out.append(f"{i}. [BOS] {new} [EOS]")
        return "Optimized candidates:\n" + "\n".join(out) + "\n"

    def embed(self, text: str) -> np.ndarray:
        """Signed feature hashing of word tokens plus a small text-seeded jitter, normalized."""
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in re.findall(r"[a-z0-9]+", text.lower()):
            h = int.from_bytes(hashlib.blake2b(f"{self.seed}|{tok}".encode(), digest_size=8).digest(), "little")
            vec[h % self.dim] += 1.0 if (h >> 32) & 1 else -1.0
        seed = int.from_bytes(hashlib.blake2b(f"{self.seed}||{text}".encode(), digest_size=8).digest(), "little")
        vec += 1e-3 * np.random.default_rng(seed).standard_normal(self.dim)
        return vec / np.linalg.norm(vec)


def make_provider(config: ProviderConfig, seed: int = 0) -> Provider:
    if config.kind == "mock":
        return MockProvider(seed=seed, model_id=config.model_id)
    return HttpProvider(config)


# ---------------------------------------------------------------------------
# gateway


class TokenBucket:
    """Classic token bucket; ``acquire`` blocks (via ``sleep``) until a token is free."""

    def __init__(self, rate_per_second: float, capacity: float | None = None,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        if rate_per_second <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate_per_second
        self.capacity = capacity if capacity is not None else max(1.0, rate_per_second)
        self._tokens = self.capacity
        self._clock, self._sleep = clock, sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            self._sleep(wait)


_global_slots = threading.BoundedSemaphore(4)


def set_global_parallelism(n: int) -> None:
    """Cap on provider calls in flight across all gateways in this process."""
    global _global_slots
    if n < 1:
        raise ValueError("parallelism must be >= 1")
    _global_slots = threading.BoundedSemaphore(n)


@dataclass
class CallStats:
    calls: int = 0
    retries: int = 0
    failures: int = 0


class CallLog:
    """Thread-safe JSON-lines audit log of provider calls."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def write(self, entry: Mapping[str, Any]) -> None:
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")


class Gateway:
    """Retrying, rate-limited front for one provider; shareable across threads."""

    def __init__(self, provider: Provider, *, max_retries: int = 3, backoff_base: float = 0.5,
                 backoff_cap: float = 30.0, requests_per_minute: float | None = None,
                 call_log: CallLog | str | Path | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 defaults: ChatRequest | None = None):
        if not 0 <= max_retries <= MAX_RETRIES_CAP:
            raise ValueError(f"max_retries must be in [0, {MAX_RETRIES_CAP}]")
        self.provider = provider
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self._sleep = sleep
        self._bucket = TokenBucket(requests_per_minute / 60.0, sleep=sleep) if requests_per_minute else None
        self.call_log = CallLog(call_log) if isinstance(call_log, (str, Path)) else call_log
        self.stats = CallStats()
        self._stats_lock = threading.Lock()
        self.defaults = defaults

    @classmethod
    def from_config(cls, config: ProviderConfig, *, seed: int = 0, provider: Provider | None = None,
                    **kwargs: Any) -> Gateway:
        provider = provider or make_provider(config, seed)
        defaults = ChatRequest("-", config.temperature, config.max_output_tokens, config.model_id)
        return cls(provider, max_retries=config.max_retries,
                   requests_per_minute=config.requests_per_minute, defaults=defaults, **kwargs)

    @property
    def model_id(self) -> str:
        return self.provider.model_id

    def request(self, prompt: str, sample_index: int = 0) -> ChatRequest:
        """A request for ``prompt`` carrying this gateway's configured sampling defaults."""
        d = self.defaults
        if d is None:
            return ChatRequest(prompt, model_id=self.model_id, sample_index=sample_index)
        return ChatRequest(prompt, d.temperature, d.max_output_tokens, d.model_id, sample_index)

    def _backoff(self, attempt: int, retry_after: float | None) -> float:
        delay = min(self.backoff_cap, self.backoff_base * (2 ** attempt))
        return max(delay, retry_after or 0.0)

    def _call(self, op: str, fn: Callable[[], Any], key: str, extra: Mapping[str, Any]) -> Any:
        attempt = 0
        t0 = time.perf_counter()
        status = "ok"
        result: Any = None
        try:
            while True:
                if self._bucket is not None:
                    self._bucket.acquire()
                try:
                    with _global_slots:
                        result = fn()
                    return result
                except TransientError as exc:
                    if attempt >= self.max_retries:
                        status = f"failed:{exc.status}"
                        if exc.status == 429:
                            raise RateLimited(429, exc.body) from exc
                        if exc.status is None:
                            raise Timeout(exc.body) from exc
                        raise ProviderError(exc.status, exc.body) from exc
                    self._sleep(self._backoff(attempt, exc.retry_after))
                    attempt += 1
                except GatewayError as exc:
                    status = f"failed:{type(exc).__name__}"
                    raise
        finally:
            with self._stats_lock:
                self.stats.calls += 1
                self.stats.retries += attempt
                self.stats.failures += status != "ok"
            if self.call_log is not None:
                entry = {"op": op, "model_id": self.model_id, "prompt_sha256": key,
                         "attempts": attempt + 1, "retries": attempt, "status": status,
                         "elapsed_s": round(time.perf_counter() - t0, 6), **extra}
                if op == "chat" and status == "ok":
                    entry["response"] = result
                self.call_log.write(entry)

    def chat(self, request: ChatRequest | str) -> str:
        if isinstance(request, str):
            request = self.request(request)
        return self._call("chat", lambda: self.provider.complete(request), sha256_text(request.prompt),
                          {"sample_index": request.sample_index, "temperature": request.temperature,
                           "max_output_tokens": request.max_output_tokens})

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("text must be non-empty")
        vec = self._call("embed", lambda: self.provider.embed(text), sha256_text(text), {})
        return np.asarray(vec, dtype=np.float64)


# ---------------------------------------------------------------------------
# structured output


_MAX_CANDIDATES = 256


def _balanced_end(text: str, start: int) -> int | None:
    """Index just past the brace matching ``text[start]``, honouring JSON strings."""
    depth, i, in_str = 0, start, False
    while i < len(text):
        ch = text[i]
        if in_str:
            if ch == "\\":
                i += 1
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return None


def _strip_comments(text: str) -> str:
    out, i, in_str = [], 0, False
    while i < len(text):
        ch = text[i]
        if in_str:
            out.append(ch)
            if ch == "\\" and i + 1 < len(text):
                out.append(text[i + 1])
                i += 1
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
            out.append(ch)
        elif text.startswith("//", i):
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def _lenient_load(chunk: str) -> Any:
    cleaned = _strip_comments(chunk)
    cleaned = re.sub(r",\s*([}\]])", r"\1", cleaned)
    cleaned = re.sub(r"(:\s*)(True|False|None)\b", lambda m: m.group(1) + '"' + m.group(2) + '"', cleaned)
    return json.loads(cleaned)


def normalize_bool(value: Any) -> str | None:
    """``"True"``/``"False"`` for boolean-like values, else ``None``."""
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, str) and value.strip().lower() in ("true", "false"):
        return "True" if value.strip().lower() == "true" else "False"
    return None


def as_bool(value: str) -> bool:
    b = normalize_bool(value)
    if b is None:
        raise ValueError(f"not a boolean value: {value!r}")
    return b == "True"


def _as_text(value: Any) -> str:
    b = normalize_bool(value)
    if b is not None:
        return b
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    return json.dumps(value, ensure_ascii=False)


def extract_structured(text: str, required_keys: Iterable[str] = ()) -> dict[str, str]:
    """Return the first JSON object found in ``text`` with every value as text.

    Objects inside Markdown code fences are found like any other.  A lenient
    second pass tolerates ``//`` comments, trailing commas and bare
    ``True``/``False``.  Boolean-like values come back as ``"True"``/``"False"``.
    """
    decoder = json.JSONDecoder()
    found: dict[str, Any] | None = None
    tried = 0
    start = text.find("{")
    while start != -1 and tried < _MAX_CANDIDATES:
        tried += 1
        obj: Any = None
        try:
            obj, _ = decoder.raw_decode(text, start)
        except (ValueError, RecursionError):
            end = _balanced_end(text, start)
            if end is not None:
                try:
                    obj = _lenient_load(text[start:end])
                except (ValueError, RecursionError):
                    obj = None
        if isinstance(obj, dict):
            found = obj
            break
        start = text.find("{", start + 1)
    if found is None:
        raise NoObjectFound("no JSON object in text")
    out = {str(k): _as_text(v) for k, v in found.items()}
    for key in required_keys:
        if key not in out:
            raise MissingKey(key)
    return out


__all__ = [
    "AuthError", "CallLog", "ChatRequest", "Gateway", "GatewayError", "HttpProvider", "MissingKey",
    "MockProvider", "NoObjectFound", "ProviderConfig", "ProviderError", "RateLimited", "Timeout",
    "TokenBucket", "TransientError", "as_bool", "extract_structured", "make_provider",
    "normalize_bool", "set_global_parallelism",
]
