"""Single point of contact with a chat-completion + embedding endpoint.

Speaks the OpenAI-compatible JSON protocol so any local model server can
be plugged in. Every request is cached on disk keyed by a SHA-256 of the
canonicalized request, which makes interrupted runs resumable and repeat
runs free. A deterministic mock backend keeps the whole pipeline runnable
offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyResponse, InvalidInput, ProtocolError, RequestFailed

log = logging.getLogger(__name__)

_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)

MOCK_EMBED_DIM = 64


def strip_thinking(text):
    """Remove <think>...</think> blocks; returns (clean_text, thinking or None).

    Idempotent: stripping already-clean text is a no-op.
    """
    blocks = _THINK_RE.findall(text)
    clean = _THINK_RE.sub("", text).strip()
    return clean, ("\n".join(b.strip() for b in blocks) if blocks else None)


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_content: str
    temperature: float = 0.0
    max_tokens: int = 2048
    model_name: str = ""

    def __post_init__(self):
        if not self.system_prompt or not self.user_content:
            raise InvalidInput("chat prompts must be non-empty")
        if self.temperature < 0:
            raise InvalidInput("temperature must be >= 0")


@dataclass
class ChatResponse:
    raw_text: str
    thinking_text: str | None = None
    usage: dict = field(default_factory=dict)
    latency_ms: float = 0.0
    cached: bool = False


@dataclass
class EmbeddingVector:
    values: np.ndarray
    source_text: str
    model_name: str


class JsonlCache:
    """Append-only JSONL store; updates land via temp-file rename."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        self._entries = {}
        if path and os.path.exists(path):
            with open(path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self._entries[rec["key"]] = rec

    def get(self, key):
        with self._lock:
            rec = self._entries.get(key)
            return rec["response"] if rec else None

    def put(self, key, request, response):
        rec = {
            "key": key,
            "request": request,
            "response": response,
            "timestamp": time.time(),
        }
        with self._lock:
            self._entries[key] = rec
            if self.path:
                tmp = self.path + ".tmp"
                with open(tmp, "w") as fh:
                    for r in self._entries.values():
                        fh.write(json.dumps(r, sort_keys=True) + "\n")
                os.replace(tmp, self.path)


def _chat_key(request: ChatRequest) -> str:
    canon = json.dumps(
        {
            "kind": "chat",
            "model": request.model_name,
            "system": request.system_prompt,
            "user": request.user_content,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        },
        sort_keys=True,
    )
    return hashlib.sha256(canon.encode()).hexdigest()


def _embed_key(model, text) -> str:
    canon = json.dumps({"kind": "embed", "model": model, "text": text}, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


class HttpBackend:
    """OpenAI-compatible HTTP client with retry + exponential backoff."""

    def __init__(self, endpoint_url, api_key="", max_retries=3, backoff_s=1.0, timeout_s=120):
        self.endpoint_url = endpoint_url.rstrip("/")
        self.api_key = api_key
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s

    def _post(self, route, payload):
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_err = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(
                    f"{self.endpoint_url}{route}",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout_s,
                )
            except requests.RequestException as exc:
                last_err = exc
            else:
                if resp.status_code == 200:
                    return resp.json()
                last_err = RequestFailed(f"HTTP {resp.status_code}: {resp.text[:200]}")
                if 400 <= resp.status_code < 500:
                    break  # client errors will not improve on retry
            if attempt < self.max_retries:
                time.sleep(self.backoff_s * 2**attempt)
        raise RequestFailed(f"{route} failed after retries: {last_err}")

    def chat(self, request: ChatRequest) -> str:
        data = self._post(
            "/chat/completions",
            {
                "model": request.model_name,
                "messages": [
                    {"role": "system", "content": request.system_prompt},
                    {"role": "user", "content": request.user_content},
                ],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            },
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat completion payload: {exc}") from exc

    def embed(self, model, texts):
        data = self._post("/embeddings", {"model": model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda d: d["index"])
            return [list(map(float, r["embedding"])) for r in rows]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embeddings payload: {exc}") from exc


def mock_embedding(text, seed=0, dim=MOCK_EMBED_DIM):
    """Deterministic unit vector from a seeded hash of the text."""
    digest = hashlib.sha256(f"{seed}:{text}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).tolist()


class MockBackend:
    """Offline stand-in: canned replies plus rule-based agent behavior."""

    def __init__(self, seed=0, responder=None):
        self.seed = seed
        self._canned = {}
        if responder is None:
            from .mock_llm import MockResponder

            responder = MockResponder(seed=seed)
        self.responder = responder

    def register(self, user_content, reply):
        """Pin an exact user_content -> reply mapping (tests)."""
        self._canned[user_content] = reply

    def chat(self, request: ChatRequest) -> str:
        if request.user_content in self._canned:
            return self._canned[request.user_content]
        return self.responder.reply(request.system_prompt, request.user_content)

    def embed(self, model, texts):
        return [mock_embedding(t, seed=self.seed) for t in texts]


class LLMGateway:
    """Cached, concurrency-limited front end over a chat/embedding backend."""

    def __init__(self, config, backend=None):
        self.config = config
        if backend is None:
            if config.mock_mode:
                backend = MockBackend(seed=config.seed)
            else:
                backend = HttpBackend(
                    config.endpoint_url,
                    api_key=config.api_key(),
                    max_retries=config.max_retries,
                )
        self.backend = backend
        cache_path = None
        if config.cache_dir:
            os.makedirs(config.cache_dir, exist_ok=True)
            cache_path = os.path.join(config.cache_dir, "llm_cache.jsonl")
        self.cache = JsonlCache(cache_path)
        self.network_calls = 0
        self.cache_hits = 0
        self._counter_lock = threading.Lock()

    def chat(self, request: ChatRequest) -> ChatResponse:
        key = _chat_key(request)
        cached = self.cache.get(key)
        if cached is not None:
            with self._counter_lock:
                self.cache_hits += 1
            return ChatResponse(
                raw_text=cached["raw_text"],
                thinking_text=cached.get("thinking_text"),
                usage=cached.get("usage", {}),
                cached=True,
            )
        start = time.monotonic()
        text = self.backend.chat(request)
        latency = (time.monotonic() - start) * 1000.0
        with self._counter_lock:
            self.network_calls += 1
        if not text or not text.strip():
            raise EmptyResponse("endpoint returned an empty completion")
        raw, thinking = strip_thinking(text)
        usage = {
            "prompt_tokens": len(request.system_prompt.split())
            + len(request.user_content.split()),
            "completion_tokens": len(text.split()),
        }
        self.cache.put(
            key,
            {
                "system": request.system_prompt,
                "user": request.user_content,
                "model": request.model_name,
                "temperature": request.temperature,
            },
            {"raw_text": raw, "thinking_text": thinking, "usage": usage},
        )
        return ChatResponse(raw_text=raw, thinking_text=thinking, usage=usage, latency_ms=latency)

    def chat_many(self, requests):
        """Run chats concurrently (bounded); results keep request order."""
        if not requests:
            return []
        workers = max(1, self.config.max_concurrency)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.chat, requests))

    def embed(self, texts):
        if not texts:
            raise InvalidInput("embed() requires a non-empty list of texts")
        model = self.config.embed_model
        out = [None] * len(texts)
        missing = []
        for i, text in enumerate(texts):
            cached = self.cache.get(_embed_key(model, text))
            if cached is not None:
                out[i] = cached["values"]
            else:
                missing.append(i)
        if missing:
            vectors = self.backend.embed(model, [texts[i] for i in missing])
            with self._counter_lock:
                self.network_calls += 1
            for i, vec in zip(missing, vectors):
                self.cache.put(
                    _embed_key(model, texts[i]),
                    {"model": model, "text": texts[i]},
                    {"values": vec},
                )
                out[i] = vec
        dims = {len(v) for v in out}
        if len(dims) != 1:
            raise ProtocolError(f"embedding dimension mismatch in batch: {sorted(dims)}")
        return [
            EmbeddingVector(values=np.asarray(v, dtype=float), source_text=t, model_name=model)
            for v, t in zip(out, texts)
        ]
