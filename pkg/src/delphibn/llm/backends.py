"""Chat-completion backends: live HTTP, scripted, recording and replay."""

from __future__ import annotations

import logging
import os
import threading
import time
from collections import defaultdict, deque
from collections.abc import Callable, Mapping, Sequence
from typing import Protocol

import httpx

from .conversation import ChatMessage, normalize_ws
from .transcript import Transcript

log = logging.getLogger(__name__)

API_KEY_ENV = "LLM_API_KEY"
DEFAULT_TEMPERATURE = 0.7


class BackendError(RuntimeError):
    def __init__(self, message: str, *, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class ReplayError(RuntimeError):
    """Replay could not reproduce the recorded exchange."""


class ReplayDivergenceError(ReplayError):
    def __init__(self, stream: str, index: int, expected: str, actual: str):
        super().__init__(
            f"replay diverged on stream {stream!r} at exchange {index}:\n"
            f"--- recorded\n{expected}\n--- requested\n{actual}"
        )
        self.stream = stream
        self.index = index
        self.expected = expected
        self.actual = actual


class ReplayExhaustedError(ReplayError):
    pass


class ChatBackend(Protocol):
    backend_id: str

    def complete(self, messages: Sequence[ChatMessage], *, stream: str = "default") -> str: ...


class OpenAIChatBackend:
    """Client for an OpenAI-compatible ``/v1/chat/completions`` endpoint.

    Transport errors, 429 and 5xx responses are retried with exponential
    backoff; after ``max_retries`` retries a retriable BackendError is raised.
    """

    backend_id = "live"

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        temperature: float = DEFAULT_TEMPERATURE,
        api_key: str | None = None,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        client: httpx.Client | None = None,
    ):
        self.url = base_url.rstrip("/") + "/v1/chat/completions"
        self.model = model
        self.temperature = temperature
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.max_retries = max_retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)

    def payload(self, messages: Sequence[ChatMessage]) -> dict:
        return {
            "model": self.model,
            "messages": [m.to_dict() for m in messages],
            "temperature": self.temperature,
        }

    def complete(self, messages: Sequence[ChatMessage], *, stream: str = "default") -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.url, json=self.payload(messages), headers=headers)
            except httpx.TransportError as exc:
                last = exc
                log.warning("chat completion transport error (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}", retriable=True)
                log.warning("chat completion HTTP %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:500]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"unexpected response body: {resp.text[:500]}") from exc
        raise BackendError(
            f"chat completion failed after {self.max_retries + 1} attempts: {last}", retriable=True
        ) from last


Responder = Callable[[Sequence[ChatMessage]], str]


class ScriptedBackend:
    """Deterministic stand-in for a model.

    ``script`` is either a callable taking the request messages, or a mapping
    from the (whitespace-normalized) last user prompt to a reply. Unmatched
    prompts get ``default``; with no default they raise KeyError.
    """

    backend_id = "scripted"

    def __init__(self, script: Responder | Mapping[str, str], *, default: str | None = None, model: str = "scripted"):
        self.model = model
        self.default = default
        if callable(script):
            self._respond = script
        else:
            table = {normalize_ws(k): v for k, v in script.items()}

            def lookup(messages):
                prompt = normalize_ws(messages[-1].content)
                if prompt in table:
                    return table[prompt]
                if self.default is not None:
                    return self.default
                raise KeyError(f"no scripted reply for prompt: {prompt[:120]!r}")

            self._respond = lookup

    @classmethod
    def from_rules(cls, rules: Sequence[Mapping], *, default: str | None = None, model: str = "scripted") -> ScriptedBackend:
        """Build from ``[{"contains": str | [str, ...], "reply": str}, ...]`` rules.

        A rule fires when every ``contains`` fragment occurs in the request
        (system and user text joined); the first firing rule wins.
        """
        compiled = []
        for rule in rules:
            frags = rule["contains"]
            frags = [frags] if isinstance(frags, str) else list(frags)
            compiled.append(([normalize_ws(f) for f in frags], rule["reply"]))

        def respond(messages):
            last_turn = [m for m in messages if m.role == "system"] + [messages[-1]]
            text = normalize_ws(" ".join(m.content for m in last_turn))
            for frags, reply in compiled:
                if all(f in text for f in frags):
                    return reply
            if default is not None:
                return default
            raise KeyError(f"no scripted rule matches prompt: {normalize_ws(messages[-1].content)[:120]!r}")

        return cls(respond, model=model)

    def complete(self, messages: Sequence[ChatMessage], *, stream: str = "default") -> str:
        return self._respond(list(messages))


class RecordingBackend:
    """Pass-through that logs every exchange to a Transcript."""

    def __init__(self, inner: ChatBackend, transcript: Transcript):
        self.inner = inner
        self.transcript = transcript
        self.backend_id = f"record({getattr(inner, 'backend_id', type(inner).__name__)})"
        self.model = getattr(inner, "model", None)

    def complete(self, messages: Sequence[ChatMessage], *, stream: str = "default") -> str:
        reply = self.inner.complete(messages, stream=stream)
        self.transcript.append(stream, list(messages), reply)
        return reply


def _render_request(messages: Sequence[ChatMessage]) -> str:
    return "\n".join(f"[{m.role}] {normalize_ws(m.content)}" for m in messages)


class ReplayBackend:
    """Serves recorded replies, per stream, in recording order.

    Each request must equal the recorded one message by message after
    whitespace normalization; otherwise ReplayDivergenceError.
    """

    backend_id = "replay"

    def __init__(self, transcript: Transcript, *, model: str | None = None):
        self.model = model
        self._queues: dict[str, deque] = defaultdict(deque)
        for entry in transcript.entries:
            self._queues[entry.stream].append(entry)
        self._served: dict[str, int] = defaultdict(int)
        self._lock = threading.Lock()

    def complete(self, messages: Sequence[ChatMessage], *, stream: str = "default") -> str:
        with self._lock:
            queue = self._queues[stream]
            index = self._served[stream]
            if not queue:
                raise ReplayExhaustedError(f"transcript has no more exchanges for stream {stream!r} (served {index})")
            entry = queue.popleft()
            self._served[stream] += 1
        want = [(m.role, normalize_ws(m.content)) for m in entry.request_messages]
        got = [(m.role, normalize_ws(m.content)) for m in messages]
        if want != got:
            raise ReplayDivergenceError(stream, index, _render_request(entry.request_messages), _render_request(messages))
        return entry.response_text

    def remaining(self) -> int:
        with self._lock:
            return sum(len(q) for q in self._queues.values())
