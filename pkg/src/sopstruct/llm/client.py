"""Chat-completion clients: HTTP, recording, replay and scripted.

Every client exposes ``complete(messages) -> str``. Prompts are identified by
the SHA-256 of their rendered text, which is what transcripts store and what
the replay client looks responses up by.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import httpx

from ..errors import LlmError

ENDPOINT_ENV = "SOPSTRUCT_LLM_ENDPOINT"
KEY_ENV = "SOPSTRUCT_LLM_KEY"

Messages = Sequence[dict[str, str]]


class ChatClient(Protocol):
    def complete(self, messages: Messages) -> str: ...


def prompt_text(messages: Messages) -> str:
    return "".join(f"[{m['role']}]\n{m['content']}\n" for m in messages)


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class LlmClientSpec:
    endpoint: str
    model: str
    temperature: float = 0.0
    max_retries: int = 2
    timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_dict(cls, raw: dict) -> LlmClientSpec:
        raw = dict(raw)
        endpoint = os.environ.get(ENDPOINT_ENV) or raw.pop("endpoint", "")
        raw.pop("endpoint", None)
        return cls(endpoint=endpoint, **raw)


@dataclass(frozen=True)
class TranscriptEntry:
    prompt_hash: str
    prompt_text: str
    response_text: str
    latency_ms: float = 0.0


class LlmTranscript:
    """Append-only record of prompts and responses, stored as JSON lines."""

    def __init__(self, entries: Iterable[TranscriptEntry] = ()):
        self._entries: list[TranscriptEntry] = list(entries)
        self._lock = threading.Lock()

    def append(self, entry: TranscriptEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    def extend(self, other: LlmTranscript) -> None:
        for e in other:
            self.append(e)

    def __iter__(self):
        return iter(list(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(e), ensure_ascii=False) + "\n" for e in self._entries)

    def save(self, path: str | Path, append: bool = False) -> None:
        with open(path, "a" if append else "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> LlmTranscript:
        entries = []
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                entries.append(TranscriptEntry(**raw))
            except (json.JSONDecodeError, TypeError) as exc:
                raise LlmError(f"{path}:{n}: bad transcript line") from exc
        return cls(entries)


class HttpChatClient:
    """Client for OpenAI-style ``/chat/completions`` endpoints."""

    def __init__(self, spec: LlmClientSpec, api_key: str | None = None,
                 transport: httpx.BaseTransport | None = None, sleep: Callable[[float], None] = time.sleep):
        if not spec.endpoint:
            raise LlmError(f"no LLM endpoint configured (set {ENDPOINT_ENV} or llm.endpoint)")
        self.spec = spec
        self.api_key = api_key if api_key is not None else os.environ.get(KEY_ENV)
        self._http = httpx.Client(timeout=spec.timeout_s, transport=transport)
        self._sleep = sleep

    def complete(self, messages: Messages) -> str:
        body = {"model": self.spec.model, "messages": list(messages), "temperature": self.spec.temperature}
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: BaseException | None = None
        for attempt in range(self.spec.max_retries + 1):
            if attempt:
                self._sleep(min(2 ** (attempt - 1), 30))
            try:
                resp = self._http.post(self.spec.endpoint, json=body, headers=headers)
                if resp.status_code >= 500 or resp.status_code == 429:
                    last = LlmError(f"HTTP {resp.status_code}")
                    continue
                resp.raise_for_status()
                return _first_choice(resp.json())
            except httpx.HTTPStatusError as exc:
                raise LlmError(f"HTTP {exc.response.status_code} from {self.spec.endpoint}", exc) from exc
            except (httpx.TransportError, ValueError) as exc:
                last = exc
        raise LlmError(f"LLM call failed after {self.spec.max_retries + 1} attempts: {last}", last)


def _first_choice(payload: dict) -> str:
    try:
        choice = payload["choices"][0]
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError("response has no choices") from exc
    if "message" in choice:
        return choice["message"]["content"]
    return choice["text"]


class RecordingClient:
    """Wraps a client and appends every exchange to a transcript.

    With ``timed=False`` latencies are recorded as 0 so that transcripts of
    replayed runs are reproducible byte for byte.
    """

    def __init__(self, inner: ChatClient, transcript: LlmTranscript | None = None, timed: bool = True):
        self.inner = inner
        self.transcript = transcript if transcript is not None else LlmTranscript()
        self.timed = timed

    def complete(self, messages: Messages) -> str:
        text = prompt_text(messages)
        t0 = time.perf_counter()
        response = self.inner.complete(messages)
        self.transcript.append(TranscriptEntry(prompt_hash(text), text, response,
                                               round((time.perf_counter() - t0) * 1000, 3) if self.timed else 0.0))
        return response


class ReplayClient:
    """Serves responses from a recorded transcript, keyed by prompt hash.

    Repeated prompts get their recorded responses in order; the last one is
    reused once a queue runs dry. Unknown prompts raise LlmError.
    """

    def __init__(self, transcript: LlmTranscript):
        self._queues: dict[str, deque[str]] = defaultdict(deque)
        self._last: dict[str, str] = {}
        for e in transcript:
            self._queues[e.prompt_hash].append(e.response_text)
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> ReplayClient:
        return cls(LlmTranscript.load(path))

    def complete(self, messages: Messages) -> str:
        key = prompt_hash(prompt_text(messages))
        with self._lock:
            queue = self._queues.get(key)
            if queue:
                self._last[key] = queue.popleft()
                return self._last[key]
            if key in self._last:
                return self._last[key]
        raise LlmError(f"no recorded response for prompt {key[:12]}")


class ScriptedClient:
    """Answers from a function of the prompt text, or from a fixed list in order."""

    def __init__(self, responder: Callable[[str], str] | Sequence[str]):
        if callable(responder):
            self._fn = responder
        else:
            answers = deque(responder)
            lock = threading.Lock()

            def pop(_: str) -> str:
                with lock:
                    if not answers:
                        raise LlmError("scripted client ran out of responses")
                    return answers.popleft()

            self._fn = pop
        self.calls = 0

    def complete(self, messages: Messages) -> str:
        self.calls += 1
        return self._fn(prompt_text(messages))


@dataclass
class FailingClient:
    """Raises LlmError for prompts containing any of ``triggers``; otherwise delegates."""

    inner: ChatClient
    triggers: tuple[str, ...] = field(default_factory=tuple)

    def complete(self, messages: Messages) -> str:
        text = prompt_text(messages)
        if any(t in text for t in self.triggers):
            raise LlmError("simulated endpoint failure")
        return self.inner.complete(messages)
