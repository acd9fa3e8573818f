"""Chat backends: live HTTP chat-completions, scripted replies, and wrappers.

A backend is anything with ``complete(agent_id, messages, params) -> str``.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import requests

from .errors import AuthMissing, BackendExhausted, BudgetExceeded, GatewayError, ScriptUnderflow
from .prompts import Message

log = logging.getLogger(__name__)

DEFAULT_KEY_ENV = "ROUNDTABLE_API_KEY"


@dataclass(frozen=True)
class GenerationParams:
    model: str = "gpt-4"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def to_dict(self) -> dict:
        return {"model": self.model, "temperature": self.temperature,
                "max_tokens": self.max_tokens, "timeout": self.timeout}


class Backend(Protocol):
    def complete(self, agent_id: str, messages: Sequence[Message],
                 params: GenerationParams) -> str: ...


@dataclass
class AgentHandle:
    agent_id: str
    backend: Backend
    params: GenerationParams = field(default_factory=GenerationParams)
    persona: str | None = None


def complete(handle: AgentHandle, conversation: Sequence[Message]) -> str:
    if not conversation:
        raise ValueError("conversation is empty")
    if conversation[0].role != "system":
        raise ValueError("conversation must start with a system message")
    return handle.backend.complete(handle.agent_id, list(conversation), handle.params)


class ScriptedBackend:
    """Serves canned replies per agent id, in order.

    Every call is kept in ``calls`` as ``(agent_id, messages)`` so tests can
    inspect the exact conversations an orchestration produced.
    """

    def __init__(self, scripts: Mapping[str, Iterable[str]] | None = None):
        self._scripts = {k: deque(v) for k, v in (scripts or {}).items()}
        self._served: dict[str, int] = defaultdict(int)
        self.calls: list[tuple[str, list[Message]]] = []

    def add(self, agent_id: str, *replies: str) -> None:
        self._scripts.setdefault(agent_id, deque()).extend(replies)

    def remaining(self, agent_id: str) -> int:
        return len(self._scripts.get(agent_id, ()))

    def complete(self, agent_id, messages, params=None) -> str:
        self.calls.append((agent_id, list(messages)))
        queue = self._scripts.get(agent_id)
        if not queue:
            raise ScriptUnderflow(agent_id, self._served[agent_id])
        self._served[agent_id] += 1
        return queue.popleft()

    def conversations(self, agent_id: str) -> list[list[Message]]:
        return [m for a, m in self.calls if a == agent_id]

    @classmethod
    def from_jsonl(cls, path, task_id: str | None = None,
                   strategy: str | None = None) -> "ScriptedBackend":
        """Load ``{"agent_id", "reply"}`` lines.

        Lines may carry ``task_id`` and/or ``strategy``; those only apply when
        they match the given values, lines without them apply everywhere.
        """
        backend = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    agent, reply = rec["agent_id"], rec["reply"]
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad script line ({exc})") from None
                if "task_id" in rec and rec["task_id"] != task_id:
                    continue
                if "strategy" in rec and rec["strategy"] != strategy:
                    continue
                backend.add(agent, reply)
        return backend


class RateLimiter:
    """Spaces requests at least ``1 / rate`` seconds apart across threads."""

    def __init__(self, rate: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / rate if rate else 0.0
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep

    def acquire(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            wait = self._next - now
            self._next = max(now, self._next) + self.interval
        if wait > 0:
            self._sleep(wait)


def backoff_delays(attempts: int, base: float, factor: float, ceiling: float) -> list[float]:
    return [min(base * factor ** k, ceiling) for k in range(attempts)]


class HttpBackend:
    """Chat-completion client for any OpenAI-compatible endpoint.

    Transient failures (429, 5xx, timeouts, dropped connections) are retried
    with exponential backoff. ``last_delays`` holds the sleeps of the most
    recent retry burst on the calling thread.
    """

    RETRY_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})

    def __init__(self, base_url: str = "https://api.openai.com/v1", *,
                 key_env: str = DEFAULT_KEY_ENV, api_key: str | None = None,
                 max_attempts: int = 5, base_delay: float = 1.0, factor: float = 2.0,
                 max_delay: float = 30.0, rate: float | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 session: requests.Session | None = None):
        key = api_key if api_key is not None else os.environ.get(key_env)
        if not key:
            raise AuthMissing(key_env)
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.base_url = base_url.rstrip("/")
        self._key = key
        self.max_attempts = max_attempts
        self.base_delay, self.factor, self.max_delay = base_delay, factor, max_delay
        self.limiter = RateLimiter(rate)
        self._sleep = sleep
        self._session = session or requests.Session()
        self._local = threading.local()

    @property
    def last_delays(self) -> list[float]:
        return list(getattr(self._local, "delays", []))

    def complete(self, agent_id, messages, params: GenerationParams) -> str:
        payload = {"model": params.model,
                   "messages": [m.to_dict() for m in messages],
                   "temperature": params.temperature,
                   "max_tokens": params.max_tokens}
        headers = {"Authorization": f"Bearer {self._key}", "Content-Type": "application/json"}
        delays = backoff_delays(self.max_attempts - 1, self.base_delay, self.factor,
                                self.max_delay)
        self._local.delays = used = []
        last_error = ""
        for attempt in range(self.max_attempts):
            if attempt:
                used.append(delays[attempt - 1])
                self._sleep(delays[attempt - 1])
            self.limiter.acquire()
            try:
                resp = self._session.post(f"{self.base_url}/chat/completions", json=payload,
                                          headers=headers, timeout=params.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("agent %s: attempt %d failed: %s", agent_id, attempt + 1, last_error)
                continue
            if resp.status_code in self.RETRY_STATUS:
                last_error = f"HTTP {resp.status_code}"
                log.warning("agent %s: attempt %d got %s", agent_id, attempt + 1, last_error)
                continue
            if resp.status_code >= 400:
                raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise GatewayError(f"malformed completion response: {resp.text[:200]}") from None
        raise BackendExhausted(self.max_attempts, last_error)


class CallBudget:
    """Wraps a backend and fails once more than ``limit`` calls were made."""

    def __init__(self, inner: Backend, limit: int):
        self.inner = inner
        self.limit = limit
        self.used = 0
        self._lock = threading.Lock()

    def complete(self, agent_id, messages, params):
        with self._lock:
            if self.used >= self.limit:
                raise BudgetExceeded(self.limit)
            self.used += 1
        return self.inner.complete(agent_id, messages, params)
