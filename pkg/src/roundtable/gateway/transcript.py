"""JSON Lines call transcripts and replay from them."""
from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import defaultdict, deque
from pathlib import Path
from typing import Sequence

from .backends import AgentHandle, Backend, GenerationParams
from .errors import ReplayMiss, StorageFailure
from .prompts import Message


def conversation_key(agent_id: str, messages: Sequence[Message], params: GenerationParams) -> str:
    blob = json.dumps({"agent_id": agent_id,
                       "messages": [m.to_dict() for m in messages],
                       "model": params.model, "temperature": params.temperature,
                       "max_tokens": params.max_tokens},
                      sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class TranscriptStore:
    """Append-only JSON Lines file, safe for concurrent writers in one process."""

    _locks: dict[str, threading.Lock] = defaultdict(threading.Lock)

    def __init__(self, path):
        self.path = Path(path)
        self._lock = self._locks[str(self.path.resolve())]

    def append(self, entry: dict) -> None:
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True)
        try:
            with self._lock:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
        except OSError as exc:
            raise StorageFailure(f"cannot write transcript {self.path}: {exc}") from exc

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        with self.path.open(encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]


def record_transcript(store: TranscriptStore, handle: AgentHandle, conversation: Sequence[Message],
                      reply: str, started: float | None = None,
                      finished: float | None = None) -> dict:
    entry = {
        "key": conversation_key(handle.agent_id, conversation, handle.params),
        "agent_id": handle.agent_id,
        "messages": [m.to_dict() for m in conversation],
        "params": handle.params.to_dict(),
        "reply": reply,
        "started_at": started if started is not None else time.time(),
        "finished_at": finished if finished is not None else time.time(),
    }
    store.append(entry)
    return entry


class RecordingBackend:
    """Passes calls through to ``inner`` and logs every one to a transcript."""

    def __init__(self, inner: Backend, store: TranscriptStore):
        self.inner = inner
        self.store = store

    def complete(self, agent_id, messages, params):
        started = time.time()
        reply = self.inner.complete(agent_id, messages, params)
        handle = AgentHandle(agent_id, self.inner, params)
        record_transcript(self.store, handle, messages, reply, started, time.time())
        return reply


class ReplayBackend:
    """Serves replies recorded in a transcript, matched on the exact conversation."""

    def __init__(self, path):
        self._replies: dict[str, deque] = defaultdict(deque)
        for entry in TranscriptStore(path).entries():
            self._replies[entry["key"]].append(entry["reply"])

    def complete(self, agent_id, messages, params):
        key = conversation_key(agent_id, messages, params)
        queue = self._replies.get(key)
        if not queue:
            raise ReplayMiss(agent_id, key)
        return queue.popleft()
