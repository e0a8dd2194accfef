"""Append-only exchange log, stored as JSON Lines."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .conversation import ChatMessage


@dataclass(frozen=True)
class TranscriptEntry:
    stream: str
    request_messages: tuple[ChatMessage, ...]
    response_text: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "stream": self.stream,
            "request_messages": [m.to_dict() for m in self.request_messages],
            "response_text": self.response_text,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TranscriptEntry:
        return cls(
            stream=d.get("stream", "default"),
            request_messages=tuple(ChatMessage.from_dict(m) for m in d["request_messages"]),
            response_text=d["response_text"],
            timestamp=d.get("timestamp", ""),
        )


class Transcript:
    """Thread-safe append-only list of exchanges, optionally mirrored to a file."""

    def __init__(self, entries=(), path: str | Path | None = None):
        self._entries: list[TranscriptEntry] = list(entries)
        self._lock = threading.Lock()
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("".join(json.dumps(e.to_dict(), ensure_ascii=False) + "\n" for e in self._entries), encoding="utf-8")

    @property
    def entries(self) -> tuple[TranscriptEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def append(self, stream: str, request: list[ChatMessage], response: str) -> TranscriptEntry:
        entry = TranscriptEntry(
            stream=stream,
            request_messages=tuple(request),
            response_text=response,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        with self._lock:
            self._entries.append(entry)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")
        return entry

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            lines = [json.dumps(e.to_dict(), ensure_ascii=False) + "\n" for e in self._entries]
        path.write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Transcript:
        entries = []
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entries.append(TranscriptEntry.from_dict(json.loads(line)))
        return cls(entries)
