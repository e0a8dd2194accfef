from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .backends import ChatBackend

ROLES = ("system", "user", "assistant")
_WS = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


class ConversationError(ValueError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConversationError(f"unknown role {self.role!r}")
        # assistant replies may legitimately be empty (the model said nothing)
        if self.role == "user" and not self.content.strip():
            raise ConversationError("user message must not be empty")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_dict(cls, d: dict) -> ChatMessage:
        return cls(d["role"], d["content"])


@dataclass
class ChatConversation:
    """Message history bound to one backend.

    The ``conversation_id`` names the transcript stream this conversation
    records into or replays from, so concurrent conversations stay separable.
    """

    backend: ChatBackend
    conversation_id: str = "default"
    system: str | None = None
    metadata: dict[str, Any] = field(default_factory=dict)
    messages: list[ChatMessage] = field(default_factory=list)

    def __post_init__(self):
        if self.system is not None and not self.messages:
            self.messages.append(ChatMessage("system", self.system))
        _check_alternation(self.messages)
        self.metadata.setdefault("backend", getattr(self.backend, "backend_id", type(self.backend).__name__))
        model = getattr(self.backend, "model", None)
        if model is not None:
            self.metadata.setdefault("model", model)

    @property
    def backend_id(self) -> str:
        return self.metadata["backend"]

    def send(self, prompt: str) -> str:
        """Send one user prompt with the full history; append prompt and reply."""
        user = ChatMessage("user", prompt)
        request = [*self.messages, user]
        _check_alternation(request)
        reply = self.backend.complete(request, stream=self.conversation_id)
        self.messages.extend([user, ChatMessage("assistant", reply)])
        return reply

    def user_prompts(self) -> list[str]:
        return [m.content for m in self.messages if m.role == "user"]

    def to_dict(self) -> dict:
        return {
            "conversation_id": self.conversation_id,
            "metadata": dict(self.metadata),
            "messages": [m.to_dict() for m in self.messages],
        }


def send(conversation: ChatConversation, prompt: str) -> str:
    return conversation.send(prompt)


def _check_alternation(messages: list[ChatMessage]) -> None:
    body = messages
    if messages and messages[0].role == "system":
        body = messages[1:]
    for i, m in enumerate(body):
        expected = "user" if i % 2 == 0 else "assistant"
        if m.role != expected:
            raise ConversationError(
                f"message {i} has role {m.role!r}; expected {expected!r} (system only at position 0)"
            )
