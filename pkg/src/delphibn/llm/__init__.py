from .backends import (
    API_KEY_ENV,
    DEFAULT_TEMPERATURE,
    BackendError,
    ChatBackend,
    OpenAIChatBackend,
    RecordingBackend,
    ReplayBackend,
    ReplayDivergenceError,
    ReplayError,
    ReplayExhaustedError,
    ScriptedBackend,
)
from .conversation import ChatConversation, ChatMessage, ConversationError, normalize_ws, send
from .jsonblock import JSONExtractionError, MalformedJSONError, NoJSONError, extract_json_block
from .transcript import Transcript, TranscriptEntry

__all__ = [
    "API_KEY_ENV",
    "DEFAULT_TEMPERATURE",
    "BackendError",
    "ChatBackend",
    "ChatConversation",
    "ChatMessage",
    "ConversationError",
    "JSONExtractionError",
    "MalformedJSONError",
    "NoJSONError",
    "OpenAIChatBackend",
    "RecordingBackend",
    "ReplayBackend",
    "ReplayDivergenceError",
    "ReplayError",
    "ReplayExhaustedError",
    "ScriptedBackend",
    "Transcript",
    "TranscriptEntry",
    "extract_json_block",
    "normalize_ws",
    "send",
]
