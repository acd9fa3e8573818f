from .backends import (AgentHandle, Backend, CallBudget, GenerationParams, HttpBackend,
                       RateLimiter, ScriptedBackend, backoff_delays, complete)
from .errors import (AuthMissing, BackendExhausted, BudgetExceeded, GatewayError, MissingBinding,
                     ReplayMiss, ScriptUnderflow, StorageFailure)
from .prompts import TEMPLATES, Message, PromptTemplate, get_template, render_prompt
from .transcript import (RecordingBackend, ReplayBackend, TranscriptStore, conversation_key,
                         record_transcript)

__all__ = [
    "AgentHandle", "Backend", "CallBudget", "GenerationParams", "HttpBackend", "RateLimiter",
    "ScriptedBackend", "backoff_delays", "complete", "AuthMissing", "BackendExhausted",
    "BudgetExceeded", "GatewayError", "MissingBinding", "ReplayMiss", "ScriptUnderflow",
    "StorageFailure", "TEMPLATES", "Message", "PromptTemplate", "get_template", "render_prompt",
    "RecordingBackend", "ReplayBackend", "TranscriptStore", "conversation_key",
    "record_transcript",
]
