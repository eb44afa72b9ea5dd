"""LLM-backed segmentation, structure generation and judged metrics."""

from .client import (
    ChatClient,
    FailingClient,
    HttpChatClient,
    LlmClientSpec,
    LlmTranscript,
    RecordingClient,
    ReplayClient,
    ScriptedClient,
    TranscriptEntry,
    prompt_hash,
    prompt_text,
)
from .generation import generate_structure, merge
from .judges import JudgeVerdict, judge_completeness, judge_goal_state, judge_initial_state
from .segmentation import segment

__all__ = [
    "ChatClient", "FailingClient", "HttpChatClient", "LlmClientSpec", "LlmTranscript", "RecordingClient",
    "ReplayClient", "ScriptedClient", "TranscriptEntry", "prompt_hash", "prompt_text",
    "generate_structure", "merge", "JudgeVerdict", "judge_completeness", "judge_goal_state",
    "judge_initial_state", "segment",
]
