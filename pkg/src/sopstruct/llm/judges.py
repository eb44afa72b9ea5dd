"""Model-judged metrics: initial state, goal state and completeness."""

from __future__ import annotations

from dataclasses import dataclass

from ..core import SopDocument, StructuredSop, goal_state, initial_state, serialize_sop
from ..errors import JudgeParseError
from . import prompts
from .client import ChatClient
from .repair import extract_json


@dataclass(frozen=True)
class JudgeVerdict:
    score: float
    rationale: str = ""
    missing_items: tuple[str, ...] = ()
    extra_items: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


def _items(raw: dict, key: str) -> tuple[str, ...]:
    value = raw.get(key, [])
    if value is None:
        return ()
    if not isinstance(value, list):
        raise JudgeParseError(f"{key} must be a list")
    return tuple(str(v) for v in value)


def parse_verdict(answer: str) -> JudgeVerdict:
    """Read a verdict; out-of-range scores are clamped and the clamp noted."""
    try:
        raw = extract_json(answer)
    except ValueError as exc:
        raise JudgeParseError(str(exc)) from None
    score = raw.get("score")
    if isinstance(score, str):
        try:
            score = float(score.strip().rstrip("%"))
        except ValueError:
            raise JudgeParseError(f"score is not a number: {score!r}") from None
    if isinstance(score, bool) or not isinstance(score, (int, float)) or score != score:
        raise JudgeParseError(f"score is not a number: {score!r}")
    rationale = str(raw.get("rationale") or "")
    clamped = min(1.0, max(0.0, float(score)))
    if clamped != score:
        rationale = (rationale + " " if rationale else "") + f"[score {score} clamped to {clamped}]"
    return JudgeVerdict(clamped, rationale, _items(raw, "missing_items"), _items(raw, "extra_items"))


def item_block(items) -> str:
    return "\n".join(f"- {v}" for v in sorted(items)) or "(none)"


def judge_initial_state(sop: StructuredSop, doc: SopDocument, client: ChatClient) -> JudgeVerdict:
    msgs = prompts.messages("judge_initial_state", items=item_block(initial_state(sop)), document=doc.text)
    return parse_verdict(client.complete(msgs))


def judge_goal_state(sop: StructuredSop, doc: SopDocument, client: ChatClient) -> JudgeVerdict:
    msgs = prompts.messages("judge_goal_state", items=item_block(goal_state(sop)), document=doc.text)
    return parse_verdict(client.complete(msgs))


def judge_completeness(sop: StructuredSop, doc: SopDocument, client: ChatClient) -> JudgeVerdict:
    msgs = prompts.messages("judge_completeness", sop=serialize_sop(sop, indent=2), document=doc.text)
    return parse_verdict(client.complete(msgs))
