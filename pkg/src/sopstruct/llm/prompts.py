"""Prompt templates: plain-text files with ``{{placeholder}}`` slots.

The first line of every template is a tag such as ``[sopstruct:segment v1]``
naming the stage and its version; reports record these versions.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

SYSTEM_PROMPT = "You turn standard operating procedures into structured data. Reply with JSON only."

TEMPLATES = (
    "segment",
    "structure",
    "structure_retry",
    "judge_initial_state",
    "judge_goal_state",
    "judge_completeness",
)

_SLOT = re.compile(r"\{\{(\w+)\}\}")
_TAG = re.compile(r"^\[sopstruct:([\w-]+) (v\d+)\]")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return (resources.files(__package__) / "prompts" / f"{name}.txt").read_text(encoding="utf-8")


def render(name: str, **values: str) -> str:
    """Fill every slot in one pass; slot text inside values is left alone."""
    template = load_template(name)

    def fill(m: re.Match) -> str:
        key = m.group(1)
        if key not in values:
            raise KeyError(f"template {name} needs a value for {key!r}")
        return values[key]

    return _SLOT.sub(fill, template)


def messages(name: str, **values: str) -> list[dict[str, str]]:
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": render(name, **values)},
    ]


def stage_of(text: str) -> tuple[str, str] | None:
    """(stage, version) from the tag line of a rendered prompt, wherever it starts."""
    for line in text.splitlines():
        m = _TAG.match(line)
        if m:
            return m.group(1), m.group(2)
    return None


def prompt_versions() -> dict[str, str]:
    out = {}
    for name in TEMPLATES:
        tag = stage_of(load_template(name))
        out[name] = tag[1] if tag else "unversioned"
    return out
