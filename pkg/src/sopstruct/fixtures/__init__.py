"""Hand-authored example SOPs shipped with the package.

``recipe`` follows the corn casserole procedure used as the running example
for structured SOPs (six subtasks; the bindings and variable names were
written by hand). ``bicycle`` is an order-to-shipment process with two
parallel branches. ``api_weather`` is a two-call API procedure.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..core import SopDocument, StructuredSop, parse_sop

NAMES = ("recipe", "bicycle", "api_weather")


def _root():
    return resources.files(__name__)


def fixture_path(name: str) -> Path:
    return Path(str(_root() / f"{name}.json"))


def load_fixture(name: str) -> StructuredSop:
    return parse_sop((_root() / f"{name}.json").read_text(encoding="utf-8"))


def fixture_document(name: str) -> SopDocument:
    return SopDocument(name, (_root() / "docs" / f"{name}.txt").read_text(encoding="utf-8"))


def docs_dir() -> Path:
    return Path(str(_root() / "docs"))


def transcript_path(name: str) -> Path:
    return Path(str(_root() / "transcripts" / f"{name}.jsonl"))
