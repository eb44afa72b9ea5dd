"""Split an SOP document into segments at model-chosen anchors.

The model only names where segments begin (and optionally end) by quoting
text; offsets are found here by searching the document, so segment text is
always an exact slice of the source.
"""

from __future__ import annotations

import re

from ..core import Segment, SopDocument
from ..errors import AnchorNotFound, CoverageGap, LlmError
from . import prompts
from .client import ChatClient
from .repair import extract_json

DEFAULT_RECURSION_THRESHOLD = 6000


def locate(text: str, anchor: str, pos: int = 0) -> tuple[int, int]:
    """Span of the first occurrence of ``anchor`` at or after ``pos``.

    Falls back to a whitespace-insensitive, case-insensitive match.
    """
    needle = anchor.strip()
    if not needle:
        raise AnchorNotFound(anchor)
    i = text.find(needle, pos)
    if i != -1:
        return i, i + len(needle)
    pattern = re.compile(r"\s+".join(re.escape(w) for w in needle.split()), re.IGNORECASE)
    m = pattern.search(text, pos)
    if m:
        return m.start(), m.end()
    raise AnchorNotFound(anchor)


def _anchors(answer: str) -> list[tuple[str, str | None]]:
    try:
        raw = extract_json(answer)
    except ValueError as exc:
        raise LlmError("segmentation answer is not JSON", exc) from exc
    items = raw.get("segments")
    if not isinstance(items, list):
        raise LlmError("segmentation answer lacks a 'segments' list")
    out = []
    for item in items:
        if isinstance(item, str):
            out.append((item, None))
        elif isinstance(item, dict) and isinstance(item.get("start"), str):
            end = item.get("end")
            out.append((item["start"], end if isinstance(end, str) and end.strip() else None))
        else:
            raise LlmError(f"unreadable segment entry: {item!r}")
    return out


def spans_from_anchors(text: str, anchors: list[tuple[str, str | None]]) -> list[tuple[int, int]]:
    """Turn (start, end) anchor pairs into ordered, non-overlapping spans covering ``text``.

    A segment without an end anchor runs up to the next segment's start (or
    the end of the text). Anything but whitespace left between spans raises
    CoverageGap.
    """
    if not anchors:
        raise CoverageGap(0, "no segments proposed")
    starts: list[int] = []
    ends: list[int | None] = []
    pos = 0
    for start_anchor, end_anchor in anchors:
        try:
            s, _ = locate(text, start_anchor, pos)
        except AnchorNotFound:
            if not starts:
                raise
            # maybe inside the previous segment; found there it is reported as an overlap
            s, _ = locate(text, start_anchor, starts[-1] + 1)
        e = None
        if end_anchor is not None:
            _, e = locate(text, end_anchor, s)
        starts.append(s)
        ends.append(e)
        pos = e if e is not None else s + 1
    spans = []
    for k, s in enumerate(starts):
        e = ends[k]
        if e is None:
            e = starts[k + 1] if k + 1 < len(starts) else len(text)
        spans.append((s, e))

    if text[:spans[0][0]].strip():
        raise CoverageGap(0, "text before the first segment")
    for (s0, e0), (s1, _) in zip(spans, spans[1:]):
        if e0 > s1:
            raise CoverageGap(s1, "segments overlap")
        if text[e0:s1].strip():
            raise CoverageGap(e0, "text between segments")
    if text[spans[-1][1]:].strip():
        raise CoverageGap(spans[-1][1], "text after the last segment")
    return spans


def _ask(text: str, client: ChatClient) -> list[tuple[str, str | None]]:
    return _anchors(client.complete(prompts.messages("segment", document=text)))


def segment(doc: SopDocument, client: ChatClient, recursion_threshold: int | None = None) -> list[Segment]:
    """Segments of ``doc`` in order. With ``recursion_threshold``, any segment
    longer than that many characters is split once more (one extra pass)."""
    spans = spans_from_anchors(doc.text, _ask(doc.text, client))
    if recursion_threshold is not None:
        refined = []
        for s, e in spans:
            if e - s > recursion_threshold:
                inner = spans_from_anchors(doc.text[s:e], _ask(doc.text[s:e], client))
                refined += [(s + a, s + b) for a, b in inner]
            else:
                refined.append((s, e))
        spans = refined
    return [Segment(f"seg{k}", s, e, doc.text[s:e]) for k, (s, e) in enumerate(spans, start=1)]
