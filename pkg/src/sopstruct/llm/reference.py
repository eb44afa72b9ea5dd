"""A deterministic stand-in for the model, driven by reference SOPs.

``ReferenceResponder`` answers every pipeline prompt for documents whose
reference structure it knows: it segments a document as one piece (or at
given anchors), returns the reference graph for the whole-document segment,
and judges by set comparison against the reference. It exists to record
replay transcripts and to script seeded-defect experiments; it is not a
model of judgment quality.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..core import StructuredSop, goal_state, initial_state, normalize_name, serialize_sop, sop_from_dict
from ..errors import LlmError
from .prompts import stage_of


def _key(text: str) -> str:
    return " ".join(text.split())


def _block(text: str, tag: str) -> str:
    m = re.search(rf"<{tag}>\n(.*?)\n</{tag}>", text, re.DOTALL)
    if not m:
        raise LlmError(f"prompt has no <{tag}> block")
    return m.group(1)


def _listed(text: str) -> set[str]:
    body = _block(text, "graph_items")
    return {line[2:].strip() for line in body.splitlines() if line.startswith("- ")}


def _jaccard(expected: set[str], given: set[str]) -> float:
    union = expected | given
    return len(expected & given) / len(union) if union else 1.0


@dataclass
class ReferenceResponder:
    references: dict[str, StructuredSop] = field(default_factory=dict)
    anchors: dict[str, list[str]] = field(default_factory=dict)

    def add(self, doc_text: str, sop: StructuredSop, anchors: list[str] | None = None) -> None:
        self.references[_key(doc_text)] = sop
        if anchors:
            self.anchors[_key(doc_text)] = anchors

    def _reference(self, doc_text: str) -> StructuredSop:
        try:
            return self.references[_key(doc_text)]
        except KeyError:
            raise LlmError("no reference for this document") from None

    def __call__(self, prompt: str) -> str:
        tag = stage_of(prompt)
        if tag is None:
            raise LlmError("prompt carries no stage tag")
        stage = tag[0]
        if stage == "segment":
            doc = _block(prompt, "procedure")
            starts = self.anchors.get(_key(doc)) or [" ".join(doc.split()[:6])]
            return json.dumps({"segments": [{"start": s} for s in starts]})
        if stage in ("structure", "structure-retry"):
            return serialize_sop(self._reference(_block(prompt, "segment")), indent=2)
        if stage in ("judge-initial-state", "judge-goal-state"):
            ref = self._reference(_block(prompt, "procedure"))
            initial = stage == "judge-initial-state"
            expected = set(initial_state(ref) if initial else goal_state(ref))
            given = {normalize_name(v) for v in _listed(prompt)}
            missing = sorted(expected - given)
            owners = {}
            for st in ref:
                for v in (st.inputs if initial else st.outputs):
                    owners.setdefault(normalize_name(v), st.id)
            return json.dumps({
                "score": _jaccard(expected, given),
                "rationale": "compared with the reference structure",
                "missing_items": [f"{v} ({owners.get(v, '?')})" for v in missing],
                "extra_items": sorted(given - expected),
            })
        if stage == "judge-completeness":
            ref = self._reference(_block(prompt, "procedure"))
            graph = sop_from_dict(json.loads(_block(prompt, "structured_sop")), check=False)
            present = {_key(st.description) for st in graph}
            missing = [st for st in ref if _key(st.description) not in present]
            return json.dumps({
                "score": 1.0 - len(missing) / len(ref) if len(ref) else 1.0,
                "rationale": "compared with the reference structure",
                "missing_items": [f"{st.id}: {st.description}" for st in missing],
                "extra_items": [],
            })
        raise LlmError(f"no scripted answer for stage {stage}")
