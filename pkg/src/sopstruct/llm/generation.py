"""Per-segment subtask generation and stitching of segment subgraphs."""

from __future__ import annotations

import re
from typing import Sequence

from ..core import (
    SOP_KEY,
    Binding,
    Segment,
    StructuredSop,
    Subtask,
    _reject_duplicates,
    find_cycle,
    subtask_from_dict,
)
from ..errors import GraphError, GraphErrorKind, IdCollision, SchemaError
from . import prompts
from .client import ChatClient
from .repair import extract_json


def summarize(subtasks: Sequence[Subtask]) -> str:
    if not subtasks:
        return "(none)"
    return "\n".join(
        f"- {st.id}: {st.name}; outputs: {', '.join(st.outputs) or '(none)'}" for st in subtasks
    )


def _segment_number(seg: Segment) -> int:
    m = re.search(r"(\d+)$", seg.seg_id)
    return int(m.group(1)) if m else 1


def parse_segment_answer(answer: str, prefix: str, prior_ids: set[str]) -> list[Subtask]:
    """Read subtasks from a model answer and move their ids into ``prefix``.

    References to ids declared in the same answer are renamed along with the
    declarations; references to ``prior_ids`` are kept as they are.
    """
    try:
        raw = extract_json(answer, object_pairs_hook=_reject_duplicates)
    except ValueError as exc:
        raise SchemaError(f"answer is not a JSON object: {exc}") from None
    table = raw.get(SOP_KEY)
    if not isinstance(table, dict):
        raise SchemaError(f"answer lacks a {SOP_KEY!r} object")
    local = set(table)

    def rename(ref: str) -> str:
        if ref.startswith(prefix):
            return ref
        return prefix + ref

    def resolve(ref: str, owner: str) -> str:
        if ref in local:
            return rename(ref)
        if ref in prior_ids:
            return ref
        raise GraphError(GraphErrorKind.DANGLING_REFERENCE, owner, f"unknown subtask {ref!r}")

    out = []
    for sid, body in table.items():
        st = subtask_from_dict(sid, body)
        new_id = rename(sid)
        out.append(Subtask(
            id=new_id,
            name=st.name,
            description=st.description,
            dependencies=tuple(resolve(d, sid) for d in st.dependencies),
            inputs=st.inputs,
            inputs_from_dependencies=tuple(
                Binding(resolve(b.source_subtask, sid), b.source_output, b.bound_as, b.extra)
                for b in st.inputs_from_dependencies
            ),
            outputs=st.outputs,
            category=st.category,
            extra=st.extra,
        ))
    cycle = find_cycle(StructuredSop({st.id: st for st in out}))
    if cycle:
        raise GraphError(GraphErrorKind.CYCLE, cycle[0], " -> ".join(cycle + cycle[:1]), cycle)
    return out


def generate_structure(seg: Segment, context: Sequence[Subtask], client: ChatClient) -> list[Subtask]:
    """Subtasks for one segment, ids namespaced as ``seg<k>-<id>``.

    One automatic reprompt carries the problems found in a rejected answer;
    a second rejection is raised.
    """
    prefix = f"seg{_segment_number(seg)}-"
    prior_ids = {st.id for st in context}
    request = prompts.render("structure", context=summarize(context), segment=seg.text)
    msgs = [{"role": "system", "content": prompts.SYSTEM_PROMPT}, {"role": "user", "content": request}]
    answer = client.complete(msgs)
    try:
        return parse_segment_answer(answer, prefix, prior_ids)
    except (SchemaError, GraphError) as first:
        retry = prompts.render("structure_retry", problems=f"- {first}", original=request)
        msgs = [{"role": "system", "content": prompts.SYSTEM_PROMPT}, {"role": "user", "content": retry}]
        return parse_segment_answer(client.complete(msgs), prefix, prior_ids)


def merge(subgraphs: Sequence[Sequence[Subtask]], **kwargs) -> StructuredSop:
    """Union of segment subgraphs as one checked DAG."""
    seen: set[str] = set()
    ordered: list[Subtask] = []
    for group in subgraphs:
        for st in group:
            if st.id in seen:
                raise IdCollision(st.id)
            seen.add(st.id)
            ordered.append(st)
    return StructuredSop.from_subtasks(ordered, check=True, **kwargs)
