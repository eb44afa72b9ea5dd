"""Catalogue of seeded defects for structured SOPs.

Each mutation returns the damaged SOP together with the subtask a correct
metric must blame and the metric expected to drop. Mutations return None
when the SOP offers no site for them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Callable

from .core import SopDocument, StructuredSop, Subtask, normalize_name
from .llm.client import ScriptedClient
from .llm.judges import judge_completeness, judge_initial_state
from .llm.reference import ReferenceResponder
from .planner import Rejected, Unsolvable, structured_plan_score
from .validators import Check, deterministic_scores

# metric keys match harness.METRICS
DEPENDENCY = "dependency"
INPUT_FROM_DEPENDENCY = "input_from_dependency"
STRUCTURED_PLAN = "structured_plan"
INITIAL_STATE = "initial_state"
COMPLETENESS = "completeness"


@dataclass(frozen=True)
class Mutation:
    kind: str
    sop: StructuredSop
    target: str
    metric: str
    detail: str


def _bound_sites(sop: StructuredSop) -> list[tuple[Subtask, int]]:
    return [(st, k) for st in sop for k in range(len(st.inputs_from_dependencies))]


def remove_dependency_edge(sop: StructuredSop, rng: random.Random) -> Mutation | None:
    sites = [(st, b.source_subtask) for st in sop for b in st.inputs_from_dependencies
             if b.source_subtask in st.dependencies]
    if not sites:
        return None
    st, dep = rng.choice(sites)
    new = replace(st, dependencies=tuple(d for d in st.dependencies if d != dep))
    return Mutation("remove_dependency_edge", sop.replace(new), st.id, DEPENDENCY, f"dropped edge {dep} -> {st.id}")


def redirect_binding(sop: StructuredSop, rng: random.Random) -> Mutation | None:
    sites = []
    for st, k in _bound_sites(sop):
        others = [o for o in sop.subtasks if o != st.id and o not in st.dependencies]
        if others:
            sites.append((st, k, others))
    if not sites:
        return None
    st, k, others = rng.choice(sites)
    foreign = rng.choice(others)
    bindings = list(st.inputs_from_dependencies)
    bindings[k] = replace(bindings[k], source_subtask=foreign)
    new = replace(st, inputs_from_dependencies=tuple(bindings))
    return Mutation("redirect_binding", sop.replace(new), st.id, DEPENDENCY, f"binding {k} now reads from {foreign}")


def rename_source_output(sop: StructuredSop, rng: random.Random) -> Mutation | None:
    sites = _bound_sites(sop)
    if not sites:
        return None
    st, k = rng.choice(sites)
    bindings = list(st.inputs_from_dependencies)
    old = bindings[k]
    src = sop.subtasks.get(old.source_subtask)
    produced = {normalize_name(v) for v in src.outputs} if src else set()
    name = f"{old.source_output} v{rng.randint(2, 99)}"
    while normalize_name(name) in produced:
        name += " x"
    bindings[k] = replace(old, source_output=name)
    new = replace(st, inputs_from_dependencies=tuple(bindings))
    return Mutation("rename_source_output", sop.replace(new), st.id, INPUT_FROM_DEPENDENCY,
                    f"{old.source_output!r} renamed to {name!r}")


def _descendants(sop: StructuredSop, sid: str) -> list[str]:
    kids = sop.children()
    out, stack = [], list(kids[sid])
    while stack:
        k = stack.pop()
        if k not in out:
            out.append(k)
            stack.extend(kids[k])
    return out


def introduce_cycle(sop: StructuredSop, rng: random.Random) -> Mutation | None:
    sites = [(st, d) for st in sop for d in _descendants(sop, st.id) if d not in st.dependencies]
    if not sites:
        return None
    st, d = rng.choice(sites)
    new = replace(st, dependencies=st.dependencies + (d,))
    return Mutation("introduce_cycle", sop.replace(new), st.id, STRUCTURED_PLAN, f"{st.id} now depends on its descendant {d}")


def orphan_subtask(sop: StructuredSop, rng: random.Random) -> Mutation | None:
    """Cut every edge into and out of a subtask that reads from a dependency."""
    sites = [st for st in sop if st.inputs_from_dependencies and st.dependencies]
    if not sites:
        return None
    st = rng.choice(sites)
    changed = [replace(st, dependencies=())]
    for other in sop:
        if st.id in other.dependencies:
            changed.append(replace(other, dependencies=tuple(d for d in other.dependencies if d != st.id)))
    return Mutation("orphan_subtask", sop.replace(*changed), st.id, DEPENDENCY, f"{st.id} detached from the graph")


def delete_root_input(sop: StructuredSop, rng: random.Random) -> Mutation | None:
    sites = []
    for st in sop:
        if st.dependencies:
            continue
        for v in st.inputs:
            elsewhere = any(normalize_name(v) in {normalize_name(w) for w in o.inputs} for o in sop if o.id != st.id)
            if not elsewhere:
                sites.append((st, v))
    if not sites:
        return None
    st, v = rng.choice(sites)
    new = replace(st, inputs=tuple(w for w in st.inputs if w != v))
    return Mutation("delete_root_input", sop.replace(new), st.id, INITIAL_STATE, f"input {v!r} removed")


def delete_parent(sop: StructuredSop, rng: random.Random) -> Mutation | None:
    """Remove a subtask that others depend on, leaving their references dangling."""
    kids = sop.children()
    sites = [(sid, c) for sid, cs in kids.items() for c in cs]
    if not sites:
        return None
    parent, child = rng.choice(sites)
    return Mutation("delete_parent", sop.without(parent), child, STRUCTURED_PLAN, f"removed {parent}, a dependency of {child}")


def delete_leaf(sop: StructuredSop, rng: random.Random) -> Mutation | None:
    leaves = sop.leaves()
    if len(sop) < 2 or not leaves:
        return None
    leaf = rng.choice(leaves)
    return Mutation("delete_leaf", sop.without(leaf), leaf, COMPLETENESS, f"removed leaf {leaf}")


CATALOGUE: dict[str, Callable[[StructuredSop, random.Random], Mutation | None]] = {
    "remove_dependency_edge": remove_dependency_edge,
    "redirect_binding": redirect_binding,
    "rename_source_output": rename_source_output,
    "introduce_cycle": introduce_cycle,
    "orphan_subtask": orphan_subtask,
    "delete_root_input": delete_root_input,
    "delete_parent": delete_parent,
    "delete_leaf": delete_leaf,
}


@dataclass(frozen=True)
class Detection:
    value: float
    # the metric fell below 1
    dropped: bool
    # some finding or missing item names the mutated subtask
    named: bool
    evidence: tuple[str, ...]

    @property
    def detected(self) -> bool:
        return self.dropped and self.named


def detect(m: Mutation, original: StructuredSop, doc_text: str | None = None) -> Detection:
    """Score the mutant on its expected metric and look for the target in the diagnostics.

    Judged metrics (initial state, completeness) are answered by a
    ReferenceResponder holding ``original``, so they need ``doc_text``.
    """
    if m.metric in (DEPENDENCY, INPUT_FROM_DEPENDENCY):
        scores = deterministic_scores(m.sop)
        check = Check.DEPENDENCY if m.metric == DEPENDENCY else Check.INPUT_FROM_DEPENDENCY
        value = scores.dependency_score if m.metric == DEPENDENCY else scores.input_from_dependency_score
        found = scores.failing(check)
        return Detection(value, value < 1.0, any(f.subtask_id == m.target for f in found),
                         tuple(f"{f.subtask_id}: {f.detail}" for f in found))
    if m.metric == STRUCTURED_PLAN:
        score, outcome = structured_plan_score(m.sop)
        if isinstance(outcome, Rejected):
            ids = [f.subtask_id for f in outcome.findings]
            evidence = tuple(f"{f.kind} {f.subtask_id}: {f.detail}" for f in outcome.findings)
        elif isinstance(outcome, Unsolvable):
            ids = list(outcome.unexecuted_subtasks)
            evidence = tuple(sorted(outcome.unreached_goals))
        else:
            ids, evidence = [], ()
        return Detection(float(score), score < 1, m.target in ids, evidence)
    if doc_text is None:
        raise ValueError(f"{m.metric} is judged and needs the document text")
    responder = ReferenceResponder()
    responder.add(doc_text, original)
    doc = SopDocument("mutant", doc_text)
    client = ScriptedClient(responder)
    if m.metric == INITIAL_STATE:
        verdict = judge_initial_state(m.sop, doc, client)
        named = any(item.endswith(f"({m.target})") for item in verdict.missing_items)
    elif m.metric == COMPLETENESS:
        verdict = judge_completeness(m.sop, doc, client)
        named = any(item.startswith(f"{m.target}:") for item in verdict.missing_items)
    else:
        raise ValueError(f"unknown metric {m.metric!r}")
    return Detection(verdict.score, verdict.score < 1.0, named, verdict.missing_items)


def mutate_all(sop: StructuredSop, rng: random.Random) -> list[Mutation]:
    """One mutation of every catalogue type that has a site in ``sop``."""
    out = []
    for fn in CATALOGUE.values():
        m = fn(sop, rng)
        if m is not None:
            out.append(m)
    return out
