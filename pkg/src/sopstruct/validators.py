"""Deterministic graph metrics and structural preflight checks."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from .core import StructuredSop, find_cycle, normalize_name


class Check(str, enum.Enum):
    DEPENDENCY = "Dependency"
    INPUT_FROM_DEPENDENCY = "InputFromDependency"
    STRUCTURE = "Structure"


@dataclass(frozen=True)
class Finding:
    subtask_id: str
    check: Check
    ok: bool
    detail: str = ""
    # structural findings carry a kind: DanglingReference, Cycle, Unreachable, NoRoot, NoLeaf
    kind: str = ""

    def __post_init__(self) -> None:
        if not self.ok and not self.detail:
            raise ValueError("a failing finding needs a detail")

    def to_dict(self) -> dict:
        out = {"subtask_id": self.subtask_id, "check": self.check.value, "ok": self.ok, "detail": self.detail}
        if self.kind:
            out["kind"] = self.kind
        return out


@dataclass(frozen=True)
class DeterministicScores:
    dependency_score: float = 1.0
    input_from_dependency_score: float = 1.0
    findings: tuple[Finding, ...] = field(default_factory=tuple)

    def failing(self, check: Check) -> list[Finding]:
        return [f for f in self.findings if f.check == check and not f.ok]


def _fraction_passing(sop: StructuredSop, findings: list[Finding]) -> float:
    if not len(sop):
        return 1.0
    failed = {f.subtask_id for f in findings}
    return (len(sop) - len(failed)) / len(sop)


def dependency_check(sop: StructuredSop) -> DeterministicScores:
    """A subtask passes when every binding reads from one of its declared dependencies."""
    findings = []
    for st in sop:
        deps = set(st.dependencies)
        for b in st.inputs_from_dependencies:
            if b.source_subtask not in deps:
                findings.append(Finding(
                    st.id, Check.DEPENDENCY, False,
                    f"{b.bound_as} expected from {b.source_subtask}, which is not a dependency of {st.id}",
                ))
    return DeterministicScores(
        dependency_score=_fraction_passing(sop, findings),
        findings=tuple(findings),
    )


def input_from_dependency_check(sop: StructuredSop) -> DeterministicScores:
    """A subtask passes when every binding names an output its source actually produces."""
    findings = []
    for st in sop:
        for b in st.inputs_from_dependencies:
            source = sop.subtasks.get(b.source_subtask)
            if source is None:
                findings.append(Finding(
                    st.id, Check.INPUT_FROM_DEPENDENCY, False,
                    f"{b.source_output} not in outputs({b.source_subtask}): no such subtask",
                ))
                continue
            produced = {normalize_name(v) for v in source.outputs}
            if normalize_name(b.source_output) not in produced:
                findings.append(Finding(
                    st.id, Check.INPUT_FROM_DEPENDENCY, False,
                    f"{b.source_output} not in outputs({b.source_subtask})",
                ))
    return DeterministicScores(
        input_from_dependency_score=_fraction_passing(sop, findings),
        findings=tuple(findings),
    )


def deterministic_scores(sop: StructuredSop) -> DeterministicScores:
    dep = dependency_check(sop)
    ifd = input_from_dependency_check(sop)
    return DeterministicScores(dep.dependency_score, ifd.input_from_dependency_score, dep.findings + ifd.findings)


def _strongly_connected(sop: StructuredSop) -> list[list[str]]:
    """Tarjan's algorithm over dependency edges, iterative."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    comps: list[list[str]] = []
    counter = 0
    for root in sop.subtasks:
        if root in index:
            continue
        work = [(root, iter([d for d in sop[root].dependencies if d in sop.subtasks]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            nxt = next(it, None)
            if nxt is not None:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter([d for d in sop[nxt].dependencies if d in sop.subtasks])))
                elif nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                comps.append(comp)
    return comps


def structural_preflight(sop: StructuredSop) -> list[Finding]:
    """Findings for every violated graph invariant; empty for a well-formed DAG.

    Kinds: DanglingReference, Cycle (one per subtask on a cycle), Unreachable
    (not reachable from any root following edges from parents to children),
    NoRoot / NoLeaf (graph-level, reported against ``*``).
    """
    findings: list[Finding] = []
    S = Check.STRUCTURE
    for sid, missing in sop.dangling_references():
        findings.append(Finding(sid, S, False, f"reference to unknown subtask {missing}", "DanglingReference"))

    order = list(sop.subtasks)
    for comp in _strongly_connected(sop):
        if len(comp) < 2:
            continue
        witness = find_cycle(StructuredSop({sid: sop[sid] for sid in comp})) or tuple(sorted(comp))
        text = " -> ".join(witness + witness[:1])
        for sid in sorted(comp, key=order.index):
            findings.append(Finding(sid, S, False, f"on dependency cycle {text}", "Cycle"))

    roots = sop.roots()
    kids = sop.children()
    seen = set(roots)
    queue = deque(roots)
    while queue:
        for kid in kids[queue.popleft()]:
            if kid not in seen:
                seen.add(kid)
                queue.append(kid)
    for sid in order:
        if sid not in seen:
            findings.append(Finding(sid, S, False, "not reachable from any root subtask", "Unreachable"))

    if len(sop):
        if not roots:
            findings.append(Finding("*", S, False, "no subtask without dependencies", "NoRoot"))
        if not sop.leaves():
            findings.append(Finding("*", S, False, "every subtask has a dependent", "NoLeaf"))
    return findings

