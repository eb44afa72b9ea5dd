"""Plan existence for the grounded meta-planning task.

Grounded actions never delete facts, so the set of reachable facts is a
monotone fixpoint: fire everything that becomes applicable until nothing new
appears. The goal is reachable iff it lies inside that fixpoint. A plain
breadth-first search over states is kept as an independent oracle for small
tasks.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .core import StructuredSop, topological_order
from .errors import SopError
from .pddl import GroundedTask, SymbolTable, generate_problem, ground
from .validators import Check, Finding, structural_preflight


@dataclass(frozen=True)
class Plan:
    steps: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def to_text(self) -> str:
        return "".join(step + "\n" for step in self.steps)


@dataclass(frozen=True)
class Solved:
    plan: Plan


@dataclass(frozen=True)
class Unsolvable:
    unreached_goals: frozenset[str]
    unfireable_actions: tuple[str, ...]
    # unfired actions short of exactly one precondition, with that precondition
    blocked_by_one: dict[str, str] = field(default_factory=dict, hash=False)
    # filled in when the task came from an SOP: original ids of subtasks never executed
    unexecuted_subtasks: tuple[str, ...] = ()


@dataclass(frozen=True)
class Rejected:
    """The SOP failed structural preflight, so no planning task was built."""

    findings: tuple[Finding, ...]


PlanOutcome = Union[Solved, Unsolvable, Rejected]


def _fixpoint(task: GroundedTask) -> tuple[list[int], dict[int, int], list[int], list[bool]]:
    """Fire applicable actions, lowest index first, until saturation.

    Returns the firing order, the first achiever of every added fact, the
    remaining missing-precondition counters and the final state.
    """
    state = [False] * len(task.props)
    for p in task.init:
        state[p] = True
    missing = []
    watchers: list[list[int]] = [[] for _ in task.props]
    ready: list[int] = []
    for i, act in enumerate(task.actions):
        pre = set(act.preconditions)
        need = [p for p in pre if not state[p]]
        missing.append(len(need))
        for p in need:
            watchers[p].append(i)
        if not need:
            ready.append(i)
    heapq.heapify(ready)
    fired: list[int] = []
    achiever: dict[int, int] = {}
    while ready:
        i = heapq.heappop(ready)
        fired.append(i)
        for p in task.actions[i].effects:
            if state[p]:
                continue
            state[p] = True
            achiever[p] = i
            for j in watchers[p]:
                missing[j] -= 1
                if missing[j] == 0:
                    heapq.heappush(ready, j)
    return fired, achiever, missing, state


def solve(task: GroundedTask, method: str = "fixpoint") -> Solved | Unsolvable:
    """Decide plan existence and return a witness plan or the unreachable goals.

    ``method="bfs"`` runs the exhaustive state-space search instead; it is
    exponential and only meant for cross-checking small tasks.
    """
    if method == "bfs":
        return solve_bfs(task)
    if method != "fixpoint":
        raise ValueError(f"unknown method {method!r}")
    fired, achiever, missing, state = _fixpoint(task)
    unreached = [p for p in task.goal if not state[p]]
    if unreached:
        fired_set = set(fired)
        blocked = {}
        for i, act in enumerate(task.actions):
            if i not in fired_set and missing[i] == 1:
                lacking = next(p for p in act.preconditions if not state[p])
                blocked[act.name] = task.props[lacking]
        return Unsolvable(
            unreached_goals=frozenset(task.props[p] for p in unreached),
            unfireable_actions=tuple(a.name for i, a in enumerate(task.actions) if i not in fired_set),
            blocked_by_one=blocked,
        )

    # keep only the achievers the goal transitively needs
    keep: set[int] = set()
    stack = [p for p in task.goal if p not in task.init]
    seen: set[int] = set()
    while stack:
        p = stack.pop()
        if p in seen:
            continue
        seen.add(p)
        a = achiever[p]
        if a not in keep:
            keep.add(a)
            stack.extend(q for q in task.actions[a].preconditions if q not in task.init)
    position = {a: k for k, a in enumerate(fired)}
    steps = tuple(task.actions[a].name for a in sorted(keep, key=position.__getitem__))
    return Solved(Plan(steps))


def solve_bfs(task: GroundedTask, max_states: int = 2_000_000) -> Solved | Unsolvable:
    """Breadth-first search over full states, ignoring the delete-free structure."""
    acts = []
    for a in task.actions:
        pre = eff = 0
        for p in a.preconditions:
            pre |= 1 << p
        for p in a.effects:
            eff |= 1 << p
        acts.append((pre, eff))
    start = sum(1 << p for p in task.init)
    goal = sum(1 << p for p in task.goal)
    parent: dict[int, tuple[int, int] | None] = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if s & goal == goal:
            steps = []
            while parent[s] is not None:
                prev, i = parent[s]  # type: ignore[misc]
                steps.append(task.actions[i].name)
                s = prev
            return Solved(Plan(tuple(reversed(steps))))
        for i, (pre, eff) in enumerate(acts):
            if s & pre == pre:
                t = s | eff
                if t not in parent:
                    parent[t] = (s, i)
                    queue.append(t)
        if len(parent) > max_states:
            raise RuntimeError("state space too large for breadth-first search")
    reached = 0
    for s in parent:
        reached |= s
    fireable = set()
    for s in parent:
        for i, (pre, _) in enumerate(acts):
            if s & pre == pre:
                fireable.add(i)
    return Unsolvable(
        unreached_goals=frozenset(task.props[p] for p in task.goal if not reached >> p & 1),
        unfireable_actions=tuple(a.name for i, a in enumerate(task.actions) if i not in fireable),
    )


def validate_plan(task: GroundedTask, plan: Plan) -> tuple[bool, str | None]:
    """Simulate ``plan`` from the initial state; report the first failing step."""
    by_name = {a.name: a for a in task.actions}
    state = set(task.init)
    for k, step in enumerate(plan.steps, start=1):
        act = by_name.get(step)
        if act is None:
            return False, f"step {k}: unknown action {step}"
        lacking = [task.props[p] for p in act.preconditions if p not in state]
        if lacking:
            return False, f"step {k}: {step} needs {', '.join(lacking)}"
        state.update(act.effects)
    unmet = sorted(task.props[p] for p in task.goal if p not in state)
    if unmet:
        return False, f"after step {len(plan.steps)}: goal not reached, missing {', '.join(unmet)}"
    return True, None


def read_plan_file(path: str | Path) -> Plan:
    """Read a plan with one action per line.

    Blank lines and ``;`` comments are skipped; surrounding parentheses are
    optional and whitespace and case are normalized, so ``(EXECUTE-SUBTASK s1)``
    and ``execute-subtask   s1`` name the same step.
    """
    steps = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        words = line.strip("()").lower().split()
        steps.append("(" + " ".join(words) + ")")
    return Plan(tuple(steps))


def build_task(sop: StructuredSop) -> tuple[GroundedTask, SymbolTable]:
    """Problem generation plus grounding, with execute actions in topological order."""
    problem, table = generate_problem(sop)
    order = [table.subtask(sid) for sid in topological_order(sop)]
    return ground(problem, subtask_order=order), table


def structured_plan_score(sop: StructuredSop) -> tuple[int, PlanOutcome]:
    """1 when a plan traverses the whole SOP from its initial state, else 0."""
    findings = structural_preflight(sop)
    if findings:
        return 0, Rejected(tuple(findings))
    try:
        task, table = build_task(sop)
    except SopError as exc:
        return 0, Rejected((Finding("*", Check.STRUCTURE, False, str(exc), "Symbol"),))
    outcome = solve(task)
    if isinstance(outcome, Solved):
        return 1, outcome
    unexecuted = tuple(
        sid for sid in sop.subtasks
        if f"(executed {table.subtask(sid)})" in outcome.unreached_goals
    )
    return 0, Unsolvable(outcome.unreached_goals, outcome.unfireable_actions, outcome.blocked_by_one, unexecuted)
