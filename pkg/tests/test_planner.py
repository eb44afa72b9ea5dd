from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sopstruct.core import Binding, StructuredSop, Subtask, normalize_name
from sopstruct.fixtures import NAMES, load_fixture
from sopstruct.pddl import execute_name
from sopstruct.planner import (
    Plan,
    Rejected,
    Solved,
    Unsolvable,
    build_task,
    read_plan_file,
    solve,
    structured_plan_score,
    validate_plan,
)
from strategies import sops


def sop_oracle(sop: StructuredSop) -> bool:
    """Execute the SOP directly on variable names: run any subtask whose inputs
    (direct and bound) are available, copy bound outputs, repeat."""
    avail = {normalize_name(v) for s in sop for v in s.inputs}
    done: set[str] = set()
    changed = True
    while changed:
        changed = False
        for s in sop:
            for b in s.inputs_from_dependencies:
                src, dst = normalize_name(b.source_output), normalize_name(b.bound_as)
                if src in avail and dst not in avail:
                    avail.add(dst)
                    changed = True
            need = {normalize_name(v) for v in (*s.inputs, *s.bound_names)}
            if s.id not in done and need <= avail:
                done.add(s.id)
                avail |= {normalize_name(v) for v in s.outputs}
                changed = True
    outputs = {normalize_name(v) for s in sop for v in s.outputs}
    return len(done) == len(sop) and outputs <= avail


@pytest.mark.parametrize("name", NAMES)
def test_fixtures_have_plans(name):
    sop = load_fixture(name)
    score, outcome = structured_plan_score(sop)
    assert score == 1 and isinstance(outcome, Solved)
    task, table = build_task(sop)
    assert validate_plan(task, outcome.plan) == (True, None)
    executes = [s for s in outcome.plan.steps if s.startswith("(execute-subtask")]
    assert len(executes) == len(sop)


def test_missing_producer_is_unsolvable():
    sop = StructuredSop.from_subtasks([
        Subtask("a", "a", "a", outputs=("x",)),
        Subtask("b", "b", "b", ("a",), (), (Binding("a", "y", "y"),), ("z",)),
    ])
    score, outcome = structured_plan_score(sop)
    assert score == 0 and isinstance(outcome, Unsolvable)
    assert outcome.unexecuted_subtasks == ("b",)
    assert "(executed b)" in outcome.unreached_goals
    assert outcome.blocked_by_one == {"(execute-subtask b)": "(available y)"}


def test_cycle_is_rejected_before_planning():
    sop = StructuredSop.from_subtasks([Subtask("a", "a", "a", ("b",)), Subtask("b", "b", "b", ("a",))], check=False)
    score, outcome = structured_plan_score(sop)
    assert score == 0 and isinstance(outcome, Rejected)
    assert {f.kind for f in outcome.findings} >= {"Cycle"}


def test_validate_plan_diagnostics():
    sop = load_fixture("api_weather")
    task, table = build_task(sop)
    ok, diag = validate_plan(task, Plan((execute_name(table.subtask("subtask2")),)))
    assert not ok and diag.startswith("step 1: (execute-subtask subtask2) needs (available location)")
    ok, diag = validate_plan(task, Plan(("(fly away)",)))
    assert not ok and "unknown action" in diag
    ok, diag = validate_plan(task, Plan((execute_name("subtask1"),)))
    assert not ok and "goal not reached" in diag


def test_read_plan_file(tmp_path):
    path = tmp_path / "plan.txt"
    path.write_text("; comment\n(EXECUTE-SUBTASK   subtask1)\n\nassign coordinates location ; trailing\n"
                    "(execute-subtask subtask2)\n")
    plan = read_plan_file(path)
    assert plan.steps == ("(execute-subtask subtask1)", "(assign coordinates location)", "(execute-subtask subtask2)")
    task, _ = build_task(load_fixture("api_weather"))
    assert validate_plan(task, plan) == (True, None)


def test_unknown_method():
    task, _ = build_task(load_fixture("recipe"))
    with pytest.raises(ValueError):
        solve(task, method="astar")


@given(sops(max_subtasks=8, broken_rate=0.2))
def test_fixpoint_agrees_with_bfs_and_direct_execution(sop):
    task, _ = build_task(sop)
    fix, bfs = solve(task), solve(task, method="bfs")
    assert type(fix) is type(bfs)
    assert isinstance(fix, Solved) == sop_oracle(sop)
    if isinstance(fix, Solved):
        assert validate_plan(task, fix.plan) == (True, None)
        assert validate_plan(task, bfs.plan) == (True, None)
    else:
        assert fix.unreached_goals == bfs.unreached_goals


@given(sops())
def test_plans_execute_subtasks_in_dependency_order(sop):
    score, outcome = structured_plan_score(sop)
    assert score == 1
    task, table = build_task(sop)
    back = {table.subtask(s.id): s.id for s in sop}
    order = [back[step.split()[1].rstrip(")")] for step in outcome.plan.steps if step.startswith("(execute")]
    pos = {sid: k for k, sid in enumerate(order)}
    assert sorted(order) == sorted(sop.subtasks)
    for s in sop:
        for d in s.dependencies:
            assert pos[d] < pos[s.id]


@given(sops())
def test_witness_is_minimal(sop):
    _, outcome = structured_plan_score(sop)
    task, _ = build_task(sop)
    steps = outcome.plan.steps
    for k in range(len(steps)):
        shorter = Plan(steps[:k] + steps[k + 1:])
        assert not validate_plan(task, shorter)[0]


@given(sops(), st.data())
def test_dropping_a_consumed_output(sop, data):
    sites = [(c, b) for c in sop for b in c.inputs_from_dependencies]
    if not sites:
        return
    consumer, b = data.draw(st.sampled_from(sites))
    src = sop[b.source_subtask]
    kept = tuple(v for v in src.outputs if normalize_name(v) != normalize_name(b.source_output))
    broken = sop.replace(dataclasses.replace(src, outputs=kept))
    score, outcome = structured_plan_score(broken)
    assert score == int(sop_oracle(broken))
    if score == 0:
        assert outcome.unexecuted_subtasks
        assert set(outcome.unexecuted_subtasks) <= set(sop.subtasks)
