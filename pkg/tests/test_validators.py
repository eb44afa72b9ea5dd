from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given

from sopstruct.core import Binding, StructuredSop, Subtask, normalize_name
from sopstruct.fixtures import NAMES, load_fixture
from sopstruct.validators import (
    Check,
    dependency_check,
    deterministic_scores,
    input_from_dependency_check,
    structural_preflight,
)
from strategies import sops


def mk(sid, deps=(), binds=(), outputs=("out",), inputs=()):
    return Subtask(sid, sid, sid, deps, inputs, tuple(Binding(*b) for b in binds), outputs)


def oracle_scores(sop):
    """Straightforward restatement of both per-DAG fractions."""
    n = len(sop.subtasks)
    if n == 0:
        return 1.0, 1.0
    dep_ok = ifd_ok = 0
    for s in sop.subtasks.values():
        if all(b.source_subtask in s.dependencies for b in s.inputs_from_dependencies):
            dep_ok += 1
        good = True
        for b in s.inputs_from_dependencies:
            src = sop.subtasks.get(b.source_subtask)
            if src is None or normalize_name(b.source_output) not in [normalize_name(o) for o in src.outputs]:
                good = False
        ifd_ok += good
    return dep_ok / n, ifd_ok / n


@pytest.mark.parametrize("name", NAMES)
def test_fixtures_pass(name):
    sop = load_fixture(name)
    scores = deterministic_scores(sop)
    assert (scores.dependency_score, scores.input_from_dependency_score) == (1.0, 1.0)
    assert scores.findings == ()
    assert structural_preflight(sop) == []


def test_empty_sop_scores_one():
    scores = deterministic_scores(StructuredSop())
    assert (scores.dependency_score, scores.input_from_dependency_score) == (1.0, 1.0)


def test_binding_outside_dependencies():
    sop = StructuredSop.from_subtasks([mk("s1"), mk("s2"), mk("s3", deps=("s2",), binds=[("s1", "out", "x")])])
    res = dependency_check(sop)
    assert res.dependency_score == pytest.approx(2 / 3)
    (f,) = res.failing(Check.DEPENDENCY)
    assert f.subtask_id == "s3" and "s1" in f.detail


def test_missing_source_output_is_named():
    sop = StructuredSop.from_subtasks([mk("s1"), mk("s2", deps=("s1",), binds=[("s1", "flour", "x")])])
    res = input_from_dependency_check(sop)
    assert res.input_from_dependency_score == 0.5
    (f,) = res.failing(Check.INPUT_FROM_DEPENDENCY)
    assert f.subtask_id == "s2"
    assert "flour not in outputs(s1)" in f.detail


def test_output_match_uses_normal_form():
    sop = StructuredSop.from_subtasks([mk("s1", outputs=("Corn  Mixture",)),
                                       mk("s2", deps=("s1",), binds=[("s1", "corn mixture", "m")])])
    assert input_from_dependency_check(sop).input_from_dependency_score == 1.0


def test_several_bad_bindings_count_once():
    sop = StructuredSop.from_subtasks([mk("s1"), mk("s2", binds=[("s1", "out", "a"), ("s1", "out", "b")])])
    assert dependency_check(sop).dependency_score == 0.5


def test_preflight_kinds():
    cyc = StructuredSop.from_subtasks([mk("a"), mk("b", deps=("a", "c")), mk("c", deps=("b",))], check=False)
    kinds = {(f.kind, f.subtask_id) for f in structural_preflight(cyc)}
    assert {("Cycle", "b"), ("Cycle", "c")} <= kinds
    assert ("Cycle", "a") not in kinds

    dangling = StructuredSop.from_subtasks([mk("a", deps=("ghost",))], check=False)
    kinds = {(f.kind, f.subtask_id) for f in structural_preflight(dangling)}
    assert ("DanglingReference", "a") in kinds and ("NoRoot", "*") in kinds

    ring = StructuredSop.from_subtasks([mk("a", deps=("b",)), mk("b", deps=("a",))], check=False)
    kinds = {(f.kind, f.subtask_id) for f in structural_preflight(ring)}
    assert {("Cycle", "a"), ("Unreachable", "a"), ("Unreachable", "b"), ("NoRoot", "*"), ("NoLeaf", "*")} <= kinds


@given(sops(broken_rate=0.3))
def test_scores_match_oracle(sop):
    scores = deterministic_scores(sop)
    assert (scores.dependency_score, scores.input_from_dependency_score) == oracle_scores(sop)


@given(sops())
def test_generated_dags_are_clean(sop):
    assert structural_preflight(sop) == []
    assert deterministic_scores(sop).dependency_score == 1.0


@given(sops(broken_rate=0.5))
def test_scores_bounded_and_findings_explain_them(sop):
    scores = deterministic_scores(sop)
    for value, check in ((scores.dependency_score, Check.DEPENDENCY),
                         (scores.input_from_dependency_score, Check.INPUT_FROM_DEPENDENCY)):
        assert 0.0 <= value <= 1.0
        failing = {f.subtask_id for f in scores.failing(check)}
        assert value == (len(sop) - len(failing)) / len(sop)


@given(sops())
def test_dropping_every_dependency_edge(sop):
    stripped = sop.replace(*(dataclasses.replace(s, dependencies=()) for s in sop))
    bound = sum(1 for s in sop if s.inputs_from_dependencies)
    assert dependency_check(stripped).dependency_score == (len(sop) - bound) / len(sop)
