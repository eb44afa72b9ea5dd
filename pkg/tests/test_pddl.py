from __future__ import annotations

import re
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sopstruct.core import Binding, StructuredSop, Subtask
from sopstruct.errors import ParseError, SymbolError, UnsupportedFeature
from sopstruct.fixtures import load_fixture
from sopstruct.pddl import (
    META_DOMAIN,
    SymbolTable,
    emit_domain,
    emit_problem,
    generate_problem,
    ground,
    parse_domain,
    parse_pddl,
    parse_problem,
    read_sexpr,
    sanitize,
)
from strategies import sops

GOLDEN = Path(__file__).parent / "golden"
SYMBOL = re.compile(r"^[a-z][a-z0-9]*(-[a-z0-9]+)*$")


@pytest.mark.parametrize("raw, expected", [
    ("Melted Butter", "melted-butter"),
    ("  2 eggs", "eggs"),
    ("Crème brûlée", "creme-brulee"),
    ("a__b--c", "a-b-c"),
    ("API_key!", "api-key"),
    ("123", ""),
])
def test_sanitize(raw, expected):
    assert sanitize(raw) == expected


@given(st.text(max_size=30))
def test_sanitize_output_is_a_symbol(raw):
    out = sanitize(raw)
    assert out == "" or SYMBOL.match(out)


def test_symbol_collisions_and_reserved_words():
    table = SymbolTable()
    assert table.add("variable", "Corn Mixture") == "corn-mixture"
    assert table.add("variable", "corn   mixture") == "corn-mixture"  # same normal form
    assert table.add("variable", "corn-mixture") == "corn-mixture-2"
    assert table.add("subtask", "corn mixture") == "corn-mixture-3"
    assert table.add("variable", "and") == "and-2"
    assert table.source("corn-mixture-2") == ("variable", "corn-mixture")
    with pytest.raises(SymbolError):
        table.add("variable", "???")


def test_domain_matches_golden_file():
    assert emit_domain() == (GOLDEN / "domain.pddl").read_text()


def test_domain_round_trip():
    text = emit_domain()
    assert parse_domain(text) == META_DOMAIN
    assert emit_domain(parse_domain(text)) == text


def test_problem_goldens():
    one = StructuredSop.from_subtasks([Subtask("Step 1", "Boil", "Boil water.", (), ("Water",), (), ("Hot Water",))])
    assert emit_problem(generate_problem(one, "one-step")[0]) == (GOLDEN / "one_step_problem.pddl").read_text()
    recipe = emit_problem(generate_problem(load_fixture("recipe"), "recipe")[0])
    assert recipe == (GOLDEN / "recipe_problem.pddl").read_text()


def test_map_only_for_renamed_bindings():
    sop = StructuredSop.from_subtasks([
        Subtask("a", "a", "a", outputs=("x", "y")),
        Subtask("b", "b", "b", ("a",), (), (Binding("a", "x", "x"), Binding("a", "Y", "z")), ("w",)),
    ])
    problem, _ = generate_problem(sop)
    maps = {f for f in problem.init if f[0] == "map"}
    assert maps == {("map", "y", "z")}
    assert ("required-input", "x", "b") in problem.init
    assert ("required-input", "z", "b") in problem.init


@given(sops(broken_rate=0.2))
def test_problem_round_trip(sop):
    problem, _ = generate_problem(sop)
    text = emit_problem(problem)
    again = parse_problem(text)
    assert again == problem
    assert emit_problem(again) == text


@given(sops())
def test_every_name_gets_a_distinct_symbol(sop):
    problem, table = generate_problem(sop)
    symbols = list(table.to_source)
    assert len(symbols) == len(set(symbols))
    assert all(SYMBOL.match(s) for s in symbols)
    assert problem.variables.isdisjoint(problem.subtasks)


def test_parse_errors_carry_positions():
    with pytest.raises(ParseError) as err:
        read_sexpr("(define (problem p)\n  (:domain sop-meta)")
    assert err.value.line == 1
    with pytest.raises(ParseError) as err:
        read_sexpr("(a))")
    assert err.value.line == 1 and err.value.column == 4


def test_unsupported_constructs():
    text = emit_domain().replace(":adl", ":adl :durative-actions")
    with pytest.raises(UnsupportedFeature):
        parse_domain(text)
    problem = (GOLDEN / "one_step_problem.pddl").read_text().replace("(:goal (and", "(:goal (or")
    with pytest.raises(UnsupportedFeature):
        parse_problem(problem)


def test_parse_rejects_undeclared_objects():
    problem = (GOLDEN / "one_step_problem.pddl").read_text().replace("(available water)", "(available milk)")
    with pytest.raises((ParseError, SymbolError)):
        parse_problem(problem)


def test_parse_is_case_and_comment_tolerant():
    text = "; a comment\n" + (GOLDEN / "one_step_problem.pddl").read_text().upper()
    dom, problem = parse_pddl(emit_domain(), text)
    assert dom == META_DOMAIN
    assert problem == parse_problem((GOLDEN / "one_step_problem.pddl").read_text())


def test_grounding_counts():
    sop = load_fixture("recipe")
    problem, _ = generate_problem(sop)
    task = ground(problem)
    n_maps = sum(1 for f in problem.init if f[0] == "map")
    assert len(task.actions) == n_maps + len(sop)
    assert [a.name for a in task.actions[:n_maps]] == sorted(a.name for a in task.actions[:n_maps])
    assert all(a.name.startswith("(execute-subtask ") for a in task.actions[n_maps:])
