from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sopstruct.core import (
    Binding,
    Category,
    StructuredSop,
    Subtask,
    find_cycle,
    goal_state,
    initial_state,
    normalize_name,
    parse_sop,
    serialize_sop,
    topological_order,
)
from sopstruct.errors import GraphError, GraphErrorKind, SchemaError
from sopstruct.fixtures import NAMES, fixture_path, load_fixture
from sopstruct.validators import deterministic_scores, structural_preflight
from strategies import sops, variable_names


def st_(sid, deps=(), inputs=(), binds=(), outputs=("out",), **kw):
    return Subtask(sid, sid, f"do {sid}", deps, inputs, tuple(Binding(*b) for b in binds), outputs, **kw)


def body(**over):
    raw = {"name": "n", "description": "d", "dependencies": [], "inputs": [], "inputs_from_dependencies": [],
           "outputs": ["x"], "category": "HumanInput"}
    raw.update(over)
    return raw


def test_normalize_name():
    assert normalize_name("  Melted   Butter ") == "melted_butter"
    assert normalize_name("a\tb\nc") == "a_b_c"
    assert normalize_name("X") == "x"


@given(variable_names)
def test_normalize_idempotent(name):
    once = normalize_name(name)
    assert normalize_name(once) == once
    assert not any(ch.isspace() for ch in once)


@pytest.mark.parametrize("text", ["HumanInput", "human input", "human_input", "HUMAN-INPUT"])
def test_category_spellings(text):
    assert Category.parse(text) is Category.HUMAN_INPUT


def test_subtask_rejects_self_loop():
    with pytest.raises(GraphError) as err:
        st_("a", deps=("a",))
    assert err.value.kind == GraphErrorKind.SELF_LOOP


@pytest.mark.parametrize("kw, message", [
    (dict(deps=("b", "b")), "duplicate"),
    (dict(inputs=("  ",)), "blank"),
    (dict(deps=("b",), inputs=("x",), binds=[("b", "y", "X")]), "more than once"),
    (dict(deps=("b",), binds=[("b", "y", "z"), ("b", "w", "z")]), "more than once"),
])
def test_subtask_schema_errors(kw, message):
    with pytest.raises(SchemaError, match=message):
        st_("a", **kw)


def test_unknown_category():
    with pytest.raises(SchemaError, match="category"):
        st_("a", category="Cooking")


def test_parse_requires_every_field():
    for key in body():
        raw = body()
        del raw[key]
        with pytest.raises(SchemaError, match=key):
            parse_sop(json.dumps({"structured_SOP": {"s1": raw}}))


def test_parse_rejects_duplicate_keys():
    text = '{"structured_SOP": {"s1": %s, "s1": %s}}' % (json.dumps(body()), json.dumps(body()))
    with pytest.raises(SchemaError, match="duplicate"):
        parse_sop(text)


def test_parse_keeps_unknown_fields():
    raw = {"structured_SOP": {"s1": body(note="keep me")}, "source_ref": {"doc": "x"}, "version": 2}
    sop = parse_sop(json.dumps(raw))
    assert sop["s1"].extra == {"note": "keep me"}
    assert json.loads(serialize_sop(sop)) == raw


def test_parse_checks_graph_unless_asked_not_to():
    raw = {"structured_SOP": {"s1": body(dependencies=["ghost"])}}
    with pytest.raises(GraphError) as err:
        parse_sop(json.dumps(raw))
    assert err.value.kind == GraphErrorKind.DANGLING_REFERENCE
    assert len(parse_sop(json.dumps(raw), check=False)) == 1


def test_empty_sop():
    sop = parse_sop('{"structured_SOP": {}}')
    assert len(sop) == 0
    assert serialize_sop(sop) == '{"structured_SOP":{}}'
    assert initial_state(sop) == goal_state(sop) == frozenset()
    assert topological_order(sop) == []


def test_recipe_states():
    sop = load_fixture("recipe")
    assert len(sop) == 6
    assert initial_state(sop) == {"butter", "buttered_baking_dish", "canned_corn", "crackers", "egg", "pepper"}
    assert goal_state(sop) == {"baked_casserole"}


def test_bicycle_states():
    assert goal_state(load_fixture("bicycle")) == {"invoice", "shipped_bicycle"}


def test_cycle_witness():
    sop = StructuredSop.from_subtasks([st_("c", deps=("b",)), st_("b", deps=("a",)), st_("a", deps=("c",))],
                                      check=False)
    assert find_cycle(sop) == ("a", "b", "c")
    with pytest.raises(GraphError) as err:
        topological_order(sop)
    assert err.value.kind == GraphErrorKind.CYCLE
    assert set(err.value.witness) == {"a", "b", "c"}


def test_topological_ties_are_lexicographic():
    sop = StructuredSop.from_subtasks([st_("z"), st_("m", deps=("z",)), st_("a")])
    assert topological_order(sop) == ["a", "z", "m"]


@given(sops())
def test_json_round_trip(sop):
    text = serialize_sop(sop)
    again = parse_sop(text)
    assert again == sop
    assert serialize_sop(again) == text
    assert serialize_sop(parse_sop(serialize_sop(sop, indent=2))) == text


@given(sops())
def test_topological_order_respects_edges(sop):
    order = topological_order(sop)
    assert sorted(order) == sorted(sop.subtasks)
    pos = {sid: k for k, sid in enumerate(order)}
    for s in sop:
        for d in s.dependencies:
            assert pos[d] < pos[s.id]


@given(sops(), st.data())
def test_added_back_edge_is_found(sop, data):
    order = topological_order(sop)
    chains = [(s.id, d) for s in sop for d in s.dependencies]
    if not chains:
        return
    child, parent = data.draw(st.sampled_from(chains))
    # parent now also depends on child: a two-cycle at least
    bad = sop.replace(dataclasses.replace(sop[parent], dependencies=sop[parent].dependencies + (child,)))
    witness = find_cycle(bad)
    assert witness is not None
    for a, b in zip(witness, witness[1:] + witness[:1]):
        assert a in bad[b].dependencies
    assert order  # the original stays acyclic


def test_fixtures_match_published_schema():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((Path(__file__).parents[1] / "docs" / "sop-schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    for name in NAMES:
        jsonschema.validate(json.loads(fixture_path(name).read_text()), schema)
    finding = {"$ref": "#/$defs/finding", "$defs": schema["$defs"]}
    sop = load_fixture("recipe")
    broken = sop.replace(dataclasses.replace(sop["subtask3"], dependencies=("subtask1",)))
    findings = list(deterministic_scores(broken).findings) + structural_preflight(broken)
    assert findings
    for f in findings:
        jsonschema.validate(f.to_dict(), finding)
