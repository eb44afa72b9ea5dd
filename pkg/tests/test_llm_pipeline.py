from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sopstruct.core import Segment, SopDocument, serialize_sop
from sopstruct.errors import AnchorNotFound, CoverageGap, GraphError, IdCollision, JudgeParseError, LlmError, SchemaError
from sopstruct.fixtures import fixture_document, load_fixture
from sopstruct.llm import ScriptedClient, generate_structure, judge_initial_state, merge, segment
from sopstruct.llm.generation import parse_segment_answer
from sopstruct.llm.judges import parse_verdict
from sopstruct.llm.prompts import TEMPLATES, load_template, prompt_versions, render, stage_of
from sopstruct.llm.reference import ReferenceResponder
from sopstruct.llm.repair import extract_json
from sopstruct.llm.segmentation import locate, spans_from_anchors

TEXT = "Step one: wash.\n\nStep two: dry.  Step three: fold."


def sub(sid, deps=(), binds=(), outputs=("out",)):
    return {"name": sid, "description": sid, "dependencies": list(deps), "inputs": [],
            "inputs_from_dependencies": [dict(zip(("source_subtask", "source_output", "bound_as"), b)) for b in binds],
            "outputs": list(outputs), "category": "InformationProcessing"}


def answer(**subtasks):
    return json.dumps({"structured_SOP": subtasks})


# -- prompts --------------------------------------------------------------------

def test_every_template_is_tagged_v1():
    assert prompt_versions() == {name: "v1" for name in TEMPLATES}
    assert stage_of(render("segment", document="x")) == ("segment", "v1")


def test_render_is_single_pass():
    out = render("segment", document="literal {{document}} stays")
    assert "literal {{document}} stays" in out
    with pytest.raises(KeyError):
        render("segment")
    assert "{{" not in load_template("judge_goal_state").split("<graph_items>")[0]


# -- repair ---------------------------------------------------------------------

@pytest.mark.parametrize("raw", [
    '{"a": 1}',
    'Sure! Here it is:\n```json\n{"a": 1}\n```\nAnything else?',
    '{"a": 1,}',
    'prefix {"a": 1} suffix {"b": 2}',
    '```\n{"a": [1,],\n}\n```',
])
def test_extract_json_repairs(raw):
    assert extract_json(raw)["a"] in (1, [1])


def test_extract_json_keeps_commas_inside_strings():
    assert extract_json('{"a": "x,}", "b": [1, 2,]}') == {"a": "x,}", "b": [1, 2]}


@pytest.mark.parametrize("raw", ["no json here", "[1, 2]", '{"a": }'])
def test_extract_json_refuses(raw):
    with pytest.raises(ValueError):
        extract_json(raw)


@given(st.dictionaries(st.text(max_size=5), st.integers() | st.text(max_size=5), max_size=4), st.text(max_size=20))
def test_extract_json_finds_embedded_objects(obj, noise):
    noise = noise.replace("{", "").replace("}", "")
    assert extract_json(f"{noise}\n```json\n{json.dumps(obj)}\n```") == obj


# -- segmentation -----------------------------------------------------------------

def test_locate_exact_then_fuzzy():
    assert locate(TEXT, "Step two") == (17, 25)
    s, e = locate(TEXT, "step   TWO: dry.")
    assert TEXT[s:e] == "Step two: dry."
    with pytest.raises(AnchorNotFound):
        locate(TEXT, "Step four")


def test_spans_cover_text():
    spans = spans_from_anchors(TEXT, [("Step one", None), ("Step two", None), ("Step three", None)])
    assert [TEXT[s:e].strip() for s, e in spans] == ["Step one: wash.", "Step two: dry.", "Step three: fold."]


@pytest.mark.parametrize("anchors, detail", [
    ([("Step two", None)], "before the first"),
    ([("Step one", "wash."), ("Step three", None)], "between"),
    ([("Step one", "dry."), ("Step two", None)], "overlap"),
    ([("Step one", "wash.")], "after the last"),
    ([], "no segments"),
])
def test_coverage_gaps(anchors, detail):
    with pytest.raises(CoverageGap, match=detail):
        spans_from_anchors(TEXT, anchors)


def test_segment_with_model_answer():
    client = ScriptedClient(['```json\n{"segments": [{"start": "Step one"}, "Step two"]}\n```'])
    segs = segment(SopDocument("d", TEXT), client)
    assert [s.seg_id for s in segs] == ["seg1", "seg2"]
    assert segs[1].text == TEXT[segs[1].start_offset:segs[1].end_offset]
    assert segs[0].end_offset == segs[1].start_offset


def test_segment_recursion_splits_long_segments_once():
    text = "Alpha part one. Alpha part two. Beta part."
    calls = []

    def respond(prompt):
        calls.append(prompt)
        if len(calls) == 1:
            return json.dumps({"segments": [{"start": "Alpha part one"}, {"start": "Beta"}]})
        return json.dumps({"segments": [{"start": "Alpha part one"}, {"start": "Alpha part two"}]})

    segs = segment(SopDocument("d", text), ScriptedClient(respond), recursion_threshold=20)
    assert [s.text.strip() for s in segs] == ["Alpha part one.", "Alpha part two.", "Beta part."]
    assert len(calls) == 2


def test_segment_rejects_unreadable_answers():
    with pytest.raises(LlmError):
        segment(SopDocument("d", TEXT), ScriptedClient(['{"parts": []}']))


@given(st.lists(st.text(alphabet="abcdefgh ", min_size=3, max_size=15).filter(lambda s: s.strip()),
                min_size=1, max_size=6))
def test_segments_partition_the_document(pieces):
    text = "\n".join(f"[{k}] {p}" for k, p in enumerate(pieces))
    anchors = [(f"[{k}]", None) for k in range(len(pieces))]
    spans = spans_from_anchors(text, anchors)
    assert "".join(text[s:e] for s, e in spans) == text


# -- generation -------------------------------------------------------------------

def test_ids_are_namespaced_and_prior_refs_kept():
    raw = answer(a=sub("a", deps=["seg1-x"], binds=[("seg1-x", "out", "in")]), b=sub("b", deps=["a"]))
    out = parse_segment_answer(raw, "seg2-", {"seg1-x"})
    assert [s.id for s in out] == ["seg2-a", "seg2-b"]
    assert out[0].dependencies == ("seg1-x",)
    assert out[1].dependencies == ("seg2-a",)


def test_unknown_reference_and_cycle():
    with pytest.raises(GraphError):
        parse_segment_answer(answer(a=sub("a", deps=["ghost"])), "seg1-", set())
    with pytest.raises(GraphError):
        parse_segment_answer(answer(a=sub("a", deps=["b"]), b=sub("b", deps=["a"])), "seg1-", set())
    with pytest.raises(SchemaError):
        parse_segment_answer('{"structured_SOP": {"a": {"name": "a"}}}', "seg1-", set())


def test_generate_structure_reprompts_once():
    seg = Segment("seg1", 0, 5, "Do it.")
    good = answer(a=sub("a"))
    client = ScriptedClient(["not json", good])
    assert [s.id for s in generate_structure(seg, [], client)] == ["seg1-a"]
    assert client.calls == 2

    client = ScriptedClient(["not json", "still not json"])
    with pytest.raises(SchemaError):
        generate_structure(seg, [], client)
    assert client.calls == 2


def test_retry_prompt_lists_the_problem():
    seen = []

    def respond(prompt):
        seen.append(prompt)
        return answer(a=sub("a", deps=["nowhere"])) if len(seen) == 1 else answer(a=sub("a"))

    generate_structure(Segment("seg3", 0, 1, "x"), [], ScriptedClient(respond))
    assert stage_of(seen[1]) == ("structure-retry", "v1")
    assert "nowhere" in seen[1]


def test_merge():
    a = parse_segment_answer(answer(a=sub("a")), "seg1-", set())
    b = parse_segment_answer(answer(b=sub("b", deps=["seg1-a"], binds=[("seg1-a", "out", "x")])), "seg2-",
                             {"seg1-a"})
    sop = merge([a, b])
    assert list(sop.subtasks) == ["seg1-a", "seg2-b"]
    with pytest.raises(IdCollision):
        merge([a, a])


# -- judges -----------------------------------------------------------------------

def test_verdict_parsing():
    v = parse_verdict('{"score": 0.5, "rationale": "half", "missing_items": ["x"]}')
    assert (v.score, v.missing_items, v.extra_items) == (0.5, ("x",), ())
    v = parse_verdict('{"score": 1.7, "rationale": "too keen"}')
    assert v.score == 1.0 and "clamped" in v.rationale
    assert parse_verdict('{"score": "80%"}').score == 1.0
    assert parse_verdict('{"score": -2}').score == 0.0
    for bad in ('{"rationale": "no score"}', "nothing", '{"score": true}', '{"score": 1, "missing_items": "x"}'):
        with pytest.raises(JudgeParseError):
            parse_verdict(bad)


def test_judge_makes_one_call():
    sop = load_fixture("recipe")
    doc = fixture_document("recipe")
    ref = ReferenceResponder()
    ref.add(doc.text, sop)
    client = ScriptedClient(ref)
    assert judge_initial_state(sop, doc, client).score == 1.0
    assert client.calls == 1


def test_reference_pipeline_reproduces_fixture():
    sop = load_fixture("bicycle")
    doc = fixture_document("bicycle")
    ref = ReferenceResponder()
    ref.add(doc.text, sop)
    client = ScriptedClient(ref)
    segs = segment(doc, client)
    parts = [generate_structure(s, [], client) for s in segs]
    merged = merge(parts)
    assert len(merged) == len(sop)
    assert [s.id.removeprefix("seg1-") for s in merged] == list(sop.subtasks)
    assert serialize_sop(merged).count("seg1-") > len(sop)
