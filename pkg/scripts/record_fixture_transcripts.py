"""Record the replay transcripts shipped with the fixtures.

Answers come from ReferenceResponder, which reads them off the hand-written
reference graphs. ``golden.jsonl`` covers every fixture document unchanged.
``mutated.jsonl`` covers recipe plus an api_weather graph whose second
subtask lost its dependency edge, so that document's Dependency Score is 0.5.

    python3 scripts/record_fixture_transcripts.py
"""

from __future__ import annotations

import argparse
import dataclasses

from sopstruct.core import StructuredSop
from sopstruct.fixtures import NAMES, fixture_document, load_fixture, transcript_path
from sopstruct.harness import PipelineConfig, evaluate
from sopstruct.llm import LlmTranscript, RecordingClient, ScriptedClient
from sopstruct.llm.reference import ReferenceResponder

MUTATED_NAMES = ("api_weather", "recipe")


def mutated_api_weather() -> StructuredSop:
    sop = load_fixture("api_weather")
    return sop.replace(dataclasses.replace(sop["subtask2"], dependencies=()))


def record(references: dict[str, StructuredSop], names) -> LlmTranscript:
    responder = ReferenceResponder()
    for name in names:
        responder.add(fixture_document(name).text, references[name])
    rec = RecordingClient(ScriptedClient(responder))
    docs = [fixture_document(n) for n in names]
    # one worker keeps the transcript order stable
    report = evaluate(docs, PipelineConfig(concurrency=1, timestamp="-", git_revision="-"), rec)
    bad = [(r.doc_id, r.errors) for r in report.rows if r.errors]
    if bad:
        raise SystemExit(f"recording failed: {bad}")
    # latencies are zeroed so re-recording gives identical files
    return LlmTranscript(dataclasses.replace(e, latency_ms=0.0) for e in rec.transcript)


def main() -> None:
    argparse.ArgumentParser(description=__doc__.splitlines()[0]).parse_args()
    golden = {n: load_fixture(n) for n in NAMES}
    for label, refs, names in (
        ("golden", golden, sorted(NAMES)),
        ("mutated", {**golden, "api_weather": mutated_api_weather()}, MUTATED_NAMES),
    ):
        path = transcript_path(label)
        path.parent.mkdir(parents=True, exist_ok=True)
        transcript = record(refs, names)
        transcript.save(path)
        print(f"wrote {path} ({len(transcript)} exchanges)")


if __name__ == "__main__":
    main()
