"""Command-line entry point: ``sopstruct <command> ...``.

Exit codes: 0 success, 2 a document errored (or a check failed), 3 bad
configuration or unreadable input.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .core import SopDocument, parse_sop, serialize_sop
from .errors import IngestError, LlmError, SopError
from .generators import SopGenerator
from .harness import DatasetSpec, PipelineConfig, evaluate, ingest, score_precomputed
from .llm.client import HttpChatClient, RecordingClient, ReplayClient
from .llm.generation import generate_structure, merge
from .llm.segmentation import segment
from .pddl import emit_domain, emit_problem, generate_problem
from .planner import Solved, build_task, read_plan_file, structured_plan_score, validate_plan
from .report import MetricReport, render_report
from .validators import deterministic_scores, structural_preflight

EXIT_OK, EXIT_ERRORED, EXIT_CONFIG = 0, 2, 3
SUFFIX = {"md": "md", "csv": "csv", "json": "json"}


class InputFailure(Exception):
    pass


def _config(args) -> RunConfig:
    if not getattr(args, "config", None):
        return RunConfig()
    return load_config(args.config)


def _client(args, cfg: RunConfig):
    if getattr(args, "mock_transcript", None):
        try:
            return ReplayClient.from_file(args.mock_transcript)
        except (OSError, LlmError) as exc:
            raise InputFailure(f"cannot read transcript: {exc}") from None
    if cfg.llm is None:
        raise InputFailure("no LLM configured: pass --mock-transcript or an llm section in --config")
    return HttpChatClient(cfg.llm)


def _read_doc(path: str) -> SopDocument:
    try:
        return SopDocument(Path(path).stem, Path(path).read_text(encoding="utf-8"))
    except (OSError, SopError) as exc:
        raise InputFailure(f"{path}: {exc}") from None


def _read_sop(path: str, check: bool = False):
    try:
        return parse_sop(Path(path).read_text(encoding="utf-8"), check=check)
    except (OSError, SopError) as exc:
        raise InputFailure(f"{path}: {exc}") from None


def _emit(text: str, out: str | None, name: str) -> None:
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_segment(args) -> int:
    cfg = _config(args)
    doc = _read_doc(args.document)
    segs = segment(doc, _client(args, cfg), cfg.pipeline.recursion_threshold)
    data = [{"seg_id": s.seg_id, "start": s.start_offset, "end": s.end_offset, "text": s.text} for s in segs]
    _emit(json.dumps(data, indent=2, ensure_ascii=False) + "\n", args.out, "segments.json")
    return EXIT_OK


def cmd_structure(args) -> int:
    cfg = _config(args)
    doc = _read_doc(args.document)
    client = RecordingClient(_client(args, cfg))
    segs = segment(doc, client, cfg.pipeline.recursion_threshold)
    context, parts = [], []
    for seg in segs:
        part = generate_structure(seg, context, client)
        parts.append(part)
        context += part
    sop = merge(parts, source_ref={"doc_id": doc.doc_id})
    _emit(serialize_sop(sop, indent=2) + "\n", args.out, "sop.json")
    if args.out:
        client.transcript.save(Path(args.out) / "transcript.jsonl")
    return EXIT_OK


def cmd_validate(args) -> int:
    sop = _read_sop(args.sop)
    scores = deterministic_scores(sop)
    findings = list(scores.findings) + structural_preflight(sop)
    out = {
        "dependency_score": scores.dependency_score,
        "input_from_dependency_score": scores.input_from_dependency_score,
        "findings": [f.to_dict() for f in findings],
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out, "findings.json")
    return EXIT_OK if not findings else EXIT_ERRORED


def cmd_plan(args) -> int:
    sop = _read_sop(args.sop)
    if args.plan_file:
        if structural_preflight(sop):
            print("SOP fails structural preflight; cannot validate a plan", file=sys.stderr)
            return EXIT_ERRORED
        task, _ = build_task(sop)
        ok, diag = validate_plan(task, read_plan_file(args.plan_file))
        print("valid" if ok else f"invalid: {diag}")
        return EXIT_OK if ok else EXIT_ERRORED
    score, outcome = structured_plan_score(sop)
    if isinstance(outcome, Solved):
        _emit(outcome.plan.to_text(), args.out, "plan.txt")
        return EXIT_OK
    if hasattr(outcome, "findings"):
        for f in outcome.findings:
            print(f"rejected: {f.kind} {f.subtask_id}: {f.detail}", file=sys.stderr)
    else:
        print("unsolvable; never executed: " + ", ".join(outcome.unexecuted_subtasks), file=sys.stderr)
        for goal in sorted(outcome.unreached_goals):
            print(f"  unreached {goal}", file=sys.stderr)
    return EXIT_ERRORED


def cmd_emit_pddl(args) -> int:
    sop = _read_sop(args.sop)
    problem, _ = generate_problem(sop, name=args.name)
    if args.out:
        _emit(emit_domain(), args.out, "domain.pddl")
        _emit(emit_problem(problem), args.out, "problem.pddl")
    else:
        sys.stdout.write(emit_domain() + "\n" + emit_problem(problem))
    return EXIT_OK


def _write_reports(report: MetricReport, out: str | None, fmt: str) -> None:
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        for f in ("md", "csv", "json"):
            (Path(out) / f"report.{f}").write_text(render_report(report, f), encoding="utf-8")
    sys.stdout.write(render_report(report, fmt))


def _pipeline(cfg: RunConfig, args) -> PipelineConfig:
    pipe = cfg.pipeline
    if args.timestamp:
        pipe.timestamp = args.timestamp
    if args.mock_transcript:
        pipe.timed = False
        if pipe.model == "unknown":
            pipe.model = f"replay:{Path(args.mock_transcript).name}"
    return pipe


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    if args.dataset:
        cfg.datasets = [DatasetSpec(Path(args.dataset).name or "dataset", args.dataset)]
    if not cfg.datasets:
        raise InputFailure("no datasets: pass --dataset or list them in --config")
    docs = []
    for spec in cfg.datasets:
        docs += ingest(spec)
    name = "+".join(s.name for s in cfg.datasets)
    report = evaluate(docs, _pipeline(cfg, args), _client(args, cfg), name=name, out_dir=args.out)
    if args.out:
        # all exchanges in document order; usable later as --mock-transcript
        out = Path(args.out)
        parts = [(out / "docs" / r.doc_id / "transcript.jsonl").read_text(encoding="utf-8") for r in report.rows]
        (out / "transcript.jsonl").write_text("".join(parts), encoding="utf-8")
    _write_reports(report, args.out, args.format)
    return EXIT_ERRORED if report.errored else EXIT_OK


def cmd_score(args) -> int:
    cfg = _config(args)
    texts = {}
    if args.docs:
        for p in sorted(Path(args.docs).glob("*.txt")):
            texts[p.stem] = p.read_text(encoding="utf-8")
    client = _client(args, cfg) if (args.mock_transcript or cfg.llm) else None
    report = score_precomputed(args.sops, texts, client, _pipeline(cfg, args), out_dir=args.out)
    _write_reports(report, args.out, args.format)
    return EXIT_ERRORED if report.errored else EXIT_OK


def cmd_report(args) -> int:
    try:
        report = MetricReport.from_dict(json.loads(Path(args.report).read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputFailure(f"{args.report}: {exc}") from None
    _emit(render_report(report, args.format), args.out, f"report.{SUFFIX[args.format]}")
    return EXIT_OK


def cmd_generate(args) -> int:
    rng = random.Random(args.seed)
    gen = SopGenerator(max_subtasks=args.max_subtasks, broken_rate=args.broken_rate)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        (out / f"sop{k:04d}.json").write_text(serialize_sop(gen(rng), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sopstruct", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, llm=False, fmt=False):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(fn=fn)
        sp.add_argument("--out", help="output directory (default: stdout)")
        if llm:
            sp.add_argument("--config", help="JSON run configuration")
            sp.add_argument("--mock-transcript", help="replay model answers from this JSONL transcript")
        if fmt:
            sp.add_argument("--format", choices=sorted(SUFFIX), default="md")
            sp.add_argument("--timestamp", help="fixed timestamp for the report metadata")
        return sp

    sp = add("segment", cmd_segment, "split a document into segments", llm=True)
    sp.add_argument("document")
    sp = add("structure", cmd_structure, "build a structured SOP from a document", llm=True)
    sp.add_argument("document")
    sp = add("validate", cmd_validate, "deterministic checks on a structured SOP")
    sp.add_argument("sop")
    sp = add("plan", cmd_plan, "find or check a plan for a structured SOP")
    sp.add_argument("sop")
    sp.add_argument("--plan-file", help="validate this plan instead of searching")
    sp = add("emit-pddl", cmd_emit_pddl, "write the meta-domain and problem")
    sp.add_argument("sop")
    sp.add_argument("--name", default="sop-problem")
    sp = add("evaluate", cmd_evaluate, "run the pipeline and all metrics on datasets", llm=True, fmt=True)
    sp.add_argument("--dataset", help="directory of .txt documents (instead of config datasets)")
    sp = add("score", cmd_score, "score existing structured SOP files", llm=True, fmt=True)
    sp.add_argument("sops", nargs="+")
    sp.add_argument("--docs", help="directory of <doc_id>.txt source texts for the judged metrics")
    sp = add("report", cmd_report, "re-render a report.json")
    sp.add_argument("report")
    sp.add_argument("--format", choices=sorted(SUFFIX), default="md")
    sp = add("generate", cmd_generate, "write random structured SOPs")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--max-subtasks", type=int, default=12)
    sp.add_argument("--broken-rate", type=float, default=0.0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, IngestError, InputFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERRORED


if __name__ == "__main__":
    sys.exit(main())
