"""Dataset ingestion, per-document evaluation and batch scoring."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .core import SopDocument, StructuredSop, Subtask, parse_sop, serialize_sop
from .errors import FormatError, IngestError, SopError
from .llm.client import ChatClient, LlmTranscript, RecordingClient
from .llm.generation import generate_structure, merge
from .llm.judges import judge_completeness, judge_goal_state, judge_initial_state
from .llm.prompts import prompt_versions
from .llm.segmentation import DEFAULT_RECURSION_THRESHOLD, segment
from .pddl import emit_domain, emit_problem, generate_problem, sanitize
from .planner import PlanOutcome, Rejected, Solved, Unsolvable, structured_plan_score
from .report import DocRow, MetricReport
from .validators import Finding, deterministic_scores

FORMATS = {"text_dir": "text_dir", "plaintextdir": "text_dir", "jsonl": "jsonl", "jsonlines": "jsonl", "csv": "csv"}


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    root_path: str
    format: str = "text_dir"
    # key for jsonl rows, column for csv files
    text_field: str = "text"
    limit: int | None = None

    def __post_init__(self) -> None:
        fmt = FORMATS.get(self.format.lower())
        if fmt is None:
            raise ValueError(f"unknown dataset format {self.format!r}")
        object.__setattr__(self, "format", fmt)
        if self.limit is not None and self.limit < 0:
            raise ValueError("limit must be >= 0")


def _doc(doc_id: str, text: str, location: str) -> SopDocument:
    try:
        return SopDocument(doc_id, text)
    except SopError:
        raise FormatError(location, "document text is empty") from None


def ingest(spec: DatasetSpec) -> list[SopDocument]:
    """Documents of a dataset in a stable order.

    Text directories yield one document per ``*.txt`` file, sorted by file
    name, with the file stem as id. JSONL and CSV files yield one document
    per row, with ids ``<name>-<row index>``.
    """
    root = Path(spec.root_path)
    if not root.exists():
        raise IngestError(f"{root}: no such file or directory")
    docs: list[SopDocument] = []
    try:
        if spec.format == "text_dir":
            if not root.is_dir():
                raise IngestError(f"{root}: not a directory")
            for path in sorted(root.glob("*.txt"), key=lambda p: p.name):
                docs.append(_doc(path.stem, path.read_text(encoding="utf-8"), str(path)))
        elif spec.format == "jsonl":
            index = 0
            for n, line in enumerate(root.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{root}:{n}", f"invalid JSON ({exc.msg})") from None
                if not isinstance(row, dict) or not isinstance(row.get(spec.text_field), str):
                    raise FormatError(f"{root}:{n}", f"missing text field {spec.text_field!r}")
                docs.append(_doc(f"{spec.name}-{index}", row[spec.text_field], f"{root}:{n}"))
                index += 1
        else:
            with open(root, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                if spec.text_field not in (reader.fieldnames or []):
                    raise FormatError(f"{root}:1", f"no column {spec.text_field!r}")
                for index, row in enumerate(reader):
                    location = f"{root}:{reader.line_num}"
                    text = row.get(spec.text_field)
                    if text is None:
                        raise FormatError(location, f"row has no {spec.text_field!r} value")
                    docs.append(_doc(f"{spec.name}-{index}", text, location))
    except OSError as exc:
        raise IngestError(f"{root}: {exc}") from exc
    return docs[: spec.limit] if spec.limit is not None else docs


@dataclass
class PipelineConfig:
    concurrency: int = 4
    # segments longer than this get one more segmentation pass; None disables it
    recursion_threshold: int | None = DEFAULT_RECURSION_THRESHOLD
    model: str = "unknown"
    timestamp: str | None = None
    git_revision: str | None = None
    # record call latencies in per-document transcripts (off for replayed runs)
    timed: bool = True

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")


@dataclass
class DocResult:
    """Everything produced for one document, row included."""

    row: DocRow
    sop: StructuredSop | None = None
    findings: tuple[Finding, ...] = ()
    outcome: PlanOutcome | None = None
    transcript: LlmTranscript = field(default_factory=LlmTranscript)


def git_revision(cwd: str | Path | None = None) -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=cwd, capture_output=True,
                             text=True, timeout=5, check=True)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def run_metadata(config: PipelineConfig) -> dict[str, Any]:
    stamp = config.timestamp or _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return {
        "model": config.model,
        "prompt_versions": prompt_versions(),
        "timestamp": stamp,
        "git_revision": config.git_revision or git_revision(),
    }


def _note(stage: str, exc: BaseException) -> str:
    return f"{stage}: {type(exc).__name__}: {exc}"


def score_sop(sop: StructuredSop, doc_id: str, doc: SopDocument | None = None,
              client: ChatClient | None = None, errors: list[str] | None = None) -> DocResult:
    """All six metrics for one graph.

    Judged metrics need both the source text and a client; without them they
    stay None (not computed). A judge that fails scores 0 with an error note.
    """
    errors = list(errors or [])
    scores = deterministic_scores(sop)
    plan_score, outcome = structured_plan_score(sop)
    findings = list(scores.findings)
    if isinstance(outcome, Rejected):
        findings += [f for f in outcome.findings if f not in findings]
    judged: dict[str, float | None] = {"initial_state": None, "goal_state": None, "completeness": None}
    if doc is not None and client is not None:
        for key, judge in (("initial_state", judge_initial_state), ("goal_state", judge_goal_state),
                           ("completeness", judge_completeness)):
            try:
                judged[key] = judge(sop, doc, client).score
            except SopError as exc:
                judged[key] = 0.0
                errors.append(_note(f"judge {key}", exc))
    row = DocRow(
        doc_id=doc_id,
        structured_plan=float(plan_score),
        dependency=scores.dependency_score,
        input_from_dependency=scores.input_from_dependency_score,
        errors=tuple(errors),
        **judged,
    )
    return DocResult(row, sop, tuple(findings), outcome)


def _failed_row(doc_id: str, note: str) -> DocRow:
    return DocRow(doc_id, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, errors=(note,))


def evaluate_document(doc: SopDocument, config: PipelineConfig, client: ChatClient) -> DocResult:
    rec = RecordingClient(client, timed=config.timed)
    try:
        segments = segment(doc, rec, config.recursion_threshold)
        context: list[Subtask] = []
        subgraphs = []
        for seg in segments:
            part = generate_structure(seg, context, rec)
            subgraphs.append(part)
            context += part
        sop = merge(subgraphs, source_ref={"doc_id": doc.doc_id,
                                           "segments": [[s.start_offset, s.end_offset] for s in segments]})
    except Exception as exc:  # any stage failure becomes a zero row, never a batch abort
        return DocResult(_failed_row(doc.doc_id, _note("structure", exc)), transcript=rec.transcript)
    try:
        result = score_sop(sop, doc.doc_id, doc, rec)
    except Exception as exc:
        return DocResult(_failed_row(doc.doc_id, _note("scoring", exc)), sop, transcript=rec.transcript)
    result.transcript = rec.transcript
    return result


def _map_ordered(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def evaluate(docs: Sequence[SopDocument], config: PipelineConfig, client: ChatClient, *,
             name: str = "evaluation", out_dir: str | Path | None = None) -> MetricReport:
    """Run the full pipeline over ``docs``; rows come back in input order."""
    results = _map_ordered(lambda d: evaluate_document(d, config, client), list(docs), config.concurrency)
    report = MetricReport(name, tuple(r.row for r in results), run_metadata(config))
    if out_dir is not None:
        write_artifacts(results, out_dir)
    return report


def score_precomputed(dags: Iterable[str | Path], doc_texts: dict[str, str] | None = None,
                      client: ChatClient | None = None, config: PipelineConfig | None = None, *,
                      name: str = "precomputed", out_dir: str | Path | None = None) -> MetricReport:
    """Score structured SOP files produced elsewhere; the file stem is the doc id.

    A file that does not parse gives a zero row carrying the parse error.
    Graph defects (cycles, dangling references) do not stop scoring.
    """
    config = config or PipelineConfig(concurrency=1)
    doc_texts = doc_texts or {}

    def one(path: Path) -> DocResult:
        doc_id = path.stem
        try:
            sop = parse_sop(path.read_text(encoding="utf-8"), check=False)
        except (OSError, SopError) as exc:
            return DocResult(_failed_row(doc_id, _note("parse", exc)))
        text = doc_texts.get(doc_id)
        doc = SopDocument(doc_id, text) if text and text.strip() else None
        rec = RecordingClient(client, timed=config.timed) if client is not None else None
        result = score_sop(sop, doc_id, doc, rec)
        if rec is not None:
            result.transcript = rec.transcript
        return result

    results = _map_ordered(one, [Path(p) for p in dags], config.concurrency)
    report = MetricReport(name, tuple(r.row for r in results), run_metadata(config))
    if out_dir is not None:
        write_artifacts(results, out_dir)
    return report


def _plan_text(outcome: PlanOutcome | None) -> str:
    if isinstance(outcome, Solved):
        return outcome.plan.to_text()
    if isinstance(outcome, Unsolvable):
        lines = ["; no plan"] + [f"; unreached {g}" for g in sorted(outcome.unreached_goals)]
        return "\n".join(lines) + "\n"
    if isinstance(outcome, Rejected):
        return "; rejected by structural preflight\n"
    return "; not planned\n"


def write_artifacts(results: Sequence[DocResult], out_dir: str | Path) -> None:
    """Per-document files under ``out_dir/docs/<doc_id>/``."""
    base = Path(out_dir) / "docs"
    for r in results:
        d = base / r.row.doc_id
        d.mkdir(parents=True, exist_ok=True)
        (d / "transcript.jsonl").write_text(r.transcript.to_jsonl(), encoding="utf-8")
        (d / "findings.jsonl").write_text(
            "".join(json.dumps(f.to_dict(), sort_keys=True) + "\n" for f in r.findings)
            + "".join(json.dumps({"error": e}) + "\n" for e in r.row.errors),
            encoding="utf-8",
        )
        if r.sop is None:
            continue
        (d / "sop.json").write_text(serialize_sop(r.sop, indent=2) + "\n", encoding="utf-8")
        (d / "plan.txt").write_text(_plan_text(r.outcome), encoding="utf-8")
        try:
            problem, _ = generate_problem(r.sop, name=sanitize(f"sop-{r.row.doc_id}"))
        except SopError:
            continue
        (d / "domain.pddl").write_text(emit_domain(), encoding="utf-8")
        (d / "problem.pddl").write_text(emit_problem(problem), encoding="utf-8")
