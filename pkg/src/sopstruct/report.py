"""Metric rows, dataset aggregates and their markdown/csv/json renderings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any

# key, table label; the order is the row order of the rendered table
METRICS: tuple[tuple[str, str], ...] = (
    ("structured_plan", "Structured Plan Score"),
    ("initial_state", "Plan Initial State Validation"),
    ("goal_state", "Plan Goal State Validation"),
    ("completeness", "Plan Completeness Score"),
    ("dependency", "Dependency Score"),
    ("input_from_dependency", "Inputs from Dependency Score"),
)
METRIC_KEYS = tuple(k for k, _ in METRICS)
LABELS = dict(METRICS)


@dataclass(frozen=True)
class DocRow:
    """Per-document metric values in [0, 1]; None means not computed."""

    doc_id: str
    structured_plan: float | None = None
    initial_state: float | None = None
    goal_state: float | None = None
    completeness: float | None = None
    dependency: float | None = None
    input_from_dependency: float | None = None
    errors: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for key in METRIC_KEYS:
            v = getattr(self, key)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{self.doc_id}: {key}={v} outside [0, 1]")
        if self.structured_plan not in (None, 0, 1):
            raise ValueError("structured_plan is 0 or 1")

    def value(self, key: str) -> float | None:
        return getattr(self, key)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"doc_id": self.doc_id}
        for key in METRIC_KEYS:
            out[key] = self.value(key)
        out["errors"] = list(self.errors)
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> DocRow:
        return cls(raw["doc_id"], *(raw.get(k) for k in METRIC_KEYS), errors=tuple(raw.get("errors", ())))


@dataclass(frozen=True)
class MetricReport:
    name: str
    rows: tuple[DocRow, ...]
    metadata: dict[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        ids = [r.doc_id for r in self.rows]
        if len(set(ids)) != len(ids):
            raise ValueError("doc ids in a report must be unique")

    def aggregate(self, key: str) -> float | None:
        """Mean over documents where the metric was computed, as a percentage."""
        values = [r.value(key) for r in self.rows if r.value(key) is not None]
        if not values:
            return None
        return sum(values) / len(values) * 100

    def aggregates(self) -> dict[str, float | None]:
        return {key: self.aggregate(key) for key in METRIC_KEYS}

    @property
    def errored(self) -> list[DocRow]:
        return [r for r in self.rows if r.errors]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "metadata": self.metadata,
            "metrics": [{"key": k, "label": label, "value": self.aggregate(k)} for k, label in METRICS],
            "rows": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> MetricReport:
        return cls(raw["name"], tuple(DocRow.from_dict(r) for r in raw["rows"]), raw.get("metadata", {}))


def _pct(value: float | None) -> str:
    return "N/A" if value is None else f"{value:.2f}"


def render_markdown(report: MetricReport) -> str:
    lines = [f"# Evaluation results (%): {report.name}", "", "| Metric | Score (%) |", "|---|---|"]
    for key, label in METRICS:
        lines.append(f"| {label} | {_pct(report.aggregate(key))} |")
    lines += ["", f"Documents: {len(report.rows)} ({len(report.errored)} with errors)"]
    meta = report.metadata
    if meta:
        lines.append("")
        for key in sorted(meta):
            value = meta[key]
            if isinstance(value, dict):
                value = ", ".join(f"{k} {v}" for k, v in sorted(value.items()))
            lines.append(f"- {key}: {value}")
    return "\n".join(lines) + "\n"


def render_csv(report: MetricReport) -> str:
    """Long format: one line per (document, metric) plus one per dataset metric."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scope", "doc_id", "metric", "value"])
    for row in report.rows:
        for key in METRIC_KEYS:
            v = row.value(key)
            writer.writerow(["doc", row.doc_id, key, "" if v is None else repr(float(v))])
    for key in METRIC_KEYS:
        v = report.aggregate(key)
        writer.writerow(["dataset", "", key, "" if v is None else repr(v)])
    return buf.getvalue()


def render_json(report: MetricReport) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"


RENDERERS = {"markdown": render_markdown, "md": render_markdown, "csv": render_csv, "json": render_json}


def render_report(report: MetricReport, fmt: str = "markdown") -> str:
    try:
        return RENDERERS[fmt](report)
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r}") from None
