"""Structured SOPs: DAG model, deterministic checks, PDDL meta-planning and LLM evaluation."""

from .core import (
    Binding,
    Category,
    Segment,
    SopDocument,
    StructuredSop,
    Subtask,
    goal_state,
    initial_state,
    normalize_name,
    parse_sop,
    serialize_sop,
    topological_order,
)
from .errors import (
    AnchorNotFound,
    CoverageGap,
    FormatError,
    GraphError,
    GraphErrorKind,
    IdCollision,
    IngestError,
    JudgeParseError,
    LlmError,
    ParseError,
    SchemaError,
    SopError,
    SymbolError,
    UnsupportedFeature,
)
from .planner import Plan, Rejected, Solved, Unsolvable, build_task, solve, structured_plan_score, validate_plan
from .report import METRICS, DocRow, MetricReport, render_report
from .validators import (
    Check,
    DeterministicScores,
    Finding,
    dependency_check,
    deterministic_scores,
    input_from_dependency_check,
    structural_preflight,
)

__version__ = "0.1.0"
