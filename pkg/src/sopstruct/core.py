"""Data model for structured SOPs and the pure graph operations over it.

A structured SOP is a DAG of subtasks. An edge runs from each dependency to
its dependent subtask; data flows along edges through explicit bindings that
name the producing subtask, the produced variable and the local slot name.
"""

from __future__ import annotations

import enum
import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import GraphError, GraphErrorKind, SchemaError

SOP_KEY = "structured_SOP"

SUBTASK_FIELDS = (
    "name",
    "description",
    "dependencies",
    "inputs",
    "inputs_from_dependencies",
    "outputs",
    "category",
)
BINDING_FIELDS = ("source_subtask", "source_output", "bound_as")


class Category(str, enum.Enum):
    HUMAN_INPUT = "HumanInput"
    INFORMATION_PROCESSING = "InformationProcessing"
    INFORMATION_EXTRACTION = "InformationExtraction"
    KNOWLEDGE = "Knowledge"
    DECISION = "Decision"

    @classmethod
    def parse(cls, value: str) -> Category:
        """Accept the canonical spelling as well as spaced or snake-case variants."""
        key = "".join(ch for ch in value.lower() if ch.isalpha())
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(value)


def normalize_name(name: str) -> str:
    """Normal form used whenever variable names are compared.

    >>> normalize_name("  Melted   Butter ")
    'melted_butter'
    """
    return "_".join(name.split()).lower()


@dataclass(frozen=True)
class Binding:
    source_subtask: str
    source_output: str
    bound_as: str
    extra: dict[str, Any] = field(default_factory=dict, hash=False, repr=False)


@dataclass(frozen=True)
class Subtask:
    id: str
    name: str
    description: str
    dependencies: tuple[str, ...] = ()
    inputs: tuple[str, ...] = ()
    inputs_from_dependencies: tuple[Binding, ...] = ()
    outputs: tuple[str, ...] = ()
    category: Category = Category.INFORMATION_PROCESSING
    extra: dict[str, Any] = field(default_factory=dict, hash=False, repr=False)

    def __post_init__(self) -> None:
        # Lists are accepted for convenience and frozen into tuples.
        for name in ("dependencies", "inputs", "inputs_from_dependencies", "outputs"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        if not isinstance(self.category, Category):
            try:
                object.__setattr__(self, "category", Category.parse(str(self.category)))
            except ValueError:
                raise SchemaError(f"unknown category {self.category!r}", self.id) from None

        if not isinstance(self.id, str) or not self.id.strip():
            raise SchemaError("subtask id must be a nonempty string")
        if self.id in self.dependencies:
            raise GraphError(GraphErrorKind.SELF_LOOP, self.id, "subtask lists itself as a dependency")
        if len(set(self.dependencies)) != len(self.dependencies):
            raise SchemaError("duplicate entries in dependencies", self.id)
        for var in (*self.inputs, *self.outputs, *(b.bound_as for b in self.inputs_from_dependencies),
                    *(b.source_output for b in self.inputs_from_dependencies)):
            if not normalize_name(var):
                raise SchemaError("variable names must not be blank", self.id)

        slots = {normalize_name(v) for v in self.inputs}
        for b in self.inputs_from_dependencies:
            slot = normalize_name(b.bound_as)
            if slot in slots:
                raise SchemaError(f"input slot {b.bound_as!r} is defined more than once", self.id)
            slots.add(slot)

    @property
    def bound_names(self) -> tuple[str, ...]:
        return tuple(b.bound_as for b in self.inputs_from_dependencies)


@dataclass(frozen=True)
class StructuredSop:
    """The SOP graph: subtasks in insertion order, keyed by id.

    Construction does not check graph-level invariants (dangling references,
    cycles) so that defective graphs can still be inspected and scored; call
    :meth:`check` or build through :func:`parse_sop` to enforce them.
    """

    subtasks: Mapping[str, Subtask] = field(default_factory=dict)
    source_ref: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict, hash=False, repr=False)

    def __post_init__(self) -> None:
        subtasks = dict(self.subtasks)
        for key, st in subtasks.items():
            if key != st.id:
                raise SchemaError(f"map key {key!r} does not match subtask id {st.id!r}", key)
        object.__setattr__(self, "subtasks", subtasks)

    @classmethod
    def from_subtasks(cls, subtasks: Iterable[Subtask], check: bool = True, **kwargs: Any) -> StructuredSop:
        table: dict[str, Subtask] = {}
        for st in subtasks:
            if st.id in table:
                raise SchemaError("duplicate subtask id", st.id)
            table[st.id] = st
        sop = cls(table, **kwargs)
        if check:
            sop.check()
        return sop

    def __len__(self) -> int:
        return len(self.subtasks)

    def __iter__(self):
        return iter(self.subtasks.values())

    def __getitem__(self, subtask_id: str) -> Subtask:
        return self.subtasks[subtask_id]

    def replace(self, *subtasks: Subtask) -> StructuredSop:
        """Copy with the given subtasks swapped in by id (order kept)."""
        table = dict(self.subtasks)
        for st in subtasks:
            table[st.id] = st
        return StructuredSop(table, self.source_ref, dict(self.extra))

    def without(self, subtask_id: str) -> StructuredSop:
        table = {k: v for k, v in self.subtasks.items() if k != subtask_id}
        return StructuredSop(table, self.source_ref, dict(self.extra))

    def children(self) -> dict[str, list[str]]:
        kids: dict[str, list[str]] = {sid: [] for sid in self.subtasks}
        for st in self:
            for dep in st.dependencies:
                if dep in kids:
                    kids[dep].append(st.id)
        return kids

    def roots(self) -> list[str]:
        return [st.id for st in self if not st.dependencies]

    def leaves(self) -> list[str]:
        kids = self.children()
        return [sid for sid, c in kids.items() if not c]

    def dangling_references(self) -> list[tuple[str, str]]:
        """(subtask id, missing id) pairs from dependencies and bindings."""
        out = []
        for st in self:
            for dep in st.dependencies:
                if dep not in self.subtasks:
                    out.append((st.id, dep))
            for b in st.inputs_from_dependencies:
                if b.source_subtask not in self.subtasks and b.source_subtask not in st.dependencies:
                    out.append((st.id, b.source_subtask))
        return out

    def check(self) -> None:
        """Raise GraphError if any reference dangles or the graph has a cycle."""
        for sid, missing in self.dangling_references():
            raise GraphError(GraphErrorKind.DANGLING_REFERENCE, sid, f"unknown subtask {missing!r}")
        topological_order(self)


@dataclass(frozen=True)
class SopDocument:
    doc_id: str
    text: str

    def __post_init__(self) -> None:
        if not " ".join(self.text.split()):
            raise SchemaError(f"document {self.doc_id!r} has no text")


@dataclass(frozen=True)
class Segment:
    seg_id: str
    start_offset: int
    end_offset: int
    text: str


# -- JSON ---------------------------------------------------------------------


def _reject_duplicates(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise SchemaError(f"duplicate key {key!r}", key)
        out[key] = value
    return out


def _str_list(raw: Any, field_name: str, sid: str) -> tuple[str, ...]:
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise SchemaError(f"{field_name} must be a list of strings", sid)
    return tuple(raw)


def _require_str(raw: Mapping[str, Any], key: str, sid: str) -> str:
    if key not in raw:
        raise SchemaError(f"missing field {key!r}", sid)
    value = raw[key]
    if not isinstance(value, str):
        raise SchemaError(f"{key} must be a string", sid)
    return value


def binding_from_dict(raw: Any, sid: str) -> Binding:
    if not isinstance(raw, dict):
        raise SchemaError("inputs_from_dependencies entries must be objects", sid)
    values = [_require_str(raw, key, sid) for key in BINDING_FIELDS]
    extra = {k: v for k, v in raw.items() if k not in BINDING_FIELDS}
    return Binding(*values, extra=extra)


def subtask_from_dict(sid: str, raw: Any) -> Subtask:
    if not isinstance(raw, dict):
        raise SchemaError("subtask must be a JSON object", sid)
    for key in SUBTASK_FIELDS:
        if key not in raw:
            raise SchemaError(f"missing field {key!r}", sid)
    bindings = raw["inputs_from_dependencies"]
    if not isinstance(bindings, list):
        raise SchemaError("inputs_from_dependencies must be a list", sid)
    category = raw["category"]
    if not isinstance(category, str):
        raise SchemaError("category must be a string", sid)
    try:
        cat = Category.parse(category)
    except ValueError:
        raise SchemaError(f"unknown category {category!r}", sid) from None
    return Subtask(
        id=sid,
        name=_require_str(raw, "name", sid),
        description=_require_str(raw, "description", sid),
        dependencies=_str_list(raw["dependencies"], "dependencies", sid),
        inputs=_str_list(raw["inputs"], "inputs", sid),
        inputs_from_dependencies=tuple(binding_from_dict(b, sid) for b in bindings),
        outputs=_str_list(raw["outputs"], "outputs", sid),
        category=cat,
        extra={k: v for k, v in raw.items() if k not in SUBTASK_FIELDS},
    )


def subtask_to_dict(st: Subtask) -> dict[str, Any]:
    return {
        "name": st.name,
        "description": st.description,
        "dependencies": list(st.dependencies),
        "inputs": list(st.inputs),
        "inputs_from_dependencies": [
            {"source_subtask": b.source_subtask, "source_output": b.source_output,
             "bound_as": b.bound_as, **b.extra}
            for b in st.inputs_from_dependencies
        ],
        "outputs": list(st.outputs),
        "category": st.category.value,
        **st.extra,
    }


def sop_from_dict(raw: Any, check: bool = True) -> StructuredSop:
    if not isinstance(raw, dict) or SOP_KEY not in raw:
        raise SchemaError(f"top level must be an object with a {SOP_KEY!r} key")
    table = raw[SOP_KEY]
    if not isinstance(table, dict):
        raise SchemaError(f"{SOP_KEY} must map subtask ids to objects")
    source_ref = raw.get("source_ref")
    if source_ref is not None and not isinstance(source_ref, dict):
        raise SchemaError("source_ref must be an object")
    subtasks = [subtask_from_dict(sid, body) for sid, body in table.items()]
    extra = {k: v for k, v in raw.items() if k not in (SOP_KEY, "source_ref")}
    return StructuredSop.from_subtasks(subtasks, check=check, source_ref=source_ref, extra=extra)


def sop_to_dict(sop: StructuredSop) -> dict[str, Any]:
    out: dict[str, Any] = {SOP_KEY: {st.id: subtask_to_dict(st) for st in sop}}
    if sop.source_ref is not None:
        out["source_ref"] = sop.source_ref
    out.update(sop.extra)
    return out


def parse_sop(json_text: str, check: bool = True) -> StructuredSop:
    """Parse structured-SOP JSON. With ``check`` the graph invariants are enforced."""
    try:
        raw = json.loads(json_text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return sop_from_dict(raw, check=check)


def serialize_sop(sop: StructuredSop, indent: int | None = None) -> str:
    if indent is None:
        return json.dumps(sop_to_dict(sop), ensure_ascii=False, separators=(",", ":"))
    return json.dumps(sop_to_dict(sop), ensure_ascii=False, indent=indent)


# -- graph operations -----------------------------------------------------------


def find_cycle(sop: StructuredSop) -> tuple[str, ...] | None:
    """Return one dependency cycle (rotated to start at its smallest id) or None.

    In the returned witness each id is a dependency of the one after it, and the
    last is a dependency of the first.
    """
    WHITE, GREY, BLACK = 0, 1, 2
    color = {sid: WHITE for sid in sop.subtasks}
    for start in sorted(sop.subtasks):
        if color[start] != WHITE:
            continue
        # iterative DFS following dependency edges (child -> parent)
        path = [start]
        iters = [iter(sorted(d for d in sop[start].dependencies if d in color))]
        color[start] = GREY
        while path:
            nxt = next(iters[-1], None)
            if nxt is None:
                color[path.pop()] = BLACK
                iters.pop()
                continue
            if color[nxt] == GREY:
                loop = path[path.index(nxt):]
                loop.reverse()
                k = loop.index(min(loop))
                return tuple(loop[k:] + loop[:k])
            if color[nxt] == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                iters.append(iter(sorted(d for d in sop[nxt].dependencies if d in color)))
    return None


def topological_order(sop: StructuredSop) -> list[str]:
    """Dependencies first; ties among ready subtasks broken by lexicographic id."""
    for sid, missing in sop.dangling_references():
        raise GraphError(GraphErrorKind.DANGLING_REFERENCE, sid, f"unknown subtask {missing!r}")
    indegree = {st.id: len(st.dependencies) for st in sop}
    kids = sop.children()
    ready = [sid for sid, n in indegree.items() if n == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        sid = heapq.heappop(ready)
        order.append(sid)
        for kid in kids[sid]:
            indegree[kid] -= 1
            if indegree[kid] == 0:
                heapq.heappush(ready, kid)
    if len(order) != len(sop):
        witness = find_cycle(sop)
        assert witness is not None
        raise GraphError(GraphErrorKind.CYCLE, witness[0], " -> ".join(witness + witness[:1]), witness)
    return order


def initial_state(sop: StructuredSop) -> frozenset[str]:
    """Union of every subtask's direct inputs, in normal form."""
    return frozenset(normalize_name(v) for st in sop for v in st.inputs)


def consumed_outputs(sop: StructuredSop) -> frozenset[tuple[str, str]]:
    """(source subtask, normalized output) pairs that some binding consumes."""
    return frozenset(
        (b.source_subtask, normalize_name(b.source_output))
        for st in sop
        for b in st.inputs_from_dependencies
    )


def goal_state(sop: StructuredSop) -> frozenset[str]:
    """Outputs that no binding anywhere consumes from their producer."""
    consumed = consumed_outputs(sop)
    return frozenset(
        normalize_name(v)
        for st in sop
        for v in st.outputs
        if (st.id, normalize_name(v)) not in consumed
    )
