"""The meta-planning PDDL domain, per-SOP problem generation, and a parser for
the subset of PDDL this module emits.

Every structured SOP maps onto one problem over a fixed domain: variables
become ``variable`` objects, subtasks become ``subtask`` objects, and a plan
exists exactly when every subtask can be executed with its inputs available.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .core import StructuredSop, initial_state, normalize_name
from .errors import ParseError, SymbolError, UnsupportedFeature

Fact = tuple[str, ...]
SExpr = Union[str, tuple["SExpr", ...]]

DOMAIN_NAME = "sop-meta"
VARIABLE = "variable"
SUBTASK = "subtask"

RESERVED = frozenset({
    "define", "domain", "problem", "and", "or", "not", "forall", "exists", "when",
    "imply", "either", "object", VARIABLE, SUBTASK,
})


# -- symbols --------------------------------------------------------------------


def sanitize(name: str) -> str:
    """PDDL-safe identifier: ascii lowercase letters, digits and single hyphens,
    starting with a letter. Returns "" when nothing usable is left."""
    text = unicodedata.normalize("NFKD", name).encode("ascii", "ignore").decode("ascii")
    text = re.sub(r"[^a-z0-9-]+", "-", text.lower())
    text = re.sub(r"-+", "-", text)
    return text.lstrip("0123456789-").rstrip("-")


@dataclass
class SymbolTable:
    """Bidirectional map between source names and PDDL symbols.

    Keys are ``(kind, name)`` with kind ``"variable"`` or ``"subtask"``; variable
    names are stored in normal form. Collisions get ``-2``, ``-3``, ... suffixes
    in allocation order.
    """

    to_symbol: dict[tuple[str, str], str] = field(default_factory=dict)
    to_source: dict[str, tuple[str, str]] = field(default_factory=dict)

    def add(self, kind: str, name: str) -> str:
        key = (kind, normalize_name(name) if kind == VARIABLE else name)
        if key in self.to_symbol:
            return self.to_symbol[key]
        base = sanitize(key[1])
        if not base:
            raise SymbolError(f"{kind} name {name!r} has no usable characters for a PDDL symbol")
        symbol, n = base, 1
        while symbol in self.to_source or symbol in RESERVED:
            n += 1
            symbol = f"{base}-{n}"
        self.to_symbol[key] = symbol
        self.to_source[symbol] = key
        return symbol

    def var(self, name: str) -> str:
        return self.to_symbol[(VARIABLE, normalize_name(name))]

    def subtask(self, subtask_id: str) -> str:
        return self.to_symbol[(SUBTASK, subtask_id)]

    def source(self, symbol: str) -> tuple[str, str]:
        return self.to_source[symbol]


# -- domain ---------------------------------------------------------------------


@dataclass(frozen=True)
class PddlAction:
    name: str
    parameters: tuple[tuple[str, str], ...]
    precondition: SExpr
    effect: SExpr


@dataclass(frozen=True)
class PddlDomain:
    name: str
    requirements: tuple[str, ...]
    types: tuple[str, ...]
    predicates: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    actions: tuple[PddlAction, ...]

    def arity(self) -> dict[str, int]:
        return {name: len(params) for name, params in self.predicates}


META_DOMAIN = PddlDomain(
    name=DOMAIN_NAME,
    requirements=(":typing", ":adl"),
    types=(VARIABLE, SUBTASK),
    predicates=(
        ("available", (("?v", VARIABLE),)),
        ("required-input", (("?v", VARIABLE), ("?s", SUBTASK))),
        ("subtask-output", (("?v", VARIABLE), ("?s", SUBTASK))),
        ("map", (("?v1", VARIABLE), ("?v2", VARIABLE))),
        ("executed", (("?s", SUBTASK),)),
    ),
    actions=(
        PddlAction(
            "execute-subtask",
            (("?s", SUBTASK),),
            ("forall", ("?v", "-", VARIABLE),
             ("imply", ("required-input", "?v", "?s"), ("available", "?v"))),
            ("and",
             ("forall", ("?v", "-", VARIABLE),
              ("when", ("subtask-output", "?v", "?s"), ("available", "?v"))),
             ("executed", "?s")),
        ),
        PddlAction(
            "assign",
            (("?v1", VARIABLE), ("?v2", VARIABLE)),
            ("and", ("map", "?v1", "?v2"), ("available", "?v1")),
            ("available", "?v2"),
        ),
    ),
)

_WIDTH = 72
# heads whose first list argument stays on the opening line
_BINDERS = frozenset({"define", "forall", "when", "imply"})


def _flat(x: SExpr) -> str:
    if isinstance(x, str):
        return x
    return "(" + " ".join(_flat(y) for y in x) + ")"


def _typed(params: Iterable[tuple[str, str]]) -> tuple[str, ...]:
    out: list[str] = []
    for var, typ in params:
        out += [var, "-", typ]
    return tuple(out)


def _pretty(x: SExpr, indent: int, force: frozenset[str] = frozenset()) -> str:
    if isinstance(x, str):
        return x
    flat = _flat(x)
    head = x[0] if x and isinstance(x[0], str) else None
    if indent + len(flat) <= _WIDTH and head not in force:
        return flat
    items = list(x)
    first = [items.pop(0)] if items and isinstance(items[0], str) else []
    while first and items and isinstance(items[0], str) and not items[0].startswith(":"):
        first.append(items.pop(0))
    if head in _BINDERS and len(items) > 1 and not isinstance(items[0], str):
        lead = _flat(items[0])
        if indent + len(" ".join(first)) + len(lead) + 2 <= _WIDTH:
            first.append(lead)
            items.pop(0)
    pad = " " * (indent + 2)
    lines = ["(" + " ".join(first)]
    while items:
        item = items.pop(0)
        if isinstance(item, str) and item.startswith(":") and items:
            value = items.pop(0)
            lines.append(pad + item + " " + _pretty(value, indent + 3 + len(item), force))
        else:
            lines.append(pad + _pretty(item, indent + 2, force))
    return "\n".join(lines) + ")"


def domain_sexpr(domain: PddlDomain) -> SExpr:
    sections: list[SExpr] = [
        "define",
        ("domain", domain.name),
        (":requirements", *domain.requirements),
        (":types", *domain.types),
        (":predicates", *((name, *_typed(params)) for name, params in domain.predicates)),
    ]
    for act in domain.actions:
        sections.append((
            ":action", act.name,
            ":parameters", _typed(act.parameters),
            ":precondition", act.precondition,
            ":effect", act.effect,
        ))
    return tuple(sections)


def emit_domain(domain: PddlDomain = META_DOMAIN) -> str:
    """Canonical domain text; byte-identical across calls."""
    return _pretty(domain_sexpr(domain), 0, frozenset({"define", ":predicates", ":action"})) + "\n"


# -- problem ----------------------------------------------------------------------


@dataclass(frozen=True)
class MetaProblem:
    name: str
    variables: frozenset[str]
    subtasks: frozenset[str]
    init: frozenset[Fact]
    goal: frozenset[Fact]
    domain: str = DOMAIN_NAME

    def __post_init__(self) -> None:
        objects = self.variables | self.subtasks
        for fact in self.init | self.goal:
            for arg in fact[1:]:
                if arg not in objects:
                    raise SymbolError(f"fact {_flat(fact)} mentions undeclared object {arg!r}")


def generate_problem(sop: StructuredSop, name: str = "sop-problem") -> tuple[MetaProblem, SymbolTable]:
    table = SymbolTable()
    for st in sop:
        table.add(SUBTASK, st.id)
    for st in sop:
        for v in st.inputs:
            table.add(VARIABLE, v)
        for b in st.inputs_from_dependencies:
            table.add(VARIABLE, b.source_output)
            table.add(VARIABLE, b.bound_as)
        for v in st.outputs:
            table.add(VARIABLE, v)

    init: set[Fact] = {("available", table.var(v)) for v in initial_state(sop)}
    goal: set[Fact] = set()
    for st in sop:
        s = table.subtask(st.id)
        for v in (*st.inputs, *st.bound_names):
            init.add(("required-input", table.var(v), s))
        for v in st.outputs:
            init.add(("subtask-output", table.var(v), s))
            goal.add(("available", table.var(v)))
        for b in st.inputs_from_dependencies:
            src, dst = table.var(b.source_output), table.var(b.bound_as)
            if src != dst:
                init.add(("map", src, dst))
        goal.add(("executed", s))

    variables = frozenset(sym for sym, (kind, _) in table.to_source.items() if kind == VARIABLE)
    subtasks = frozenset(sym for sym, (kind, _) in table.to_source.items() if kind == SUBTASK)
    return MetaProblem(sanitize(name) or "sop-problem", variables, subtasks, frozenset(init), frozenset(goal)), table


def emit_problem(p: MetaProblem) -> str:
    lines = [f"(define (problem {p.name})", f"  (:domain {p.domain})"]
    objects = [f"    {v} - {VARIABLE}" for v in sorted(p.variables)]
    objects += [f"    {s} - {SUBTASK}" for s in sorted(p.subtasks)]
    lines += _section("  (:objects", objects)
    lines += _section("  (:init", [f"    {_flat(f)}" for f in sorted(p.init)])
    goal = [f"    {_flat(f)}" for f in sorted(p.goal)]
    if goal:
        lines.append("  (:goal (and")
        lines += goal
        lines[-1] += "))"
    else:
        lines.append("  (:goal (and))")
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def _section(opening: str, body: list[str]) -> list[str]:
    if not body:
        return [opening + ")"]
    out = [opening, *body]
    out[-1] += ")"
    return out


# -- parsing --------------------------------------------------------------------


@dataclass(frozen=True)
class _Node:
    value: SExpr
    line: int
    col: int
    children: tuple["_Node", ...] = ()

    @property
    def is_list(self) -> bool:
        return not isinstance(self.value, str)


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def read_sexpr(text: str) -> _Node:
    """Read exactly one s-expression (lowercased atoms) with source positions."""
    stack: list[tuple[int, int, list[_Node]]] = []
    result: _Node | None = None
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rindex("\n") + 1
            continue
        if result is not None:
            raise ParseError("unexpected text after the closing parenthesis", line, col)
        if tok == "(":
            stack.append((line, col, []))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            l0, c0, kids = stack.pop()
            node = _Node(tuple(k.value for k in kids), l0, c0, tuple(kids))
            if stack:
                stack[-1][2].append(node)
            else:
                result = node
        else:
            atom = _Node(tok.lower(), line, col)
            if not stack:
                raise ParseError("expected '('", line, col)
            stack[-1][2].append(atom)
    if stack:
        l0, c0, _ = stack[-1]
        raise ParseError("unbalanced '(' never closed", l0, c0)
    if result is None:
        raise ParseError("empty input", line, 1)
    return result


def _expect_list(node: _Node, what: str) -> tuple[_Node, ...]:
    if not node.is_list:
        raise ParseError(f"expected {what}", node.line, node.col)
    return node.children


def _atom(node: _Node, what: str) -> str:
    if node.is_list:
        raise ParseError(f"expected {what}", node.line, node.col)
    return node.value  # type: ignore[return-value]


def _typed_list(nodes: Sequence[_Node], allowed_types: Iterable[str] | None = None) -> list[tuple[str, str, _Node]]:
    out: list[tuple[str, str, _Node]] = []
    pending: list[_Node] = []
    i = 0
    while i < len(nodes):
        tok = _atom(nodes[i], "a name")
        if tok == "-":
            if i + 1 >= len(nodes):
                raise ParseError("type expected after '-'", nodes[i].line, nodes[i].col)
            typ_node = nodes[i + 1]
            if typ_node.is_list:
                raise UnsupportedFeature("(either ...) types are not supported", typ_node.line, typ_node.col)
            typ = typ_node.value
            if allowed_types is not None and typ not in allowed_types:
                raise UnsupportedFeature(f"unknown type {typ!r}", typ_node.line, typ_node.col)
            out += [(n.value, typ, n) for n in pending]  # type: ignore[misc]
            pending = []
            i += 2
            continue
        pending.append(nodes[i])
        i += 1
    if pending:
        if allowed_types is not None and "object" not in allowed_types:
            raise ParseError("untyped name", pending[0].line, pending[0].col)
        out += [(n.value, "object", n) for n in pending]  # type: ignore[misc]
    return out


_SUPPORTED_REQUIREMENTS = {
    ":strips", ":typing", ":adl", ":conditional-effects", ":universal-preconditions",
    ":quantified-preconditions",
}


def _check_formula(node: _Node, arity: dict[str, int], effect: bool) -> None:
    kids = _expect_list(node, "a formula")
    if not kids:
        raise ParseError("empty formula", node.line, node.col)
    head = _atom(kids[0], "a connective or predicate")
    if head == "and":
        for k in kids[1:]:
            _check_formula(k, arity, effect)
    elif head == "forall":
        if len(kids) != 3:
            raise ParseError("forall takes a parameter list and one body", node.line, node.col)
        _typed_list(_expect_list(kids[1], "a parameter list"))
        _check_formula(kids[2], arity, effect)
    elif head == "imply" and not effect:
        if len(kids) != 3:
            raise ParseError("imply takes two formulas", node.line, node.col)
        _check_formula(kids[1], arity, False)
        _check_formula(kids[2], arity, False)
    elif head == "when" and effect:
        if len(kids) != 3:
            raise ParseError("when takes a condition and an effect", node.line, node.col)
        _check_formula(kids[1], arity, False)
        _check_formula(kids[2], arity, True)
    elif head in arity:
        if len(kids) - 1 != arity[head]:
            raise ParseError(f"{head} takes {arity[head]} arguments", node.line, node.col)
        for k in kids[1:]:
            _atom(k, "a term")
    elif head in {"not", "or", "exists", "increase", "decrease", "=", "at", "over"}:
        raise UnsupportedFeature(f"{head!r} is outside the supported subset", node.line, node.col)
    else:
        raise ParseError(f"unknown predicate or connective {head!r}", node.line, node.col)


def parse_domain(text: str) -> PddlDomain:
    root = read_sexpr(text)
    kids = _expect_list(root, "(define ...)")
    if not kids or kids[0].value != "define":
        raise ParseError("expected (define ...)", root.line, root.col)
    if len(kids) < 2:
        raise ParseError("missing (domain NAME)", root.line, root.col)
    header = _expect_list(kids[1], "(domain NAME)")
    if len(header) != 2 or header[0].value != "domain":
        raise ParseError("expected (domain NAME)", kids[1].line, kids[1].col)
    name = _atom(header[1], "a domain name")
    requirements: tuple[str, ...] = ()
    types: tuple[str, ...] = ()
    predicates: list[tuple[str, tuple[tuple[str, str], ...]]] = []
    actions: list[PddlAction] = []
    for sec in kids[2:]:
        parts = _expect_list(sec, "a domain section")
        if not parts:
            raise ParseError("empty section", sec.line, sec.col)
        key = _atom(parts[0], "a section keyword")
        if key == ":requirements":
            requirements = tuple(_atom(p, "a requirement flag") for p in parts[1:])
            for p, flag in zip(parts[1:], requirements):
                if flag not in _SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeature(f"requirement {flag}", p.line, p.col)
        elif key == ":types":
            typed = _typed_list(parts[1:])
            for tname, parent, node in typed:
                if parent != "object":
                    raise UnsupportedFeature("type hierarchies are not supported", node.line, node.col)
            types = tuple(t for t, _, _ in typed)
        elif key == ":predicates":
            for p in parts[1:]:
                body = _expect_list(p, "a predicate declaration")
                if not body:
                    raise ParseError("empty predicate declaration", p.line, p.col)
                pname = _atom(body[0], "a predicate name")
                params = tuple((v, t) for v, t, _ in _typed_list(body[1:], set(types) | {"object"}))
                predicates.append((pname, params))
        elif key == ":action":
            actions.append(_parse_action(sec, parts, predicates, types))
        elif key in {":constants", ":functions", ":derived", ":durative-action", ":constraints"}:
            raise UnsupportedFeature(f"{key} section", sec.line, sec.col)
        else:
            raise ParseError(f"unknown domain section {key}", sec.line, sec.col)
    return PddlDomain(name, requirements, types, tuple(predicates), tuple(actions))


def _parse_action(sec: _Node, parts: tuple[_Node, ...], predicates, types) -> PddlAction:
    if len(parts) < 2:
        raise ParseError("action needs a name", sec.line, sec.col)
    name = _atom(parts[1], "an action name")
    fields: dict[str, _Node] = {}
    rest = parts[2:]
    if len(rest) % 2:
        raise ParseError("action keywords must come in key/value pairs", sec.line, sec.col)
    for k, v in zip(rest[::2], rest[1::2]):
        fields[_atom(k, "an action keyword")] = v
    for key in fields:
        if key not in {":parameters", ":precondition", ":effect"}:
            raise UnsupportedFeature(f"action keyword {key}", sec.line, sec.col)
    for key in (":parameters", ":precondition", ":effect"):
        if key not in fields:
            raise ParseError(f"action {name} lacks {key}", sec.line, sec.col)
    params = tuple((v, t) for v, t, _ in _typed_list(_expect_list(fields[":parameters"], "a parameter list"),
                                                     set(types) | {"object"}))
    arity = {n: len(p) for n, p in predicates}
    _check_formula(fields[":precondition"], arity, effect=False)
    _check_formula(fields[":effect"], arity, effect=True)
    return PddlAction(name, params, fields[":precondition"].value, fields[":effect"].value)


def parse_problem(text: str, domain: PddlDomain = META_DOMAIN) -> MetaProblem:
    root = read_sexpr(text)
    kids = _expect_list(root, "(define ...)")
    if not kids or kids[0].value != "define":
        raise ParseError("expected (define ...)", root.line, root.col)
    if len(kids) < 2:
        raise ParseError("missing (problem NAME)", root.line, root.col)
    header = _expect_list(kids[1], "(problem NAME)")
    if len(header) != 2 or header[0].value != "problem":
        raise ParseError("expected (problem NAME)", kids[1].line, kids[1].col)
    name = _atom(header[1], "a problem name")
    arity = domain.arity()
    domain_name = domain.name
    variables: set[str] = set()
    subtasks: set[str] = set()
    init: set[Fact] = set()
    goal: set[Fact] = set()
    seen_goal = False

    def fact(node: _Node) -> Fact:
        parts = _expect_list(node, "a ground atom")
        if not parts:
            raise ParseError("empty atom", node.line, node.col)
        pred = _atom(parts[0], "a predicate name")
        if pred in {"not", "or", "exists", "forall", "=", "imply"}:
            raise UnsupportedFeature(f"{pred!r} is outside the supported subset", node.line, node.col)
        if pred not in arity:
            raise ParseError(f"unknown predicate {pred!r}", node.line, node.col)
        if len(parts) - 1 != arity[pred]:
            raise ParseError(f"{pred} takes {arity[pred]} arguments", node.line, node.col)
        args = tuple(_atom(p, "an object name") for p in parts[1:])
        for p, a in zip(parts[1:], args):
            if a not in variables and a not in subtasks:
                raise ParseError(f"undeclared object {a!r}", p.line, p.col)
        return (pred, *args)

    for sec in kids[2:]:
        parts = _expect_list(sec, "a problem section")
        if not parts:
            raise ParseError("empty section", sec.line, sec.col)
        key = _atom(parts[0], "a section keyword")
        if key == ":domain":
            if len(parts) != 2:
                raise ParseError("expected (:domain NAME)", sec.line, sec.col)
            domain_name = _atom(parts[1], "a domain name")
        elif key == ":objects":
            for obj, typ, node in _typed_list(parts[1:], {VARIABLE, SUBTASK}):
                (variables if typ == VARIABLE else subtasks).add(obj)
        elif key == ":init":
            for p in parts[1:]:
                init.add(fact(p))
        elif key == ":goal":
            if len(parts) != 2:
                raise ParseError("expected one goal formula", sec.line, sec.col)
            g = parts[1]
            body = _expect_list(g, "a goal formula")
            if body and body[0].value == "and":
                for p in body[1:]:
                    goal.add(fact(p))
            else:
                goal.add(fact(g))
            seen_goal = True
        elif key in {":metric", ":constraints", ":length"}:
            raise UnsupportedFeature(f"{key} section", sec.line, sec.col)
        else:
            raise ParseError(f"unknown problem section {key}", sec.line, sec.col)
    if not seen_goal:
        raise ParseError("problem has no :goal", root.line, root.col)
    return MetaProblem(name, frozenset(variables), frozenset(subtasks), frozenset(init), frozenset(goal), domain_name)


def parse_pddl(domain_text: str, problem_text: str) -> tuple[PddlDomain, MetaProblem]:
    domain = parse_domain(domain_text)
    return domain, parse_problem(problem_text, domain)


# -- grounding ------------------------------------------------------------------


@dataclass(frozen=True)
class GroundAction:
    name: str
    preconditions: tuple[int, ...]
    effects: tuple[int, ...]


@dataclass(frozen=True)
class GroundedTask:
    """Propositional delete-free task: actions only ever add propositions."""

    props: tuple[str, ...]
    actions: tuple[GroundAction, ...]
    init: frozenset[int]
    goal: frozenset[int]

    def __post_init__(self) -> None:
        n = len(self.props)
        for a in self.actions:
            if any(not 0 <= i < n for i in (*a.preconditions, *a.effects)):
                raise ValueError(f"action {a.name} refers to an unknown proposition")

    def prop_index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.props)}


def execute_name(subtask_symbol: str) -> str:
    return f"(execute-subtask {subtask_symbol})"


def assign_name(src: str, dst: str) -> str:
    return f"(assign {src} {dst})"


def ground(p: MetaProblem, subtask_order: Sequence[str] | None = None) -> GroundedTask:
    """Instantiate the two action schemata over the problem's objects.

    Assign actions come first, then one execute action per subtask, in
    ``subtask_order`` if given and lexicographic order otherwise. The planner
    breaks ties by action index, so the order is the firing preference.
    """
    props: list[str] = [_flat(("available", v)) for v in sorted(p.variables)]
    props += [_flat(("executed", s)) for s in sorted(p.subtasks)]
    dynamic = {"available", "executed"}
    # static facts that appear in the goal become propositions nothing can add
    for fact in sorted(p.goal):
        if fact[0] not in dynamic:
            props.append(_flat(fact))
    index = {name: i for i, name in enumerate(props)}

    requires: dict[str, list[int]] = {s: [] for s in p.subtasks}
    produces: dict[str, list[int]] = {s: [] for s in p.subtasks}
    maps: list[tuple[str, str]] = []
    for fact in sorted(p.init):
        if fact[0] == "required-input":
            requires[fact[2]].append(index[_flat(("available", fact[1]))])
        elif fact[0] == "subtask-output":
            produces[fact[2]].append(index[_flat(("available", fact[1]))])
        elif fact[0] == "map":
            maps.append((fact[1], fact[2]))

    actions = [
        GroundAction(assign_name(a, b), (index[_flat(("available", a))],), (index[_flat(("available", b))],))
        for a, b in maps
    ]
    order = list(subtask_order) if subtask_order is not None else sorted(p.subtasks)
    if sorted(order) != sorted(p.subtasks):
        raise ValueError("subtask_order must list every subtask exactly once")
    for s in order:
        effects = tuple(sorted(set(produces[s]))) + (index[_flat(("executed", s))],)
        actions.append(GroundAction(execute_name(s), tuple(sorted(set(requires[s]))), effects))

    init = frozenset(index[_flat(f)] for f in p.init if _flat(f) in index)
    goal = frozenset(index[_flat(f)] for f in p.goal)
    return GroundedTask(tuple(props), tuple(actions), init, goal)
