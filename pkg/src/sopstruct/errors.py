"""Exception hierarchy shared by all sopstruct modules."""

from __future__ import annotations

import enum


class SopError(Exception):
    """Base class for every error raised by sopstruct."""


class SchemaError(SopError):
    def __init__(self, message: str, subtask_id: str | None = None):
        self.subtask_id = subtask_id
        prefix = f"{subtask_id}: " if subtask_id else ""
        super().__init__(prefix + message)


class GraphErrorKind(str, enum.Enum):
    DANGLING_REFERENCE = "DanglingReference"
    CYCLE = "Cycle"
    SELF_LOOP = "SelfLoop"


class GraphError(SopError):
    def __init__(
        self,
        kind: GraphErrorKind,
        subtask_id: str,
        detail: str = "",
        witness: tuple[str, ...] = (),
    ):
        self.kind = kind
        self.subtask_id = subtask_id
        self.witness = tuple(witness)
        msg = f"{kind.value} at {subtask_id}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class SymbolError(SopError):
    """A name could not be turned into a PDDL identifier."""


class ParseError(SopError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UnsupportedFeature(ParseError):
    """Well-formed PDDL that uses constructs outside the supported subset."""


class LlmError(SopError):
    def __init__(self, message: str, cause: BaseException | None = None):
        self.cause = cause
        super().__init__(message)


class AnchorNotFound(SopError):
    def __init__(self, anchor: str):
        self.anchor = anchor
        super().__init__(f"segment anchor not found in document: {anchor!r}")


class CoverageGap(SopError):
    def __init__(self, offset: int, detail: str = ""):
        self.offset = offset
        super().__init__(f"segments leave uncovered text at offset {offset}" + (f": {detail}" if detail else ""))


class IdCollision(SopError):
    def __init__(self, subtask_id: str):
        self.subtask_id = subtask_id
        super().__init__(f"subtask id declared by more than one segment: {subtask_id}")


class JudgeParseError(SopError):
    """The judge model's answer could not be read as a verdict."""


class IngestError(SopError):
    """A dataset root or file could not be read."""


class FormatError(IngestError):
    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")
