"""Engine error taxonomy.

Every exception carries a stable wire code so the API layer can map engine
failures one-to-one onto structured error responses.
"""

from __future__ import annotations

from typing import Any


class EngineError(Exception):
    """Base class; `code` is the wire-level error code."""

    code = "VALIDATION"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


class ParseError(EngineError):
    code = "PARSE"

    def __init__(self, position: int, expected: str, found: str):
        super().__init__(
            f"at {position}: expected {expected}, found {found!r}",
            position=position,
            expected=expected,
            found=found,
        )
        self.position = position
        self.expected = expected
        self.found = found


class DepthExceeded(ParseError):
    def __init__(self, position: int, limit: int):
        super().__init__(position, f"nesting depth <= {limit}", "deeper nesting")


class UnknownConcept(EngineError):
    code = "UNKNOWN_CONCEPT"


class UnknownDomain(UnknownConcept):
    pass


class UnknownId(EngineError):
    code = "UNKNOWN_ID"


class NotAliveAtState(UnknownId):
    pass


class UnknownAttribute(EngineError):
    code = "VALIDATION"


class TypeMismatch(EngineError):
    code = "VALIDATION"


class NoneSatisfies(EngineError):
    code = "NONE_SATISFIES"


class Ambiguous(EngineError):
    code = "AMBIGUOUS"

    def __init__(self, count: int):
        super().__init__(f"{count} objects satisfy the formula", count=count)
        self.count = count


class DuplicateName(EngineError):
    code = "VALIDATION"


class InvalidAttribute(EngineError):
    code = "VALIDATION"


class StratificationError(EngineError):
    code = "STRATIFICATION"


class TowerCapExceeded(StratificationError):
    pass


class StateBeyondHead(EngineError):
    code = "STATE_BEYOND_HEAD"


class AccessDenied(EngineError):
    code = "ACCESS_DENIED"


class Validation(EngineError):
    code = "VALIDATION"

    def __init__(self, message: str, fields: list | None = None, **details: Any):
        super().__init__(message, fields=fields or [], **details)
        self.fields = fields or []


class UnknownKind(Validation):
    pass


class RuleRejection(EngineError):
    code = "RULE_REJECTION"

    def __init__(self, rule_id: int, message: str):
        super().__init__(message, rule=rule_id)
        self.rule_id = rule_id


class AuthFailed(EngineError):
    code = "AUTH_FAILED"


class SessionClosed(AuthFailed):
    pass


class NoAssignment(EngineError):
    code = "NO_ASSIGNMENT"


class MalformedPack(EngineError):
    code = "VALIDATION"


class ConflictsPresent(EngineError):
    code = "CONFLICT"


class StaleStore(EngineError):
    code = "STALE_STORE"


class NotVacant(EngineError):
    code = "VALIDATION"


class InvalidParams(EngineError):
    code = "VALIDATION"


class PacksMissing(EngineError):
    code = "VALIDATION"


class CorruptLog(EngineError):
    code = "VALIDATION"
