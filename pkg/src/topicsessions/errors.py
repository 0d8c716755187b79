"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class SessionsError(Exception):
    """Base class for all errors raised by this package."""

    kind = "Error"


# -- security configuration ---------------------------------------------------


class ConfigError(SessionsError):
    kind = "ConfigError"


class NotAPartialOrder(ConfigError):
    kind = "NotAPartialOrder"


class NotALattice(ConfigError):
    kind = "NotALattice"


class UnknownLevel(ConfigError):
    kind = "UnknownLevel"


class UnknownTopic(ConfigError):
    kind = "UnknownTopic"


# -- calculus -----------------------------------------------------------------


class EvalError(SessionsError):
    kind = "EvalError"


class MixedTopics(EvalError):
    kind = "MixedTopics"


class SortMismatch(EvalError):
    kind = "SortMismatch"


class FreeVariable(EvalError):
    kind = "FreeVariable"


class Unguarded(SessionsError):
    kind = "Unguarded"


class NotARecursion(SessionsError):
    kind = "NotARecursion"


# -- types ---------------------------------------------------------------------


class IllFormedType(SessionsError):
    kind = "IllFormedType"


class DuplicateLabel(IllFormedType):
    kind = "DuplicateLabel"


class FreeTypeVariable(IllFormedType):
    kind = "FreeTypeVariable"


class SelfCommunication(IllFormedType):
    kind = "SelfCommunication"


class NotProjectable(SessionsError):
    kind = "NotProjectable"


class ResidualUndefined(SessionsError):
    kind = "ResidualUndefined"


# -- typing ----------------------------------------------------------------------


class TypingError(SessionsError):
    """A process or session failed to type.

    ``path`` locates the failure inside the process, outermost step first.
    """

    kind = "TypingError"

    def __init__(self, message: str, path: tuple[str, ...] = ()):
        super().__init__(message)
        self.message = message
        self.path = path

    def at(self, step: str) -> "TypingError":
        err = type(self)(self.message, (step,) + self.path)
        return err

    def __str__(self) -> str:
        if self.path:
            return f"{self.message} (at {' / '.join(self.path)})"
        return self.message


class UnboundVariable(TypingError):
    kind = "UnboundVariable"


class TopicMismatch(TypingError):
    kind = "TopicMismatch"


class UnknownOperator(TypingError):
    kind = "UnknownOperator"


class MixedPeers(TypingError):
    kind = "MixedPeers"


class MissingAnnotation(TypingError):
    kind = "MissingAnnotation"


class TypeMismatch(TypingError):
    kind = "TypeMismatch"


class UnsafeType(TypingError):
    kind = "UnsafeType"


class LabelNotOffered(TypingError):
    kind = "LabelNotOffered"


class SortOrAnnotationMismatch(TypingError):
    kind = "SortOrAnnotationMismatch"


class DuplicateParticipant(TypingError):
    kind = "DuplicateParticipant"


class MissingParticipant(TypingError):
    kind = "MissingParticipant"


# -- surface syntax ----------------------------------------------------------------


class DSLSyntaxError(SessionsError):
    kind = "SyntaxError"

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnknownIdentifier(DSLSyntaxError):
    kind = "UnknownIdentifier"


class DuplicateDefinition(DSLSyntaxError):
    kind = "DuplicateDefinition"
