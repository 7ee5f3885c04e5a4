"""Exception hierarchy shared across the toolkit.

Every error raised on a data or configuration problem derives from NlasError so
the CLI can map them to a stable exit code. Usage problems (bad flags, missing
arguments) stay in the CLI layer and exit differently.
"""

from __future__ import annotations


class NlasError(Exception):
    """Base class for all domain errors."""


# --- registry ---------------------------------------------------------------

class MalformedRegistry(NlasError):
    """Registry document could not be parsed or lacks required fields."""


class InvariantViolation(NlasError):
    """Registry content breaks a structural invariant; names the offender."""


class UnknownScheme(NlasError):
    pass


class UnknownTopic(NlasError):
    pass


# --- gateway ----------------------------------------------------------------

class GatewayError(NlasError):
    pass


class AuthError(GatewayError):
    """Credentials missing or rejected; never retried."""


class ExhaustedRetries(GatewayError):
    """Retry budget spent; carries the last underlying cause."""

    def __init__(self, message: str, cause: str = ""):
        super().__init__(message)
        self.cause = cause


class GatewayTimeout(ExhaustedRetries):
    """All attempts timed out."""


# --- response parsing ---------------------------------------------------------

class ParseError(NlasError):
    pass


class NotADocument(ParseError):
    """No JSON object could be extracted from the response body."""


class MissingComponent(ParseError):
    def __init__(self, role: str):
        super().__init__(f"missing component: {role}")
        self.role = role


class ExtraComponent(ParseError):
    def __init__(self, key: str):
        super().__init__(f"unexpected component key: {key}")
        self.key = key


class EmptyComponent(ParseError):
    def __init__(self, role: str):
        super().__init__(f"empty component: {role}")
        self.role = role


# --- annotation ---------------------------------------------------------------

class AnnotationError(NlasError):
    pass


class NoAnnotators(AnnotationError):
    pass


class UnknownTask(AnnotationError):
    pass


class WrongAnnotator(AnnotationError):
    pass


class AlreadyLabeled(AnnotationError):
    pass


class MissingReason(AnnotationError):
    """A non-valid verdict was submitted without a reason."""


class MismatchedRecords(AnnotationError):
    """Two label sets do not cover the same record ids."""


class EmptyOverlap(AnnotationError):
    pass


class IncompleteOverlap(AnnotationError):
    def __init__(self, missing: list[tuple[str, str]]):
        pairs = ", ".join(f"{r}:{a}" for r, a in missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        super().__init__(f"overlap records await labels: {pairs}{more}")
        self.missing = missing


# --- pipeline -----------------------------------------------------------------

class PipelineError(NlasError):
    pass


class UnknownRun(PipelineError):
    pass


class CorruptCheckpoint(PipelineError):
    pass


# --- classifier -----------------------------------------------------------------

class ClassifierError(NlasError):
    pass


class EmptyCorpus(ClassifierError):
    pass


class SingleClass(ClassifierError):
    pass


class EmptyTrain(ClassifierError):
    pass


class EmptySplit(ClassifierError):
    pass


class TooFewItemsPerClass(ClassifierError):
    pass
