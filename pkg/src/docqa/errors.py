"""Exception hierarchy shared across the package."""


class DocQAError(Exception):
    """Base class for all package errors."""


# document model
class UnreadableFile(DocQAError):
    pass


class MalformedLayout(DocQAError):
    pass


class UnknownFormat(DocQAError):
    pass


# toolkit
class EmptyKeywords(DocQAError, ValueError):
    pass


# model clients
class ModelUnavailable(DocQAError):
    """An endpoint could not produce a response (after retries)."""


class AuthFailure(DocQAError):
    pass


class ContextOverflow(DocQAError):
    pass


class ScenarioExhausted(DocQAError):
    pass


class KeyMiss(DocQAError):
    def __init__(self, message: str, nearest: str | None = None):
        super().__init__(message)
        self.nearest = nearest


# role-specific unavailability, raised by callers that know which role failed
class PolicyUnavailable(ModelUnavailable):
    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class SummarizerUnavailable(ModelUnavailable):
    pass


class CaptionerUnavailable(ModelUnavailable):
    pass


class ExplorerUnavailable(ModelUnavailable):
    pass


class SynthesizerUnavailable(ModelUnavailable):
    pass


class TeacherUnavailable(ModelUnavailable):
    pass


class JudgeUnavailable(ModelUnavailable):
    pass


class ExtractorUnavailable(ModelUnavailable):
    pass


# agent loop / synthesis
class ParseFailure(DocQAError):
    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class UnparseableOutput(DocQAError):
    pass


# sft export
class EmptyKeptSet(DocQAError, ValueError):
    pass


class SchemaMismatch(DocQAError):
    """A JSON/JSONL input does not match its documented schema."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(DocQAError):
    pass
