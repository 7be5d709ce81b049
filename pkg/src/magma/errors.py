"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class MagmaError(Exception):
    """Base class for all pipeline errors."""


class ContractViolation(MagmaError):
    """A documented precondition or invariant was violated by the caller."""


class SchemaError(MagmaError):
    """A structured object is malformed (missing or mistyped fields)."""


class ParseError(MagmaError):
    """Agent output could not be converted into the expected structure."""

    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = missing or []


class TemplateError(MagmaError):
    """A prompt template could not be rendered (unbound placeholder)."""

    def __init__(self, placeholder: str):
        super().__init__(f"unbound placeholder: {{{placeholder}}}")
        self.placeholder = placeholder


class AgentUnavailable(MagmaError):
    """The model backend failed after all transport retries."""


class CassetteMismatch(MagmaError):
    """A replayed request did not match any recorded exchange."""

    def __init__(self, expected: str | None, actual: str):
        super().__init__(
            f"replay miss: expected fingerprint {expected or '<exhausted>'}, got {actual}"
        )
        self.expected = expected
        self.actual = actual


class SandboxUnavailable(MagmaError):
    """The execution harness itself failed (distinct from failing user code)."""


class ConfigError(MagmaError):
    """A configuration value is malformed or out of range."""


class IngestError(MagmaError):
    """A dataset file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
