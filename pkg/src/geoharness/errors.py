"""Exception hierarchy for the harness."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all harness errors."""


class RecordParseError(HarnessError):
    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class ValidationError(HarnessError):
    def __init__(self, message: str, violations: list | None = None):
        self.violations = list(violations or [])
        if self.violations:
            message += "\n" + "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(message)


class TransportError(HarnessError):
    """A remote backend could not be reached; callers may retry."""


class ProtocolError(HarnessError):
    """A remote backend answered, but not in the expected shape."""


class GenerationError(HarnessError):
    def __init__(self, role: str, message: str):
        self.role = role
        super().__init__(f"page generation failed for role {role}: {message}")


class NotFoundError(HarnessError, KeyError):
    def __str__(self) -> str:  # KeyError repr-quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class SearchEnvironmentError(HarnessError):
    """The controlled search environment could not assemble a valid round."""


class ContractViolation(HarnessError):
    """An action broke the environment contract (e.g. crawling an unobserved link)."""


class PolicyError(HarnessError):
    """The agent policy failed to produce an action."""


class ConfigError(HarnessError):
    pass
