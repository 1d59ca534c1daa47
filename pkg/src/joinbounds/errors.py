"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to, so the command-line layer
never has to guess.
"""


class JoinBoundsError(Exception):
    exit_code = 3


class ParseError(JoinBoundsError, ValueError):
    """Malformed input file. ``line`` is 1-based, ``None`` if not line-specific."""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = source
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class DomainError(JoinBoundsError, ValueError):
    """An argument violates an operation's precondition."""


class CapacityError(JoinBoundsError):
    """Materialising a result would exceed the configured tuple budget."""

    def __init__(self, message: str, required: int | None = None, budget: int | None = None):
        self.required = required
        self.budget = budget
        super().__init__(message)


class CapabilityError(JoinBoundsError):
    """The input is outside the size range an exhaustive method supports."""


class InvariantError(JoinBoundsError, AssertionError):
    """An internal consistency check failed. Always a bug or a counterexample."""

    exit_code = 4
