"""Exception types shared across the package."""


class ForceError(Exception):
    """Base class for all errors raised by this package."""


class SignatureError(ForceError):
    """A formula, structure, or document refers to symbols outside the signature."""


class PreconditionError(ForceError):
    """An input violates a documented precondition (e.g. a universe too small)."""


class GuardExceeded(ForceError):
    """A brute-force operation would exceed its configured size guard."""


class DeadlockError(ForceError):
    """A protocol simulation reached a state with no enabled action."""

    def __init__(self, step: int) -> None:
        super().__init__(f"no enabled action at step {step}")
        self.step = step


class ParseError(ForceError):
    """Malformed document; carries the offending line."""

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line
